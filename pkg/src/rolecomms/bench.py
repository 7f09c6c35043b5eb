"""Monte-Carlo benchmark harness for the table-carrying game.

Runs a grid of (strategy, period, obstacle count, geometry, noise) conditions
over a shared, seed-indexed environment sequence so that conditions can be
compared pairwise game by game. Aggregation is keyed by seed and sorted, so
the report is bit-identical for any worker count or completion order.
Reports carry the full config echo plus a fingerprint, and deliberately no
timestamps: rerunning an identical config must reproduce the report byte for
byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import ComparisonError, ConfigError, GenerationError
from .linear_roles import SpeakerListener, SpeakerSpeaker
from .potential_field import FieldParams
from .table_sim import (
    CommStrategy,
    DynamicRoles,
    Environment,
    Explicit,
    GeometryMode,
    KnownRadius,
    Limits,
    StaticRoles,
    UnknownRadius,
    Workspace,
    environment_to_dict,
    generate_environment,
    run_game,
)

FORMAT_VERSION = 1

STRATEGY_NAMES = ("explicit", "dynamic", "speaker_listener", "speaker_speaker")
GEOMETRY_NAMES = ("known", "unknown")

REPORT_CSV_HEADER = "strategy,T,n,cv,lambda,failure_mean_steps,games"


@dataclass(frozen=True)
class Condition:
    """One benchmark cell. T is meaningful for explicit (0 = realtime) and
    dynamic strategies and fixed to 0 for the static ones."""

    strategy: str
    T: int
    n: int
    geometry: str
    cv: float

    def __post_init__(self):
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.geometry not in GEOMETRY_NAMES:
            raise ConfigError(f"unknown geometry {self.geometry!r}")
        if self.strategy == "dynamic" and self.T < 1:
            raise ConfigError("dynamic roles require T >= 1")
        if self.strategy == "explicit" and self.T < 0:
            raise ConfigError("explicit requires T >= 0")
        if self.strategy in ("speaker_listener", "speaker_speaker") and self.T != 0:
            raise ConfigError("static strategies take no period; set T to 0")
        if self.n < 0:
            raise ConfigError("obstacle count must be >= 0")
        if self.cv < 0:
            raise ConfigError("cv must be >= 0")

    def comm_strategy(self) -> CommStrategy:
        if self.strategy == "explicit":
            return Explicit(period=self.T, noise_cv=self.cv)
        if self.strategy == "dynamic":
            return DynamicRoles(period=self.T, noise_cv=self.cv)
        if self.strategy == "speaker_listener":
            return StaticRoles(allocation=SpeakerListener(1), noise_cv=self.cv)
        return StaticRoles(allocation=SpeakerSpeaker(), noise_cv=self.cv)

    def geometry_mode(self, workspace_radii: "RadiusSpec") -> GeometryMode:
        if self.geometry == "known":
            return KnownRadius(r_fixed=workspace_radii.r_fixed)
        return UnknownRadius(r_min=workspace_radii.r_min, r_max=workspace_radii.r_max)

    def key(self) -> tuple:
        return (self.strategy, self.T, self.n, self.geometry, self.cv)


@dataclass(frozen=True)
class RadiusSpec:
    r_fixed: float = 0.5
    r_min: float = 0.3
    r_max: float = 0.7


@dataclass(frozen=True)
class TrendAssert:
    """A trend check evaluated by `rolecomms bench` after the run.

    kind "greater": condition a beats condition b (paired sign test when
    significant=True). kind "at_least": condition a's success rate is at
    least `value`.
    """

    kind: str
    a: Condition
    b: Condition | None = None
    value: float | None = None
    significant: bool = False
    alpha: float = 0.05

    def __post_init__(self):
        if self.kind not in ("greater", "at_least"):
            raise ConfigError(f"unknown assert kind {self.kind!r}")
        if self.kind == "greater" and self.b is None:
            raise ConfigError("'greater' asserts need a second condition")
        if self.kind == "at_least" and self.value is None:
            raise ConfigError("'at_least' asserts need a value")


@dataclass(frozen=True)
class BenchmarkConfig:
    conditions: tuple[Condition, ...]
    games_per_condition: int = 1000
    base_seed: int = 20260809
    field_params: FieldParams = FieldParams(w_att=1.0, w_rep=1.0, w_v=0.1, rho0=1.0)
    limits: Limits = Limits()
    workspace: Workspace = Workspace()
    radii: RadiusSpec = RadiusSpec()
    asserts: tuple[TrendAssert, ...] = ()

    def __post_init__(self):
        if not self.conditions:
            raise ConfigError("at least one condition is required")
        if self.games_per_condition < 1:
            raise ConfigError("games_per_condition must be >= 1")


@dataclass(frozen=True)
class ConditionResult:
    condition: Condition
    seeds: tuple[int, ...]
    success: tuple[bool, ...]
    steps: tuple[int, ...]
    failure_kinds: tuple[str, ...]
    skipped_seeds: tuple[int, ...]
    env_hash: str

    @property
    def games(self) -> int:
        return len(self.seeds)

    @property
    def successes(self) -> int:
        return sum(self.success)

    @property
    def lambda_(self) -> float:
        return self.successes / self.games

    @property
    def failure_mean_steps(self) -> float | None:
        fail_steps = [s for s, ok in zip(self.steps, self.success) if not ok]
        if not fail_steps:
            return None
        return sum(fail_steps) / len(fail_steps)


@dataclass(frozen=True)
class BenchmarkReport:
    config: dict
    fingerprint: str
    results: tuple[ConditionResult, ...]

    def result_for(self, condition: Condition) -> ConditionResult:
        for r in self.results:
            if r.condition.key() == condition.key():
                return r
        raise KeyError(f"condition {condition} not in report")


# ---------------------------------------------------------------------------
# execution


def _environment_for(seed: int, condition: Condition, config: BenchmarkConfig) -> Environment:
    return generate_environment(
        seed,
        condition.n,
        condition.geometry_mode(config.radii),
        config.workspace,
    )


def _run_chunk(args) -> list[tuple[int, int, bool, int, str]]:
    """Worker task: play a block of (condition, seed) games.

    Returns (condition_index, seed, success, steps, failure_kind) rows;
    generation failures are marked with failure_kind 'generation_skip'.
    """
    config, cond_idx, seeds = args
    condition = config.conditions[cond_idx]
    strategy = condition.comm_strategy()
    rows = []
    for seed in seeds:
        try:
            env = _environment_for(seed, condition, config)
        except GenerationError:
            rows.append((cond_idx, seed, False, 0, "generation_skip"))
            continue
        outcome = run_game(env, strategy, config.field_params, config.limits, seed)
        rows.append((cond_idx, seed, outcome.success, outcome.steps, outcome.failure_kind))
    return rows


def _env_sequence_hash(condition: Condition, config: BenchmarkConfig, seeds) -> str:
    digest = hashlib.sha256()
    for seed in seeds:
        try:
            env = _environment_for(seed, condition, config)
        except GenerationError:
            digest.update(f"skip:{seed}".encode())
            continue
        digest.update(
            json.dumps(environment_to_dict(env), sort_keys=True, separators=(",", ":")).encode()
        )
    return digest.hexdigest()


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("rolecomms")
    except Exception:
        return "unknown"


def config_fingerprint(config_echo: dict) -> str:
    """Digest binding a report to the exact config AND code version."""
    canonical = json.dumps(config_echo, sort_keys=True, separators=(",", ":"))
    payload = f"rolecomms {_package_version()}\x00{canonical}"
    return "sha256:" + hashlib.sha256(payload.encode()).hexdigest()


def run_benchmark(config: BenchmarkConfig, workers: int = 1, chunk_size: int = 50) -> BenchmarkReport:
    """Run every condition over the shared seed sequence and aggregate.

    Environments for game i come from seed base_seed + i, identically for
    every condition with the same (n, geometry), which makes cross-strategy
    comparisons paired. Games whose environment generation fails are skipped
    and recorded; the skip set is seed-determined, hence identical across
    conditions sharing (n, geometry). The result is independent of `workers`.
    """
    seeds = [config.base_seed + i for i in range(config.games_per_condition)]
    tasks = []
    for cond_idx in range(len(config.conditions)):
        for lo in range(0, len(seeds), chunk_size):
            tasks.append((config, cond_idx, seeds[lo : lo + chunk_size]))

    rows: list[tuple[int, int, bool, int, str]] = []
    if workers <= 1:
        for task in tasks:
            rows.extend(_run_chunk(task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_chunk, tasks):
                rows.extend(chunk)

    by_condition: dict[int, dict[int, tuple[bool, int, str]]] = {
        i: {} for i in range(len(config.conditions))
    }
    for cond_idx, seed, success, steps, kind in rows:
        by_condition[cond_idx][seed] = (success, steps, kind)

    env_hashes: dict[tuple, str] = {}
    results = []
    for cond_idx, condition in enumerate(config.conditions):
        outcomes = by_condition[cond_idx]
        kept = [s for s in seeds if outcomes[s][2] != "generation_skip"]
        skipped = tuple(s for s in seeds if outcomes[s][2] == "generation_skip")
        geo_key = (condition.n, condition.geometry)
        if geo_key not in env_hashes:
            env_hashes[geo_key] = _env_sequence_hash(condition, config, seeds)
        results.append(
            ConditionResult(
                condition=condition,
                seeds=tuple(kept),
                success=tuple(outcomes[s][0] for s in kept),
                steps=tuple(outcomes[s][1] for s in kept),
                failure_kinds=tuple(outcomes[s][2] for s in kept),
                skipped_seeds=skipped,
                env_hash=env_hashes[geo_key],
            )
        )

    echo = config_to_dict(config)
    return BenchmarkReport(
        config=echo,
        fingerprint=config_fingerprint(echo),
        results=tuple(results),
    )


# ---------------------------------------------------------------------------
# paired comparison


def sign_test_p(n_pos: int, n_neg: int) -> float:
    """Two-sided exact sign test p-value for discordant-pair counts.

    Zero discordant pairs gives p = 1 by convention. Computed with exact
    integer binomial tail sums, so extreme splits underflow gracefully.
    """
    n = n_pos + n_neg
    if n == 0:
        return 1.0
    k = min(n_pos, n_neg)
    tail = sum(math.comb(n, i) for i in range(k + 1))
    p = 2 * tail / (1 << n)
    return min(1.0, p)


@dataclass(frozen=True)
class Comparison:
    delta_lambda: float
    n_pos: int  # a succeeded where b failed
    n_neg: int  # b succeeded where a failed
    p_value: float


def compare_conditions(
    report: BenchmarkReport, cond_a: Condition, cond_b: Condition
) -> Comparison:
    """Paired difference in success between two conditions of one report.

    Requires both conditions to have been run on the same seed sequence;
    raises ComparisonError otherwise.
    """
    ra = report.result_for(cond_a)
    rb = report.result_for(cond_b)
    if ra.seeds != rb.seeds:
        raise ComparisonError("conditions were not run on the same seed sequence")
    n_pos = sum(1 for sa, sb in zip(ra.success, rb.success) if sa and not sb)
    n_neg = sum(1 for sa, sb in zip(ra.success, rb.success) if sb and not sa)
    return Comparison(
        delta_lambda=ra.lambda_ - rb.lambda_,
        n_pos=n_pos,
        n_neg=n_neg,
        p_value=sign_test_p(n_pos, n_neg),
    )


def evaluate_asserts(report: BenchmarkReport, asserts) -> list[str]:
    """Check each trend assert; returns a list of human-readable failures."""
    failures = []
    for ta in asserts:
        if ta.kind == "at_least":
            lam = report.result_for(ta.a).lambda_
            if lam < ta.value:
                failures.append(
                    f"lambda{ta.a.key()} = {lam:.4f} below required {ta.value}"
                )
        else:
            cmp = compare_conditions(report, ta.a, ta.b)
            if cmp.delta_lambda <= 0:
                failures.append(
                    f"lambda{ta.a.key()} - lambda{ta.b.key()} = {cmp.delta_lambda:.4f}, expected > 0"
                )
            elif ta.significant and cmp.p_value >= ta.alpha:
                failures.append(
                    f"gap {ta.a.key()} > {ta.b.key()} not significant "
                    f"(p = {cmp.p_value:.4g} >= {ta.alpha})"
                )
    return failures


# ---------------------------------------------------------------------------
# config and report serialization


def config_to_dict(config: BenchmarkConfig) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "base_seed": config.base_seed,
        "games_per_condition": config.games_per_condition,
        "conditions": [
            {
                "strategy": c.strategy,
                "T": c.T,
                "n": c.n,
                "geometry": c.geometry,
                "cv": c.cv,
            }
            for c in config.conditions
        ],
        "field": {
            "w_att": config.field_params.w_att,
            "w_rep": config.field_params.w_rep,
            "w_v": config.field_params.w_v,
            "rho0": config.field_params.rho0,
        },
        "limits": {
            "max_steps": config.limits.max_steps,
            "goal_eps": config.limits.goal_eps,
            "dt": config.limits.dt,
            "v_max": config.limits.v_max,
        },
        "workspace": {
            "start": list(config.workspace.start),
            "goal": list(config.workspace.goal),
            "x_range": list(config.workspace.x_range),
            "y_range": list(config.workspace.y_range),
            "clearance": config.workspace.clearance,
            "table_half_length": config.workspace.table_half_length,
            "retry_cap": config.workspace.retry_cap,
        },
        "radii": {
            "r_fixed": config.radii.r_fixed,
            "r_min": config.radii.r_min,
            "r_max": config.radii.r_max,
        },
        "asserts": [assert_to_dict(a) for a in config.asserts],
    }


def assert_to_dict(ta: TrendAssert) -> dict:
    d: dict = {"kind": ta.kind, "a": condition_to_dict(ta.a)}
    if ta.b is not None:
        d["b"] = condition_to_dict(ta.b)
    if ta.value is not None:
        d["value"] = ta.value
    if ta.significant:
        d["significant"] = True
        d["alpha"] = ta.alpha
    return d


def condition_to_dict(c: Condition) -> dict:
    return {"strategy": c.strategy, "T": c.T, "n": c.n, "geometry": c.geometry, "cv": c.cv}


def _condition_from_dict(d: dict) -> Condition:
    allowed = {"strategy", "T", "n", "geometry", "cv"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown condition keys: {sorted(unknown)}")
    try:
        return Condition(
            strategy=d["strategy"],
            T=int(d.get("T", 0)),
            n=int(d["n"]),
            geometry=d.get("geometry", "known"),
            cv=float(d.get("cv", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"condition is missing key {exc}") from exc


def _assert_from_dict(d: dict) -> TrendAssert:
    allowed = {"kind", "a", "b", "value", "significant", "alpha"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown assert keys: {sorted(unknown)}")
    return TrendAssert(
        kind=d.get("kind", ""),
        a=_condition_from_dict(d["a"]),
        b=_condition_from_dict(d["b"]) if "b" in d else None,
        value=float(d["value"]) if "value" in d else None,
        significant=bool(d.get("significant", False)),
        alpha=float(d.get("alpha", 0.05)),
    )


def _expect_keys(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def config_from_dict(d: dict) -> BenchmarkConfig:
    """Parse and strictly validate a benchmark config. Every field has a
    committed default; unknown keys are rejected."""
    if not isinstance(d, dict):
        raise ConfigError("config root must be a JSON object")
    _expect_keys(
        d,
        {
            "format_version",
            "base_seed",
            "games_per_condition",
            "conditions",
            "field",
            "limits",
            "workspace",
            "radii",
            "asserts",
        },
        "config",
    )
    if d.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ConfigError(f"unsupported format_version {d.get('format_version')}")
    if "conditions" not in d or not d["conditions"]:
        raise ConfigError("config must list at least one condition")
    defaults = BenchmarkConfig(conditions=(Condition("explicit", 0, 0, "known", 0.0),))

    fp = d.get("field", {})
    _expect_keys(fp, {"w_att", "w_rep", "w_v", "rho0"}, "field")
    field_params = FieldParams(
        w_att=float(fp.get("w_att", defaults.field_params.w_att)),
        w_rep=float(fp.get("w_rep", defaults.field_params.w_rep)),
        w_v=float(fp.get("w_v", defaults.field_params.w_v)),
        rho0=float(fp.get("rho0", defaults.field_params.rho0)),
    )
    lm = d.get("limits", {})
    _expect_keys(lm, {"max_steps", "goal_eps", "dt", "v_max"}, "limits")
    raw_vmax = lm.get("v_max", defaults.limits.v_max)
    limits = Limits(
        max_steps=int(lm.get("max_steps", defaults.limits.max_steps)),
        goal_eps=float(lm.get("goal_eps", defaults.limits.goal_eps)),
        dt=float(lm.get("dt", defaults.limits.dt)),
        v_max=None if raw_vmax is None else float(raw_vmax),
    )
    ws = d.get("workspace", {})
    _expect_keys(
        ws,
        {"start", "goal", "x_range", "y_range", "clearance", "table_half_length", "retry_cap"},
        "workspace",
    )
    dws = defaults.workspace
    workspace = Workspace(
        start=_vec(ws.get("start", list(dws.start))),
        goal=_vec(ws.get("goal", list(dws.goal))),
        x_range=_pair(ws.get("x_range", list(dws.x_range))),
        y_range=_pair(ws.get("y_range", list(dws.y_range))),
        clearance=float(ws.get("clearance", dws.clearance)),
        table_half_length=float(ws.get("table_half_length", dws.table_half_length)),
        retry_cap=int(ws.get("retry_cap", dws.retry_cap)),
    )
    rd = d.get("radii", {})
    _expect_keys(rd, {"r_fixed", "r_min", "r_max"}, "radii")
    radii = RadiusSpec(
        r_fixed=float(rd.get("r_fixed", defaults.radii.r_fixed)),
        r_min=float(rd.get("r_min", defaults.radii.r_min)),
        r_max=float(rd.get("r_max", defaults.radii.r_max)),
    )
    try:
        conditions = tuple(_condition_from_dict(c) for c in d["conditions"])
        asserts = tuple(_assert_from_dict(a) for a in d.get("asserts", []))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return BenchmarkConfig(
        conditions=conditions,
        games_per_condition=int(d.get("games_per_condition", defaults.games_per_condition)),
        base_seed=int(d.get("base_seed", defaults.base_seed)),
        field_params=field_params,
        limits=limits,
        workspace=workspace,
        radii=radii,
        asserts=asserts,
    )


def _vec(v):
    from .numerics import Vec2

    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"expected a 2-element coordinate, got {v!r}")
    return Vec2(float(v[0]), float(v[1]))


def _pair(v) -> tuple[float, float]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"expected a 2-element range, got {v!r}")
    return (float(v[0]), float(v[1]))


def report_to_dict(report: BenchmarkReport) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "benchmark_report",
        "fingerprint": report.fingerprint,
        "pairing": "environment for game i is generated from seed base_seed+i, shared by all conditions with equal (n, geometry)",
        "config": report.config,
        "conditions": [
            {
                "strategy": r.condition.strategy,
                "T": r.condition.T,
                "n": r.condition.n,
                "geometry": r.condition.geometry,
                "cv": r.condition.cv,
                "games": r.games,
                "successes": r.successes,
                "lambda": r.lambda_,
                "failure_mean_steps": r.failure_mean_steps,
                "failures": {
                    "collision": r.failure_kinds.count("collision"),
                    "timeout": r.failure_kinds.count("timeout"),
                },
                "env_hash": r.env_hash,
                "skipped_seeds": list(r.skipped_seeds),
                "outcomes": {
                    "seeds": list(r.seeds),
                    "success": [int(s) for s in r.success],
                    "steps": list(r.steps),
                    "failure_kinds": list(r.failure_kinds),
                },
            }
            for r in report.results
        ],
    }


def report_json(report: BenchmarkReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, separators=(",", ":")) + "\n"


def report_csv(report: BenchmarkReport) -> str:
    """Flat per-condition summary; failure_mean_steps is empty when a
    condition has no failures."""
    lines = [REPORT_CSV_HEADER]
    for r in report.results:
        fms = r.failure_mean_steps
        lines.append(
            ",".join(
                [
                    r.condition.strategy,
                    str(r.condition.T),
                    str(r.condition.n),
                    format(r.condition.cv, ".12g"),
                    format(r.lambda_, ".12g"),
                    "" if fms is None else format(fms, ".12g"),
                    str(r.games),
                ]
            )
        )
    return "\n".join(lines) + "\n"
