"""Two-agent table-carrying game with implicit and explicit communication.

Two point agents rigidly hold the ends of a table and steer it to a goal
through obstacles, each seeing only its own half of the obstacle set. The
table translates with the mean of the agents' commanded velocities and
rotates with their differential component. Communication is either explicit
(periodic messages carrying the closest observed obstacle) or implicit via
speaker/listener roles, where the listener inverts the speaker's observed
velocity through the potential-field model to place a single inferred
obstacle. A coefficient-of-variation noise knob corrupts whatever crosses
the channel: message fields and observed actions alike.

Every game is a deterministic function of (environment, strategy, params,
limits, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import GenerationError
from .linear_roles import SpeakerListener, SpeakerSpeaker
from .numerics import Rng, Vec2, derive_seed, gaussian
from .potential_field import (
    ATTRACTOR_EPS,
    RHO_MIN,
    Attractor,
    FieldParams,
    Obstacle,
    attractive_grad,
    repulsive_magnitude,
)

_ENV_STREAM = 1
_GAME_STREAM = 2

DEFAULT_RESIDUAL_EPS = 1e-9
DEFAULT_INFER_TOL = 1e-10


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class KnownRadius:
    """All obstacles share one radius known to both agents."""

    r_fixed: float

    @property
    def nominal_radius(self) -> float:
        return self.r_fixed


@dataclass(frozen=True)
class UnknownRadius:
    """Radii are sampled uniformly; agents only know the sampling range."""

    r_min: float
    r_max: float

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise ValueError(f"need 0 < r_min <= r_max, got [{self.r_min}, {self.r_max}]")

    @property
    def nominal_radius(self) -> float:
        return 0.5 * (self.r_min + self.r_max)


GeometryMode = KnownRadius | UnknownRadius


@dataclass(frozen=True)
class TaggedObstacle(Obstacle):
    owner: int = 1

    def __post_init__(self):
        super().__post_init__()
        if self.owner not in (1, 2):
            raise ValueError(f"owner must be 1 or 2, got {self.owner}")


@dataclass(frozen=True)
class Environment:
    obstacles: tuple[TaggedObstacle, ...]
    start: Vec2
    goal: Vec2
    geometry_mode: GeometryMode
    table_half_length: float = 0.5

    def __post_init__(self):
        if not self.table_half_length > 0:
            raise ValueError("table_half_length must be > 0")

    def owned_by(self, agent: int) -> tuple[TaggedObstacle, ...]:
        return tuple(o for o in self.obstacles if o.owner == agent)


@dataclass(frozen=True)
class InferredObstacle(Obstacle):
    """Obstacle reconstructed from a partner's action; saturated marks a
    residual stronger than the field can produce above the distance floor."""

    saturated: bool = False


@dataclass
class AgentBelief:
    """What one agent knows about the world.

    observed: the obstacles this agent sees directly. received: archive of
    every explicit delivery, keyed by (sender, obstacle index); the key set
    only grows within a game. received_latest: the single actionable
    partner-obstacle estimate, replaced by each delivery; motion uses this
    one-slot summary, mirroring how the listener's inference keeps exactly
    one obstacle. inferred: at most one obstacle reconstructed from the
    partner's actions.
    """

    observed: tuple[Obstacle, ...]
    received: dict[tuple[int, int], Obstacle] = field(default_factory=dict)
    received_latest: Obstacle | None = None
    inferred: InferredObstacle | None = None

    def motion_obstacles(self, use_inferred: bool) -> list[Obstacle]:
        out: list[Obstacle] = list(self.observed)
        if self.received_latest is not None:
            out.append(self.received_latest)
        if use_inferred and self.inferred is not None:
            out.append(self.inferred)
        return out


@dataclass(frozen=True)
class Explicit:
    """Message-passing about the closest observed obstacle.

    period >= 1: one message goes out after each full period elapses (steps
    period, 2*period, ...), with the sender alternating between the agents,
    mirroring how roles alternate with the same period. period 0 is
    realtime: both agents send every step from the first step on.
    """

    period: int
    noise_cv: float = 0.0

    def __post_init__(self):
        if self.period < 0:
            raise ValueError("period must be >= 0")
        if self.noise_cv < 0:
            raise ValueError("noise_cv must be >= 0")


@dataclass(frozen=True)
class DynamicRoles:
    """Alternate speaker and listener roles every `period` steps."""

    period: int
    initial_speaker: int = 1
    noise_cv: float = 0.0

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if self.initial_speaker not in (1, 2):
            raise ValueError("initial_speaker must be 1 or 2")
        if self.noise_cv < 0:
            raise ValueError("noise_cv must be >= 0")


@dataclass(frozen=True)
class StaticRoles:
    """Fixed allocation for the whole game: SpeakerListener or SpeakerSpeaker."""

    allocation: SpeakerListener | SpeakerSpeaker
    noise_cv: float = 0.0

    def __post_init__(self):
        if not isinstance(self.allocation, (SpeakerListener, SpeakerSpeaker)):
            raise ValueError(f"unsupported static allocation {self.allocation!r}")
        if self.noise_cv < 0:
            raise ValueError("noise_cv must be >= 0")


CommStrategy = Explicit | DynamicRoles | StaticRoles


@dataclass(frozen=True)
class Limits:
    max_steps: int = 200
    goal_eps: float = 0.5
    dt: float = 1.0
    v_max: float | None = 0.25

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.goal_eps > 0:
            raise ValueError("goal_eps must be > 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.v_max is not None and not self.v_max > 0:
            raise ValueError("v_max must be > 0 when set")


@dataclass(frozen=True)
class TableState:
    center: Vec2
    heading: float
    half_length: float

    @property
    def q1(self) -> Vec2:
        return Vec2(
            self.center[0] + self.half_length * math.cos(self.heading),
            self.center[1] + self.half_length * math.sin(self.heading),
        )

    @property
    def q2(self) -> Vec2:
        return Vec2(
            self.center[0] - self.half_length * math.cos(self.heading),
            self.center[1] - self.half_length * math.sin(self.heading),
        )


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    state: TableState
    v1: Vec2
    v2: Vec2
    role1: str
    role2: str
    inferred1: InferredObstacle | None
    inferred2: InferredObstacle | None


@dataclass(frozen=True)
class SimOutcome:
    success: bool
    steps: int
    failure_kind: str  # "collision" | "timeout" | "none"
    trajectory: tuple[TrajectoryStep, ...] | None = None

    def __post_init__(self):
        if self.failure_kind not in ("collision", "timeout", "none"):
            raise ValueError(f"unknown failure kind {self.failure_kind!r}")
        if self.success and self.failure_kind != "none":
            raise ValueError("successful games cannot carry a failure kind")


@dataclass(frozen=True)
class Workspace:
    """Environment-generation geometry: obstacle corridor and clearances."""

    start: Vec2 = Vec2(0.0, 0.0)
    goal: Vec2 = Vec2(10.0, 0.0)
    x_range: tuple[float, float] = (2.0, 8.0)
    y_range: tuple[float, float] = (-2.5, 2.5)
    clearance: float = 1.2
    table_half_length: float = 0.5
    retry_cap: int = 200


# ---------------------------------------------------------------------------
# dynamics


def table_step(state: TableState, v1: Vec2, v2: Vec2, dt: float) -> TableState:
    """Advance the rigid table one step under the agents' velocities.

    The center translates with the mean velocity; the heading rate is the
    cross product of the unit table axis with agent 1's relative velocity,
    divided by the half length (the same value results from agent 2's arm by
    antisymmetry). Endpoints are re-derived from center and heading, so
    rigidity is exact.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    vcx = 0.5 * (v1[0] + v2[0])
    vcy = 0.5 * (v1[1] + v2[1])
    ux = math.cos(state.heading)
    uy = math.sin(state.heading)
    relx = v1[0] - vcx
    rely = v1[1] - vcy
    omega = (ux * rely - uy * relx) / state.half_length
    return TableState(
        center=Vec2(state.center[0] + dt * vcx, state.center[1] + dt * vcy),
        heading=state.heading + dt * omega,
        half_length=state.half_length,
    )


def segment_point_distance(a: Vec2, b: Vec2, p: Vec2) -> float:
    """Distance from point p to the closed segment ab."""
    abx = b[0] - a[0]
    aby = b[1] - a[1]
    apx = p[0] - a[0]
    apy = p[1] - a[1]
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.sqrt(apx * apx + apy * apy)
    t = (apx * abx + apy * aby) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    dx = apx - t * abx
    dy = apy - t * aby
    return math.sqrt(dx * dx + dy * dy)


def table_collides(state: TableState, obstacles: Sequence[Obstacle]) -> bool:
    """True when any obstacle disc intersects the table segment."""
    q1 = state.q1
    q2 = state.q2
    for obs in obstacles:
        if segment_point_distance(q1, q2, obs.center) < obs.radius:
            return True
    return False


# ---------------------------------------------------------------------------
# communication primitives


def closest_observed_index(observed: Sequence[Obstacle], own_pos: Vec2) -> int | None:
    """Index of the observed obstacle nearest to own_pos; ties take the
    lowest index. None when nothing is observed."""
    best = None
    best_d = math.inf
    for i, obs in enumerate(observed):
        dx = obs.center[0] - own_pos[0]
        dy = obs.center[1] - own_pos[1]
        d = dx * dx + dy * dy
        if d < best_d:
            best_d = d
            best = i
    return best


def build_message(belief: AgentBelief, own_pos: Vec2) -> Obstacle | None:
    """The obstacle an explicit message carries: the closest observed one.

    Returns None when the agent observes nothing (the receiver is left
    unchanged)."""
    idx = closest_observed_index(belief.observed, own_pos)
    return None if idx is None else belief.observed[idx]


def corrupt(values: Sequence[float], cv: float, rng: Rng) -> tuple[float, ...]:
    """Add zero-mean Gaussian noise with stddev cv*|x| to each component.

    cv = 0 returns the input unchanged and consumes no draws, so noise-free
    runs stay stream-aligned regardless of how often they would have called
    the channel."""
    if cv < 0:
        raise ValueError("cv must be >= 0")
    if cv == 0.0:
        return tuple(values)
    return tuple(x + gaussian(rng, 0.0, cv * abs(x)) for x in values)


def infer_obstacle(
    observed_partner_velocity: Vec2,
    partner_pos: Vec2,
    attractors: Sequence[Attractor],
    params: FieldParams,
    nominal_radius: float,
    tol: float = DEFAULT_INFER_TOL,
    residual_eps: float = DEFAULT_RESIDUAL_EPS,
) -> InferredObstacle | None:
    """Invert a speaker's velocity into a single obstacle explaining it.

    The residual is the repulsive field term implied by the observed
    velocity once the shared attractors are accounted for:

        residual = v / w_v + sum_k attractive_grad(partner_pos, k)

    A residual below residual_eps means the motion is explained by the
    attractors alone and nothing is inferred. Otherwise the repulsive
    magnitude curve is inverted for the boundary distance rho by bisection
    on (RHO_MIN, rho0], and the obstacle center is placed at

        partner_pos - (rho + nominal_radius) * residual / |residual|

    A residual at or above the field value at RHO_MIN saturates: the
    obstacle is placed at the floor distance and flagged, not rejected.
    """
    rx = observed_partner_velocity[0] / params.w_v
    ry = observed_partner_velocity[1] / params.w_v
    for att in attractors:
        g = attractive_grad(partner_pos, att, params.w_att)
        rx += g[0]
        ry += g[1]
    mag = math.sqrt(rx * rx + ry * ry)
    if mag < residual_eps:
        return None
    saturated = False
    if mag >= repulsive_magnitude(RHO_MIN, params):
        rho = RHO_MIN
        saturated = True
    else:
        rho = _invert_repulsive_magnitude(mag, params, tol)
    offset = (rho + nominal_radius) / mag
    center = Vec2(partner_pos[0] - rx * offset, partner_pos[1] - ry * offset)
    return InferredObstacle(center=center, radius=nominal_radius, saturated=saturated)


def _invert_repulsive_magnitude(mag: float, params: FieldParams, tol: float) -> float:
    """Bisection for the boundary distance rho with field strength mag.

    The curve is strictly decreasing on (0, rho0], so the bracket
    [RHO_MIN, rho0] always contains exactly one root for
    0 < mag < curve(RHO_MIN). The loop halves the bracket exactly like
    numerics.bisect on the function repulsive_magnitude(rho) - mag, inlined
    because this runs once per listener step.
    """
    w_rep = params.w_rep
    inv_rho0 = 1.0 / params.rho0
    lo = RHO_MIN
    hi = params.rho0
    while (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = w_rep * (1.0 / mid - inv_rho0) * (1.0 / mid) - mag
        if fmid == 0.0:
            return mid
        if fmid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# game loop


def initial_table_state(env: Environment) -> TableState:
    """Table starts at `start`, held perpendicular to the start-goal line."""
    heading = math.atan2(env.goal[1] - env.start[1], env.goal[0] - env.start[0]) + 0.5 * math.pi
    return TableState(center=env.start, heading=heading, half_length=env.table_half_length)


def run_game(
    env: Environment,
    strategy: CommStrategy,
    params: FieldParams,
    limits: Limits,
    seed: int,
    record_trajectory: bool = False,
) -> SimOutcome:
    """Play one table-carrying game and report the outcome.

    Per step: communication happens according to the strategy (explicit
    delivery, or the listener inverting the speaker's corrupted velocity),
    both agents command potential-field velocities from their own beliefs,
    and the table advances with speed-capped inputs. The game ends in
    success when the table center reaches the goal, in collision when any
    obstacle disc touches the table segment, or in timeout at max_steps.

    Speakers act strictly on observed + received obstacles; an agent's
    inferred obstacle only steers it while it is the listener, and persists
    across role switches until a new inference replaces it. Observed partner
    actions are the unclamped commands, so inference inverts the exact field.
    """
    if not isinstance(strategy, (Explicit, DynamicRoles, StaticRoles)):
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = Rng(derive_seed(seed, _GAME_STREAM))
    start_state = initial_table_state(env)
    beliefs = {
        1: AgentBelief(observed=env.owned_by(1)),
        2: AgentBelief(observed=env.owned_by(2)),
    }
    attractors = (Attractor(env.goal),)
    nominal_r = env.geometry_mode.nominal_radius
    cv = strategy.noise_cv
    gx, gy = env.goal
    trajectory: list[TrajectoryStep] | None = [] if record_trajectory else None

    # The inner loop carries the table pose and belief contents as plain
    # floats/tuples; _field_velocity and the inlined dynamics reproduce
    # agent_velocity and table_step arithmetic exactly (pinned by tests).
    cx_, cy_ = start_state.center
    heading = start_state.heading
    half_len = env.table_half_length
    w_att, w_rep, w_v, rho0 = params.w_att, params.w_rep, params.w_v, params.rho0
    dt = limits.dt
    v_max = limits.v_max
    goal_eps = limits.goal_eps
    env_obs = tuple((o.center[0], o.center[1], o.radius) for o in env.obstacles)
    # per-agent motion tuples (observed + received); rebuilt on delivery
    motion = {
        agent: tuple((o.center[0], o.center[1], o.radius) for o in beliefs[agent].observed)
        for agent in (1, 2)
    }

    if isinstance(strategy, Explicit):
        kind = "explicit"
        period = strategy.period
    elif isinstance(strategy, DynamicRoles):
        kind = "roles"
        period = strategy.period
    elif isinstance(strategy.allocation, SpeakerListener):
        kind = "roles"
    else:
        kind = "speakers"

    outcome_kind = "timeout"
    steps = limits.max_steps
    for step in range(limits.max_steps):
        cos_h = math.cos(heading)
        sin_h = math.sin(heading)
        p1x = cx_ + half_len * cos_h
        p1y = cy_ + half_len * sin_h
        p2x = cx_ - half_len * cos_h
        p2y = cy_ - half_len * sin_h
        pos = {1: (p1x, p1y), 2: (p2x, p2y)}

        if kind == "explicit":
            if period == 0:
                senders = (1, 2)
            elif step > 0 and step % period == 0:
                senders = (1,) if (step // period) % 2 == 1 else (2,)
            else:
                senders = ()
            if senders:
                for sender in senders:
                    idx = closest_observed_index(beliefs[sender].observed, pos[sender])
                    if idx is None:
                        continue
                    obs = beliefs[sender].observed[idx]
                    mcx, mcy, mr = corrupt((obs.center[0], obs.center[1], obs.radius), cv, rng)
                    receiver = 2 if sender == 1 else 1
                    delivered = Obstacle(center=Vec2(mcx, mcy), radius=max(mr, 0.0))
                    beliefs[receiver].received[(sender, idx)] = delivered
                    beliefs[receiver].received_latest = delivered
                for agent in (1, 2):
                    b = beliefs[agent]
                    motion[agent] = tuple(
                        (o.center[0], o.center[1], o.radius)
                        for o in b.motion_obstacles(use_inferred=False)
                    )
            roles = ("S", "S")
            v1 = _field_velocity(p1x, p1y, gx, gy, motion[1], w_att, w_rep, w_v, rho0)
            v2 = _field_velocity(p2x, p2y, gx, gy, motion[2], w_att, w_rep, w_v, rho0)
        elif kind == "speakers":
            roles = ("S", "S")
            v1 = _field_velocity(p1x, p1y, gx, gy, motion[1], w_att, w_rep, w_v, rho0)
            v2 = _field_velocity(p2x, p2y, gx, gy, motion[2], w_att, w_rep, w_v, rho0)
        else:
            if isinstance(strategy, DynamicRoles):
                flips = (step // period) % 2
                speaker = strategy.initial_speaker if flips == 0 else 3 - strategy.initial_speaker
            else:
                speaker = strategy.allocation.speaker
            listener = 3 - speaker
            sx, sy = pos[speaker]
            v_spk = _field_velocity(sx, sy, gx, gy, motion[speaker], w_att, w_rep, w_v, rho0)
            observed_v = corrupt(v_spk, cv, rng)
            inferred = infer_obstacle(
                Vec2(observed_v[0], observed_v[1]),
                Vec2(sx, sy),
                attractors,
                params,
                nominal_r,
            )
            if inferred is not None:
                beliefs[listener].inferred = inferred
            inf = beliefs[listener].inferred
            lx, ly = pos[listener]
            listener_obs = motion[listener]
            if inf is not None:
                listener_obs = listener_obs + ((inf.center[0], inf.center[1], inf.radius),)
            v_lst = _field_velocity(lx, ly, gx, gy, listener_obs, w_att, w_rep, w_v, rho0)
            if speaker == 1:
                v1, v2 = v_spk, v_lst
                roles = ("S", "L")
            else:
                v1, v2 = v_lst, v_spk
                roles = ("L", "S")

        # dynamics: table_step with the speed cap applied to each command
        c1x, c1y = _clamp_xy(v1[0], v1[1], v_max)
        c2x, c2y = _clamp_xy(v2[0], v2[1], v_max)
        vcx = 0.5 * (c1x + c2x)
        vcy = 0.5 * (c1y + c2y)
        omega = (cos_h * (c1y - vcy) - sin_h * (c1x - vcx)) / half_len
        cx_ += dt * vcx
        cy_ += dt * vcy
        heading += dt * omega

        if trajectory is not None:
            trajectory.append(
                TrajectoryStep(
                    step=step,
                    state=TableState(Vec2(cx_, cy_), heading, half_len),
                    v1=Vec2(v1[0], v1[1]),
                    v2=Vec2(v2[0], v2[1]),
                    role1=roles[0],
                    role2=roles[1],
                    inferred1=beliefs[1].inferred,
                    inferred2=beliefs[2].inferred,
                )
            )

        # collision: any obstacle disc against the table segment
        cos_h = math.cos(heading)
        sin_h = math.sin(heading)
        ax = cx_ + half_len * cos_h
        ay = cy_ + half_len * sin_h
        bx = cx_ - half_len * cos_h
        by = cy_ - half_len * sin_h
        abx = bx - ax
        aby = by - ay
        denom = abx * abx + aby * aby
        collided = False
        for ocx, ocy, orad in env_obs:
            apx = ocx - ax
            apy = ocy - ay
            t = (apx * abx + apy * aby) / denom
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            ddx = apx - t * abx
            ddy = apy - t * aby
            if math.sqrt(ddx * ddx + ddy * ddy) < orad:
                collided = True
                break
        if collided:
            outcome_kind = "collision"
            steps = step + 1
            break
        dxg = cx_ - gx
        dyg = cy_ - gy
        if math.sqrt(dxg * dxg + dyg * dyg) <= goal_eps:
            outcome_kind = "none"
            steps = step + 1
            break

    return SimOutcome(
        success=outcome_kind == "none",
        steps=steps,
        failure_kind=outcome_kind if outcome_kind != "none" else "none",
        trajectory=tuple(trajectory) if trajectory is not None else None,
    )


def _field_velocity(px, py, gx, gy, obstacles, w_att, w_rep, w_v, rho0):
    """Inline single-attractor agent_velocity over (cx, cy, radius) tuples.

    Must stay arithmetic-identical to agent_velocity with one attractor; a
    parity test enforces it.
    """
    dx = px - gx
    dy = py - gy
    dist = math.sqrt(dx * dx + dy * dy)
    if dist < ATTRACTOR_EPS:
        vx = 0.0
        vy = 0.0
    else:
        scale = w_att / dist
        vx = -(dx * scale)
        vy = -(dy * scale)
    inv_rho0 = 1.0 / rho0
    for ocx, ocy, orad in obstacles:
        dxo = px - ocx
        dyo = py - ocy
        center_dist = math.sqrt(dxo * dxo + dyo * dyo)
        rho = center_dist - orad
        if rho > rho0:
            continue
        if rho < RHO_MIN:
            rho = RHO_MIN
        mag = w_rep * (1.0 / rho - inv_rho0) * (1.0 / rho)
        if center_dist < ATTRACTOR_EPS:
            vx += mag
        else:
            s = mag / center_dist
            vx += dxo * s
            vy += dyo * s
    return (vx * w_v, vy * w_v)


def _clamp_xy(vx, vy, v_max):
    if v_max is None:
        return vx, vy
    speed = math.sqrt(vx * vx + vy * vy)
    if speed <= v_max:
        return vx, vy
    scale = v_max / speed
    return vx * scale, vy * scale


# ---------------------------------------------------------------------------
# environment generation and serialization


def generate_environment(
    seed: int,
    n: int,
    geometry_mode: GeometryMode,
    workspace: Workspace = Workspace(),
) -> Environment:
    """Sample n obstacles uniformly in the corridor between start and goal.

    Centers are rejection-sampled to keep every obstacle disc at least
    `clearance` away from both the start and goal points; radii are fixed or
    uniform depending on the geometry mode, drawn before placement so the
    stream position does not depend on the number of rejections. Owner tags
    alternate, splitting the set as evenly as possible. Exhausting the retry
    budget raises GenerationError.
    """
    if n < 0:
        raise ValueError("obstacle count must be >= 0")
    rng = Rng(derive_seed(seed, _ENV_STREAM))
    x_lo, x_hi = workspace.x_range
    y_lo, y_hi = workspace.y_range
    obstacles = []
    for i in range(n):
        if isinstance(geometry_mode, KnownRadius):
            radius = geometry_mode.r_fixed
        else:
            radius = geometry_mode.r_min + (geometry_mode.r_max - geometry_mode.r_min) * rng.uniform()
        placed = False
        for _ in range(workspace.retry_cap):
            x = x_lo + (x_hi - x_lo) * rng.uniform()
            y = y_lo + (y_hi - y_lo) * rng.uniform()
            required = workspace.clearance + radius
            ds = math.dist((x, y), workspace.start)
            dg = math.dist((x, y), workspace.goal)
            if ds >= required and dg >= required:
                obstacles.append(
                    TaggedObstacle(center=Vec2(x, y), radius=radius, owner=1 + i % 2)
                )
                placed = True
                break
        if not placed:
            raise GenerationError(
                f"could not place obstacle {i} within {workspace.retry_cap} retries (seed {seed})"
            )
    return Environment(
        obstacles=tuple(obstacles),
        start=workspace.start,
        goal=workspace.goal,
        geometry_mode=geometry_mode,
        table_half_length=workspace.table_half_length,
    )


def geometry_to_dict(mode: GeometryMode) -> dict:
    if isinstance(mode, KnownRadius):
        return {"kind": "known", "r_fixed": mode.r_fixed}
    return {"kind": "unknown", "r_min": mode.r_min, "r_max": mode.r_max}


def geometry_from_dict(d: dict) -> GeometryMode:
    kind = d.get("kind")
    if kind == "known":
        return KnownRadius(r_fixed=float(d["r_fixed"]))
    if kind == "unknown":
        return UnknownRadius(r_min=float(d["r_min"]), r_max=float(d["r_max"]))
    raise ValueError(f"unknown geometry kind {kind!r}")


def environment_to_dict(env: Environment) -> dict:
    return {
        "start": [env.start[0], env.start[1]],
        "goal": [env.goal[0], env.goal[1]],
        "table_half_length": env.table_half_length,
        "geometry_mode": geometry_to_dict(env.geometry_mode),
        "obstacles": [
            {
                "center": [o.center[0], o.center[1]],
                "radius": o.radius,
                "owner": o.owner,
            }
            for o in env.obstacles
        ],
    }


def environment_from_dict(d: dict) -> Environment:
    allowed = {"start", "goal", "table_half_length", "geometry_mode", "obstacles"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown environment keys: {sorted(unknown)}")
    return Environment(
        obstacles=tuple(
            TaggedObstacle(
                center=Vec2(*[float(c) for c in o["center"]]),
                radius=float(o["radius"]),
                owner=int(o["owner"]),
            )
            for o in d["obstacles"]
        ),
        start=Vec2(*[float(c) for c in d["start"]]),
        goal=Vec2(*[float(c) for c in d["goal"]]),
        geometry_mode=geometry_from_dict(d["geometry_mode"]),
        table_half_length=float(d.get("table_half_length", 0.5)),
    )


# ---------------------------------------------------------------------------
# trajectory CSV

TRAJECTORY_COLUMNS = (
    "step,cx,cy,theta,v1x,v1y,v2x,v2y,role1,role2,"
    "inf1x,inf1y,inf1r,inf2x,inf2y,inf2r"
)


def _fmt(x: float) -> str:
    return format(x, ".12g")


def trajectory_csv_lines(trajectory: Sequence[TrajectoryStep]) -> list[str]:
    """Render a recorded trajectory as CSV lines (header included).

    Velocities are the commanded (unclamped) actions. Inferred-obstacle
    fields are empty while an agent has no inference.
    """
    lines = [TRAJECTORY_COLUMNS]
    for ts in trajectory:
        inf_fields = []
        for inf in (ts.inferred1, ts.inferred2):
            if inf is None:
                inf_fields.extend(["", "", ""])
            else:
                inf_fields.extend([_fmt(inf.center[0]), _fmt(inf.center[1]), _fmt(inf.radius)])
        lines.append(
            ",".join(
                [
                    str(ts.step),
                    _fmt(ts.state.center[0]),
                    _fmt(ts.state.center[1]),
                    _fmt(ts.state.heading),
                    _fmt(ts.v1[0]),
                    _fmt(ts.v1[1]),
                    _fmt(ts.v2[0]),
                    _fmt(ts.v2[1]),
                    ts.role1,
                    ts.role2,
                ]
                + inf_fields
            )
        )
    return lines


def write_trajectory_csv(trajectory: Sequence[TrajectoryStep], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(trajectory_csv_lines(trajectory)))
        fh.write("\n")
