"""Deterministic 2D predator-prey world.

Square arena centered on the origin with axis-aligned rectangular barriers.
Prey move with a discrete two-branch action space (move none/forward x turn
none/left/right) and perceive through a fan of rays; the rule-based predator
chases the nearest prey inside its vision cone, otherwise patrols random
waypoints. Collected points respawn immediately; caught prey are penalised
and teleported, the run continues.

Conventions: positions are float64 (x, y); headings are degrees in [0, 360)
with 0 along +x and counter-clockwise positive; "left" turns increase the
heading. All randomness flows through the state's own generator, so a
(config, seed, action sequence) triple fully determines a run.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation, InputError

# Reward structure: foraging a positive point, foraging a negative point,
# being caught by the predator.
REWARD_POSITIVE = 1.0
REWARD_NEGATIVE = -0.2
REWARD_CAUGHT = -1.0

EVENT_POSITIVE = "positive_collected"
EVENT_NEGATIVE = "negative_collected"
EVENT_CAUGHT = "prey_caught"

# Ray hit categories, in one-hot order.
HIT_POSITIVE = 0
HIT_NEGATIVE = 1
HIT_WALL = 2  # arena walls and barriers
HIT_PREDATOR = 3
HIT_PREY = 4
HIT_NOTHING = 5
N_HIT_KINDS = 6

N_EGO_FEATURES = 2  # normalized speed, normalized heading

_PLACEMENT_ATTEMPTS = 1000
_PATROL_STALL_TICKS = 200  # redraw the waypoint if a barrier blocks it this long


# ---------------------------------------------------------------------------
# configuration


DEFAULT_BARRIERS: tuple[tuple[float, float, float, float], ...] = (
    (-2.45, -1.8, -2.15, 1.8),
    (2.15, -1.8, 2.45, 1.8),
)


@dataclass
class WorldConfig:
    arena_side: float = 10.22
    barrier_layout: tuple[tuple[float, float, float, float], ...] = DEFAULT_BARRIERS
    n_prey: int = 6
    n_positive_points: int = 10
    n_negative_points: int = 10
    predator_present: bool = True
    prey_move_speed: float = 2.0
    prey_turn_speed: float = 300.0
    predator_move_speed: float = 20.0
    predator_view_radius: float = 10.33
    predator_view_angle: float = 80.0
    tick_dt: float = 0.05
    episode_length: int = 2000
    seed: int = 0
    n_rays: int = 11
    ray_fov_degrees: float = 140.0
    ray_length: float = 10.0
    prey_radius: float = 0.25
    predator_radius: float = 0.4
    point_radius: float = 0.2

    def __post_init__(self) -> None:
        self.barrier_layout = tuple(tuple(float(v) for v in rect) for rect in self.barrier_layout)
        positives = {
            "arena_side": self.arena_side,
            "n_prey": self.n_prey,
            "n_positive_points": self.n_positive_points,
            "n_negative_points": self.n_negative_points,
            "prey_move_speed": self.prey_move_speed,
            "prey_turn_speed": self.prey_turn_speed,
            "predator_move_speed": self.predator_move_speed,
            "predator_view_radius": self.predator_view_radius,
            "tick_dt": self.tick_dt,
            "episode_length": self.episode_length,
            "n_rays": self.n_rays,
            "ray_length": self.ray_length,
            "prey_radius": self.prey_radius,
            "predator_radius": self.predator_radius,
            "point_radius": self.point_radius,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if not 0.0 < self.predator_view_angle <= 360.0:
            raise ConfigError(
                f"predator_view_angle must be in (0, 360], got {self.predator_view_angle}"
            )
        half = self.arena_side / 2.0
        margin = 2.0 * max(self.prey_radius, self.predator_radius)
        for rect in self.barrier_layout:
            x0, y0, x1, y1 = rect
            if not (x0 < x1 and y0 < y1):
                raise ConfigError(f"barrier rectangle {rect} is not (xmin, ymin, xmax, ymax)")
            if x0 < -half + margin or y0 < -half + margin or x1 > half - margin or y1 > half - margin:
                raise ConfigError(
                    f"barrier {rect} must lie inside the arena with {margin} clearance from walls"
                )

    @property
    def half_side(self) -> float:
        return self.arena_side / 2.0

    @property
    def obs_dim(self) -> int:
        return self.n_rays * (N_HIT_KINDS + 1) + N_EGO_FEATURES


# ---------------------------------------------------------------------------
# state containers


@dataclass(eq=False)
class AgentBody:
    position: np.ndarray
    heading: float
    id: int


@dataclass(eq=False)
class PredatorState:
    body: AgentBody
    mode: str  # "patrol" | "chase"
    target_prey_id: int | None
    patrol_waypoint: np.ndarray
    ticks_since_waypoint: int = 0


@dataclass(eq=False)
class PointObject:
    position: np.ndarray
    polarity: str  # "positive" | "negative"
    radius: float


@dataclass
class Event:
    tick: int
    kind: str
    prey_id: int


@dataclass(eq=False)
class RayObservation:
    """One prey's perception: per-ray hit one-hot + normalized distance, plus ego features."""

    hit_onehot: np.ndarray  # (n_rays, N_HIT_KINDS)
    distance: np.ndarray  # (n_rays,), 1.0 when nothing hit
    ego: np.ndarray  # (speed / max speed, heading / 360)

    def as_vector(self) -> np.ndarray:
        per_ray = np.concatenate([self.hit_onehot, self.distance[:, None]], axis=1)
        return np.concatenate([per_ray.ravel(), self.ego])


@dataclass(eq=False)
class WorldState:
    config: WorldConfig
    tick: int
    prey: list[AgentBody]
    predator: PredatorState | None
    points: list[PointObject]
    rng: np.random.Generator
    event_log: list[Event] = field(default_factory=list)
    prey_speed: np.ndarray = field(default_factory=lambda: np.zeros(0))


def state_digest(state: WorldState) -> str:
    """Canonical hash of the full state, including the generator; equal digests => equal states."""
    h = hashlib.sha256()
    h.update(str(state.tick).encode())
    for body in state.prey:
        h.update(body.position.tobytes())
        h.update(np.float64(body.heading).tobytes())
        h.update(str(body.id).encode())
    if state.predator is not None:
        p = state.predator
        h.update(p.body.position.tobytes())
        h.update(np.float64(p.body.heading).tobytes())
        h.update(p.mode.encode())
        h.update(str(p.target_prey_id).encode())
        h.update(p.patrol_waypoint.tobytes())
        h.update(str(p.ticks_since_waypoint).encode())
    for pt in state.points:
        h.update(pt.position.tobytes())
        h.update(pt.polarity.encode())
    h.update(state.prey_speed.tobytes())
    h.update(json.dumps(state.rng.bit_generator.state, sort_keys=True, default=int).encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# action space


@dataclass(frozen=True)
class ActionSpace:
    """Two discrete branches, jointly encoded row-major: joint = move * 3 + turn."""

    move_labels: tuple[str, ...] = ("none", "forward")
    turn_labels: tuple[str, ...] = ("none", "left", "right")

    @property
    def branch_sizes(self) -> tuple[int, int]:
        return (len(self.move_labels), len(self.turn_labels))

    @property
    def n_joint(self) -> int:
        return len(self.move_labels) * len(self.turn_labels)

    def encode(self, move: int, turn: int) -> int:
        return move * len(self.turn_labels) + turn

    def decode(self, joint: int) -> tuple[int, int]:
        return joint // len(self.turn_labels), joint % len(self.turn_labels)


def prey_action_space() -> ActionSpace:
    return ActionSpace()


# ---------------------------------------------------------------------------
# geometry helpers


def _heading_vector(heading_deg: float | np.ndarray) -> np.ndarray:
    rad = np.deg2rad(heading_deg)
    return np.stack([np.cos(rad), np.sin(rad)], axis=-1)


def _inside_rect(p: np.ndarray, rect: tuple[float, float, float, float], pad: float = 0.0) -> bool:
    x0, y0, x1, y1 = rect
    return (x0 - pad < p[0] < x1 + pad) and (y0 - pad < p[1] < y1 + pad)


def segment_hits_rect(a: np.ndarray, b: np.ndarray, rect: tuple[float, float, float, float]) -> bool:
    """Liang-Barsky clip of segment a->b against an axis-aligned rectangle."""
    x0, y0, x1, y1 = rect
    d = b - a
    t0, t1 = 0.0, 1.0
    for axis, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        if d[axis] == 0.0:
            if a[axis] <= lo or a[axis] >= hi:
                return False
            continue
        ta = (lo - a[axis]) / d[axis]
        tb = (hi - a[axis]) / d[axis]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 >= t1:
            return False
    return True


def _slide(x: float, y: float, dx: float, dy: float, radius: float, cfg: WorldConfig) -> tuple[float, float]:
    """Integrate one displacement with wall clamping and axis-separated barrier sliding.

    Barriers are inflated by the body radius, so the returned center is never
    inside a barrier and always at least `radius` from every wall.
    """
    limit = cfg.half_side - radius

    # X sweep.
    tx = min(limit, max(-limit, x + dx))
    for x0, y0, x1, y1 in cfg.barrier_layout:
        if not (y0 - radius < y < y1 + radius):
            continue
        lo, hi = x0 - radius, x1 + radius
        if x <= lo < tx:
            tx = lo
        elif x >= hi > tx:
            tx = hi
        elif lo < x < hi:  # started inside the inflated band: push to nearest face
            tx = lo if (x - lo) <= (hi - x) else hi
    # Y sweep.
    ty = min(limit, max(-limit, y + dy))
    for x0, y0, x1, y1 in cfg.barrier_layout:
        if not (x0 - radius < tx < x1 + radius):
            continue
        lo, hi = y0 - radius, y1 + radius
        if y <= lo < ty:
            ty = lo
        elif y >= hi > ty:
            ty = hi
        elif lo < y < hi:
            ty = lo if (y - lo) <= (hi - y) else hi
    return tx, ty


def _move_with_collision(
    pos: np.ndarray, delta: np.ndarray, radius: float, cfg: WorldConfig
) -> np.ndarray:
    tx, ty = _slide(float(pos[0]), float(pos[1]), float(delta[0]), float(delta[1]), radius, cfg)
    return np.array([tx, ty])


def _sample_free_position(
    rng: np.random.Generator,
    cfg: WorldConfig,
    radius: float,
    occupied: list[tuple[np.ndarray, float]],
) -> np.ndarray:
    """Uniform position with wall clearance, outside inflated barriers, off other bodies."""
    limit = cfg.half_side - radius
    if limit <= 0:
        raise ConfigError(f"arena side {cfg.arena_side} too small for body radius {radius}")
    for _ in range(_PLACEMENT_ATTEMPTS):
        p = rng.uniform(-limit, limit, size=2)
        if any(_inside_rect(p, rect, pad=radius) for rect in cfg.barrier_layout):
            continue
        if any(np.hypot(*(p - q)) < radius + r for q, r in occupied):
            continue
        return p
    raise ConfigError(
        "could not place an entity without overlap; arena too crowded "
        f"(radius {radius}, {len(occupied)} bodies placed)"
    )


# ---------------------------------------------------------------------------
# reset / step


def reset(config: WorldConfig, seed: int | None = None) -> WorldState:
    """Fresh world with uniformly random non-overlapping placements."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    occupied: list[tuple[np.ndarray, float]] = []

    prey = []
    for i in range(config.n_prey):
        p = _sample_free_position(rng, config, config.prey_radius, occupied)
        occupied.append((p, config.prey_radius))
        prey.append(AgentBody(position=p, heading=float(rng.uniform(0.0, 360.0)), id=i))

    predator = None
    if config.predator_present:
        p = _sample_free_position(rng, config, config.predator_radius, occupied)
        occupied.append((p, config.predator_radius))
        body = AgentBody(position=p, heading=float(rng.uniform(0.0, 360.0)), id=0)
        waypoint = _sample_free_position(rng, config, config.predator_radius, [])
        predator = PredatorState(
            body=body, mode="patrol", target_prey_id=None, patrol_waypoint=waypoint
        )

    points = []
    for polarity, count in (("positive", config.n_positive_points), ("negative", config.n_negative_points)):
        for _ in range(count):
            p = _sample_free_position(rng, config, config.point_radius, occupied)
            occupied.append((p, config.point_radius))
            points.append(PointObject(position=p, polarity=polarity, radius=config.point_radius))

    return WorldState(
        config=config,
        tick=0,
        prey=prey,
        predator=predator,
        points=points,
        rng=rng,
        event_log=[],
        prey_speed=np.zeros(config.n_prey),
    )


def _respawn_position(state: WorldState, radius: float, skip_point: PointObject | None = None) -> np.ndarray:
    cfg = state.config
    occupied: list[tuple[np.ndarray, float]] = [
        (b.position, cfg.prey_radius) for b in state.prey
    ]
    if state.predator is not None:
        occupied.append((state.predator.body.position, cfg.predator_radius))
    occupied.extend(
        (pt.position, pt.radius) for pt in state.points if pt is not skip_point
    )
    return _sample_free_position(state.rng, cfg, radius, occupied)


def step(
    state: WorldState, prey_actions: list[int] | np.ndarray
) -> tuple[WorldState, np.ndarray, list[RayObservation], list[Event]]:
    """Advance one tick: prey move, predator acts, pickups and catches resolve.

    Returns the mutated state, per-prey rewards, per-prey observations of the
    post-step world, and the events emitted this tick.
    """
    cfg = state.config
    space = prey_action_space()
    actions = np.asarray(prey_actions)
    if actions.shape != (len(state.prey),):
        raise InputError(
            f"expected {len(state.prey)} prey actions, got shape {actions.shape}"
        )
    tick = state.tick
    state.event_log = []
    rewards = np.zeros(len(state.prey))
    turn_step = cfg.prey_turn_speed * cfg.tick_dt
    move_step = cfg.prey_move_speed * cfg.tick_dt

    # Prey locomotion: turn, then move along the new heading.
    for body, joint in zip(state.prey, actions):
        joint = int(joint)
        if not 0 <= joint < space.n_joint:
            raise InputError(f"prey {body.id}: action index {joint} outside [0, {space.n_joint})")
        move, turn = space.decode(joint)
        if turn == 1:
            body.heading = (body.heading + turn_step) % 360.0
        elif turn == 2:
            body.heading = (body.heading - turn_step) % 360.0
        if move == 1:
            rad = math.radians(body.heading)
            tx, ty = _slide(
                float(body.position[0]),
                float(body.position[1]),
                move_step * math.cos(rad),
                move_step * math.sin(rad),
                cfg.prey_radius,
                cfg,
            )
            body.position = np.array([tx, ty])
        state.prey_speed[body.id] = float(move)

    if state.predator is not None:
        predator_step(state)

    # Point pickups: contact means center distance within summed radii. The
    # distance matrix only nominates candidates; each hit is re-checked
    # against live positions because earlier pickups respawn points.
    prey_pos = np.array([b.position for b in state.prey])
    if state.points:
        pt_pos = np.array([p.position for p in state.points])
        pt_radii = np.array([p.radius for p in state.points])
        d2 = ((prey_pos[:, None, :] - pt_pos[None, :, :]) ** 2).sum(axis=-1)
        candidates = d2 <= (cfg.prey_radius + pt_radii[None, :]) ** 2
        for i, j in zip(*np.nonzero(candidates)):
            body = state.prey[i]
            pt = state.points[j]
            if np.hypot(*(body.position - pt.position)) > cfg.prey_radius + pt.radius:
                continue
            if pt.polarity == "positive":
                rewards[body.id] += REWARD_POSITIVE
                state.event_log.append(Event(tick, EVENT_POSITIVE, body.id))
            else:
                rewards[body.id] += REWARD_NEGATIVE
                state.event_log.append(Event(tick, EVENT_NEGATIVE, body.id))
            pt.position = _respawn_position(state, pt.radius, skip_point=pt)

    # Predator contact: penalty plus teleport to a free spot; the run continues.
    if state.predator is not None:
        pred_pos = state.predator.body.position
        contact = cfg.prey_radius + cfg.predator_radius
        d2 = ((prey_pos - pred_pos[None, :]) ** 2).sum(axis=-1)
        for i in np.flatnonzero(d2 <= contact**2):
            body = state.prey[i]
            if np.hypot(*(body.position - pred_pos)) > contact:
                continue
            rewards[body.id] += REWARD_CAUGHT
            state.event_log.append(Event(tick, EVENT_CAUGHT, body.id))
            body.position = _respawn_position(state, cfg.prey_radius)

    state.tick += 1
    observations = observe_all(state)
    return state, rewards, observations, list(state.event_log)


# ---------------------------------------------------------------------------
# predator policy


def predator_can_see(state: WorldState, prey_id: int) -> bool:
    """True iff the prey is within view radius, inside the vision cone, and unoccluded."""
    if state.predator is None:
        raise ContractViolation("predator_can_see called with no predator in the world")
    pred = state.predator.body
    prey = state.prey[prey_id]
    offset = prey.position - pred.position
    dist = float(np.hypot(*offset))
    if dist > state.config.predator_view_radius:
        return False
    bearing = np.degrees(np.arctan2(offset[1], offset[0]))
    rel = (bearing - pred.heading + 180.0) % 360.0 - 180.0
    if abs(rel) > state.config.predator_view_angle / 2.0:
        return False
    return not any(
        segment_hits_rect(pred.position, prey.position, rect)
        for rect in state.config.barrier_layout
    )


def _visible_prey(state: WorldState) -> list[int]:
    """Indices of prey inside the predator's cone with a clear line of sight."""
    pred = state.predator.body
    positions = np.array([b.position for b in state.prey])
    offsets = positions - pred.position
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    bearing = np.degrees(np.arctan2(offsets[:, 1], offsets[:, 0]))
    rel = (bearing - pred.heading + 180.0) % 360.0 - 180.0
    near = (dist <= state.config.predator_view_radius) & (
        np.abs(rel) <= state.config.predator_view_angle / 2.0
    )
    return [
        int(i)
        for i in np.flatnonzero(near)
        if not any(
            segment_hits_rect(pred.position, state.prey[i].position, rect)
            for rect in state.config.barrier_layout
        )
    ]


def predator_step(state: WorldState) -> PredatorState:
    """Chase the nearest visible prey, otherwise patrol toward a random waypoint."""
    if state.predator is None:
        raise ContractViolation("predator_step called with no predator in the world")
    cfg = state.config
    pred = state.predator
    step_len = cfg.predator_move_speed * cfg.tick_dt

    visible = _visible_prey(state)
    if visible:
        dists = [float(np.hypot(*(state.prey[i].position - pred.body.position))) for i in visible]
        target = visible[int(np.argmin(dists))]  # argmin takes the lowest id on ties
        pred.mode = "chase"
        pred.target_prey_id = target
        goal = state.prey[target].position
    else:
        pred.mode = "patrol"
        pred.target_prey_id = None
        pred.ticks_since_waypoint += 1
        if pred.ticks_since_waypoint > _PATROL_STALL_TICKS:
            pred.patrol_waypoint = _sample_free_position(state.rng, cfg, cfg.predator_radius, [])
            pred.ticks_since_waypoint = 0
        goal = pred.patrol_waypoint

    offset = goal - pred.body.position
    dist = float(np.hypot(*offset))
    if dist > 1e-12:
        pred.body.heading = float(np.degrees(np.arctan2(offset[1], offset[0]))) % 360.0
        delta = offset if dist <= step_len else offset * (step_len / dist)
        pred.body.position = _move_with_collision(
            pred.body.position, delta, cfg.predator_radius, cfg
        )
    if pred.mode == "patrol" and float(np.hypot(*(pred.patrol_waypoint - pred.body.position))) <= 1e-9:
        pred.patrol_waypoint = _sample_free_position(state.rng, cfg, cfg.predator_radius, [])
        pred.ticks_since_waypoint = 0
    return pred


# ---------------------------------------------------------------------------
# perception


def _ray_circle_hits(
    origins: np.ndarray, dirs: np.ndarray, centers: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """Smallest non-negative ray parameter per (ray, circle); inf when missed.

    Rays starting inside a circle report t = 0.
    """
    oc = origins[:, None, :] - centers[None, :, :]  # (R, J, 2)
    b = np.einsum("rd,rjd->rj", dirs, oc)
    c0 = np.einsum("rjd,rjd->rj", oc, oc) - radii[None, :] ** 2
    disc = b * b - c0
    t = np.full(disc.shape, np.inf)
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    near = -b - sq
    far = -b + sq
    t = np.where(ok & (near >= 0.0), near, t)
    t = np.where(ok & (near < 0.0) & (far >= 0.0), 0.0, t)
    return t


def _ray_rect_hits(
    origins: np.ndarray, dirs: np.ndarray, rect: tuple[float, float, float, float]
) -> np.ndarray:
    """Entry parameter of each ray into the rectangle; inf when missed."""
    x0, y0, x1, y1 = rect
    lo = np.array([x0, y0])
    hi = np.array([x1, y1])
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo[None, :] - origins) / dirs
        t_hi = (hi[None, :] - origins) / dirs
    t_near = np.minimum(t_lo, t_hi)
    t_far = np.maximum(t_lo, t_hi)
    # Rays parallel to an axis miss unless the origin lies inside that slab.
    for axis in range(2):
        flat = dirs[:, axis] == 0.0
        inside = (origins[:, axis] > lo[axis]) & (origins[:, axis] < hi[axis])
        t_near[:, axis] = np.where(flat, np.where(inside, -np.inf, np.inf), t_near[:, axis])
        t_far[:, axis] = np.where(flat, np.where(inside, np.inf, -np.inf), t_far[:, axis])
    entry = t_near.max(axis=1)
    exit_ = t_far.min(axis=1)
    t = np.where((entry <= exit_) & (exit_ >= 0.0), np.maximum(entry, 0.0), np.inf)
    return t


def _ray_wall_exit(origins: np.ndarray, dirs: np.ndarray, half: float) -> np.ndarray:
    """Distance at which each interior ray reaches the arena boundary."""
    with np.errstate(divide="ignore"):
        t_pos = (half - origins) / dirs
        t_neg = (-half - origins) / dirs
    t_all = np.where(dirs > 0.0, t_pos, np.where(dirs < 0.0, t_neg, np.inf))
    return t_all.min(axis=1)


def _raycast_rows(state: WorldState, prey_indices: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Batched nearest-hit query for every ray of the given prey.

    Returns (one-hot kinds, normalized distances) of shape
    (n_prey, n_rays, N_HIT_KINDS) and (n_prey, n_rays). Each prey's own body
    is masked out of the circle set.
    """
    cfg = state.config
    n = len(prey_indices)
    n_rays = cfg.n_rays
    headings = np.array([state.prey[i].heading for i in prey_indices])
    positions = np.array([state.prey[i].position for i in prey_indices])
    half_fov = cfg.ray_fov_degrees / 2.0
    angles = headings[:, None] + np.linspace(-half_fov, half_fov, n_rays)[None, :]
    dirs = _heading_vector(angles).reshape(n * n_rays, 2)
    origins = np.repeat(positions, n_rays, axis=0)

    best_t = _ray_wall_exit(origins, dirs, cfg.half_side)
    best_kind = np.full(n * n_rays, HIT_WALL, dtype=np.int64)
    for rect in cfg.barrier_layout:
        t = _ray_rect_hits(origins, dirs, rect)
        best_t = np.where(t < best_t, t, best_t)
        # kind stays HIT_WALL

    centers = [pt.position for pt in state.points]
    radii = [pt.radius for pt in state.points]
    kinds = [HIT_POSITIVE if pt.polarity == "positive" else HIT_NEGATIVE for pt in state.points]
    n_points = len(centers)
    centers.extend(b.position for b in state.prey)
    radii.extend([cfg.prey_radius] * len(state.prey))
    kinds.extend([HIT_PREY] * len(state.prey))
    if state.predator is not None:
        centers.append(state.predator.body.position)
        radii.append(cfg.predator_radius)
        kinds.append(HIT_PREDATOR)

    t = _ray_circle_hits(origins, dirs, np.array(centers), np.array(radii))
    own_col = n_points + np.repeat(np.asarray(prey_indices, dtype=np.int64), n_rays)
    t[np.arange(n * n_rays), own_col] = np.inf
    j_best = t.argmin(axis=1)
    t_best = t[np.arange(n * n_rays), j_best]
    closer = t_best < best_t
    best_t = np.where(closer, t_best, best_t)
    best_kind = np.where(closer, np.array(kinds, dtype=np.int64)[j_best], best_kind)

    missed = best_t > cfg.ray_length
    best_kind = np.where(missed, HIT_NOTHING, best_kind)
    distance = np.where(missed, 1.0, best_t / cfg.ray_length)

    onehot = np.zeros((n * n_rays, N_HIT_KINDS))
    onehot[np.arange(n * n_rays), best_kind] = 1.0
    return onehot.reshape(n, n_rays, N_HIT_KINDS), distance.reshape(n, n_rays)


def ray_cast(state: WorldState, prey_id: int) -> RayObservation:
    """Fan of rays around the prey's heading; nearest hit wins, barriers occlude."""
    if not 0 <= prey_id < len(state.prey):
        raise InputError(f"prey_id {prey_id} out of range")
    onehot, distance = _raycast_rows(state, [prey_id])
    ego = np.array([state.prey_speed[prey_id], state.prey[prey_id].heading / 360.0])
    return RayObservation(hit_onehot=onehot[0], distance=distance[0], ego=ego)


def observe_all(state: WorldState) -> list[RayObservation]:
    indices = list(range(len(state.prey)))
    onehot, distance = _raycast_rows(state, indices)
    return [
        RayObservation(
            hit_onehot=onehot[i],
            distance=distance[i],
            ego=np.array([state.prey_speed[i], state.prey[i].heading / 360.0]),
        )
        for i in indices
    ]


def observation_matrix(observations: list[RayObservation]) -> np.ndarray:
    return np.stack([o.as_vector() for o in observations])
