"""Post-training evaluation and experiment statistics.

Runs a trained policy for a batch of independent seeded episodes, reduces
each run's event log to totals, scores runs with the weighted task-efficiency
measure (+1 per positive point, -0.2 per negative point, -1 per catch), and
compares conditions with a one-way ANOVA and Cohen's d. Occupancy heatmaps
come from a boundary-renormalized Gaussian kernel density over logged
positions: each sample deposits exactly unit mass inside the grid, so the
grid integrates to the sample count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import betainc, erf

from .errors import InputError, NumericsError, StructuralError
from .net import DenseNet, load_checkpoint
from .ppo import sample_actions
from .seeding import derive_seed
from .trajectory import TrajectoryTable, TrajectoryWriter
from .world import (
    EVENT_CAUGHT,
    EVENT_NEGATIVE,
    EVENT_POSITIVE,
    WorldConfig,
    observation_matrix,
    observe_all,
    prey_action_space,
    reset,
    step,
)

TASK_WEIGHT_POSITIVE = 1.0
TASK_WEIGHT_NEGATIVE = -0.2
TASK_WEIGHT_CAUGHT = -1.0

_TAG_EVAL_WORLD = 11
_TAG_EVAL_ACTIONS = 12


@dataclass
class RunRecord:
    run_id: int
    pos_total: float
    neg_total: float
    caught_total: float
    duration_steps: int

    def __post_init__(self) -> None:
        if min(self.pos_total, self.neg_total, self.caught_total) < 0:
            raise InputError("run totals must be non-negative")


def task_efficiency(rec: RunRecord) -> float:
    """Weighted run score: positives minus a fifth of negatives minus catches."""
    return (
        rec.pos_total * TASK_WEIGHT_POSITIVE
        + rec.neg_total * TASK_WEIGHT_NEGATIVE
        + rec.caught_total * TASK_WEIGHT_CAUGHT
    )


RUN_RECORD_HEADER = ["run_id", "pos_total", "neg_total", "caught_total", "duration_steps", "task_efficiency"]


def write_run_records(records: list[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_RECORD_HEADER)
        for r in records:
            writer.writerow(
                [r.run_id, repr(r.pos_total), repr(r.neg_total), repr(r.caught_total), r.duration_steps, repr(task_efficiency(r))]
            )


def read_run_records(path) -> list[RunRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RUN_RECORD_HEADER:
            raise StructuralError(f"{path}: unexpected run-record header {header}")
        for raw in reader:
            records.append(
                RunRecord(int(raw[0]), float(raw[1]), float(raw[2]), float(raw[3]), int(raw[4]))
            )
    return records


# ---------------------------------------------------------------------------
# evaluation runs


def evaluate_condition(
    checkpoint,
    world_cfg: WorldConfig,
    n_runs: int = 50,
    duration: int = 5000,
    greedy: bool = False,
    seed: int = 0,
    trajectory_path=None,
    trajectory_kinds: tuple[str, ...] = ("prey", "predator"),
) -> tuple[list[RunRecord], Path | None]:
    """Run the policy n_runs times for `duration` ticks each; one record per run.

    `checkpoint` is a file path or an already-loaded DenseNet. Actions are
    sampled from the policy by default; greedy switches to argmax. The world
    config decides predator presence at test time, independent of how the
    policy was trained. When trajectory_path is set, every run's entity
    positions stream into one trajectory CSV.
    """
    if isinstance(checkpoint, DenseNet):
        net = checkpoint
    else:
        net, _, _, _ = load_checkpoint(checkpoint)
    n_actions = prey_action_space().n_joint
    if net.input_dim != world_cfg.obs_dim or net.policy_dim != n_actions:
        raise StructuralError(
            f"checkpoint net ({net.input_dim} -> {net.policy_dim}) does not match "
            f"world ({world_cfg.obs_dim} -> {n_actions})"
        )

    writer = None
    traj_fh = None
    if trajectory_path is not None:
        trajectory_path = Path(trajectory_path)
        traj_fh = open(trajectory_path, "w", newline="")
        writer = TrajectoryWriter(traj_fh, kinds=trajectory_kinds)

    records = []
    try:
        for run in range(n_runs):
            state = reset(world_cfg, derive_seed(seed, _TAG_EVAL_WORLD, run))
            rng = np.random.default_rng(derive_seed(seed, _TAG_EVAL_ACTIONS, run))
            obs = observation_matrix(observe_all(state))
            counts = {EVENT_POSITIVE: 0, EVENT_NEGATIVE: 0, EVENT_CAUGHT: 0}
            for tick in range(duration):
                actions, _, _ = sample_actions(net, obs, rng, greedy=greedy)
                _, _, observations, events = step(state, actions)
                obs = observation_matrix(observations)
                for ev in events:
                    counts[ev.kind] += 1
                if writer is not None:
                    writer.record(run, tick, state, events)
            records.append(
                RunRecord(
                    run_id=run,
                    pos_total=counts[EVENT_POSITIVE],
                    neg_total=counts[EVENT_NEGATIVE],
                    caught_total=counts[EVENT_CAUGHT],
                    duration_steps=duration,
                )
            )
    finally:
        if traj_fh is not None:
            traj_fh.close()
    return records, trajectory_path


# ---------------------------------------------------------------------------
# condition summaries


@dataclass
class ConditionSummary:
    condition_id: str
    n_runs: int
    pos_mean: float
    pos_std: float
    neg_mean: float
    neg_std: float
    caught_mean: float
    caught_std: float
    task_efficiency_mean: float
    task_efficiency_std: float


def summarize_condition(condition_id: str, records: list[RunRecord]) -> ConditionSummary:
    """Mean and sample (n-1) standard deviation of every run variable."""
    if len(records) < 2:
        raise InputError("need at least two runs to summarize a condition")
    pos = np.array([r.pos_total for r in records])
    neg = np.array([r.neg_total for r in records])
    caught = np.array([r.caught_total for r in records])
    eff = np.array([task_efficiency(r) for r in records])
    return ConditionSummary(
        condition_id=condition_id,
        n_runs=len(records),
        pos_mean=float(pos.mean()),
        pos_std=float(pos.std(ddof=1)),
        neg_mean=float(neg.mean()),
        neg_std=float(neg.std(ddof=1)),
        caught_mean=float(caught.mean()),
        caught_std=float(caught.std(ddof=1)),
        task_efficiency_mean=float(eff.mean()),
        task_efficiency_std=float(eff.std(ddof=1)),
    )


SUMMARY_HEADER = [
    "condition_id",
    "n_runs",
    "pos_mean",
    "pos_std",
    "neg_mean",
    "neg_std",
    "caught_mean",
    "caught_std",
    "task_efficiency_mean",
    "task_efficiency_std",
]


def write_summary_csv(summaries: list[ConditionSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for s in summaries:
            writer.writerow(
                [s.condition_id, s.n_runs]
                + [
                    repr(v)
                    for v in (
                        s.pos_mean,
                        s.pos_std,
                        s.neg_mean,
                        s.neg_std,
                        s.caught_mean,
                        s.caught_std,
                        s.task_efficiency_mean,
                        s.task_efficiency_std,
                    )
                ]
            )


# ---------------------------------------------------------------------------
# ANOVA and effect size


@dataclass
class AnovaResult:
    f_score: float
    p_value: float
    df_between: int
    df_within: int


def one_way_anova(groups: list[np.ndarray]) -> AnovaResult:
    """Between/within sum-of-squares decomposition with an F-distribution p-value.

    Zero within-group variance yields F = 0 when the means agree and an
    infinite-F result (p = 0) when they differ. The p-value comes from the
    regularized incomplete beta function and is reported as-is; with large
    samples it goes to zero and says little by itself.
    """
    if len(groups) < 2 or any(len(g) < 2 for g in groups):
        raise InputError("one-way ANOVA needs >= 2 groups with >= 2 samples each")
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    sizes = np.array([len(g) for g in groups])
    means = np.array([g.mean() for g in groups])
    n_total = int(sizes.sum())
    grand = float(np.concatenate(groups).mean())
    ss_between = float((sizes * (means - grand) ** 2).sum())
    ss_within = float(sum(((g - m) ** 2).sum() for g, m in zip(groups, means)))
    df_between = len(groups) - 1
    df_within = n_total - len(groups)
    if ss_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(0.0, 1.0, df_between, df_within)
        return AnovaResult(math.inf, 0.0, df_between, df_within)
    f = (ss_between / df_between) / (ss_within / df_within)
    p = float(betainc(df_within / 2.0, df_between / 2.0, df_within / (df_within + df_between * f)))
    return AnovaResult(f, p, df_between, df_within)


def cohens_d(g1: np.ndarray, g2: np.ndarray) -> float:
    """Standardized mean difference with a pooled sample standard deviation.

    Equal-sized groups pool as sqrt((s1^2 + s2^2) / 2); unequal sizes use the
    df-weighted pooled variance. Zero pooled spread returns NaN (undefined).
    """
    g1 = np.asarray(g1, dtype=np.float64)
    g2 = np.asarray(g2, dtype=np.float64)
    if len(g1) < 2 or len(g2) < 2:
        raise InputError("cohens_d needs >= 2 samples per group")
    v1, v2 = g1.var(ddof=1), g2.var(ddof=1)
    n1, n2 = len(g1), len(g2)
    if n1 == n2:
        pooled = math.sqrt((v1 + v2) / 2.0)
    else:
        pooled = math.sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2))
    if pooled == 0.0:
        return math.nan
    return float((g1.mean() - g2.mean()) / pooled)


STATS_HEADER = ["pairing", "mean_1", "mean_2", "f_score", "p_value", "cohens_d"]


def write_stats_csv(rows: list[tuple[str, np.ndarray, np.ndarray]], path) -> None:
    """One line per pairing: means, F, p, and d for the two groups."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_HEADER)
        for label, g1, g2 in rows:
            res = one_way_anova([g1, g2])
            d = cohens_d(g1, g2)
            writer.writerow(
                [label, repr(float(np.mean(g1))), repr(float(np.mean(g2))), repr(res.f_score), repr(res.p_value), repr(d)]
            )


# ---------------------------------------------------------------------------
# occupancy heatmaps


@dataclass(eq=False)
class KdeGrid:
    grid: np.ndarray  # (W, H) densities, x index first
    bandwidth: float
    entity_kind: str
    extent: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    n_samples: int

    @property
    def cell_area(self) -> float:
        xmin, xmax, ymin, ymax = self.extent
        w, h = self.grid.shape
        return ((xmax - xmin) / w) * ((ymax - ymin) / h)


def scott_bandwidth(positions: np.ndarray) -> float:
    """Scott's rule for 2D data with a pooled per-axis sample spread."""
    n = len(positions)
    spread = math.sqrt((positions[:, 0].var(ddof=1) + positions[:, 1].var(ddof=1)) / 2.0)
    return spread * n ** (-1.0 / 6.0)


def kde_occupancy(
    trajectories,
    entity_kind: str,
    bandwidth: float | None = None,
    grid_dims: tuple[int, int] = (64, 64),
    extent: tuple[float, float, float, float] | None = None,
) -> KdeGrid:
    """Gaussian-kernel occupancy density on a W x H grid.

    `trajectories` is a TrajectoryTable (filtered to entity_kind) or an
    (n, 2) position array. Per-cell values are exact kernel integrals over
    the cell with reflection at the grid boundary (unbiased for flat
    density), renormalized per sample to the mass falling inside the grid,
    so sum(grid) * cell_area equals the number of samples.
    """
    if isinstance(trajectories, TrajectoryTable):
        positions = trajectories.positions(entity_kind)
    else:
        positions = np.asarray(trajectories, dtype=np.float64)
    if positions.size == 0:
        raise InputError(f"no trajectory samples for entity kind {entity_kind!r}")
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise StructuralError(f"positions must be (n, 2), got {positions.shape}")
    if bandwidth is None:
        bandwidth = scott_bandwidth(positions)
    if bandwidth <= 0:
        raise InputError(f"bandwidth must be positive, got {bandwidth}")
    if extent is None:
        extent = (
            float(positions[:, 0].min()),
            float(positions[:, 0].max()),
            float(positions[:, 1].min()),
            float(positions[:, 1].max()),
        )
    xmin, xmax, ymin, ymax = extent
    if not (xmax > xmin and ymax > ymin):
        raise InputError(f"degenerate extent {extent}")
    w, h = grid_dims
    x_edges = np.linspace(xmin, xmax, w + 1)
    y_edges = np.linspace(ymin, ymax, h + 1)

    scale = bandwidth * math.sqrt(2.0)

    def cell_masses(edges, coords, lo, hi):
        # kernel at the sample plus its two boundary reflections
        cdf = 0.5 * (1.0 + erf((edges[None, :] - coords) / scale))
        cdf += 0.5 * (1.0 + erf((edges[None, :] - (2.0 * lo - coords)) / scale))
        cdf += 0.5 * (1.0 + erf((edges[None, :] - (2.0 * hi - coords)) / scale))
        return np.diff(cdf, axis=1)

    mass = np.zeros((w, h))
    for start in range(0, len(positions), 1024):
        chunk = positions[start : start + 1024]
        px = cell_masses(x_edges, chunk[:, 0:1], xmin, xmax)  # (chunk, W)
        py = cell_masses(y_edges, chunk[:, 1:2], ymin, ymax)
        in_grid = px.sum(axis=1) * py.sum(axis=1)
        if np.any(in_grid <= 0.0):
            raise NumericsError("a sample carries no mass inside the grid extent")
        mass += (px / in_grid[:, None]).T @ py

    cell_area = ((xmax - xmin) / w) * ((ymax - ymin) / h)
    return KdeGrid(
        grid=mass / cell_area,
        bandwidth=float(bandwidth),
        entity_kind=entity_kind,
        extent=extent,
        n_samples=len(positions),
    )


def write_grid_text(kde: KdeGrid, path) -> None:
    header = (
        f"entity_kind={kde.entity_kind} bandwidth={kde.bandwidth!r} "
        f"extent={kde.extent} n_samples={kde.n_samples} layout=rows-are-x"
    )
    np.savetxt(path, kde.grid, header=header)


def write_grid_pgm(kde: KdeGrid, path) -> None:
    """8-bit ASCII PGM raster for a quick look; rows run from ymax down to ymin."""
    top = kde.grid.max()
    pixels = np.zeros_like(kde.grid, dtype=np.int64)
    if top > 0:
        pixels = np.rint(255.0 * kde.grid / top).astype(np.int64)
    raster = pixels.T[::-1]  # (H, W), y flipped for image orientation
    with open(path, "w") as fh:
        fh.write(f"P2\n{raster.shape[1]} {raster.shape[0]}\n255\n")
        for row in raster:
            fh.write(" ".join(str(v) for v in row) + "\n")
