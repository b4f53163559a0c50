"""End-to-end training orchestration for the three standard scenarios.

Every update cycle draws freshly randomized worlds and all randomness is
keyed on (run seed, cycle index), so a checkpoint taken at a cycle boundary
(parameters, optimizer moments, seed, global step) replays the remainder of
the run step-for-step. Global step counts environment steps summed across
prey streams.

Scenario table: 1 trains 580k steps with the predator, 2 trains 1M steps
with the predator, 3 trains 1M steps without it. Everything else is shared.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, StructuralError
from .net import AdamState, LrSchedule, init_net, load_checkpoint, lr_at, save_checkpoint
from .ppo import ActorWorld, PpoHyperparams, RolloutBuffer, collect_rollout, ppo_update
from .seeding import derive_seed
from .world import WorldConfig, prey_action_space, reset

SCENARIO_TABLE: dict[int, tuple[int, bool]] = {
    1: (580_000, True),
    2: (1_000_000, True),
    3: (1_000_000, False),
}

# Stream tags for deriving independent RNG seeds from (run_seed, cycle, ...).
_TAG_INIT = 1
_TAG_WORLD = 2
_TAG_ACTIONS = 3
_TAG_SHUFFLE = 4
_TAG_EPISODE = 5


@dataclass
class ScenarioConfig:
    scenario_id: int = 3
    predator_in_training: bool = False
    hyperparams: PpoHyperparams = field(default_factory=PpoHyperparams)
    world: WorldConfig = field(default_factory=WorldConfig)
    seed: int = 0
    hidden_units: int = 128
    num_layers: int = 2
    n_worlds: int = 1
    checkpoint_interval: int = 50_000

    @property
    def max_steps(self) -> int:
        return self.hyperparams.max_steps

    def __post_init__(self) -> None:
        if self.scenario_id not in SCENARIO_TABLE:
            raise ConfigError(f"scenario_id must be 1, 2 or 3, got {self.scenario_id}")
        if self.n_worlds <= 0 or self.checkpoint_interval <= 0:
            raise ConfigError("n_worlds and checkpoint_interval must be positive")


def scenario_defaults(scenario_id: int, seed: int = 0) -> ScenarioConfig:
    """Canonical config for one scenario; only (max_steps, predator presence) vary."""
    if scenario_id not in SCENARIO_TABLE:
        raise ConfigError(f"scenario_id must be 1, 2 or 3, got {scenario_id}")
    max_steps, predator = SCENARIO_TABLE[scenario_id]
    return ScenarioConfig(
        scenario_id=scenario_id,
        predator_in_training=predator,
        hyperparams=PpoHyperparams(max_steps=max_steps),
        seed=seed,
    )


METRICS_HEADER = [
    "global_step",
    "cumulative_reward_mean",
    "policy_loss",
    "value_loss",
    "entropy",
    "extrinsic_reward_mean",
    "value_estimate_mean",
]


@dataclass
class MetricsRow:
    global_step: int
    cumulative_reward_mean: float
    policy_loss: float
    value_loss: float
    entropy: float
    extrinsic_reward_mean: float
    value_estimate_mean: float

    def as_csv_row(self) -> list[str]:
        return [str(self.global_step)] + [
            repr(v)
            for v in (
                self.cumulative_reward_mean,
                self.policy_loss,
                self.value_loss,
                self.entropy,
                self.extrinsic_reward_mean,
                self.value_estimate_mean,
            )
        ]


@dataclass
class TrainingMetrics:
    rows: list[MetricsRow] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_HEADER)
            for row in self.rows:
                writer.writerow(row.as_csv_row())

    @classmethod
    def from_csv(cls, path) -> "TrainingMetrics":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != METRICS_HEADER:
                raise StructuralError(f"{path}: unexpected metrics header {header}")
            for raw in reader:
                rows.append(MetricsRow(int(raw[0]), *(float(v) for v in raw[1:])))
        return cls(rows=rows)


def steps_per_cycle(cfg: ScenarioConfig) -> int:
    """Env steps consumed by one collect/update cycle; constant for a config."""
    hp = cfg.hyperparams
    per_sweep = cfg.n_worlds * cfg.world.n_prey * hp.time_horizon
    sweeps = math.ceil(hp.buffer_size / per_sweep)
    return sweeps * per_sweep


def run_training(
    cfg: ScenarioConfig,
    out_dir,
    resume_from=None,
) -> tuple[Path, TrainingMetrics]:
    """Train until global step reaches max_steps; returns (final checkpoint, metrics).

    Writes metrics.csv incrementally and a checkpoint whenever the global
    step crosses a checkpoint_interval boundary, plus a final one. Resuming
    from any written checkpoint reproduces the uninterrupted run exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hp = cfg.hyperparams
    train_world = replace(cfg.world, predator_present=cfg.predator_in_training)
    n_actions = prey_action_space().n_joint

    if resume_from is not None:
        net, adam, run_seed, global_step = load_checkpoint(resume_from)
        if net.input_dim != train_world.obs_dim or net.policy_dim != n_actions:
            raise StructuralError(
                f"checkpoint net ({net.input_dim} -> {net.policy_dim}) does not match "
                f"world ({train_world.obs_dim} -> {n_actions})"
            )
    else:
        net = init_net(
            train_world.obs_dim,
            n_actions,
            hidden_units=cfg.hidden_units,
            num_layers=cfg.num_layers,
            seed=derive_seed(cfg.seed, _TAG_INIT),
        )
        adam = AdamState.for_net(net)
        run_seed = cfg.seed
        global_step = 0

    schedule = LrSchedule(initial_rate=hp.learning_rate, max_steps=hp.max_steps)
    cycle_steps = steps_per_cycle(cfg)
    if global_step % cycle_steps != 0:
        raise StructuralError(
            f"checkpoint step {global_step} is not a cycle boundary (cycle={cycle_steps})"
        )
    update_idx = global_step // cycle_steps
    steps_per_tick = cfg.n_worlds * train_world.n_prey

    metrics = TrainingMetrics()
    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", newline="") as metrics_fh:
        writer = csv.writer(metrics_fh)
        writer.writerow(METRICS_HEADER)

        while global_step < hp.max_steps:
            actors = [
                ActorWorld.from_state(
                    reset(train_world, derive_seed(run_seed, _TAG_WORLD, update_idx, w))
                )
                for w in range(cfg.n_worlds)
            ]
            episode_counts = [0] * cfg.n_worlds

            def reset_world(idx: int):
                episode_counts[idx] += 1
                return reset(
                    train_world,
                    derive_seed(run_seed, _TAG_EPISODE, update_idx, idx, episode_counts[idx]),
                )

            action_rng = np.random.default_rng(derive_seed(run_seed, _TAG_ACTIONS, update_idx))
            buffer = RolloutBuffer(hp.buffer_size)
            while not buffer.is_full():
                collect_rollout(
                    net, actors, hp.time_horizon, hp, action_rng, buffer, reset_world
                )
                global_step += steps_per_tick * hp.time_horizon
            for actor in actors:
                actor.finish_episode()
            episode_returns = [r for a in actors for r in a.completed_episode_returns]

            lr = lr_at(schedule, min(global_step, hp.max_steps))
            shuffle_rng = np.random.default_rng(derive_seed(run_seed, _TAG_SHUFFLE, update_idx))
            stats = ppo_update(net, adam, buffer, hp, lr, shuffle_rng)
            update_idx += 1

            reward_mean = float(np.mean(episode_returns))
            prev_step = global_step - cycle_steps
            for boundary in range(
                (prev_step // hp.summary_freq + 1) * hp.summary_freq,
                global_step + 1,
                hp.summary_freq,
            ):
                row = MetricsRow(
                    global_step=boundary,
                    cumulative_reward_mean=reward_mean,
                    policy_loss=stats.policy_loss,
                    value_loss=stats.value_loss,
                    entropy=stats.entropy,
                    extrinsic_reward_mean=reward_mean,
                    value_estimate_mean=stats.value_estimate_mean,
                )
                metrics.rows.append(row)
                writer.writerow(row.as_csv_row())
            metrics_fh.flush()

            if prev_step // cfg.checkpoint_interval != global_step // cfg.checkpoint_interval:
                save_checkpoint(
                    out_dir / f"checkpoint_{global_step:010d}.ckpt", net, adam, run_seed, global_step
                )

    final_path = out_dir / "checkpoint_final.ckpt"
    save_checkpoint(final_path, net, adam, run_seed, global_step)
    return final_path, metrics
