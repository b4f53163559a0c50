"""Trajectory logs: per-entity per-tick CSV rows, plus replay frame rendering.

Schema (one row per entity per tick):
    run_id, tick, entity_kind, entity_id, x, y, heading, event
entity_kind is one of prey, predator, point_positive, point_negative. The
event column is empty except on prey rows whose prey emitted events that
tick; multiple events are joined with ';'.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .world import Event, WorldState

CSV_HEADER = ["run_id", "tick", "entity_kind", "entity_id", "x", "y", "heading", "event"]

ALL_KINDS = ("prey", "predator", "points")


class TrajectoryWriter:
    """Streams rows to an open CSV file; caller owns the file handle."""

    def __init__(self, fh, kinds: tuple[str, ...] = ALL_KINDS):
        self._writer = csv.writer(fh)
        self._writer.writerow(CSV_HEADER)
        self.kinds = kinds

    def record(self, run_id: int, tick: int, state: WorldState, events: list[Event]) -> None:
        by_prey: dict[int, list[str]] = {}
        for ev in events:
            by_prey.setdefault(ev.prey_id, []).append(ev.kind)
        rows = []
        if "prey" in self.kinds:
            for body in state.prey:
                rows.append(
                    [
                        run_id,
                        tick,
                        "prey",
                        body.id,
                        f"{body.position[0]:.6f}",
                        f"{body.position[1]:.6f}",
                        f"{body.heading:.4f}",
                        ";".join(by_prey.get(body.id, [])),
                    ]
                )
        if "predator" in self.kinds and state.predator is not None:
            b = state.predator.body
            rows.append(
                [run_id, tick, "predator", 0, f"{b.position[0]:.6f}", f"{b.position[1]:.6f}", f"{b.heading:.4f}", ""]
            )
        if "points" in self.kinds:
            for idx, pt in enumerate(state.points):
                rows.append(
                    [
                        run_id,
                        tick,
                        f"point_{pt.polarity}",
                        idx,
                        f"{pt.position[0]:.6f}",
                        f"{pt.position[1]:.6f}",
                        "0.0",
                        "",
                    ]
                )
        self._writer.writerows(rows)


@dataclass(eq=False)
class TrajectoryTable:
    """Columnar view of a trajectory CSV."""

    run_id: np.ndarray
    tick: np.ndarray
    entity_kind: np.ndarray
    entity_id: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    event: np.ndarray

    def __len__(self) -> int:
        return len(self.run_id)

    @classmethod
    def from_csv(cls, path) -> "TrajectoryTable":
        cols: list[list] = [[] for _ in CSV_HEADER]
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise InputError(f"{path}: expected trajectory header {CSV_HEADER}, got {header}")
            for row in reader:
                for col, value in zip(cols, row):
                    col.append(value)
        return cls(
            run_id=np.array(cols[0], dtype=np.int64),
            tick=np.array(cols[1], dtype=np.int64),
            entity_kind=np.array(cols[2], dtype=str),
            entity_id=np.array(cols[3], dtype=np.int64),
            x=np.array(cols[4], dtype=np.float64),
            y=np.array(cols[5], dtype=np.float64),
            heading=np.array(cols[6], dtype=np.float64),
            event=np.array(cols[7], dtype=str),
        )

    def positions(self, entity_kind: str) -> np.ndarray:
        """(n, 2) positions of all rows of one entity kind, across every run."""
        mask = self.entity_kind == entity_kind
        return np.column_stack([self.x[mask], self.y[mask]])

    def runs(self) -> np.ndarray:
        return np.unique(self.run_id)


def replay_export(table: TrajectoryTable, run_id: int, tick_range: tuple[int, int]) -> str:
    """Render inclusive [lo, hi] ticks of one run as plain-text frames.

    Each frame lists every logged entity's position/heading followed by the
    tick's events, for stepping through an encounter by hand.
    """
    in_run = table.run_id == run_id
    if not in_run.any():
        raise InputError(f"run {run_id} not present in trajectory log")
    lo, hi = int(tick_range[0]), int(tick_range[1])
    ticks = table.tick[in_run]
    if lo > hi or lo < ticks.min() or hi > ticks.max():
        raise InputError(
            f"tick range [{lo}, {hi}] outside run {run_id}'s range "
            f"[{ticks.min()}, {ticks.max()}]"
        )
    lines: list[str] = []
    for t in range(lo, hi + 1):
        mask = in_run & (table.tick == t)
        lines.append(f"tick {t}")
        events: list[str] = []
        for i in np.flatnonzero(mask):
            lines.append(
                f"  {table.entity_kind[i]} {table.entity_id[i]}"
                f"  x={table.x[i]:.6f} y={table.y[i]:.6f} heading={table.heading[i]:.4f}"
            )
            if table.event[i]:
                for kind in table.event[i].split(";"):
                    events.append(f"{kind} prey={table.entity_id[i]}")
        for ev in events:
            lines.append(f"  event {ev}")
        lines.append("")
    return "\n".join(lines)
