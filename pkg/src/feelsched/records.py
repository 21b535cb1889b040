"""CSV/JSON writers for experiment telemetry.  Floats are written with repr so they read back exactly."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .simulator import ExperimentResult

ROUND_COLUMNS = (
    "experiment_id",
    "scheduler",
    "round",
    "accuracy",
    "round_duration_s",
    "round_energy_J",
    "num_selected",
    "cumulative_energy_J",
    "cumulative_time_s",
)
CURVE_COLUMNS = ("round", "mean_accuracy", "std_accuracy", "mean_energy", "mean_duration")


@dataclass(frozen=True)
class OutputRecord:
    experiment_id: str
    scheduler: str
    round: int
    accuracy: float
    round_duration_s: float
    round_energy_J: float
    num_selected: int
    cumulative_energy_J: float
    cumulative_time_s: float


def experiment_id(result: ExperimentResult) -> str:
    return f"{result.scheduler}-seed{result.seed}"


def records(result: ExperimentResult) -> list[OutputRecord]:
    eid = experiment_id(result)
    return [
        OutputRecord(
            eid, result.scheduler, m.round, m.accuracy, m.duration_s, m.round_energy_j,
            m.num_selected, m.cumulative_energy_j, m.cumulative_time_s,
        )
        for m in result.rounds
    ]


def _cell(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_rounds_csv(rows: list[OutputRecord], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ROUND_COLUMNS)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in ROUND_COLUMNS])


def read_rounds_csv(path) -> list[OutputRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != ROUND_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            OutputRecord(
                row["experiment_id"], row["scheduler"], int(row["round"]), float(row["accuracy"]),
                float(row["round_duration_s"]), float(row["round_energy_J"]), int(row["num_selected"]),
                float(row["cumulative_energy_J"]), float(row["cumulative_time_s"]),
            )
            for row in reader
        ]


def write_curves_csv(curves: dict, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for i in range(len(curves["round"])):
            w.writerow([str(int(curves["round"][i]))] + [_cell(curves[c][i]) for c in CURVE_COLUMNS[1:]])


def write_json(obj, path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
