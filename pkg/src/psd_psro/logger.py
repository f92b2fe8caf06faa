import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence


METRICS_HEADER = [
    "iter", "exploitability", "pe", "oracle_obj_p1", "oracle_obj_p2",
    "pop_size_p1", "pop_size_p2", "eff_div", "exp_card", "time_ms",
]

EVAL_HEADER = ["iter", "exploitability", "pe", "br_value_p1", "br_value_p2",
               "pop_size_p1", "pop_size_p2", "time_ms"]

ORACLE_HEADER = ["iter", "player", "step", "objective", "utility", "distance", "grad_norm"]

ABLATION_HEADER = ["lambda", "seeds", "exploitability_x100_mean", "exploitability_x100_stderr"]


@dataclass(frozen=True)
class IterationLog:
    iteration: int
    exploitability: Optional[float]
    pe: Optional[float]
    oracle_obj_p1: Optional[float]
    oracle_obj_p2: Optional[float]
    pop_size_p1: int
    pop_size_p2: int
    eff_div: Optional[float] = None
    exp_card: Optional[float] = None
    time_ms: Optional[float] = None

    def row(self) -> list:
        return [self.iteration, self.exploitability, self.pe, self.oracle_obj_p1,
                self.oracle_obj_p2, self.pop_size_p1, self.pop_size_p2,
                self.eff_div, self.exp_card, self.time_ms]


def format_field(value: Any) -> str:
    # missing metrics stay empty so columns never shift
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(float(value))
    return str(value)


def ensure_csv(path: Path, header: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not path.exists():
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)


def append_row(path: Path, header: Sequence[str], values: Iterable[Any]) -> None:
    ensure_csv(path, header)
    with path.open("a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([format_field(v) for v in values])


def append_iteration(path: Path, log: IterationLog) -> IterationLog:
    append_row(path, METRICS_HEADER, log.row())
    return log


def read_rows(path: Path) -> list[Mapping[str, str]]:
    with path.open("r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def parse_optional(value: str) -> Optional[float]:
    value = (value or "").strip()
    return float(value) if value else None
