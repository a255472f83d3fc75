"""
Stage timing reports and old-vs-new comparison.

Report file: four lines ``<stage_name> <seconds>`` with 4 decimals, in the
order of :data:`STAGES`.
"""

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from ..base.exceptions import DataFormatError, IoFailure, NonPositiveTime
from ..base.types import PathLike, Seconds

STAGES = (
    "detect_predict_mask",
    "detect_predict_nomask",
    "face_recognition",
    "person_identification",
)


class TimingReport(BaseModel):
    """Mean seconds per invocation of each stage."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    detect_predict_mask_s: Seconds = Field(default=0.0, ge=0.0)
    detect_predict_nomask_s: Seconds = Field(default=0.0, ge=0.0)
    face_recognition_s: Seconds = Field(default=0.0, ge=0.0)
    person_identification_s: Seconds = Field(default=0.0, ge=0.0)

    def value(self, stage: str) -> Seconds:
        return float(getattr(self, f"{stage}_s"))

    def to_text(self) -> str:
        return "".join(f"{stage} {self.value(stage):.4f}\n" for stage in STAGES)


class TimingAccumulator:
    """Collects per-invocation durations; the report holds their means."""

    def __init__(self) -> None:
        self._totals: dict[str, float] = defaultdict(float)
        self._counts: dict[str, int] = defaultdict(int)

    def add(self, stage: str, seconds: Seconds) -> None:
        if stage not in STAGES:
            raise KeyError(stage)
        self._totals[stage] += seconds
        self._counts[stage] += 1

    def count(self, stage: str) -> int:
        return self._counts[stage]

    def report(self) -> TimingReport:
        means = {
            f"{stage}_s": (self._totals[stage] / self._counts[stage] if self._counts[stage] else 0.0)
            for stage in STAGES
        }
        return TimingReport(**means)


def parse_report(text: str, path: str | None = None) -> TimingReport:
    values: dict[str, float] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if len(parts) != 2 or parts[0] not in STAGES:
                raise ValueError(f"expected '<stage> <seconds>' with stage in {STAGES}")
            if parts[0] in values:
                raise ValueError(f"duplicate stage {parts[0]}")
            values[parts[0]] = float(parts[1])
        except ValueError as e:
            raise DataFormatError(str(e), path=path, line_number=number, cause=e) from e
    missing = [s for s in STAGES if s not in values]
    if missing:
        raise DataFormatError(f"Missing stages: {', '.join(missing)}", path=path)
    try:
        return TimingReport(**{f"{k}_s": v for k, v in values.items()})
    except PydanticValidationError as e:
        raise DataFormatError("Stage times must be finite and non-negative", path=path, cause=e) from e


def load_report(path: PathLike) -> TimingReport:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read timing report: {e}", path=str(path), cause=e) from e
    return parse_report(text, path=str(path))


def write_report(report: TimingReport, path: PathLike) -> None:
    try:
        Path(path).write_text(report.to_text(), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write timing report: {e}", path=str(path), cause=e) from e


@dataclass(frozen=True)
class StageComparison:
    stage: str
    old_s: Seconds
    new_s: Seconds
    speedup: float  # old / new
    delta_s: Seconds  # old - new

    @property
    def anomalous(self) -> bool:
        """The new system is slower on this stage."""
        return self.speedup < 1.0


def compare_reports(old: TimingReport, new: TimingReport) -> list[StageComparison]:
    """
    Per-stage ``old / new`` speedups and absolute deltas. Slower stages are
    kept (and flagged through :attr:`StageComparison.anomalous`), never dropped.

    Raises:
        NonPositiveTime: If any baseline value is not positive
    """
    rows = []
    for stage in STAGES:
        o, n = old.value(stage), new.value(stage)
        if o <= 0:
            raise NonPositiveTime(stage, o)
        speedup = o / n if n > 0 else float("inf")
        rows.append(StageComparison(stage, o, n, speedup, o - n))
    return rows
