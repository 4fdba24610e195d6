"""Historical time series: CSV ingestion, validation, slicing and bundled data.

Times are years on the real line (500 BCE is -500). A series is an immutable
value; every operation returns a new one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable, Union

import numpy as np

from .errors import MalformedRow, NonMonotonicTime, NonPositiveValue, TooFewPoints

# units whose values must be strictly positive (counts and rates)
POSITIVE_UNITS = frozenset(
    {"count", "persons", "millions", "rate", "bits/s", "per_year", "index"}
)

# doubling-time profiles mark zero growth with +inf
INF_OK_UNITS = frozenset({"years"})

MIN_FIT_POINTS = 3


@dataclass(frozen=True)
class TimeSeries:
    name: str
    unit: str
    points: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        pts = tuple((float(t), float(v)) for t, v in self.points)
        object.__setattr__(self, "points", pts)
        for t, v in pts:
            inf_ok = v == math.inf and self.unit in INF_OK_UNITS
            if not (math.isfinite(t) and (math.isfinite(v) or inf_ok)):
                raise MalformedRow(f"non-finite point ({t}, {v}) in {self.name!r}")
            if self.unit in POSITIVE_UNITS and v <= 0:
                raise NonPositiveValue(
                    f"{self.name!r} has unit {self.unit!r} but value {v} at t={t}"
                )
        for (t1, _), (t2, _) in zip(pts, pts[1:]):
            if not t2 > t1:
                raise NonMonotonicTime(f"t={t2} does not follow t={t1}")

    @classmethod
    def from_arrays(cls, t: Iterable[float], v: Iterable[float], name="", unit=""):
        return cls(name, unit, tuple(zip(t, v)))

    def __len__(self):
        return len(self.points)

    @property
    def t(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)

    @property
    def span(self) -> float:
        return self.points[-1][0] - self.points[0][0] if self.points else 0.0

    def require_fit_ready(self, n: int = MIN_FIT_POINTS) -> None:
        if len(self) < n:
            raise TooFewPoints(f"{self.name!r} has {len(self)} points, need {n}")

    def require_positive(self) -> None:
        bad = [(t, v) for t, v in self.points if v <= 0]
        if bad:
            t, v = bad[0]
            raise NonPositiveValue(f"value {v} at t={t} is not positive")


def load_csv(
    source: Union[bytes, str, IO[bytes], IO[str]], name: str = "", unit: str = ""
) -> TimeSeries:
    """Parse a ``t,value`` CSV into a validated series.

    ``source`` may be raw bytes, decoded text, or a binary/text stream.
    Raises MalformedRow, NonMonotonicTime or TooFewPoints.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedRow(f"not UTF-8: {exc}") from None

    rows = list(csv.reader(io.StringIO(source)))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise MalformedRow("expected header row 't,value'")

    points = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise MalformedRow(f"line {lineno}: expected 2 cells, got {len(row)}")
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError:
            raise MalformedRow(f"line {lineno}: non-numeric cell in {row!r}") from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise MalformedRow(f"line {lineno}: non-finite cell in {row!r}")
        points.append((t, v))

    series = TimeSeries(name, unit, tuple(points))
    series.require_fit_ready()
    return series


def to_csv(series: TimeSeries) -> str:
    # repr() round-trips floats exactly
    lines = ["t,value"] + [f"{t!r},{v!r}" for t, v in series.points]
    return "\n".join(lines) + "\n"


def slice(series: TimeSeries, t_min: float, t_max: float, fit_ready: bool = False) -> TimeSeries:
    """Points with ``t_min <= t <= t_max``, order preserved."""
    if not t_min < t_max:
        raise ValueError(f"empty window: t_min={t_min} >= t_max={t_max}")
    kept = tuple((t, v) for t, v in series.points if t_min <= t <= t_max)
    out = TimeSeries(series.name, series.unit, kept)
    if fit_ready:
        out.require_fit_ready()
    return out


def doubling_time_profile(series: TimeSeries) -> TimeSeries:
    """Local doubling time between adjacent points, placed at interval midpoints.

    A pair with no growth gets ``+inf``; a shrinking pair gets a negative
    value (a halving time).
    """
    if len(series) < 2:
        raise TooFewPoints("doubling time needs at least two points")
    series.require_positive()
    pts = series.points
    out = []
    for (t1, v1), (t2, v2) in zip(pts, pts[1:]):
        growth = math.log(v2 / v1)
        tau = math.inf if growth == 0 else (t2 - t1) * math.log(2) / growth
        out.append(((t1 + t2) / 2, tau))
    return TimeSeries(f"{series.name}:doubling_time", "years", tuple(out))


def is_strictly_decreasing(profile: TimeSeries) -> bool:
    """Monotonicity check that ignores the +inf zero-growth sentinel."""
    finite = [v for _, v in profile.points if math.isfinite(v)]
    return all(b < a for a, b in zip(finite, finite[1:]))


BUNDLED = {
    "world_population": ("millions", "world population, millions"),
    "info_speed": ("bits/s", "information transmission speed"),
}


def bundled_names() -> list[str]:
    return sorted(BUNDLED)


def load_bundled(dataset_id: str) -> TimeSeries:
    if dataset_id not in BUNDLED:
        raise KeyError(f"no bundled dataset {dataset_id!r}; have {bundled_names()}")
    unit, _ = BUNDLED[dataset_id]
    data = resources.files("sociotech.data").joinpath(f"{dataset_id}.csv").read_bytes()
    return load_csv(data, name=dataset_id, unit=unit)


@dataclass(frozen=True)
class Dataset:
    id: str
    series: TimeSeries
    provenance: str


def load_dataset(dataset_id: str) -> Dataset:
    return Dataset(dataset_id, load_bundled(dataset_id), provenance(dataset_id))


def provenance(dataset_id: str) -> str:
    if dataset_id not in BUNDLED:
        raise KeyError(dataset_id)
    return (
        resources.files("sociotech.data")
        .joinpath(f"{dataset_id}.provenance.txt")
        .read_text(encoding="utf-8")
    )
