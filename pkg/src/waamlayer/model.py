"""Power-law bead height model.

The deposited height per pass at a fixed wire feed rate is modelled as

    dh = exp(b) * v_t**a        (a < 0)

which is linear in log-log space, ``ln dh = a ln v_t + b``.  Heights are in
mm and torch speeds in mm/s throughout the package.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NonInvertibleError, RankDeficiencyError


@dataclass(frozen=True)
class ModelCoefficients:
    a: float
    b: float
    label: str = ""

    @property
    def c(self) -> float:
        """Height at unit speed, ``exp(b)``."""
        return math.exp(self.b)


# Coefficients identified under fully cooled and thermally saturated conditions.
COLD = ModelCoefficients(-0.4619, 1.647, "cold")
HOT = ModelCoefficients(-0.3700, 1.215, "hot")


@dataclass(frozen=True)
class ProcessBounds:
    """Torch speed box and the deposition heights it maps to.

    ``dh_max`` is the height at the slow end of the speed range and ``dh_min``
    the height at the fast end, since the model is decreasing in speed.
    """

    v_t_min: float
    v_t_max: float
    dh_min: float
    dh_max: float

    def __post_init__(self):
        if not (0.0 < self.v_t_min < self.v_t_max):
            raise DomainError(
                f"speed bounds must satisfy 0 < v_t_min < v_t_max, got "
                f"[{self.v_t_min}, {self.v_t_max}]"
            )
        if not (0.0 < self.dh_min < self.dh_max):
            raise DomainError(
                f"height bounds must satisfy 0 < dh_min < dh_max, got "
                f"[{self.dh_min}, {self.dh_max}]"
            )

    @classmethod
    def from_model(cls, model: ModelCoefficients, v_t_min: float = 3.0,
                   v_t_max: float = 17.0) -> ProcessBounds:
        if not (0.0 < v_t_min < v_t_max):
            raise DomainError(f"invalid speed range [{v_t_min}, {v_t_max}]")
        h_slow = float(predict(model, v_t_min))
        h_fast = float(predict(model, v_t_max))
        return cls(v_t_min, v_t_max, min(h_slow, h_fast), max(h_slow, h_fast))

    @classmethod
    def common(cls, models: Iterable[ModelCoefficients], v_t_min: float = 3.0,
               v_t_max: float = 17.0) -> ProcessBounds:
        """Height range achievable within the speed box under every model."""
        envelopes = [cls.from_model(m, v_t_min, v_t_max) for m in models]
        if not envelopes:
            raise DomainError("at least one model is required")
        lo = max(e.dh_min for e in envelopes)
        hi = min(e.dh_max for e in envelopes)
        if not lo < hi:
            raise DomainError(
                f"models share no common height range (lo={lo:.4f}, hi={hi:.4f})"
            )
        return cls(v_t_min, v_t_max, lo, hi)


@dataclass(frozen=True)
class CalibrationSample:
    v_t: float
    dh: float

    def __post_init__(self):
        if not (self.v_t > 0.0 and self.dh > 0.0):
            raise DomainError(
                f"calibration samples need v_t > 0 and dh > 0, got "
                f"(v_t={self.v_t}, dh={self.dh})"
            )


@dataclass(frozen=True)
class CalibrationResult:
    coeffs: ModelCoefficients
    r_squared: float
    residual_norm: float
    n_samples: int


def predict(coeffs: ModelCoefficients, v_t):
    """Deposited height for torch speed ``v_t`` (scalar or array)."""
    v = np.asarray(v_t, dtype=float)
    if np.any(~(v > 0.0)):
        raise DomainError("torch speed must be strictly positive")
    out = np.exp(coeffs.b + coeffs.a * np.log(v))
    return float(out) if out.ndim == 0 else out


def invert(coeffs: ModelCoefficients, dh):
    """Torch speed that deposits height ``dh`` (scalar or array)."""
    if coeffs.a == 0.0:
        raise NonInvertibleError("model with a = 0 is constant in speed")
    h = np.asarray(dh, dtype=float)
    if np.any(~(h > 0.0)):
        raise DomainError("deposition height must be strictly positive")
    out = np.exp((np.log(h) - coeffs.b) / coeffs.a)
    return float(out) if out.ndim == 0 else out


def calibrate(samples: Sequence[CalibrationSample], label: str = "") -> CalibrationResult:
    """Ordinary least squares fit of ``ln dh = a ln v_t + b``."""
    if len({s.v_t for s in samples}) < 2:
        raise RankDeficiencyError("calibration needs at least two distinct torch speeds")
    x = np.log([s.v_t for s in samples])
    y = np.log([s.dh for s in samples])
    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([a, b])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(resid @ resid)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return CalibrationResult(
        coeffs=ModelCoefficients(float(a), float(b), label),
        r_squared=r2,
        residual_norm=math.sqrt(ss_res),
        n_samples=len(samples),
    )


def parse_samples(text: str, source: str = "<samples>") -> list[CalibrationSample]:
    """Parse a ``v_t,dh`` delimited table; errors carry the 1-based line number."""
    rows = csv.reader(io.StringIO(text))
    samples = []
    header_seen = False
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not cell.strip() for cell in row) or row[0].lstrip().startswith("#"):
            continue
        cells = [cell.strip() for cell in row]
        if not header_seen:
            if [c.lower() for c in cells] != ["v_t", "dh"]:
                raise ConfigError(f"{source}: line {lineno}: expected header 'v_t,dh'")
            header_seen = True
            continue
        if len(cells) != 2:
            raise ConfigError(f"{source}: line {lineno}: expected 2 columns, got {len(cells)}")
        try:
            v_t, dh = float(cells[0]), float(cells[1])
        except ValueError:
            raise ConfigError(f"{source}: line {lineno}: non-numeric value in {row!r}") from None
        try:
            samples.append(CalibrationSample(v_t, dh))
        except DomainError as exc:
            raise DomainError(f"{source}: line {lineno}: {exc}") from None
    if not header_seen:
        raise ConfigError(f"{source}: empty sample file")
    return samples


def read_samples(path) -> list[CalibrationSample]:
    path = Path(path)
    return parse_samples(path.read_text(), str(path))


def write_samples(path, samples: Iterable[CalibrationSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v_t", "dh"])
        for s in samples:
            w.writerow([repr(s.v_t), repr(s.dh)])


def coefficients_to_dict(result: CalibrationResult | ModelCoefficients) -> dict:
    if isinstance(result, CalibrationResult):
        return {
            "a": result.coeffs.a,
            "b": result.coeffs.b,
            "label": result.coeffs.label,
            "r_squared": result.r_squared,
            "residual_norm": result.residual_norm,
            "n_samples": result.n_samples,
        }
    return {"a": result.a, "b": result.b, "label": result.label, "r_squared": None}


def write_coefficients(path, result: CalibrationResult | ModelCoefficients) -> None:
    Path(path).write_text(json.dumps(coefficients_to_dict(result), indent=2) + "\n")


def read_coefficients(path) -> ModelCoefficients:
    data = json.loads(Path(path).read_text())
    try:
        return ModelCoefficients(float(data["a"]), float(data["b"]), str(data.get("label", "")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed coefficients document ({exc})") from None
