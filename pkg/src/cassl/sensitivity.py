"""
Variance-based (Sobol) sensitivity indices from Saltelli-design evaluations.

First order uses the Saltelli (2010) estimator, total order the Jansen
estimator and second order the cross-matrix estimator.  All three are
normalized by the variance pooled over the ``A`` and ``B`` blocks.  Negative
estimates are kept as-is.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .quasirandom import SaltelliDesign

SCHEMA_VERSION = 1


class DegenerateVarianceError(ValueError):
    """Outputs have zero variance, so no index is defined."""


@dataclass(frozen=True)
class SensitivityReport:
    s1: np.ndarray
    st: np.ndarray
    s2: np.ndarray
    var_y: float
    n_base: int
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        s1 = np.asarray(self.s1, dtype=float)
        st = np.asarray(self.st, dtype=float)
        k = s1.shape[0]
        s2 = np.asarray(self.s2, dtype=float) if self.s2 is not None else np.full((k, k), np.nan)
        if s1.shape != (k,) or st.shape != (k,) or s2.shape != (k, k):
            raise ValueError("s1/st must have length K and s2 shape (K, K)")
        if not (np.isfinite(self.var_y) and self.var_y > 0):
            raise DegenerateVarianceError(f"output variance must be positive, got {self.var_y}")
        off = ~np.eye(k, dtype=bool)
        if not (np.all(np.isfinite(s1)) and np.all(np.isfinite(st))):
            raise ValueError("s1 and st must be finite")
        if np.isfinite(s2[off]).any() and not np.all(np.isfinite(s2[off])):
            raise ValueError("s2 off-diagonal entries must be all finite or all missing")
        if not np.allclose(s2[off], s2.T[off], equal_nan=True, rtol=0, atol=0):
            raise ValueError("s2 must be symmetric")
        s2 = s2.copy()
        np.fill_diagonal(s2, np.nan)
        names = tuple(self.names) if self.names else tuple(f"x{i + 1}" for i in range(k))
        if len(names) != k:
            raise ValueError("names must have length K")
        for arr in (s1, st, s2):
            arr.setflags(write=False)
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "st", st)
        object.__setattr__(self, "s2", s2)
        object.__setattr__(self, "names", names)

    @property
    def k(self) -> int:
        return self.s1.shape[0]

    @property
    def has_second_order(self) -> bool:
        return self.k == 1 or bool(np.isfinite(self.s2[~np.eye(self.k, dtype=bool)]).all())

    def permuted(self, order: Sequence[int]) -> "SensitivityReport":
        order = np.asarray(order)
        return SensitivityReport(self.s1[order], self.st[order], self.s2[np.ix_(order, order)],
                                 self.var_y, self.n_base, tuple(self.names[i] for i in order))

    def to_dict(self) -> dict:
        def clean(x):
            return None if not math.isfinite(x) else float(x)
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "sensitivity_report",
            "names": list(self.names),
            "s1": [float(v) for v in self.s1],
            "st": [float(v) for v in self.st],
            "s2": [[clean(v) for v in row] for row in self.s2],
            "var_y": float(self.var_y),
            "n_base": int(self.n_base),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SensitivityReport":
        """Inverse of :meth:`to_dict`.

        A triangular ``s2`` (one half missing) is mirrored; ``var_y`` may be
        omitted for tables that only publish normalized indices.
        """
        s2 = np.array([[np.nan if v is None else float(v) for v in row] for row in data["s2"]], dtype=float)
        s2 = np.where(np.isnan(s2), s2.T, s2)
        return cls(np.array(data["s1"], dtype=float), np.array(data["st"], dtype=float), s2,
                   float(data.get("var_y", 1.0)), int(data.get("n_base", 0)), tuple(data.get("names", ())))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def analyze(design: SaltelliDesign, outputs, names: Sequence[str] = ()) -> SensitivityReport:
    f_a, f_b, f_ab, f_ba = design.split(outputs)
    y = np.asarray(outputs, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("outputs contain non-finite values")
    pooled = np.concatenate((f_a, f_b))
    if np.all(pooled == pooled[0]):
        raise DegenerateVarianceError("outputs of the A and B blocks are all equal")
    s1, st, s2, var = kernels.sobol_estimates(f_a, f_b, f_ab, f_ba)
    return SensitivityReport(s1, st, s2, float(var), design.n_base, tuple(names))


def analyze_dataset(space, design: SaltelliDesign, records) -> SensitivityReport:
    """Indices from one binary trial per design row, trials in design-row order."""
    records = list(records)
    if len(records) != design.n_rows:
        raise ValueError(f"design has {design.n_rows} rows but {len(records)} records were given")
    if design.k != space.k:
        raise ValueError(f"design has {design.k} dimensions, space has {space.k}")
    expected_bins = space.bin_of(space.from_unit(design.rows))
    got_bins = np.array([r.bins for r in records], dtype=np.int64)
    mismatch = np.nonzero((got_bins != expected_bins).any(axis=1))[0]
    if mismatch.size:
        raise ValueError(f"records are not aligned with design rows (first mismatch at row {mismatch[0]})")
    y = np.array([float(r.outcome) for r in records])
    return analyze(design, y, space.names)


@dataclass(frozen=True)
class ConfidenceIntervals:
    s1: np.ndarray
    st: np.ndarray
    s2: np.ndarray
    confidence: float
    resamples: int

    def max_half_width(self) -> float:
        vals = [self.s1, self.st]
        if np.isfinite(self.s2).any():
            vals.append(self.s2[np.isfinite(self.s2)])
        return float(max(np.max(v) for v in vals))

    def to_dict(self) -> dict:
        return {
            "confidence": self.confidence,
            "resamples": self.resamples,
            "s1": self.s1.tolist(),
            "st": self.st.tolist(),
            "s2": [[None if not math.isfinite(v) else float(v) for v in row] for row in self.s2],
        }


def bootstrap_ci(design: SaltelliDesign, outputs, resamples: int = 1000, confidence: float = 0.95,
                 seed: int = 0) -> ConfidenceIntervals:
    """Percentile-bootstrap half-widths, resampling base rows of every block jointly."""
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    f_a, f_b, f_ab, f_ba = design.split(outputs)
    if np.var(np.concatenate((f_a, f_b))) == 0:
        raise DegenerateVarianceError("outputs of the A and B blocks are all equal")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, design.n_base, size=(resamples, design.n_base))
    b1, bt, b2 = kernels.bootstrap_estimates(f_a, f_b, f_ab, f_ba, idx)
    lo_q, hi_q = 50 * (1 - confidence), 50 * (1 + confidence)

    def half(x):
        with np.errstate(invalid="ignore"):
            lo, hi = np.nanpercentile(x, [lo_q, hi_q], axis=0) if np.isfinite(x).any() else (x[0], x[0])
        return 0.5 * (hi - lo)

    s2 = np.full((design.k, design.k), np.nan)
    if design.second_order and design.k > 1:
        off = ~np.eye(design.k, dtype=bool)
        s2[off] = half(b2[:, off])
    return ConfidenceIntervals(half(b1), half(bt), s2, confidence, resamples)
