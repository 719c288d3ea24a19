"""Bounded, discretized control dimensions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class RangeError(ValueError):
    """A control value lies outside its dimension's [min, max] range."""


@dataclass(frozen=True)
class ControlDim:
    name: str
    min: float
    max: float
    bins: int

    def __post_init__(self):
        if not self.name:
            raise ValueError("dimension name must be non-empty")
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or not self.min < self.max:
            raise ValueError(f"{self.name}: need finite min < max, got [{self.min}, {self.max}]")
        if int(self.bins) != self.bins or self.bins < 1:
            raise ValueError(f"{self.name}: bins must be a positive integer, got {self.bins}")

    @property
    def width(self) -> float:
        return (self.max - self.min) / self.bins

    def center(self, j: int) -> float:
        return self.min + (j + 0.5) * self.width

    def to_dict(self) -> dict:
        return {"name": self.name, "min": self.min, "max": self.max, "bins": self.bins}


@dataclass(frozen=True)
class ControlSpace:
    """Ordered collection of control dimensions.

    Every conversion accepts either one point of shape ``(K,)`` or a batch
    of shape ``(n, K)`` and returns the same leading shape.
    """

    dims: tuple[ControlDim, ...]

    def __init__(self, dims: Iterable[ControlDim]):
        dims = tuple(dims)
        if not dims:
            raise ValueError("a control space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension names in {names}")
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def k(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    @property
    def lows(self) -> np.ndarray:
        return np.array([d.min for d in self.dims], dtype=float)

    @property
    def highs(self) -> np.ndarray:
        return np.array([d.max for d in self.dims], dtype=float)

    @property
    def bin_counts(self) -> np.ndarray:
        return np.array([d.bins for d in self.dims], dtype=np.int64)

    @property
    def total_bins(self) -> int:
        return int(np.prod(self.bin_counts))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no dimension named {name!r}") from None

    def _check_values(self, a, unit=False):
        a = np.asarray(a, dtype=float)
        if a.ndim == 0 or a.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} values per point, got shape {a.shape}")
        lo, hi = (0.0, 1.0) if unit else (self.lows, self.highs)
        bad = ~((a >= lo) & (a <= hi))
        if bad.any():
            col = int(np.nonzero(bad.reshape(-1, self.k).any(axis=0))[0][0])
            d = self.dims[col]
            rng = "[0, 1]" if unit else f"[{d.min}, {d.max}]"
            raise RangeError(f"{d.name}: value {a.reshape(-1, self.k)[:, col].tolist()} outside {rng}")
        return a

    def to_unit(self, a) -> np.ndarray:
        a = self._check_values(a)
        return (a - self.lows) / (self.highs - self.lows)

    def from_unit(self, p) -> np.ndarray:
        p = self._check_values(p, unit=True)
        return self.lows + p * (self.highs - self.lows)

    def bin_of(self, a) -> np.ndarray:
        a = self._check_values(a)
        widths = (self.highs - self.lows) / self.bin_counts
        b = np.floor((a - self.lows) / widths).astype(np.int64)
        return np.minimum(b, self.bin_counts - 1)

    def center_of(self, b) -> np.ndarray:
        b = np.asarray(b)
        if b.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} bin indices per point, got shape {b.shape}")
        if not np.issubdtype(b.dtype, np.integer):
            if not np.all(b == np.round(b)):
                raise ValueError("bin indices must be integers")
            b = b.astype(np.int64)
        bad = (b < 0) | (b >= self.bin_counts)
        if bad.any():
            col = int(np.nonzero(bad.reshape(-1, self.k).any(axis=0))[0][0])
            d = self.dims[col]
            raise RangeError(f"{d.name}: bin index outside [0, {d.bins})")
        widths = (self.highs - self.lows) / self.bin_counts
        return self.lows + (b + 0.5) * widths

    def subspace(self, names: Sequence[str]) -> "ControlSpace":
        return ControlSpace(self.dims[self.index(n)] for n in names)

    def to_dict(self) -> dict:
        return {"dims": [d.to_dict() for d in self.dims]}

    @classmethod
    def from_dict(cls, data: dict) -> "ControlSpace":
        return cls(ControlDim(str(d["name"]), float(d["min"]), float(d["max"]), int(d["bins"]))
                   for d in data["dims"])


def grasping_preset() -> ControlSpace:
    """Six-dimensional adaptive-gripper control space."""
    return ControlSpace([
        ControlDim("theta", -180.0, 180.0, 20),
        ControlDim("alpha", -10.0, 10.0, 10),
        ControlDim("beta", -30.0, 30.0, 10),
        ControlDim("h_G", 0.0, 1.0, 5),
        ControlDim("M_G", 0.0, 2.0, 3),
        ControlDim("f_G", 15.0, 60.0, 20),
    ])


def unit_cube(k: int, bins: int = 1, prefix: str = "x") -> ControlSpace:
    return ControlSpace(ControlDim(f"{prefix}{i + 1}", 0.0, 1.0, bins) for i in range(k))


SPACE_PRESETS = {"grasping": grasping_preset}


def space_preset(name: str) -> ControlSpace:
    try:
        return SPACE_PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown space preset {name!r}; known: {sorted(SPACE_PRESETS)}") from None
