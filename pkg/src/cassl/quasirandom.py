"""Sobol sequences (Joe-Kuo direction numbers) and Saltelli cross designs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from . import kernels

TABLE_FILE = "new-joe-kuo-6.64.txt"


class DimensionLimitError(ValueError):
    """Requested more Sobol dimensions than the bundled direction table holds."""


@lru_cache(maxsize=1)
def _table() -> list[tuple[int, int, list[int]]]:
    text = resources.files("cassl.data").joinpath(TABLE_FILE).read_text()
    rows = []
    for line in text.splitlines()[1:]:
        parts = [int(t) for t in line.split()]
        if parts:
            _, s, a, *m = parts
            rows.append((s, a, m))
    return rows


def max_dimension() -> int:
    return len(_table()) + 1


@lru_cache(maxsize=None)
def direction_numbers(dimension: int) -> np.ndarray:
    """Integer direction numbers, shape ``(dimension, SOBOL_BITS)``, scaled by 2**SOBOL_BITS."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if dimension > max_dimension():
        raise DimensionLimitError(
            f"Sobol dimension {dimension} exceeds the bundled table ({max_dimension()} dims)")
    bits = kernels.SOBOL_BITS
    v = np.zeros((dimension, bits), dtype=np.uint64)
    # first coordinate: m_k = 1 for all k, i.e. the van der Corput sequence
    v[0] = [1 << (bits - k - 1) for k in range(bits)]
    for d in range(1, dimension):
        s, a, m = _table()[d - 1]
        vd = [m[k] << (bits - k - 1) for k in range(s)]
        for k in range(s, bits):
            x = vd[k - s] ^ (vd[k - s] >> s)
            for j in range(1, s):
                if (a >> (s - 1 - j)) & 1:
                    x ^= vd[k - j]
            vd.append(x)
        v[d] = vd
    v.setflags(write=False)
    return v


class SobolStream:
    """Stateful Sobol point source; the first point is the origin."""

    def __init__(self, dimension: int, skip: int = 0):
        self.dimension = dimension
        self.directions = direction_numbers(dimension)
        self.index = int(skip)

    def draw(self, count: int) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        if self.index + count > 2 ** kernels.SOBOL_BITS:
            raise DimensionLimitError("Sobol stream exhausted for the configured bit depth")
        pts = kernels.sobol_block(self.directions, self.index, count)
        self.index += count
        return pts


def sobol_points(dimension: int, count: int, skip: int = 0) -> np.ndarray:
    """First ``count`` Sobol points in ``[0, 1)^dimension`` after skipping ``skip``."""
    return SobolStream(dimension, skip=skip).draw(count)


def star_discrepancy_2d(points: np.ndarray) -> float:
    """Exact star discrepancy of a 2-D point set (O(n^2) over the critical boxes)."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    xs = np.unique(np.append(pts[:, 0], 1.0))
    ys = np.unique(np.append(pts[:, 1], 1.0))
    worst = 0.0
    for x in xs:
        col_open = pts[:, 1][pts[:, 0] < x]
        col_closed = pts[:, 1][pts[:, 0] <= x]
        open_cnt = np.searchsorted(np.sort(col_open), ys, side="left") / n
        closed_cnt = np.searchsorted(np.sort(col_closed), ys, side="right") / n
        vol = x * ys
        worst = max(worst, float(np.max(vol - open_cnt)), float(np.max(closed_cnt - vol)))
    return worst


@dataclass(frozen=True)
class SaltelliDesign:
    """Unit-cube Saltelli design.

    Rows are laid out block by block: ``A``, ``AB_1 .. AB_K``,
    ``BA_1 .. BA_K`` (second order only), then ``B``.  Each block has
    ``n_base`` rows and row ``r`` of every block derives from base row ``r``.
    """

    n_base: int
    k: int
    second_order: bool
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    @staticmethod
    def rows_for(k: int, n_base: int, second_order: bool = True) -> int:
        return n_base * (2 * k + 2 if second_order else k + 2)

    @property
    def n_blocks(self) -> int:
        return 2 * self.k + 2 if self.second_order else self.k + 2

    @property
    def n_rows(self) -> int:
        return self.n_base * self.n_blocks

    def ab(self, i: int) -> np.ndarray:
        m = self.a.copy()
        m[:, i] = self.b[:, i]
        return m

    def ba(self, i: int) -> np.ndarray:
        m = self.b.copy()
        m[:, i] = self.a[:, i]
        return m

    @property
    def block_labels(self) -> list[str]:
        labels = ["A"] + [f"AB_{i + 1}" for i in range(self.k)]
        if self.second_order:
            labels += [f"BA_{i + 1}" for i in range(self.k)]
        return labels + ["B"]

    @property
    def rows(self) -> np.ndarray:
        blocks = [self.a] + [self.ab(i) for i in range(self.k)]
        if self.second_order:
            blocks += [self.ba(i) for i in range(self.k)]
        blocks.append(self.b)
        return np.concatenate(blocks, axis=0)

    @property
    def row_labels(self) -> list[str]:
        return [lab for lab in self.block_labels for _ in range(self.n_base)]

    def split(self, outputs) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Cut an output vector aligned to :attr:`rows` into (f_A, f_B, f_AB, f_BA)."""
        y = np.asarray(outputs, dtype=float).reshape(-1)
        if y.shape[0] != self.n_rows:
            raise ValueError(f"expected {self.n_rows} outputs for this design, got {y.shape[0]}")
        blocks = y.reshape(self.n_blocks, self.n_base)
        f_a, f_b = blocks[0], blocks[-1]
        f_ab = blocks[1:1 + self.k]
        f_ba = blocks[1 + self.k:1 + 2 * self.k] if self.second_order else blocks[:0]
        return f_a, f_b, np.ascontiguousarray(f_ab), np.ascontiguousarray(f_ba)

    def to_csv(self, path, names: Sequence[str] | None = None, space=None) -> None:
        """Write one row per evaluation point; values in dimension units when ``space`` is given."""
        names = list(names or (space.names if space is not None else [f"x{i + 1}" for i in range(self.k)]))
        pts = self.rows if space is None else space.from_unit(self.rows)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["block"])
            for row, lab in zip(pts, self.row_labels):
                w.writerow([repr(float(v)) for v in row] + [lab])


def saltelli_design(k: int, n_base: int, second_order: bool = True, skip: int = 0) -> SaltelliDesign:
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_base < 2:
        raise ValueError("n_base must be >= 2")
    base = sobol_points(2 * k, n_base, skip=skip)
    a = np.ascontiguousarray(base[:, :k])
    b = np.ascontiguousarray(base[:, k:])
    a.setflags(write=False)
    b.setflags(write=False)
    return SaltelliDesign(n_base=n_base, k=k, second_order=second_order, a=a, b=b)
