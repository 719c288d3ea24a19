"""
Curriculum over control dimensions from Sobol indices.

A stage is the subset ``P`` of the remaining dimensions ``R`` minimizing

    E(P) = sum_{i in P} (st_i - s1_i) + sum_{i in P} sum_{j in R - P} |s2_ij|

over every non-empty ``P``.  The chosen subset is removed from ``R`` and the
search repeats until nothing remains.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .sensitivity import SensitivityReport

MAX_DIMS = 20
TIE_TOL = 1e-12
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Curriculum:
    stages: tuple[tuple[int, ...], ...]
    flat_order: tuple[int, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        stages = tuple(tuple(int(i) for i in s) for s in self.stages)
        flat = tuple(int(i) for i in self.flat_order)
        k = len(flat)
        seen = [i for s in stages for i in s]
        if any(len(s) == 0 for s in stages):
            raise ValueError("stages must be non-empty")
        if sorted(seen) != list(range(k)) or sorted(flat) != list(range(k)):
            raise ValueError("stages must partition 0..K-1 and flat_order must be a permutation")
        pos = {d: n for n, d in enumerate(flat)}
        for a, b in zip(stages, stages[1:]):
            if max(pos[i] for i in a) > min(pos[i] for i in b):
                raise ValueError("flat_order must list every stage before the next one")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "flat_order", flat)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def k(self) -> int:
        return len(self.flat_order)

    def stage_of(self) -> np.ndarray:
        """Stage number (1-based) of every dimension."""
        out = np.zeros(self.k, dtype=np.int64)
        for n, s in enumerate(self.stages, start=1):
            out[list(s)] = n
        return out

    def named_stages(self) -> list[list[str]]:
        names = self.names or tuple(str(i) for i in range(self.k))
        return [[names[i] for i in s] for s in self.stages]

    def named_order(self) -> list[str]:
        names = self.names or tuple(str(i) for i in range(self.k))
        return [names[i] for i in self.flat_order]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "curriculum",
            "names": list(self.names),
            "stages": self.named_stages(),
            "flat_order": self.named_order(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Curriculum":
        names = tuple(data["names"])
        idx = {n: i for i, n in enumerate(names)}
        return cls(tuple(tuple(idx[n] for n in s) for s in data["stages"]),
                   tuple(idx[n] for n in data["flat_order"]), names)

    @classmethod
    def from_order(cls, order: Sequence[int], names: Sequence[str] = ()) -> "Curriculum":
        """Singleton stages in the given order."""
        return cls(tuple((int(i),) for i in order), tuple(order), tuple(names))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def energy(candidate: Iterable[int], remaining: Iterable[int], report: SensitivityReport) -> float:
    psi = set(int(i) for i in candidate)
    omega = set(int(i) for i in remaining)
    if not psi:
        raise ValueError("candidate subset must be non-empty")
    if not psi <= omega:
        raise ValueError(f"candidate {sorted(psi)} is not a subset of remaining {sorted(omega)}")
    if not omega <= set(range(report.k)):
        raise ValueError("remaining dimensions out of range")
    s2 = _abs_s2(report)
    e = sum(report.st[i] - report.s1[i] for i in sorted(psi))
    e += sum(s2[i, j] for i in sorted(psi) for j in sorted(omega - psi))
    return float(e)


def _abs_s2(report: SensitivityReport) -> np.ndarray:
    s2 = np.abs(np.nan_to_num(report.s2, nan=0.0))
    np.fill_diagonal(s2, 0.0)
    return s2


def _within_stage_order(stage: Iterable[int], s1: np.ndarray) -> list[int]:
    return sorted(stage, key=lambda i: (-s1[i], i))


def _pick(cands: list[tuple[int, ...]], s1: np.ndarray) -> tuple[int, ...]:
    return min(cands, key=lambda c: (len(c), -sum(s1[i] for i in c), c))


def build_curriculum(report: SensitivityReport) -> Curriculum:
    k = report.k
    if k > MAX_DIMS:
        raise ValueError(f"exhaustive subset search supports at most {MAX_DIMS} dimensions, got {k}")
    gap = np.ascontiguousarray(report.st - report.s1)
    s2 = _abs_s2(report)
    remaining = list(range(k))
    stages = []
    while remaining:
        sub = np.array(remaining)
        e = kernels.subset_energies(np.ascontiguousarray(gap[sub]),
                                    np.ascontiguousarray(s2[np.ix_(sub, sub)]))
        best = e.min()
        masks = np.nonzero(e <= best + TIE_TOL)[0]
        cands = [tuple(int(sub[b]) for b in range(len(sub)) if (m >> b) & 1) for m in masks]
        stage = _pick(cands, report.s1)
        stages.append(stage)
        remaining = [i for i in remaining if i not in stage]
    flat = [i for s in stages for i in _within_stage_order(s, report.s1)]
    return Curriculum(tuple(stages), tuple(flat), report.names)


def oracle_curriculum(report: SensitivityReport) -> Curriculum:
    """Reference ranker by plain enumeration; slow, used to check :func:`build_curriculum`."""
    k = report.k
    s1 = [float(v) for v in report.s1]
    st = [float(v) for v in report.st]
    pair = {}
    for i in range(k):
        for j in range(k):
            v = report.s2[i, j]
            pair[i, j] = 0.0 if i == j or v != v else abs(float(v))

    def e(psi, omega):
        rest = [j for j in omega if j not in psi]
        total = 0.0
        for i in psi:
            total += st[i] - s1[i]
            for j in rest:
                total += pair[i, j]
        return total

    remaining = tuple(range(k))
    stages = []
    while remaining:
        scored = []
        for r in range(1, len(remaining) + 1):
            for c in itertools.combinations(remaining, r):
                scored.append((e(c, remaining), c))
        low = min(v for v, _ in scored)
        ties = [c for v, c in scored if v <= low + TIE_TOL]
        stage = _pick(ties, report.s1)
        stages.append(stage)
        remaining = tuple(i for i in remaining if i not in stage)
    flat = [i for s in stages for i in _within_stage_order(s, report.s1)]
    return Curriculum(tuple(stages), tuple(flat), report.names)


def energy_table(report: SensitivityReport, curriculum: Curriculum) -> list[dict]:
    """Per stage: remaining dims, singleton energies, and the chosen subset's energy."""
    names = report.names
    remaining = list(range(report.k))
    rows = []
    for n, stage in enumerate(curriculum.stages, start=1):
        rows.append({
            "stage": n,
            "remaining": [names[i] for i in remaining],
            "chosen": [names[i] for i in stage],
            "chosen_energy": energy(stage, remaining, report),
            "singleton_energies": {names[i]: energy([i], remaining, report) for i in remaining},
        })
        remaining = [i for i in remaining if i not in stage]
    return rows
