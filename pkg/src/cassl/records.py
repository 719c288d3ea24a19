"""Trial records and the append-only aggregated dataset."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator

import numpy as np

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    stage: int
    context_id: str
    features: tuple[float, ...]
    action: tuple[float, ...]
    bins: tuple[int, ...]
    outcome: int
    policy: str
    seed: int

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {self.outcome!r}")
        if len(self.action) != len(self.bins):
            raise ValueError("action and bins must have one entry per dimension")

    def to_json(self) -> str:
        d = asdict(self)
        d["features"] = [float(v) for v in self.features]
        d["action"] = [float(v) for v in self.action]
        d["bins"] = [int(v) for v in self.bins]
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(int(d["trial_id"]), int(d["stage"]), str(d["context_id"]),
                   tuple(float(v) for v in d["features"]), tuple(float(v) for v in d["action"]),
                   tuple(int(v) for v in d["bins"]), int(d["outcome"]), str(d["policy"]), int(d["seed"]))


class Dataset:
    """Append-only list of trials whose stage labels never decrease."""

    def __init__(self, records: Iterable[TrialRecord] = ()):
        self._records: list[TrialRecord] = []
        self.extend(records)

    def append(self, rec: TrialRecord) -> None:
        if self._records and rec.stage < self._records[-1].stage:
            raise ValueError(f"stage labels must be non-decreasing ({rec.stage} after {self._records[-1].stage})")
        if self._records and len(rec.bins) != len(self._records[0].bins):
            raise ValueError("all records must have the same number of dimensions")
        self._records.append(rec)

    def extend(self, records: Iterable[TrialRecord]) -> None:
        for r in records:
            self.append(r)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TrialRecord]:
        return iter(self._records)

    def __getitem__(self, i):
        return self._records[i]

    @property
    def records(self) -> tuple[TrialRecord, ...]:
        return tuple(self._records)

    def union(self, other: "Dataset") -> "Dataset":
        return Dataset(list(self._records) + list(other))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(features (n, F), bins (n, K), outcomes (n,)) as contiguous arrays."""
        if not self._records:
            raise ValueError("dataset is empty")
        feats = np.array([r.features for r in self._records], dtype=float).reshape(len(self), -1)
        bins = np.array([r.bins for r in self._records], dtype=np.int64)
        y = np.array([r.outcome for r in self._records], dtype=float)
        return np.ascontiguousarray(feats), np.ascontiguousarray(bins), y

    def success_rate(self) -> float:
        return float(np.mean([r.outcome for r in self._records])) if self._records else float("nan")

    def write_jsonl(self, path, header: dict | None = None) -> None:
        with open(path, "w") as fh:
            head = {"kind": "header", "schema_version": SCHEMA_VERSION, "n_records": len(self)}
            head.update(header or {})
            fh.write(json.dumps(head, sort_keys=True, separators=(",", ":")) + "\n")
            for r in self._records:
                fh.write(r.to_json() + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "Dataset":
        out = cls()
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                if d.get("kind") == "header":
                    if d.get("schema_version") != SCHEMA_VERSION:
                        raise ValueError(f"unsupported dataset schema {d.get('schema_version')}")
                    continue
                out.append(TrialRecord.from_dict(d))
        return out
