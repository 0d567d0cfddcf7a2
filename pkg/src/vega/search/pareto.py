"""Pareto archive of mutually nondominated (sample, objectives) pairs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

__all__ = ["ArchiveEntry", "ParetoArchive", "dominates", "archive_insert", "nondominated"]


def dominates(a: Sequence[float], b: Sequence[float], orientation: Sequence[str]) -> bool:
    """Strict Pareto dominance of ``a`` over ``b`` under per-objective ``min``/``max``."""
    strictly = False
    for x, y, mode in zip(a, b, orientation):
        if mode == "max":
            x, y = -x, -y
        if x > y:
            return False
        if x < y:
            strictly = True
    return strictly


def nondominated(points: Iterable[Sequence[float]], orientation: Sequence[str]) -> list[tuple[float, ...]]:
    pts = [tuple(p) for p in points]
    return [p for p in pts if not any(dominates(q, p, orientation) for q in pts)]


@dataclass
class ArchiveEntry:
    sample: Any
    objectives: tuple[float, ...]
    encoded: Any = None
    trial_id: int | None = None


@dataclass
class ParetoArchive:
    orientation: tuple[str, ...]
    entries: list[ArchiveEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.orientation = tuple(self.orientation)
        bad = [m for m in self.orientation if m not in ("min", "max")]
        if bad:
            raise ValueError(f"orientation entries must be 'min' or 'max', got {bad}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def objectives(self) -> list[tuple[float, ...]]:
        return [e.objectives for e in self.entries]

    def insert(self, sample: Any, objectives: Sequence[float], *, encoded: Any = None, trial_id: int | None = None) -> bool:
        """Add the point unless it is dominated; evict whatever it dominates."""
        obj = tuple(float(v) for v in objectives)
        if len(obj) != len(self.orientation):
            raise ValueError(f"expected {len(self.orientation)} objectives, got {len(obj)}")
        for e in self.entries:
            if dominates(e.objectives, obj, self.orientation):
                return False
            if e.objectives == obj and _same_sample(e.sample, sample):
                return False
        self.entries = [e for e in self.entries if not dominates(obj, e.objectives, self.orientation)]
        self.entries.append(ArchiveEntry(sample, obj, encoded, trial_id))
        return True

    def to_json(self) -> dict:
        return {
            "orientation": list(self.orientation),
            "entries": [
                {"trial_id": e.trial_id, "sample": _sample_json(e.sample), "objectives": list(e.objectives)}
                for e in self.entries
            ],
        }


def _sample_json(sample: Any) -> Any:
    return sample.to_json() if hasattr(sample, "to_json") else sample


def _same_sample(a: Any, b: Any) -> bool:
    return _sample_json(a) == _sample_json(b)


def archive_insert(archive: ParetoArchive, sample: Any, objectives: Sequence[float]) -> ParetoArchive:
    archive.insert(sample, objectives)
    return archive
