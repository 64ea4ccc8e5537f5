"""Per-plant, per-day detection records and plant timelines."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import InvalidInputError
from .hull import View
from .skeleton.graph import SkeletonGraph
from .skeleton.plant import Label, LeafCandidate

DELETED = "deleted"
INSERTED = "inserted"


@dataclass(frozen=True)
class AuditEntry:
    """One leaf-count change: which stage made it and to which leaf."""

    stage: str
    action: str  # DELETED or INSERTED
    tip: tuple[int, int] | None
    branch: tuple[int, int] | None

    def to_dict(self) -> dict:
        return {
            "rule": self.stage,
            "action": self.action,
            "deleted_edge_tip": None if self.tip is None else list(self.tip),
            "deleted_edge_branch": None if self.branch is None else list(self.branch),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditEntry":
        def pt(v):
            return None if v is None else (int(v[0]), int(v[1]))

        return cls(d["rule"], d["action"], pt(d.get("deleted_edge_tip")), pt(d.get("deleted_edge_branch")))


@dataclass(frozen=True)
class PlantDayRecord:
    plant_id: str
    day: int
    days_since_emergence: int | None
    view: View | None
    leaves: tuple[LeafCandidate, ...] = ()
    skeleton: SkeletonGraph | None = None
    audit: tuple[AuditEntry, ...] = ()
    initial_count: int = 0  # leaf candidates on the raw skeleton graph
    rejected: tuple[LeafCandidate, ...] = ()  # leaves relabelled as spurs
    status: str = "ok"  # ok | absent | not_emerged | failed
    error: str | None = None

    def __post_init__(self):
        if self.days_since_emergence is not None and self.days_since_emergence > self.day:
            raise InvalidInputError("days since emergence cannot exceed the calendar day")

    @property
    def count(self) -> int:
        return len(self.leaves)

    @property
    def emerged(self) -> bool:
        return self.status == "ok" and self.days_since_emergence is not None

    def with_leaves(self, leaves, audit=(), rejected=()) -> "PlantDayRecord":
        return replace(self, leaves=tuple(leaves), audit=self.audit + tuple(audit),
                       rejected=self.rejected + tuple(rejected))

    def to_dict(self, include_skeleton: bool = False) -> dict:
        d = {
            "plant_id": self.plant_id,
            "day": self.day,
            "days_since_emergence": self.days_since_emergence,
            "view": None if self.view is None else self.view.value,
            "status": self.status,
            "error": self.error,
            "count": self.count,
            "initial_count": self.initial_count,
            "leaves": [c.to_dict() for c in self.leaves],
            "rejected": [c.to_dict() for c in self.rejected],
            "audit": [a.to_dict() for a in self.audit],
        }
        if include_skeleton and self.skeleton is not None:
            d["skeleton"] = self.skeleton.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlantDayRecord":
        return cls(
            plant_id=str(d["plant_id"]),
            day=int(d["day"]),
            days_since_emergence=d.get("days_since_emergence"),
            view=None if d.get("view") is None else View(d["view"]),
            leaves=tuple(LeafCandidate.from_dict(c) for c in d.get("leaves", ())),
            skeleton=SkeletonGraph.from_dict(d["skeleton"]) if d.get("skeleton") else None,
            audit=tuple(AuditEntry.from_dict(a) for a in d.get("audit", ())),
            initial_count=int(d.get("initial_count", 0)),
            rejected=tuple(LeafCandidate.from_dict(c) for c in d.get("rejected", ())),
            status=d.get("status", "ok"),
            error=d.get("error"),
        )


@dataclass(frozen=True)
class PlantTimeline:
    plant_id: str
    records: tuple[PlantDayRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        days = [r.day for r in self.records]
        if any(b <= a for a, b in zip(days, days[1:])):
            raise InvalidInputError(f"timeline days must be strictly increasing: {days}")

    @property
    def counts(self) -> list[int]:
        return [r.count for r in self.records]

    def by_day(self) -> dict[int, PlantDayRecord]:
        return {r.day: r for r in self.records}

    def to_dict(self, include_skeleton: bool = False) -> dict:
        return {"plant_id": self.plant_id,
                "records": [r.to_dict(include_skeleton) for r in self.records]}

    @classmethod
    def from_dict(cls, d: dict) -> "PlantTimeline":
        return cls(str(d["plant_id"]), tuple(PlantDayRecord.from_dict(r) for r in d["records"]))


def detected_leaves(leaves) -> list[LeafCandidate]:
    return [c for c in leaves if c.label is Label.LEAF]
