"""Expert feedback: an append-only verdict log and its label semantics.

A rejection only asserts the patch is a non-fix when the reason says so.
The other rejection reasons (wrong module, baseline already has it,
missing dependency, other) say nothing about bug-fix-ness, so those
patches are excluded from retraining instead of becoming negatives.
"""

import json
import os
from dataclasses import dataclass, replace
from enum import Enum

from .errors import InvalidRecord, UnknownSha
from .ingest import Label, LabelSource


class Verdict(Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class ReasonCategory(Enum):
    NON_BUG_FIX = "non_bug_fix"
    UNRELATED_MODULE = "unrelated_module"
    NOT_RELEVANT_TO_BASELINE = "not_relevant_to_baseline"
    MISSING_DEPENDENCY = "missing_dependency"
    OTHER = "other"


@dataclass(frozen=True)
class FeedbackRecord:
    sha: str
    verdict: Verdict
    reason: ReasonCategory | None = None
    note: str = ""
    reviewer: str = ""
    ts: int = 0

    def validate(self) -> "FeedbackRecord":
        if len(self.sha) != 40 or any(c not in "0123456789abcdef" for c in self.sha):
            raise InvalidRecord(f"sha {self.sha!r} is not 40 lowercase hex characters")
        if self.verdict is Verdict.ACCEPTED and self.reason is not None:
            raise InvalidRecord("an accepted verdict must not carry a reason")
        if self.verdict is Verdict.REJECTED and self.reason is None:
            raise InvalidRecord("a rejected verdict requires a reason")
        return self

    def as_dict(self) -> dict:
        return {
            "sha": self.sha,
            "verdict": self.verdict.value,
            "reason": self.reason.value if self.reason else None,
            "note": self.note,
            "reviewer": self.reviewer,
            "ts": self.ts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRecord":
        reason = d.get("reason")
        return cls(
            sha=d["sha"],
            verdict=Verdict(d["verdict"]),
            reason=ReasonCategory(reason) if reason is not None else None,
            note=d.get("note", ""),
            reviewer=d.get("reviewer", ""),
            ts=int(d.get("ts", 0)),
        ).validate()


class FeedbackStore:
    """JSON-lines log, append-only. Supersession is resolved at read time:
    the last line for a sha wins, so replaying the log is idempotent."""

    def __init__(self, path: str):
        self.path = path

    def append(self, rec: FeedbackRecord) -> FeedbackRecord:
        rec.validate()
        os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec.as_dict(), ensure_ascii=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return rec

    def records(self):
        """Every record in append order, including superseded ones."""
        if not os.path.exists(self.path):
            return []
        out = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(FeedbackRecord.from_dict(json.loads(line)))
        return out

    def latest(self) -> dict:
        """sha -> the record currently in force."""
        view = {}
        for rec in self.records():
            view[rec.sha] = rec
        return view


def record_feedback(rec: FeedbackRecord, store: FeedbackStore, known_shas=None) -> FeedbackRecord:
    """Validate and durably append one verdict.

    ``known_shas``, when given, restricts feedback to patches the bot
    actually scored; anything else raises UnknownSha.
    """
    rec.validate()
    if known_shas is not None and rec.sha not in known_shas:
        raise UnknownSha(f"no scored patch with sha {rec.sha}")
    return store.append(rec)


def label_for(rec: FeedbackRecord):
    """Training label for a verdict: BugFix, NonBugFix, or None (excluded)."""
    if rec.verdict is Verdict.ACCEPTED:
        return Label.BUG_FIX
    if rec.reason is ReasonCategory.NON_BUG_FIX:
        return Label.NON_BUG_FIX
    return None


def feedback_labels(store: FeedbackStore):
    """(sha, Label or None) for the record in force per sha, ordered by sha."""
    return [(sha, label_for(rec)) for sha, rec in sorted(store.latest().items())]


def assemble_retraining_corpus(base, store: FeedbackStore):
    """Apply expert verdicts on top of a labeled corpus.

    Feedback wins over every base label; excluded shas are dropped; the
    rest of the corpus passes through in order.
    """
    fb = dict(feedback_labels(store))
    out = []
    for lp in base:
        sha = lp.patch.commit.sha
        if sha in fb:
            label = fb[sha]
            if label is None:
                continue
            out.append(replace(lp, label=label, source=LabelSource.EXPERT_FEEDBACK))
        else:
            out.append(lp)
    return out


def feedback_funnel_counts(store: FeedbackStore, recommended_shas):
    """(accepted, rejected, rejected_by_reason) over recommended patches."""
    accepted = 0
    rejected = 0
    by_reason = {}
    for sha, rec in store.latest().items():
        if sha not in recommended_shas:
            continue
        if rec.verdict is Verdict.ACCEPTED:
            accepted += 1
        else:
            rejected += 1
            by_reason[rec.reason.value] = by_reason.get(rec.reason.value, 0) + 1
    return accepted, rejected, by_reason
