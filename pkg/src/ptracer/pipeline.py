"""Prediction-stage orchestration.

Runs collected patches through the module filter and the classifier,
applies the maintainer-tag score boost, thresholds into recommendations,
and renders reports with funnel accounting. Also hosts the keyword
baseline used by the comparison harness.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .modules import ModuleList, partition
from .patch import changed_paths
from .preprocess import encode_patch, tokenize_message

log = logging.getLogger(__name__)

STABLE_ADDRESS = "stable@vger.kernel.org"
DEFAULT_THRESHOLD = 0.5
DEFAULT_BOOST_FLOOR = 0.95
DEFAULT_KEYWORDS = (
    "fix", "fixes", "fixed", "bug", "leak", "oops", "panic",
    "overflow", "use-after-free", "null",
)

_CC_LINE = re.compile(r"^\s*cc:\s*(.*)$", re.IGNORECASE)


def detect_cc_stable(message: str, address: str = STABLE_ADDRESS) -> bool:
    """True when a message line Cc's the stable maintainers.

    Tolerates case differences, angle brackets around the address, and a
    trailing annotation such as " # v4.4+". A bare mention of "stable"
    elsewhere in the prose does not count.
    """
    for line in message.splitlines():
        m = _CC_LINE.match(line)
        if not m:
            continue
        rest = m.group(1).strip()
        if rest.startswith("<"):
            rest = rest[1:].lstrip()
        if not rest.lower().startswith(address):
            continue
        tail = rest[len(address):]
        if tail == "" or tail[0] in ">,;# \t":
            return True
    return False


def revise_score(raw: float, flagged: bool, boost_floor: float = DEFAULT_BOOST_FLOOR) -> float:
    """Raise flagged scores to at least boost_floor; leave the rest alone."""
    if not 0.0 < raw < 1.0:
        raise ValueError(f"raw score {raw} outside (0, 1)")
    if not 0.0 < boost_floor < 1.0:
        raise ValueError(f"boost floor {boost_floor} outside (0, 1)")
    return max(raw, boost_floor) if flagged else raw


@dataclass(frozen=True)
class ScoredPatch:
    sha: str
    subject: str
    paths: tuple
    raw_score: float
    cc_stable: bool
    final_score: float
    recommended: bool

    def as_dict(self) -> dict:
        return {
            "sha": self.sha,
            "subject": self.subject,
            "raw_score": self.raw_score,
            "final_score": self.final_score,
            "cc_stable": self.cc_stable,
            "paths": list(self.paths),
        }


@dataclass
class Funnel:
    analyzed: int = 0
    concerned: int = 0
    recommended: int = 0
    accepted: int = 0
    rejected: int = 0
    rejected_by_reason: dict = field(default_factory=dict)

    def validate(self) -> "Funnel":
        if min(self.analyzed, self.concerned, self.recommended, self.accepted, self.rejected) < 0:
            raise ValueError("funnel counts must be non-negative")
        if self.concerned > self.analyzed:
            raise ValueError("concerned exceeds analyzed")
        if self.recommended > self.concerned:
            raise ValueError("recommended exceeds concerned")
        if self.accepted + self.rejected > self.recommended:
            raise ValueError("feedback covers more patches than were recommended")
        if sum(self.rejected_by_reason.values()) != self.rejected:
            raise ValueError("per-reason rejection counts do not sum to rejected")
        if any(v < 0 for v in self.rejected_by_reason.values()):
            raise ValueError("per-reason rejection counts must be non-negative")
        return self

    def as_dict(self) -> dict:
        return {
            "analyzed": self.analyzed,
            "concerned": self.concerned,
            "recommended": self.recommended,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "rejected_by_reason": dict(sorted(self.rejected_by_reason.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Funnel":
        return cls(
            analyzed=d["analyzed"],
            concerned=d["concerned"],
            recommended=d["recommended"],
            accepted=d["accepted"],
            rejected=d["rejected"],
            rejected_by_reason=dict(d.get("rejected_by_reason", {})),
        )


def score_patch(patch, bundle, threshold: float = DEFAULT_THRESHOLD,
                revision_enabled: bool = True,
                boost_floor: float = DEFAULT_BOOST_FLOOR) -> ScoredPatch:
    """Score one patch with the loaded bundle; pure and deterministic."""
    from .model import forward

    enc = encode_patch(patch, bundle.vocab_msg, bundle.vocab_code, bundle.config.encode)
    raw = forward(enc, bundle.params)
    flagged = detect_cc_stable(patch.commit.message)
    final = revise_score(raw, flagged, boost_floor) if revision_enabled else raw
    return ScoredPatch(
        sha=patch.commit.sha,
        subject=patch.commit.subject,
        paths=tuple(sorted(changed_paths(patch))),
        raw_score=raw,
        cc_stable=flagged,
        final_score=final,
        recommended=final >= threshold,
    )


def triage(patches, modules: ModuleList, bundle, threshold: float = DEFAULT_THRESHOLD,
           revision_enabled: bool = True,
           boost_floor: float = DEFAULT_BOOST_FLOOR):
    """Filter, score, and threshold a batch; returns (scored list, funnel).

    The scored list covers every concerned patch, recommended or not.
    A patch that fails to encode is logged and dropped from the scored
    list without aborting the batch.
    """
    patches = list(patches)
    concerned, _ = partition(patches, modules)
    scored = []
    failures = 0
    for patch in concerned:
        try:
            scored.append(score_patch(patch, bundle, threshold, revision_enabled, boost_floor))
        except Exception:
            failures += 1
            log.exception("failed to encode or score %s", patch.commit.sha)
    if failures:
        log.warning("%d of %d concerned patches could not be scored", failures, len(concerned))
    funnel = Funnel(
        analyzed=len(patches),
        concerned=len(concerned),
        recommended=sum(1 for s in scored if s.recommended),
    ).validate()
    return scored, funnel


def keyword_baseline_score(message: str, keywords=DEFAULT_KEYWORDS) -> int:
    """1 when the tokenized message contains any keyword, else 0.

    Hyphenated keywords span several tokens, so each keyword is matched
    as a contiguous token run rather than a single-token lookup.
    """
    tokens = tokenize_message(message)
    for kw in keywords:
        want = tokenize_message(kw)
        if not want:
            continue
        n = len(want)
        if n == 1:
            if want[0] in tokens:
                return 1
            continue
        for i in range(len(tokens) - n + 1):
            if tokens[i:i + n] == want:
                return 1
    return 0


def _iso_utc(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def report_payload(scored, funnel: Funnel, window=None) -> dict:
    recommended = sorted(
        (s for s in scored if s.recommended),
        key=lambda s: (-s.final_score, s.sha),
    )
    if window is None:
        window_obj = None
    else:
        window_obj = {"since": _iso_utc(window.since), "until": _iso_utc(window.until)}
    return {
        "window": window_obj,
        "funnel": funnel.as_dict(),
        "recommendations": [s.as_dict() for s in recommended],
    }


def render_report(scored, funnel: Funnel, fmt: str = "json", window=None) -> str:
    """Serialize recommendations plus funnel; JSON form is byte-stable."""
    payload = report_payload(scored, funnel, window)
    if fmt == "json":
        return json.dumps(payload, indent=2, ensure_ascii=True) + "\n"
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")

    lines = ["# Patch recommendations", ""]
    w = payload["window"]
    if w is not None:
        lines.append(f"Window: {w['since']} .. {w['until']}")
        lines.append("")
    f = payload["funnel"]
    lines.append("## Funnel")
    lines.append("")
    for key in ("analyzed", "concerned", "recommended", "accepted", "rejected"):
        lines.append(f"- {key}: {f[key]}")
    if f["rejected_by_reason"]:
        reasons = ", ".join(f"{k}: {v}" for k, v in f["rejected_by_reason"].items())
        lines.append(f"- rejected by reason: {reasons}")
    lines.append("")
    recs = payload["recommendations"]
    lines.append(f"## Recommended patches ({len(recs)})")
    lines.append("")
    if recs:
        lines.append("| sha | final | raw | cc-stable | subject | paths |")
        lines.append("| --- | ----- | --- | --------- | ------- | ----- |")
        for r in recs:
            subject = r["subject"].replace("|", "\\|")
            paths = ", ".join(r["paths"])
            lines.append(
                f"| {r['sha'][:12]} | {r['final_score']:.4f} | {r['raw_score']:.4f} "
                f"| {'yes' if r['cc_stable'] else 'no'} | {subject} | {paths} |"
            )
    else:
        lines.append("(none)")
    return "\n".join(lines) + "\n"
