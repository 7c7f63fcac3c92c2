"""Data acquisition: enumerate commits in a monitoring window, parse them,
and derive training labels from stable-tree backport markers, label files
and expert feedback.

Git is driven as an external process with a pinned argument list so the
input bytes are exactly what the parser was specified against.
"""

import json
import logging
import os
import re
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .errors import ConflictingFeedback, PTracerError, RepoUnavailable
from .patch import TEMPLATE_FORMAT, Patch, parse_patch

log = logging.getLogger(__name__)

_RECORD_START = re.compile(r"^commit ([0-9a-f]{40})$")

# Conventional stable-tree backport markers pointing at the mainline sha.
_UPSTREAM_LINE = re.compile(r"^\s*commit ([0-9a-f]{40}) upstream\.?\s*$")
_UPSTREAM_BRACKET = re.compile(r"^\s*\[\s*[Uu]pstream commit ([0-9a-f]{40})\s*\]\s*$")


class Label(Enum):
    BUG_FIX = "bugfix"
    NON_BUG_FIX = "nonbugfix"


class LabelSource(Enum):
    STABLE_REF = "stable_ref"
    EXPERT_FEEDBACK = "expert_feedback"
    CORPUS_FILE = "corpus"


@dataclass(frozen=True)
class MonitorWindow:
    since: int
    until: int
    period_days: int = 1

    def __post_init__(self):
        if self.since >= self.until:
            raise ValueError("window since must be < until")
        if self.period_days < 1:
            raise ValueError("period_days must be >= 1")


@dataclass(frozen=True)
class LabeledPatch:
    patch: Patch
    label: Label
    source: LabelSource


@dataclass
class IngestReport:
    patches: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (sha or None, error text)


def _iso_utc(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _git_log_text(repo_path: str, window: MonitorWindow) -> str:
    if not os.path.isdir(repo_path):
        raise RepoUnavailable(f"repository path not found: {repo_path}")
    argv = [
        "git",
        "-C",
        repo_path,
        "log",
        "--no-merges",
        f"--since={_iso_utc(window.since)}",
        f"--until={_iso_utc(window.until)}",
        f"--format={TEMPLATE_FORMAT}",
        "--patch",
        "--no-color",
    ]
    try:
        proc = subprocess.run(argv, capture_output=True, check=False)
    except OSError as exc:
        raise RepoUnavailable(f"git invocation failed: {exc}")
    if proc.returncode != 0:
        raise RepoUnavailable(
            f"git log exited {proc.returncode}: {proc.stderr.decode('utf-8', 'replace').strip()}"
        )
    return proc.stdout.decode("utf-8", "replace")


def split_log_records(text: str):
    """Split a multi-commit git log stream into one text chunk per commit.

    Record starts are bare ``commit <sha>`` lines; the body frame is
    tracked so message lines quoting such text cannot open a record.
    """
    records = []
    current = None
    in_body = False
    for line in text.split("\n"):  # \n only, matching the parser's framing
        if not in_body and _RECORD_START.match(line):
            if current is not None:
                records.append("\n".join(current))
            current = [line]
            continue
        if current is None:
            continue
        if line == "body-begin":
            in_body = True
        elif in_body and line == "body-end":
            in_body = False
        current.append(line)
    if current is not None:
        records.append("\n".join(current))
    return records


def collect_report(repo_path: str, window: MonitorWindow, log_text=None) -> IngestReport:
    """Parse every non-merge commit authored inside [since, until).

    Per-commit parse failures are recorded and skipped; they never abort
    the batch. ``log_text`` substitutes pre-fetched git log output so a
    caller can also scan the same text for backport markers.
    """
    text = _git_log_text(repo_path, window) if log_text is None else log_text
    report = IngestReport()
    for record in split_log_records(text):
        m = _RECORD_START.match(record.splitlines()[0])
        sha = m.group(1) if m else None
        try:
            patch = parse_patch(record)
        except PTracerError as exc:
            report.skipped.append((sha, f"{exc.code}: {exc.detail}"))
            continue
        if window.since <= patch.commit.author_date < window.until:
            report.patches.append(patch)
    if report.skipped:
        log.warning("skipped %d unparseable commits", len(report.skipped))
    report.patches.sort(key=lambda p: (p.commit.author_date, p.commit.sha))
    return report


def collect(repo_path: str, window: MonitorWindow):
    """Ascending (author_date, sha) list of patches in the window."""
    return collect_report(repo_path, window).patches


def scan_stable_refs(stable_log_text: str) -> set:
    """Mainline shas referenced by backport markers in a stable tree log."""
    shas = set()
    for line in stable_log_text.splitlines():
        m = _UPSTREAM_LINE.match(line) or _UPSTREAM_BRACKET.match(line)
        if m:
            shas.add(m.group(1))
    return shas


def build_corpus(patches, stable_shas, label_file_entries, feedback_labels):
    """Attach one label per patch with precedence feedback > file > stable.

    ``label_file_entries`` is an iterable of (sha, Label); later entries win
    on duplicates. ``feedback_labels`` is an iterable of (sha, Label or
    None) where None means the expert verdict excludes the patch from
    training entirely. Disagreeing feedback entries for one sha raise
    ConflictingFeedback. Unlabeled patches default to NON_BUG_FIX.
    """
    file_map = {}
    for sha, label in label_file_entries:
        file_map[sha] = label

    fb_map = {}
    for sha, label in feedback_labels:
        if sha in fb_map and fb_map[sha] != label:
            raise ConflictingFeedback(f"feedback labels for {sha} disagree")
        fb_map[sha] = label

    corpus = []
    for patch in patches:
        sha = patch.commit.sha
        if sha in fb_map:
            label = fb_map[sha]
            if label is None:
                continue  # excluded by expert verdict
            corpus.append(LabeledPatch(patch, label, LabelSource.EXPERT_FEEDBACK))
        elif sha in file_map:
            corpus.append(LabeledPatch(patch, file_map[sha], LabelSource.CORPUS_FILE))
        elif sha in stable_shas:
            corpus.append(LabeledPatch(patch, Label.BUG_FIX, LabelSource.STABLE_REF))
        else:
            corpus.append(LabeledPatch(patch, Label.NON_BUG_FIX, LabelSource.STABLE_REF))
    return corpus


# ---------------------------------------------------------------------------
# Monitoring high-water mark: last processed sha + timestamp, single-line
# JSON, written atomically by a single writer.


def load_watermark(path: str):
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        line = fh.readline().strip()
    if not line:
        return None
    d = json.loads(line)
    return d["last_sha"], int(d["last_ts"])


def store_watermark(path: str, last_sha: str, last_ts: int):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"last_sha": last_sha, "last_ts": last_ts}) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def next_window(watermark, now: int, period_days: int) -> MonitorWindow:
    """Default monitoring window: resume from the watermark, else one
    period back from now."""
    period = period_days * 86400
    if watermark is not None:
        since = watermark[1]
    else:
        since = now - period
    until = max(now, since + 1)
    return MonitorWindow(since=since, until=until, period_days=period_days)
