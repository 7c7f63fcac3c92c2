"""Commit/diff domain types and a parser for git textual patch output.

Two input shapes are understood:

* the pinned template used by the ingestion pipeline::

      git show --format='commit %H%nauthor %an%nemail %ae%ndate %at%nsubject %s%nbody-begin%n%b%nbody-end' --patch --no-color

* ``git format-patch --stdout`` mail-style patches.

Parsing is strict about hunk accounting (line counts must add up) and
tolerant about extended headers it does not care about (index, modes,
similarity). Binary sections become hunk-less file changes.
"""

import re
from dataclasses import dataclass, field
from email.utils import parsedate_to_datetime
from enum import Enum

from .errors import MalformedHeader, MalformedHunk

SHA_RE = re.compile(r"^[0-9a-f]{40}$")

_TEMPLATE_FIRST = re.compile(r"^commit ([0-9a-f]{40})$")
_MAIL_FIRST = re.compile(r"^From ([0-9a-f]{40}) ")
_HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_DIFF_GIT = re.compile(r"^diff --git ")
_SUBJECT_TAG = re.compile(r"^\[[^\]]*\]\s*")

# Extended diff headers we recognise but mostly ignore.
_EXT_HEADERS = (
    "old mode ",
    "new mode ",
    "deleted file mode ",
    "new file mode ",
    "copy from ",
    "copy to ",
    "rename from ",
    "rename to ",
    "similarity index ",
    "dissimilarity index ",
    "index ",
)

DEV_NULL = "/dev/null"


class LineTag(Enum):
    CONTEXT = "context"
    ADDED = "added"
    REMOVED = "removed"


class ChangeKind(Enum):
    MODIFY = "modify"
    ADD = "add"
    DELETE = "delete"
    RENAME = "rename"


@dataclass(frozen=True)
class Commit:
    sha: str
    author_name: str
    author_email: str
    author_date: int
    subject: str
    body: str

    @property
    def message(self) -> str:
        return self.subject + "\n" + self.body


@dataclass(frozen=True)
class Hunk:
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    lines: tuple  # of (LineTag, str)

    def counts_consistent(self) -> bool:
        old = sum(1 for tag, _ in self.lines if tag is not LineTag.ADDED)
        new = sum(1 for tag, _ in self.lines if tag is not LineTag.REMOVED)
        return old == self.old_count and new == self.new_count

    @classmethod
    def from_lines(cls, old_start: int, new_start: int, lines) -> "Hunk":
        """Build a hunk with counts derived from the line tags."""
        lines = tuple(lines)
        old = sum(1 for tag, _ in lines if tag is not LineTag.ADDED)
        new = sum(1 for tag, _ in lines if tag is not LineTag.REMOVED)
        return cls(old_start, old, new_start, new, lines)


@dataclass(frozen=True)
class FileChange:
    old_path: str
    new_path: str
    kind: ChangeKind
    hunks: tuple  # of Hunk

    def added_count(self) -> int:
        return sum(1 for h in self.hunks for tag, _ in h.lines if tag is LineTag.ADDED)

    def removed_count(self) -> int:
        return sum(1 for h in self.hunks for tag, _ in h.lines if tag is LineTag.REMOVED)


@dataclass(frozen=True)
class Patch:
    commit: Commit
    files: tuple  # of FileChange


def changed_paths(patch: Patch) -> set:
    """Union of old and new paths over all file changes.

    Sentinel /dev/null entries never appear in parser output, but are
    excluded defensively for hand-built values.
    """
    paths = set()
    for fc in patch.files:
        for p in (fc.old_path, fc.new_path):
            if p and p != DEV_NULL:
                paths.add(p)
    return paths


def parse_patch(text: str) -> Patch:
    """Parse one commit in template or format-patch form into a Patch."""
    # \n only: file content may hold \x85/  etc., which splitlines()
    # would treat as line breaks and desynchronize hunk accounting.
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # the final newline frames the text, it is not a line
    start = 0
    while start < len(lines) and not lines[start].strip():
        start += 1
    if start >= len(lines):
        raise MalformedHeader("empty input", 1)

    first = lines[start]
    if _TEMPLATE_FIRST.match(first):
        commit, diff_at = _parse_template_header(lines, start)
    elif _MAIL_FIRST.match(first):
        commit, diff_at = _parse_mail_header(lines, start)
    else:
        raise MalformedHeader("no commit sha found", start + 1)

    files = _parse_diff_sections(lines, diff_at) if diff_at is not None else ()
    return Patch(commit=commit, files=files)


def _parse_template_header(lines, start):
    sha = _TEMPLATE_FIRST.match(lines[start]).group(1)
    author = email = ""
    date = 0
    subject = ""
    i = start + 1
    while i < len(lines) and lines[i] != "body-begin":
        ln = lines[i]
        if ln.startswith("author "):
            author = ln[len("author "):]
        elif ln.startswith("email "):
            email = ln[len("email "):]
        elif ln.startswith("date "):
            try:
                date = int(ln[len("date "):])
            except ValueError:
                raise MalformedHeader("bad date field", i + 1)
        elif ln.startswith("subject "):
            subject = ln[len("subject "):]
        i += 1
    if i >= len(lines):
        raise MalformedHeader("missing body-begin marker", len(lines))

    # The true body-end marker is the one followed (after optional blank
    # lines) by a diff section or end of input; bodies quoting the marker
    # mid-text are thereby skipped over.
    body_start = i + 1
    end_idx = None
    for j in range(body_start, len(lines)):
        if lines[j] != "body-end":
            continue
        k = j + 1
        while k < len(lines) and not lines[k].strip():
            k += 1
        if k >= len(lines) or _DIFF_GIT.match(lines[k]):
            end_idx = j
            break
    if end_idx is None:
        raise MalformedHeader("missing body-end marker", len(lines))

    body_lines = lines[body_start:end_idx]
    # %n after %b leaves one trailing blank line inside the frame.
    if body_lines and body_lines[-1] == "":
        body_lines = body_lines[:-1]
    body = "\n".join(body_lines)

    diff_at = None
    for j in range(end_idx + 1, len(lines)):
        if _DIFF_GIT.match(lines[j]):
            diff_at = j
            break

    commit = Commit(sha, author, email, date, subject, body)
    return commit, diff_at


def _parse_mail_header(lines, start):
    sha = _MAIL_FIRST.match(lines[start]).group(1)
    author = email = ""
    date = 0
    subject_parts = []
    i = start + 1
    in_subject = False
    while i < len(lines) and lines[i].strip():
        ln = lines[i]
        if ln.startswith((" ", "\t")) and in_subject:
            subject_parts.append(ln.strip())
        else:
            in_subject = False
            if ln.startswith("From: "):
                author, email = _split_address(ln[len("From: "):])
            elif ln.startswith("Date: "):
                try:
                    dt = parsedate_to_datetime(ln[len("Date: "):].strip())
                    date = int(dt.timestamp())
                except (ValueError, TypeError):
                    raise MalformedHeader("bad Date header", i + 1)
            elif ln.startswith("Subject: "):
                subject_parts.append(ln[len("Subject: "):].strip())
                in_subject = True
        i += 1
    subject = _SUBJECT_TAG.sub("", " ".join(subject_parts))

    # Body runs from the blank line to the "---" separator (or the diff).
    body_lines = []
    diff_at = None
    j = i + 1
    while j < len(lines):
        ln = lines[j]
        if ln == "---" or ln == "-- ":
            break
        if _DIFF_GIT.match(ln):
            diff_at = j
            break
        body_lines.append(ln)
        j += 1
    while body_lines and body_lines[-1] == "":
        body_lines.pop()
    body = "\n".join(body_lines)

    if diff_at is None:
        for k in range(j, len(lines)):
            if _DIFF_GIT.match(lines[k]):
                diff_at = k
                break

    commit = Commit(sha, author, email, date, subject, body)
    return commit, diff_at


def _split_address(value):
    value = value.strip()
    m = re.match(r"^(.*?)\s*<([^>]*)>$", value)
    if m:
        name = m.group(1).strip().strip('"')
        return name, m.group(2).strip()
    return value, ""


def _unquote_c_path(token):
    # git c-quotes paths with specials: "\"a b\\303\\251.c\""
    body = token[1:-1]
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c != "\\":
            out.append(c.encode("utf-8"))
            i += 1
            continue
        i += 1
        esc = body[i]
        if esc in "01234567":
            out.append(bytes([int(body[i:i + 3], 8)]))
            i += 3
        else:
            mapping = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "a": "\a", "b": "\b", "f": "\f", "r": "\r", "v": "\v"}
            out.append(mapping.get(esc, esc).encode("utf-8"))
            i += 1
    return b"".join(out).decode("utf-8")


def _paths_from_diff_git_line(line):
    rest = line[len("diff --git "):]
    if '"' in rest:
        tokens = re.findall(r'"(?:[^"\\]|\\.)*"|\S+', rest)
        if len(tokens) >= 2:
            old_tok, new_tok = tokens[0], tokens[-1]
            old = _unquote_c_path(old_tok) if old_tok.startswith('"') else old_tok
            new = _unquote_c_path(new_tok) if new_tok.startswith('"') else new_tok
            return _strip_prefix(old), _strip_prefix(new)
    cut = rest.rfind(" b/")
    if rest.startswith("a/") and cut > 0:
        return rest[2:cut], rest[cut + 3:]
    parts = rest.split(" ", 1)
    if len(parts) == 2:
        return _strip_prefix(parts[0]), _strip_prefix(parts[1])
    return rest, rest


def _strip_prefix(path):
    if path.startswith(("a/", "b/")):
        return path[2:]
    return path


def _parse_diff_sections(lines, diff_at):
    # Section boundaries: each "diff --git" up to the next one or a
    # trailing mail signature ("-- ").
    starts = [i for i in range(diff_at, len(lines)) if _DIFF_GIT.match(lines[i])]
    files = []
    for n, s in enumerate(starts):
        end = starts[n + 1] if n + 1 < len(starts) else len(lines)
        files.append(_parse_file_section(lines, s, end))
    return tuple(files)


def _parse_file_section(lines, s, end):
    old_path, new_path = _paths_from_diff_git_line(lines[s])
    kind = ChangeKind.MODIFY
    is_binary = False
    hunks = []
    i = s + 1
    while i < end:
        ln = lines[i]
        if ln.startswith("rename from "):
            old_path = ln[len("rename from "):]
            kind = ChangeKind.RENAME
        elif ln.startswith("rename to "):
            new_path = ln[len("rename to "):]
            kind = ChangeKind.RENAME
        elif ln.startswith("new file mode "):
            kind = ChangeKind.ADD
        elif ln.startswith("deleted file mode "):
            kind = ChangeKind.DELETE
        elif ln.startswith("copy to "):
            new_path = ln[len("copy to "):]
            kind = ChangeKind.ADD
        elif ln.startswith("--- "):
            p = ln[4:]
            if p == DEV_NULL:
                kind = ChangeKind.ADD
            else:
                old_path = _strip_quoted_prefix(p)
        elif ln.startswith("+++ "):
            p = ln[4:]
            if p == DEV_NULL:
                kind = ChangeKind.DELETE
            else:
                new_path = _strip_quoted_prefix(p)
        elif ln.startswith("Binary files ") or ln == "GIT binary patch":
            is_binary = True
        elif _HUNK_HEADER.match(ln):
            hunk, i = _parse_hunk(lines, i)
            hunks.append(hunk)
            continue
        elif any(ln.startswith(h) for h in _EXT_HEADERS) or not ln.strip():
            pass
        elif ln == "-- " or ln.startswith("-- "):
            break  # mail signature
        i += 1

    if is_binary:
        hunks = []
    if kind is ChangeKind.ADD:
        old_path = new_path
    elif kind is ChangeKind.DELETE:
        new_path = old_path
    return FileChange(old_path=old_path, new_path=new_path, kind=kind, hunks=tuple(hunks))


def _strip_quoted_prefix(p):
    # Tab-separated metadata after the path is possible ("--- a/x\t(rev 2)").
    p = p.split("\t")[0]
    if p.startswith('"'):
        p = _unquote_c_path(p)
    return _strip_prefix(p)


def _parse_hunk(lines, i):
    m = _HUNK_HEADER.match(lines[i])
    old_start = int(m.group(1))
    old_count = int(m.group(2)) if m.group(2) is not None else 1
    new_start = int(m.group(3))
    new_count = int(m.group(4)) if m.group(4) is not None else 1

    payload = []
    old_left, new_left = old_count, new_count
    j = i + 1
    while old_left > 0 or new_left > 0:
        if j >= len(lines):
            raise MalformedHunk("hunk truncated before declared counts were met", i + 1)
        ln = lines[j]
        if ln.startswith("\\"):
            j += 1  # "\ No newline at end of file"
            continue
        if ln.startswith("+"):
            if new_left <= 0:
                raise MalformedHunk("more added lines than declared", j + 1)
            payload.append((LineTag.ADDED, ln[1:]))
            new_left -= 1
        elif ln.startswith("-"):
            if old_left <= 0:
                raise MalformedHunk("more removed lines than declared", j + 1)
            payload.append((LineTag.REMOVED, ln[1:]))
            old_left -= 1
        elif ln.startswith(" ") or ln == "":
            # A fully empty line is an empty context line with the marker
            # blank stripped in transit.
            if old_left <= 0 or new_left <= 0:
                raise MalformedHunk("more context lines than declared", j + 1)
            payload.append((LineTag.CONTEXT, ln[1:]))
            old_left -= 1
            new_left -= 1
        else:
            raise MalformedHunk("unexpected line inside hunk", j + 1)
        j += 1

    hunk = Hunk(old_start, old_count, new_start, new_count, tuple(payload))
    if not hunk.counts_consistent():
        raise MalformedHunk("hunk header counts inconsistent with payload", i + 1)
    return hunk, j


# ---------------------------------------------------------------------------
# Rendering (the exact inverse of parsing, used for round-trips, archives
# and the diff shown to reviewers).

TEMPLATE_FORMAT = "commit %H%nauthor %an%nemail %ae%ndate %at%nsubject %s%nbody-begin%n%b%nbody-end"


def render_diff(patch: Patch) -> str:
    """Unified diff text for all file changes, in git's own layout."""
    out = []
    for fc in patch.files:
        out.append(f"diff --git a/{fc.old_path} b/{fc.new_path}")
        if fc.kind is ChangeKind.ADD:
            out.append("new file mode 100644")
        elif fc.kind is ChangeKind.DELETE:
            out.append("deleted file mode 100644")
        elif fc.kind is ChangeKind.RENAME:
            out.append(f"rename from {fc.old_path}")
            out.append(f"rename to {fc.new_path}")
        if fc.hunks:
            out.append(f"--- {DEV_NULL if fc.kind is ChangeKind.ADD else 'a/' + fc.old_path}")
            out.append(f"+++ {DEV_NULL if fc.kind is ChangeKind.DELETE else 'b/' + fc.new_path}")
        for h in fc.hunks:
            out.append(f"@@ -{h.old_start},{h.old_count} +{h.new_start},{h.new_count} @@")
            marker = {LineTag.CONTEXT: " ", LineTag.ADDED: "+", LineTag.REMOVED: "-"}
            for tag, text in h.lines:
                out.append(marker[tag] + text)
    return "\n".join(out) + ("\n" if out else "")


def render_template(patch: Patch) -> str:
    """Render a patch back into the pinned git show template text."""
    c = patch.commit
    head = (
        f"commit {c.sha}\n"
        f"author {c.author_name}\n"
        f"email {c.author_email}\n"
        f"date {c.author_date}\n"
        f"subject {c.subject}\n"
        f"body-begin\n{c.body}\n\nbody-end\n"
    )
    diff = render_diff(patch)
    return head + ("\n" + diff if diff else "")


# ---------------------------------------------------------------------------
# JSON codecs for archives and wire use.


def patch_to_dict(patch: Patch) -> dict:
    c = patch.commit
    return {
        "commit": {
            "sha": c.sha,
            "author_name": c.author_name,
            "author_email": c.author_email,
            "author_date": c.author_date,
            "subject": c.subject,
            "body": c.body,
        },
        "files": [
            {
                "old_path": fc.old_path,
                "new_path": fc.new_path,
                "kind": fc.kind.value,
                "hunks": [
                    {
                        "old_start": h.old_start,
                        "old_count": h.old_count,
                        "new_start": h.new_start,
                        "new_count": h.new_count,
                        "lines": [[tag.value, text] for tag, text in h.lines],
                    }
                    for h in fc.hunks
                ],
            }
            for fc in patch.files
        ],
    }


def patch_from_dict(d: dict) -> Patch:
    c = d["commit"]
    commit = Commit(
        sha=c["sha"],
        author_name=c["author_name"],
        author_email=c["author_email"],
        author_date=int(c["author_date"]),
        subject=c["subject"],
        body=c["body"],
    )
    files = tuple(
        FileChange(
            old_path=f["old_path"],
            new_path=f["new_path"],
            kind=ChangeKind(f["kind"]),
            hunks=tuple(
                Hunk(
                    h["old_start"],
                    h["old_count"],
                    h["new_start"],
                    h["new_count"],
                    tuple((LineTag(t), text) for t, text in h["lines"]),
                )
                for h in f["hunks"]
            ),
        )
        for f in d["files"]
    )
    return Patch(commit=commit, files=files)
