"""Exception hierarchy shared across the bot.

Every error carries a stable machine-readable ``code`` so the CLI and the
HTTP service can report failures uniformly.
"""


class PTracerError(Exception):
    """Base class for domain errors."""

    code = "error"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class MalformedHeader(PTracerError):
    code = "malformed_header"

    def __init__(self, detail: str, line: int = 0):
        super().__init__(f"{detail} (line {line})" if line else detail)
        self.line = line


class MalformedHunk(PTracerError):
    code = "malformed_hunk"

    def __init__(self, detail: str, line: int = 0):
        super().__init__(f"{detail} (line {line})" if line else detail)
        self.line = line


class RepoUnavailable(PTracerError):
    code = "repo_unavailable"


class ConflictingFeedback(PTracerError):
    code = "conflicting_feedback"


class DegenerateCorpus(PTracerError):
    code = "degenerate_corpus"


class ShapeMismatch(PTracerError):
    code = "shape_mismatch"


class ChecksumMismatch(PTracerError):
    code = "checksum_mismatch"


class VersionMismatch(PTracerError):
    code = "version_mismatch"


class UnknownSha(PTracerError):
    code = "unknown_sha"


class InvalidRecord(PTracerError):
    code = "invalid_record"


class RetrainInProgress(PTracerError):
    code = "retrain_in_progress"


class ConfigError(PTracerError):
    code = "config_error"
