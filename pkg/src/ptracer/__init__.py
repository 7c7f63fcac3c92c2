"""Closed-loop triage bot for kernel bug-fix patches.

Monitors a git repository, classifies each new patch with a small neural
scorer trained from backport-derived labels, boosts maintainer-tagged
candidates, reports recommendations, and folds expert verdicts back into
the training corpus.
"""

__version__ = "0.1.0"

from .errors import (
    ChecksumMismatch,
    ConfigError,
    ConflictingFeedback,
    DegenerateCorpus,
    InvalidRecord,
    MalformedHeader,
    MalformedHunk,
    PTracerError,
    RepoUnavailable,
    RetrainInProgress,
    ShapeMismatch,
    UnknownSha,
    VersionMismatch,
)
from .patch import ChangeKind, Commit, FileChange, Hunk, LineTag, Patch, parse_patch
from .ingest import Label, LabeledPatch, LabelSource, MonitorWindow, build_corpus, collect, scan_stable_refs
from .modules import ModuleList, is_concerned, load_module_list, partition
from .preprocess import EncodeConfig, Vocab, VocabKind, build_vocab, encode_patch
from .model import Metrics, ModelBundle, ModelConfig, ModelParams, evaluate, forward, load_model, save_model, train
from .pipeline import Funnel, ScoredPatch, detect_cc_stable, keyword_baseline_score, render_report, revise_score, triage
from .feedback import FeedbackRecord, FeedbackStore, ReasonCategory, Verdict, assemble_retraining_corpus, feedback_labels, record_feedback
from .config import Config, load_config

__all__ = [name for name in dir() if not name.startswith("_")]
