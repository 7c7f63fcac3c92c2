"""Concerned-module filtering: path-prefix matching against the module
list a downstream OS actually ships."""

import logging
from dataclasses import dataclass

from .patch import Patch, changed_paths

log = logging.getLogger(__name__)


def normalize_prefix(raw: str) -> str:
    p = raw.strip().strip("/")
    if not p:
        raise ValueError("empty module prefix")
    segments = p.split("/")
    if any(s in (".", "..") or not s for s in segments):
        raise ValueError(f"module prefix has dot or empty segments: {raw!r}")
    return p


@dataclass(frozen=True)
class ModuleList:
    prefixes: tuple
    enabled: bool = True

    @classmethod
    def from_prefixes(cls, prefixes, enabled: bool = True) -> "ModuleList":
        return cls(tuple(normalize_prefix(p) for p in prefixes), enabled)

    @classmethod
    def from_text(cls, text: str, enabled: bool = True) -> "ModuleList":
        """Parse the module list file: one prefix per line, # comments."""
        prefixes = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                prefixes.append(normalize_prefix(line))
        return cls(tuple(prefixes), enabled)


def load_module_list(path: str, enabled: bool = True) -> ModuleList:
    with open(path, "r", encoding="utf-8") as fh:
        ml = ModuleList.from_text(fh.read(), enabled)
    if enabled and not ml.prefixes:
        # Fail-closed: an empty enabled list rejects every patch.
        log.warning("module list %s is empty; every patch will be filtered out", path)
    return ml


def _path_matches(path: str, prefix: str) -> bool:
    return path == prefix or path.startswith(prefix + "/")


def is_concerned(patch: Patch, modules: ModuleList) -> bool:
    """True when filtering is off or any changed path is under a prefix."""
    if not modules.enabled:
        return True
    paths = changed_paths(patch)
    return any(_path_matches(p, pref) for p in paths for pref in modules.prefixes)


def partition(patches, modules: ModuleList):
    """Order-preserving split into (concerned, filtered_out)."""
    concerned, filtered_out = [], []
    for p in patches:
        (concerned if is_concerned(p, modules) else filtered_out).append(p)
    return concerned, filtered_out
