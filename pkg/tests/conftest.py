"""Shared fixtures: deterministic git repositories, synthetic patches,
and a small trained bundle reused across integration tests."""

import os
import shutil
import subprocess

import numpy as np
import pytest

from ptracer.ingest import Label, LabeledPatch, LabelSource
from ptracer.model import ModelConfig, save_model, train
from ptracer.patch import ChangeKind, Commit, FileChange, Hunk, LineTag, Patch
from ptracer.preprocess import EncodeConfig, build_vocabs_from_patches, encode_corpus

BASE_DATE = 1_549_000_000  # 2019-02-01T05:46:40Z


class RepoBuilder:
    """Imperative builder for small deterministic git histories.

    Author and committer dates advance one hour per commit from
    BASE_DATE unless given, so monitoring windows are predictable.
    """

    def __init__(self, path):
        self.path = str(path)
        os.makedirs(self.path, exist_ok=True)
        self.clock = BASE_DATE
        self.shas = []
        self._git("init", "-q", "-b", "main")
        self._git("config", "user.name", "Dev One")
        self._git("config", "user.email", "dev@example.org")
        self._git("config", "diff.renames", "true")

    def _git(self, *args, env=None):
        full_env = dict(os.environ)
        if env:
            full_env.update(env)
        proc = subprocess.run(
            ["git", "-C", self.path, *args],
            capture_output=True, env=full_env, check=True,
        )
        return proc.stdout.decode("utf-8", "replace")

    def commit(self, subject, body="", *, author="Dev One", email="dev@example.org",
               date=None, write=None, delete=(), rename=(), chmod=(),
               allow_empty=False):
        if date is None:
            self.clock += 3600
            date = self.clock
        else:
            self.clock = max(self.clock, date)
        for src, dst in rename:
            full_dst = os.path.join(self.path, dst)
            os.makedirs(os.path.dirname(full_dst) or self.path, exist_ok=True)
            os.rename(os.path.join(self.path, src), full_dst)
        for path, content in (write or {}).items():
            full = os.path.join(self.path, path)
            os.makedirs(os.path.dirname(full) or self.path, exist_ok=True)
            mode = "wb" if isinstance(content, bytes) else "w"
            with open(full, mode) as fh:
                fh.write(content)
        for path in delete:
            os.unlink(os.path.join(self.path, path))
        for path, mode in chmod:
            os.chmod(os.path.join(self.path, path), mode)
        self._git("add", "-A")
        message = subject if not body else subject + "\n\n" + body
        stamp = f"@{date} +0000"
        env = {
            "GIT_AUTHOR_NAME": author,
            "GIT_AUTHOR_EMAIL": email,
            "GIT_AUTHOR_DATE": stamp,
            "GIT_COMMITTER_NAME": author,
            "GIT_COMMITTER_EMAIL": email,
            "GIT_COMMITTER_DATE": stamp,
        }
        args = ["commit", "-q", "-m", message]
        if allow_empty:
            args.append("--allow-empty")
        self._git(*args, env=env)
        sha = self._git("rev-parse", "HEAD").strip()
        self.shas.append((sha, date))
        return sha

    def merge(self, branch, subject, date=None):
        if date is None:
            self.clock += 3600
            date = self.clock
        stamp = f"@{date} +0000"
        env = {
            "GIT_AUTHOR_DATE": stamp,
            "GIT_COMMITTER_DATE": stamp,
        }
        self._git("merge", "--no-ff", "-q", "-m", subject, branch, env=env)
        return self._git("rev-parse", "HEAD").strip()

    def show_template(self, sha):
        from ptracer.patch import TEMPLATE_FORMAT
        return self._git("show", f"--format={TEMPLATE_FORMAT}", "--patch", "--no-color", sha)

    def format_patch(self, sha):
        return self._git("format-patch", "--stdout", "-1", sha)

    def numstat(self, sha):
        """(added or None, removed or None, old_path, new_path) per file."""
        out = self._git("show", "--numstat", "-z", "--format=", sha)
        parts = out.split("\0")
        entries = []
        i = 0
        while i < len(parts):
            tok = parts[i]
            if not tok:
                i += 1
                continue
            a, r, path = tok.split("\t", 2)
            if path == "":
                old, new = parts[i + 1], parts[i + 2]
                i += 3
            else:
                old = new = path
                i += 1
            added = None if a == "-" else int(a)
            removed = None if r == "-" else int(r)
            entries.append((added, removed, old, new))
        return entries

    def rev_list(self):
        out = self._git("rev-list", "--no-merges", "HEAD")
        return out.split()


@pytest.fixture()
def repo(tmp_path):
    return RepoBuilder(tmp_path / "repo")


def _lines(n, tag, start=0):
    return "".join(f"{tag} line {start + i} of sample content\n" for i in range(n))


def build_oracle_repo(path):
    """100+ commits exercising every diff shape the parser must handle."""
    b = RepoBuilder(path)
    rng = np.random.default_rng(20190201)
    pool = [f"drivers/net/eth{i}.c" for i in range(6)] + \
           [f"fs/jfs/file{i}.c" for i in range(4)] + \
           ["kernel/sched/core.c", "mm/slab.c"]
    b.commit("Initial tree", write={p: _lines(30, p) for p in pool})
    for n in range(1, 105):
        kind = n % 19
        if kind == 3:
            old = pool[n % len(pool)]
            new = old.replace(".c", f"_v{n}.c")
            pool[n % len(pool)] = new
            b.commit(f"Move {old} aside", body="Plain reorganization.", rename=[(old, new)])
        elif kind == 7:
            b.commit(f"Drop scratch file {n}",
                     write={f"tmp/scratch{n}.txt": "to be removed\n"})
            b.commit(f"Remove scratch file {n}", delete=[f"tmp/scratch{n}.txt"])
        elif kind == 11:
            blob = bytes(rng.integers(0, 256, size=128, dtype=np.uint8))
            b.commit(f"Update firmware blob {n}",
                     body="Binary payload refresh.",
                     write={f"firmware/blob{n % 3}.bin": b"\x00" + blob})
        elif kind == 13:
            b.commit(f"Note release {n}", body="No tree changes.", allow_empty=True)
        elif kind == 15:
            target = pool[int(rng.integers(0, len(pool)))]
            content = _lines(40, target) + "tail without newline"
            b.commit(f"Trim trailing newline in {target}", write={target: content})
        else:
            count = int(rng.integers(1, 4))
            writes = {}
            for _ in range(count):
                target = pool[int(rng.integers(0, len(pool)))]
                writes[target] = _lines(int(rng.integers(5, 45)), target, start=n)
            body = ""
            if n % 7 == 0:
                body = "Cc: stable@vger.kernel.org # 4.19+"
            if n % 11 == 0 and b.shas:
                ref = b.shas[int(rng.integers(0, len(b.shas)))][0]
                body = f"commit {ref} upstream.\n\nBackported for the stable series."
            b.commit(f"Rework {count} files pass {n}", body=body, write=writes)
    # oddball paths and modes
    b.commit("Add notes with spaces", write={"docs/read me.txt": "hello\nworld\n"})
    b.commit("Add unicode path", body="Grüße aus dem Treiber.",
             write={"drivers/net/übertreiber.c": "int x = 1;\n"})
    b.commit("Mark helper executable", chmod=[("mm/slab.c", 0o755)])
    b.commit("Add empty placeholder", write={"include/empty.h": ""})
    return b


@pytest.fixture(scope="session")
def oracle_repo(tmp_path_factory):
    return build_oracle_repo(tmp_path_factory.mktemp("oracle") / "repo")


# ---------------------------------------------------------------------------
# Synthetic patches (no git involved).


def make_patch(sha=None, subject="Fix sample defect", body="", files=None,
               date=BASE_DATE, author="Dev One", email="dev@example.org"):
    """files: list of (path, removed_lines, added_lines)."""
    if sha is None:
        sha = "ab" * 20
    changes = []
    for path, removed, added in (files or []):
        lines = [(LineTag.REMOVED, t) for t in removed] + [(LineTag.ADDED, t) for t in added]
        changes.append(FileChange(
            old_path=path, new_path=path, kind=ChangeKind.MODIFY,
            hunks=(Hunk.from_lines(1, 1, lines),),
        ))
    commit = Commit(sha=sha, author_name=author, author_email=email,
                    author_date=date, subject=subject, body=body)
    return Patch(commit=commit, files=tuple(changes))


_WORDS = ["driver", "probe", "update", "buffer", "queue", "lock", "init",
          "check", "remove", "handle", "path", "state"]
_CODE = ["ret = do_work(dev);", "if (err < 0)", "return err;", "count += 1;",
         "spin_lock(&q->lock);", "kfree(buf);"]


def planted_corpus(n, seed, signal="fixplant"):
    """Balanced corpus where the positive class is marked by one message
    token and one added code line; linearly separable by construction."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = i % 2
        words = [_WORDS[int(k)] for k in rng.integers(0, len(_WORDS), size=6)]
        if label:
            words.insert(int(rng.integers(0, len(words) + 1)), signal)
        added = [_CODE[int(rng.integers(0, len(_CODE)))]]
        if label:
            added.append("repair_marker = 1;")
        patch = make_patch(
            sha=f"{i:040x}",
            subject=" ".join(words),
            body="",
            files=[("drivers/core/main.c", [], added)],
            date=BASE_DATE + i,
        )
        out.append(LabeledPatch(
            patch,
            Label.BUG_FIX if label else Label.NON_BUG_FIX,
            LabelSource.CORPUS_FILE,
        ))
    return out


TINY_ENCODE = EncodeConfig(max_msg_tokens=12, max_files=2, max_lines=3, max_line_tokens=8)

# Small dimensions keep finite-difference sweeps fast; accuracy is
# irrelevant for those tests.
TINY_MODEL = ModelConfig(
    embed_dim=6, conv_filters=4, widths=(1, 2, 3), hidden_dim=8,
    learning_rate=0.15, epochs=10, batch_size=16, l2=1e-4, seed=7,
    encode=TINY_ENCODE,
)

# Default widths with a higher step size separate the planted corpus
# within 20 epochs; used wherever a competent model is required.
CONVERGED_MODEL = ModelConfig(
    learning_rate=1.0, epochs=20, batch_size=32, seed=7,
    encode=EncodeConfig(max_msg_tokens=16, max_files=2, max_lines=3, max_line_tokens=8),
)


@pytest.fixture(scope="session")
def tiny_model_cfg():
    return TINY_MODEL


@pytest.fixture(scope="session")
def planted_bundle(tmp_path_factory):
    """(bundle_dir, params, vocabs, config): a converged planted-signal
    model able to separate the two classes near-perfectly."""
    cfg = CONVERGED_MODEL
    labeled = planted_corpus(200, seed=11)
    patches = [lp.patch for lp in labeled]
    vocab_msg, vocab_code = build_vocabs_from_patches(patches)
    encoded = encode_corpus(labeled, vocab_msg, vocab_code, cfg.encode)
    params, _ = train(encoded, cfg, vocab_msg.size, vocab_code.size)
    out = str(tmp_path_factory.mktemp("bundle") / "model")
    save_model(params, cfg, vocab_msg, vocab_code, out)
    return out, params, (vocab_msg, vocab_code), cfg


# ---------------------------------------------------------------------------
# A deployable environment: repo + module list + bundle + config file.


def build_deployment_repo(path):
    """History with concerned/unconcerned paths, maintainer tags, and
    stable-style backport markers referencing earlier commits."""
    b = RepoBuilder(path)
    b.commit("Add net core scaffolding",
             write={"drivers/net/core.c": _lines(20, "net")})
    b.commit("Add ext4 inode helpers",
             write={"fs/ext4/inode.c": _lines(18, "ext4")})
    fix_net = b.commit("Fix null deref in rx path",
                       body="The rx handler dereferenced before the check.\n\n"
                            "Cc: stable@vger.kernel.org",
                       write={"drivers/net/core.c": _lines(21, "net", start=2)})
    b.commit("Add display pipeline",
             write={"drivers/gpu/drm.c": _lines(25, "drm")})
    b.commit("Fix ext4 leak on error path",
             body="Cc: <stable@vger.kernel.org> # 4.19+",
             write={"fs/ext4/inode.c": _lines(19, "ext4", start=3)})
    fix_drm = b.commit("Fix overflow in blit length check",
                       write={"drivers/gpu/drm.c": _lines(24, "drm", start=1)})
    b.commit("Backport rx fix to stable notes",
             body=f"commit {fix_net} upstream.\n\nQueued for 4.19.",
             write={"drivers/net/stable_notes.txt": "rx fix queued\n"})
    b.commit("Track blit fix for stable",
             body=f"[ Upstream commit {fix_drm} ]",
             write={"drivers/net/stable_notes.txt": "rx fix queued\nblit fix queued\n"})
    b.commit("Refactor buffer handling",
             write={"drivers/net/core.c": _lines(22, "net", start=4)})
    b.commit("Update scheduler comments",
             write={"kernel/sched/core.c": _lines(12, "sched")})
    return b


@pytest.fixture()
def deployment(tmp_path, planted_bundle):
    """Everything a CLI/service run needs, pre-wired in one directory."""
    import json

    root = tmp_path
    repo = build_deployment_repo(root / "repo")
    bundle_src = planted_bundle[0]
    bundle_dir = str(root / "bundle")
    shutil.copytree(bundle_src, bundle_dir)
    # a fresh copy must not inherit a training lock
    lock = os.path.join(bundle_dir, "train.lock")
    if os.path.exists(lock):
        os.unlink(lock)
    modules_path = str(root / "modules.txt")
    with open(modules_path, "w", encoding="utf-8") as fh:
        fh.write("# concerned prefixes\ndrivers\nnet\n")
    store_dir = str(root / "store")
    config_path = str(root / "config.json")
    config = {
        "repo_path": repo.path,
        "module_list_path": modules_path,
        "bundle_dir": bundle_dir,
        "store_dir": store_dir,
        "threshold": 0.5,
        "boost_floor": 0.95,
        "revision_enabled": True,
        "period_days": 30,
        "http_port": 8787,
    }
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)

    class Deployment:
        pass

    d = Deployment()
    d.root = str(root)
    d.repo = repo
    d.bundle_dir = bundle_dir
    d.modules_path = modules_path
    d.store_dir = store_dir
    d.config_path = config_path
    d.window = (BASE_DATE, repo.clock + 1)
    return d
