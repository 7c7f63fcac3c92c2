"""Trainable neural scorer for encoded patches.

Architecture: a small text CNN over the commit message (one convolution
per window width, ReLU, max over positions) concatenated with a
permutation-invariant code summary (mean token embedding per changed
line, elementwise max over lines per side, elementwise max over files),
followed by one ReLU hidden layer and a sigmoid output.

Everything is float64 and the gradients are exact analytic derivatives;
max pooling routes gradient to the first argmax position. Training is
plain seeded mini-batch gradient descent, so a (seed, corpus, config)
triple fully determines the resulting parameters.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ChecksumMismatch, DegenerateCorpus, RetrainInProgress, ShapeMismatch, VersionMismatch
from .preprocess import EncodeConfig, Vocab, vocab_from_bytes, vocab_to_bytes

BUNDLE_VERSION = "1"
INIT_SCALE = 0.05


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 32
    conv_filters: int = 16
    widths: tuple = (1, 2, 3)
    hidden_dim: int = 32
    learning_rate: float = 0.05
    epochs: int = 20
    batch_size: int = 32
    l2: float = 1e-4
    seed: int = 42
    encode: EncodeConfig = field(default_factory=EncodeConfig)

    def __post_init__(self):
        if min(self.embed_dim, self.conv_filters, self.hidden_dim, self.epochs, self.batch_size) < 1:
            raise ValueError("model dimensions must be positive")
        if not self.widths or any(w < 1 for w in self.widths):
            raise ValueError("widths must be positive")
        if max(self.widths) > self.encode.max_msg_tokens:
            raise ValueError("conv width exceeds message length")

    @property
    def feature_dim(self) -> int:
        return len(self.widths) * self.conv_filters + 2 * self.embed_dim


@dataclass
class ModelParams:
    e_msg: np.ndarray            # (V_m, d)
    e_code: np.ndarray           # (V_c, d)
    conv_w: dict                 # width -> (width * d, n_f)
    conv_b: dict                 # width -> (n_f,)
    w_h: np.ndarray              # (feature_dim, H)
    b_h: np.ndarray              # (H,)
    w_o: np.ndarray              # (H,)
    b_o: np.ndarray              # (1,)

    @property
    def widths(self):
        return tuple(sorted(self.conv_w))

    @property
    def embed_dim(self) -> int:
        return self.e_msg.shape[1]

    def arrays(self):
        """(name, array) pairs in the documented serialization order."""
        out = [("e_msg", self.e_msg), ("e_code", self.e_code)]
        for k in self.widths:
            out.append((f"conv_w_{k}", self.conv_w[k]))
            out.append((f"conv_b_{k}", self.conv_b[k]))
        out.extend([("w_h", self.w_h), ("b_h", self.b_h), ("w_o", self.w_o), ("b_o", self.b_o)])
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            e_msg=self.e_msg.copy(),
            e_code=self.e_code.copy(),
            conv_w={k: v.copy() for k, v in self.conv_w.items()},
            conv_b={k: v.copy() for k, v in self.conv_b.items()},
            w_h=self.w_h.copy(),
            b_h=self.b_h.copy(),
            w_o=self.w_o.copy(),
            b_o=self.b_o.copy(),
        )

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            e_msg=np.zeros_like(self.e_msg),
            e_code=np.zeros_like(self.e_code),
            conv_w={k: np.zeros_like(v) for k, v in self.conv_w.items()},
            conv_b={k: np.zeros_like(v) for k, v in self.conv_b.items()},
            w_h=np.zeros_like(self.w_h),
            b_h=np.zeros_like(self.b_h),
            w_o=np.zeros_like(self.w_o),
            b_o=np.zeros_like(self.b_o),
        )


_BIAS_NAMES_PREFIX = "conv_b_"


def _is_bias(name: str) -> bool:
    return name.startswith(_BIAS_NAMES_PREFIX) or name in ("b_h", "b_o")


def init_params(cfg: ModelConfig, vocab_msg_size: int, vocab_code_size: int, rng=None) -> ModelParams:
    """Seeded uniform(-0.05, 0.05) weights, zero biases.

    Draw order is fixed (embeddings, then conv weights per width, then the
    dense layers) so a seed pins every value.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    d, n_f = cfg.embed_dim, cfg.conv_filters

    def u(*shape):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)

    conv_w = {k: u(k * d, n_f) for k in cfg.widths}
    conv_b = {k: np.zeros(n_f) for k in cfg.widths}
    return ModelParams(
        e_msg=u(vocab_msg_size, d),
        e_code=u(vocab_code_size, d),
        conv_w=conv_w,
        conv_b=conv_b,
        w_h=u(cfg.feature_dim, cfg.hidden_dim),
        b_h=np.zeros(cfg.hidden_dim),
        w_o=u(cfg.hidden_dim),
        b_o=np.zeros(1),
    )


def _sigmoid(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + np.exp(-u))
    e = np.exp(u)
    return e / (1.0 + e)


def _check_ids(ids, size, what):
    if np.any(ids < 0) or np.any(ids >= size):
        raise ShapeMismatch(f"{what} token id out of vocabulary range 0..{size - 1}")


def _forward_cache(enc, params: ModelParams):
    widths = params.widths
    d = params.embed_dim

    ids = np.asarray(enc.msg_ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeMismatch("msg_ids must be one-dimensional")
    L = ids.shape[0]
    if L < max(widths):
        raise ShapeMismatch("message shorter than the widest convolution window")
    _check_ids(ids, params.e_msg.shape[0], "message")

    X = params.e_msg[ids]  # (L, d)
    pad = ids == 0
    msg_feats = []
    conv_cache = {}
    for k in widths:
        P = L - k + 1
        win = np.concatenate([X[i:P + i] for i in range(k)], axis=1)  # (P, k*d)
        pre = win @ params.conv_w[k] + params.conv_b[k]               # (P, n_f)
        act = np.maximum(pre, 0.0)
        allpad = pad[:P].copy()
        for i in range(1, k):
            allpad &= pad[i:P + i]
        act[allpad] = 0.0  # windows of pure padding contribute nothing
        pooled = act.max(axis=0)
        argmax = act.argmax(axis=0)  # first occurrence on ties
        msg_feats.append(pooled)
        conv_cache[k] = (win, argmax, pooled, allpad)

    file_caches = []
    file_vecs = []
    for f in enc.files:
        sides = []
        side_caches = []
        for mat in (f.removed_ids, f.added_ids):
            mat = np.asarray(mat, dtype=np.int64)
            if mat.ndim != 2:
                raise ShapeMismatch("code id matrices must be two-dimensional")
            _check_ids(mat, params.e_code.shape[0], "code")
            nonpad = mat != 0
            cnt = nonpad.sum(axis=1)                                   # (N_l,)
            emb = params.e_code[mat]                                   # (N_l, L_c, d)
            sums = (emb * nonpad[:, :, None]).sum(axis=1)              # (N_l, d)
            denom = np.maximum(cnt, 1)[:, None].astype(np.float64)
            line_vecs = np.where(cnt[:, None] > 0, sums / denom, 0.0)  # (N_l, d)
            side_vec = line_vecs.max(axis=0)
            side_arg = line_vecs.argmax(axis=0)
            sides.append(side_vec)
            side_caches.append((mat, cnt, side_arg))
        file_vecs.append(np.concatenate(sides))
        file_caches.append(side_caches)

    if file_vecs:
        stacked = np.stack(file_vecs)            # (F, 2d)
        code_vec = stacked.max(axis=0)
        code_arg = stacked.argmax(axis=0)        # (2d,)
    else:
        code_vec = np.zeros(2 * d)
        code_arg = None

    z = np.concatenate(msg_feats + [code_vec])
    if z.shape[0] != params.w_h.shape[0]:
        raise ShapeMismatch(
            f"feature vector length {z.shape[0]} does not match hidden layer input {params.w_h.shape[0]}"
        )
    a_h = z @ params.w_h + params.b_h
    h = np.maximum(a_h, 0.0)
    u = float(h @ params.w_o + params.b_o[0])
    score = float(_sigmoid(u))
    return score, {
        "ids": ids,
        "conv": conv_cache,
        "files": file_caches,
        "code_arg": code_arg,
        "z": z,
        "a_h": a_h,
        "h": h,
    }


def forward(enc, params: ModelParams) -> float:
    """Bug-fix probability for one encoded patch, deterministic."""
    score, _ = _forward_cache(enc, params)
    return score


EPS = 1e-12


def l2_penalty(params: ModelParams) -> float:
    return float(sum(np.sum(a * a) for name, a in params.arrays() if not _is_bias(name)))


def loss(scores, labels, params: ModelParams, l2: float) -> float:
    """Mean binary cross-entropy plus L2 on non-bias parameters."""
    s = np.clip(np.asarray(scores, dtype=np.float64), EPS, 1.0 - EPS)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape:
        raise ShapeMismatch("scores and labels differ in length")
    bce = float(np.mean(-(y * np.log(s) + (1.0 - y) * np.log(1.0 - s))))
    return bce + l2 * l2_penalty(params)


def batch_loss(batch, params: ModelParams, l2: float) -> float:
    scores = [forward(enc, params) for enc in batch]
    labels = [enc.label for enc in batch]
    return loss(scores, labels, params, l2)


def backward(batch, params: ModelParams, l2: float) -> ModelParams:
    """Exact gradients of batch_loss with respect to every parameter."""
    grads, _ = _backward_with_loss(batch, params, l2)
    return grads


def _backward_with_loss(batch, params: ModelParams, l2: float):
    if not batch:
        raise ValueError("backward requires a non-empty batch")
    B = len(batch)
    grads = params.zeros_like()
    total_bce = 0.0
    widths = params.widths
    n_f = params.conv_w[widths[0]].shape[1]
    d = params.embed_dim

    for enc in batch:
        y = float(enc.label)
        score, cache = _forward_cache(enc, params)
        s = min(max(score, EPS), 1.0 - EPS)
        total_bce += -(y * np.log(s) + (1.0 - y) * np.log(1.0 - s))

        g_u = (score - y) / B  # d(mean BCE)/du through the sigmoid
        h, a_h, z = cache["h"], cache["a_h"], cache["z"]
        grads.w_o += g_u * h
        grads.b_o[0] += g_u
        d_h = g_u * params.w_o
        d_a = d_h * (a_h > 0)
        grads.w_h += np.outer(z, d_a)
        grads.b_h += d_a
        d_z = params.w_h @ d_a

        # Message branch: gradient flows only through the argmax window of
        # each filter, and only if its activation survived ReLU unclipped.
        ids = cache["ids"]
        off = 0
        for k in widths:
            win, argmax, pooled, allpad = cache["conv"][k]
            d_m = d_z[off:off + n_f]
            off += n_f
            for f in range(n_f):
                g = d_m[f]
                if g == 0.0 or pooled[f] <= 0.0:
                    continue
                p = int(argmax[f])
                grads.conv_w[k][:, f] += g * win[p]
                grads.conv_b[k][f] += g
                d_win = g * params.conv_w[k][:, f]
                for j in range(k):
                    grads.e_msg[ids[p + j]] += d_win[j * d:(j + 1) * d]

        # Code branch: route each dimension to its argmax file, then to the
        # argmax line, then spread over that line's non-pad tokens.
        code_arg = cache["code_arg"]
        if code_arg is not None:
            d_code = d_z[off:off + 2 * d]
            for i, side_caches in enumerate(cache["files"]):
                sel = code_arg == i
                if not sel.any():
                    continue
                d_file = np.where(sel, d_code, 0.0)
                for side, (mat, cnt, side_arg) in enumerate(side_caches):
                    d_side = d_file[side * d:(side + 1) * d]
                    for j in np.nonzero(d_side)[0]:
                        r = int(side_arg[j])
                        if cnt[r] == 0:
                            continue  # an empty line is a constant zero
                        share = d_side[j] / cnt[r]
                        for pos in np.nonzero(mat[r] != 0)[0]:
                            grads.e_code[mat[r, pos], j] += share

    pdict = dict(params.arrays())
    for name, g in grads.arrays():
        if not _is_bias(name):
            g += 2.0 * l2 * pdict[name]

    total = total_bce / B + l2 * l2_penalty(params)
    return grads, float(total)


# ---------------------------------------------------------------------------
# Metrics and evaluation.


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "Metrics":
        total = tp + fp + tn + fn
        accuracy = (tp + tn) / total if total else 0.0
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(tp, fp, tn, fn, accuracy, precision, recall, f1)

    def as_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
        }


def evaluate(params: ModelParams, labeled, threshold: float) -> Metrics:
    """Confusion counts at the given threshold; prediction is score >= t."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    tp = fp = tn = fn = 0
    for enc in labeled:
        pred = forward(enc, params) >= threshold
        if pred and enc.label == 1:
            tp += 1
        elif pred:
            fp += 1
        elif enc.label == 1:
            fn += 1
        else:
            tn += 1
    return Metrics.from_counts(tp, fp, tn, fn)


# ---------------------------------------------------------------------------
# Training.


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    eval_metrics: Metrics | None


def train(corpus, cfg: ModelConfig, vocab_msg_size=None, vocab_code_size=None):
    """Mini-batch gradient descent over the corpus, reproducible by seed.

    The held-out split is the last 10% of the seed-shuffled corpus; its
    metrics are logged each epoch. Vocabulary sizes default to the largest
    id seen plus one, but callers with real vocabularies should pass them
    so out-of-vocabulary rows exist at prediction time.
    """
    if any(enc.label is None for enc in corpus):
        raise DegenerateCorpus("corpus contains unlabeled patches")
    labels = {enc.label for enc in corpus}
    if labels != {0, 1}:
        raise DegenerateCorpus("training needs both classes present")

    if vocab_msg_size is None:
        vocab_msg_size = max(int(enc.msg_ids.max()) for enc in corpus) + 1
    if vocab_code_size is None:
        vocab_code_size = max(
            (int(max(f.removed_ids.max(), f.added_ids.max())) for enc in corpus for f in enc.files),
            default=1,
        ) + 1

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(corpus))
    shuffled = [corpus[i] for i in order]
    n_eval = len(shuffled) // 10
    eval_set = shuffled[len(shuffled) - n_eval:] if n_eval else []
    train_set = shuffled[:len(shuffled) - n_eval]

    params = init_params(cfg, vocab_msg_size, vocab_code_size, rng)
    log = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(perm), cfg.batch_size):
            batch = [train_set[i] for i in perm[start:start + cfg.batch_size]]
            grads, batch_total = _backward_with_loss(batch, params, cfg.l2)
            for (_, p), (_, g) in zip(params.arrays(), grads.arrays()):
                p -= cfg.learning_rate * g
            losses.append(batch_total)
        metrics = evaluate(params, eval_set, 0.5) if eval_set else None
        log.append(EpochLog(epoch=epoch, train_loss=float(np.mean(losses)), eval_metrics=metrics))
    return params, log


# ---------------------------------------------------------------------------
# Deployable bundle: manifest + raw little-endian float64 parameters +
# both vocabularies. Loading verifies checksums and version.

MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.bin"
VOCAB_MSG_NAME = "vocab_msg.json"
VOCAB_CODE_NAME = "vocab_code.json"
LOCK_NAME = "train.lock"


@dataclass(frozen=True)
class ModelBundle:
    params: ModelParams
    config: ModelConfig
    vocab_msg: Vocab
    vocab_code: Vocab


def _config_to_dict(cfg: ModelConfig) -> dict:
    e = cfg.encode
    return {
        "embed_dim": cfg.embed_dim,
        "conv_filters": cfg.conv_filters,
        "widths": list(cfg.widths),
        "hidden_dim": cfg.hidden_dim,
        "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "l2": cfg.l2,
        "seed": cfg.seed,
        "encode": {
            "max_msg_tokens": e.max_msg_tokens,
            "max_files": e.max_files,
            "max_lines": e.max_lines,
            "max_line_tokens": e.max_line_tokens,
        },
    }


def _config_from_dict(d: dict) -> ModelConfig:
    enc = d["encode"]
    return ModelConfig(
        embed_dim=d["embed_dim"],
        conv_filters=d["conv_filters"],
        widths=tuple(d["widths"]),
        hidden_dim=d["hidden_dim"],
        learning_rate=d["learning_rate"],
        epochs=d["epochs"],
        batch_size=d["batch_size"],
        l2=d["l2"],
        seed=d["seed"],
        encode=EncodeConfig(
            max_msg_tokens=enc["max_msg_tokens"],
            max_files=enc["max_files"],
            max_lines=enc["max_lines"],
            max_line_tokens=enc["max_line_tokens"],
        ),
    )


def params_to_bytes(params: ModelParams) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in params.arrays())


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_model(params: ModelParams, cfg: ModelConfig, vocab_msg: Vocab, vocab_code: Vocab, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    blobs = {
        PARAMS_NAME: params_to_bytes(params),
        VOCAB_MSG_NAME: vocab_to_bytes(vocab_msg),
        VOCAB_CODE_NAME: vocab_to_bytes(vocab_code),
    }
    manifest = {
        "version": BUNDLE_VERSION,
        "config": _config_to_dict(cfg),
        "params_file": PARAMS_NAME,
        "vocab_files": {"message": VOCAB_MSG_NAME, "code": VOCAB_CODE_NAME},
        "checksums": {name: _sha256(data) for name, data in sorted(blobs.items())},
    }
    for name, data in blobs.items():
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(data)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return out_dir


def load_model(bundle_dir: str) -> ModelBundle:
    with open(os.path.join(bundle_dir, MANIFEST_NAME), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("version") != BUNDLE_VERSION:
        raise VersionMismatch(
            f"bundle version {manifest.get('version')!r} is not supported (expected {BUNDLE_VERSION!r})"
        )
    cfg = _config_from_dict(manifest["config"])

    blobs = {}
    for name, want in manifest["checksums"].items():
        with open(os.path.join(bundle_dir, name), "rb") as fh:
            data = fh.read()
        if _sha256(data) != want:
            raise ChecksumMismatch(f"checksum mismatch for {name}")
        blobs[name] = data

    vocab_msg = vocab_from_bytes(blobs[manifest["vocab_files"]["message"]])
    vocab_code = vocab_from_bytes(blobs[manifest["vocab_files"]["code"]])
    params = _params_from_bytes(blobs[manifest["params_file"]], cfg, vocab_msg.size, vocab_code.size)
    return ModelBundle(params=params, config=cfg, vocab_msg=vocab_msg, vocab_code=vocab_code)


def _params_from_bytes(data: bytes, cfg: ModelConfig, v_msg: int, v_code: int) -> ModelParams:
    d, n_f, H = cfg.embed_dim, cfg.conv_filters, cfg.hidden_dim
    shapes = [("e_msg", (v_msg, d)), ("e_code", (v_code, d))]
    for k in cfg.widths:
        shapes.append((f"conv_w_{k}", (k * d, n_f)))
        shapes.append((f"conv_b_{k}", (n_f,)))
    shapes.extend([("w_h", (cfg.feature_dim, H)), ("b_h", (H,)), ("w_o", (H,)), ("b_o", (1,))])

    expected = sum(int(np.prod(s)) for _, s in shapes) * 8
    if len(data) != expected:
        raise ChecksumMismatch(f"parameter file is {len(data)} bytes, expected {expected}")

    arrays = {}
    off = 0
    for name, shape in shapes:
        n = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).copy()
        off += n * 8
    return ModelParams(
        e_msg=arrays["e_msg"],
        e_code=arrays["e_code"],
        conv_w={k: arrays[f"conv_w_{k}"] for k in cfg.widths},
        conv_b={k: arrays[f"conv_b_{k}"] for k in cfg.widths},
        w_h=arrays["w_h"],
        b_h=arrays["b_h"],
        w_o=arrays["w_o"],
        b_o=arrays["b_o"],
    )


class bundle_lock:
    """Exclusive lock file guarding a training run on a bundle directory."""

    def __init__(self, bundle_dir: str):
        os.makedirs(bundle_dir, exist_ok=True)
        self.path = os.path.join(bundle_dir, LOCK_NAME)
        self._fd = None

    def __enter__(self):
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RetrainInProgress(f"another training run holds {self.path}")
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
            os.unlink(self.path)
        return False
