"""High-level runs behind the CLI subcommands and the service jobs.

Each run takes a Config plus explicit arguments and returns plain data,
so the CLI stays a thin argument-parsing shell and the service can reuse
the same code paths.
"""

import json
import os
import time

from .config import Config
from .errors import ConfigError, DegenerateCorpus
from .feedback import assemble_retraining_corpus
from .ingest import (
    Label,
    LabeledPatch,
    LabelSource,
    MonitorWindow,
    _git_log_text,
    build_corpus,
    collect_report,
    load_watermark,
    next_window,
    scan_stable_refs,
    store_watermark,
)
from .model import Metrics, ModelConfig, bundle_lock, load_model, save_model, train
from .modules import load_module_list
from .patch import patch_from_dict, patch_to_dict
from .pipeline import render_report, score_patch, triage
from .preprocess import build_vocabs_from_patches, encode_corpus
from .store import Store


def _resolve_window(cfg: Config, store: Store, since, until, now=None) -> MonitorWindow:
    if since is not None and until is not None:
        return MonitorWindow(since=since, until=until, period_days=cfg.period_days)
    if since is not None or until is not None:
        raise ConfigError("provide both since and until, or neither")
    now = int(time.time()) if now is None else now
    watermark = load_watermark(os.path.join(cfg.store_dir, "watermark.json"))
    return next_window(watermark, now, cfg.period_days)


def resolve_bundle_dir(cfg: Config) -> str:
    """Bundle directory predictions load from.

    A retrain drops a pointer file into the store; when present it wins
    over the configured path, so a finished retrain takes effect without
    a config edit. The pointer is replaced atomically.
    """
    pointer = os.path.join(cfg.store_dir, "current_bundle.json")
    if os.path.exists(pointer):
        with open(pointer, "r", encoding="utf-8") as fh:
            return json.load(fh)["bundle_dir"]
    return cfg.bundle_dir


def _write_bundle_pointer(cfg: Config, bundle_dir: str):
    pointer = os.path.join(cfg.store_dir, "current_bundle.json")
    tmp = pointer + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump({"bundle_dir": os.path.abspath(bundle_dir)}, fh)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, pointer)


def run_ingest(cfg: Config, since=None, until=None, now=None) -> dict:
    """One collection cycle: fetch the window, label, archive, advance
    the watermark. Backport markers are scanned from the same log text,
    so pointing repo_path at a stable-style history yields positives."""
    store = Store(cfg.store_dir)
    window = _resolve_window(cfg, store, since, until, now)
    text = _git_log_text(cfg.repo_path, window)
    report = collect_report(cfg.repo_path, window, log_text=text)
    stable_shas = scan_stable_refs(text)
    corpus = build_corpus(report.patches, stable_shas, [], [])
    store.append_corpus(corpus)
    if report.patches:
        last = report.patches[-1]
        store_watermark(
            os.path.join(cfg.store_dir, "watermark.json"),
            last.commit.sha,
            last.commit.author_date,
        )
    return {
        "window": {"since": window.since, "until": window.until},
        "collected": len(report.patches),
        "skipped": len(report.skipped),
        "bugfix": sum(1 for lp in corpus if lp.label is Label.BUG_FIX),
        "nonbugfix": sum(1 for lp in corpus if lp.label is Label.NON_BUG_FIX),
    }


def run_predict(cfg: Config, since=None, until=None, fmt: str = "json",
                revision_enabled=None, now=None):
    """Score one window and persist the results; returns (report text,
    scored list, funnel, window)."""
    store = Store(cfg.store_dir)
    window = _resolve_window(cfg, store, since, until, now)
    report = collect_report(cfg.repo_path, window)
    modules = load_module_list(cfg.module_list_path)
    bundle = load_model(resolve_bundle_dir(cfg))
    if revision_enabled is None:
        revision_enabled = cfg.revision_enabled
    scored, funnel = triage(
        report.patches, modules, bundle,
        threshold=cfg.threshold,
        revision_enabled=revision_enabled,
        boost_floor=cfg.boost_floor,
    )
    store.append_scored(scored, {p.commit.sha: p for p in report.patches}, window)
    store.add_run_funnel(funnel)
    text = render_report(scored, funnel, fmt, window)
    return text, scored, funnel, window


# -- corpus files -----------------------------------------------------------
# One JSON object per line: {"label", "source", "patch": {...}}, the same
# row shape the store archive uses, so `train --corpus` accepts either a
# hand-built file or a copied archive.


def load_corpus_file(path: str):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            out.append(LabeledPatch(
                patch_from_dict(row["patch"]),
                Label(row["label"]),
                LabelSource(row.get("source", "corpus")),
            ))
    return out


def write_corpus_file(labeled, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        for lp in labeled:
            row = {
                "label": lp.label.value,
                "source": lp.source.value,
                "patch": patch_to_dict(lp.patch),
            }
            fh.write(json.dumps(row, ensure_ascii=True) + "\n")


def train_bundle(labeled, out_dir: str, model_cfg: ModelConfig = None) -> dict:
    """Vocabularies, parameters, and a saved bundle from a labeled corpus."""
    if model_cfg is None:
        model_cfg = ModelConfig()
    patches = [lp.patch for lp in labeled]
    vocab_msg, vocab_code = build_vocabs_from_patches(patches)
    encoded = encode_corpus(labeled, vocab_msg, vocab_code, model_cfg.encode)
    with bundle_lock(out_dir):
        params, log = train(encoded, model_cfg, vocab_msg.size, vocab_code.size)
        save_model(params, model_cfg, vocab_msg, vocab_code, out_dir)
    last = log[-1]
    return {
        "out_dir": out_dir,
        "examples": len(encoded),
        "epochs": len(log),
        "final_train_loss": last.train_loss,
        "eval": last.eval_metrics.as_dict() if last.eval_metrics else None,
    }


def run_train(corpus_path: str, out_dir: str, model_cfg: ModelConfig = None) -> dict:
    labeled = load_corpus_file(corpus_path)
    if not labeled:
        raise DegenerateCorpus(f"corpus file {corpus_path} holds no patches")
    return train_bundle(labeled, out_dir, model_cfg)


def run_retrain(cfg: Config, out_dir: str, model_cfg: ModelConfig = None) -> dict:
    """Retrain from the store archive with expert verdicts applied."""
    store = Store(cfg.store_dir)
    base = store.load_corpus()
    assembled = assemble_retraining_corpus(base, store.feedback)
    if not assembled:
        raise DegenerateCorpus("store archive holds no trainable patches")
    summary = train_bundle(assembled, out_dir, model_cfg)
    _write_bundle_pointer(cfg, out_dir)
    summary["base_size"] = len(base)
    summary["assembled_size"] = len(assembled)
    return summary


def run_eval(cfg: Config, corpus_path: str, revision_enabled: bool = True) -> Metrics:
    """Confusion metrics of the deployed bundle on a labeled corpus file,
    with the score revision applied or suppressed."""
    labeled = load_corpus_file(corpus_path)
    bundle = load_model(resolve_bundle_dir(cfg))
    tp = fp = tn = fn = 0
    for lp in labeled:
        s = score_patch(
            lp.patch, bundle,
            threshold=cfg.threshold,
            revision_enabled=revision_enabled,
            boost_floor=cfg.boost_floor,
        )
        positive = lp.label is Label.BUG_FIX
        if s.recommended and positive:
            tp += 1
        elif s.recommended:
            fp += 1
        elif positive:
            fn += 1
        else:
            tn += 1
    return Metrics.from_counts(tp, fp, tn, fn)
