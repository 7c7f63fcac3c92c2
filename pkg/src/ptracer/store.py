"""On-disk state shared by the CLI and the HTTP service.

Layout under store_dir:
  corpus.jsonl    labeled patches collected by ingest runs (append-only)
  scored.jsonl    scored patches from prediction runs (append-only)
  funnel.json     cumulative analyzed/concerned/recommended counters
  feedback.jsonl  expert verdict log
  watermark.json  monitoring high-water mark
  jobs/           one JSON file per asynchronous job + the id counter
  store.lock      exclusivity lock for ingest/retrain jobs

Append-only files are deduplicated at read time: the last line for a sha
wins, mirroring the feedback log's supersession rule.
"""

import json
import os

from .errors import RetrainInProgress
from .feedback import FeedbackStore, feedback_funnel_counts
from .ingest import Label, LabeledPatch, LabelSource
from .patch import patch_from_dict, patch_to_dict, render_diff
from .pipeline import Funnel

LOCK_NAME = "store.lock"


class Store:
    def __init__(self, store_dir: str):
        self.dir = store_dir
        os.makedirs(store_dir, exist_ok=True)
        os.makedirs(os.path.join(store_dir, "jobs"), exist_ok=True)
        self.feedback = FeedbackStore(os.path.join(store_dir, "feedback.jsonl"))

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)

    # -- corpus archive ----------------------------------------------------

    def append_corpus(self, labeled):
        with open(self.path("corpus.jsonl"), "a", encoding="utf-8") as fh:
            for lp in labeled:
                row = {
                    "label": lp.label.value,
                    "source": lp.source.value,
                    "patch": patch_to_dict(lp.patch),
                }
                fh.write(json.dumps(row, ensure_ascii=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load_corpus(self):
        """Labeled patches, one per sha, last appended line in force."""
        path = self.path("corpus.jsonl")
        if not os.path.exists(path):
            return []
        by_sha = {}
        order = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                patch = patch_from_dict(row["patch"])
                lp = LabeledPatch(patch, Label(row["label"]), LabelSource(row["source"]))
                sha = patch.commit.sha
                if sha not in by_sha:
                    order.append(sha)
                by_sha[sha] = lp
        return [by_sha[sha] for sha in order]

    # -- scored patches ----------------------------------------------------

    def append_scored(self, scored, patches_by_sha, window=None):
        """Persist scored patches with enough detail to serve reviews."""
        win = None if window is None else {"since": window.since, "until": window.until}
        with open(self.path("scored.jsonl"), "a", encoding="utf-8") as fh:
            for s in scored:
                patch = patches_by_sha[s.sha]
                row = {
                    "sha": s.sha,
                    "subject": s.subject,
                    "paths": list(s.paths),
                    "raw_score": s.raw_score,
                    "final_score": s.final_score,
                    "cc_stable": s.cc_stable,
                    "recommended": s.recommended,
                    "message": patch.commit.message,
                    "diff": render_diff(patch),
                    "author_name": patch.commit.author_name,
                    "author_email": patch.commit.author_email,
                    "author_date": patch.commit.author_date,
                    "window": win,
                }
                fh.write(json.dumps(row, ensure_ascii=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load_scored(self) -> dict:
        """sha -> scored row dict, last line per sha in force."""
        path = self.path("scored.jsonl")
        if not os.path.exists(path):
            return {}
        rows = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    row = json.loads(line)
                    rows[row["sha"]] = row
        return rows

    def recommended_shas(self) -> set:
        return {sha for sha, row in self.load_scored().items() if row["recommended"]}

    # -- funnel counters -----------------------------------------------------

    def load_funnel_base(self) -> dict:
        path = self.path("funnel.json")
        if not os.path.exists(path):
            return {"analyzed": 0, "concerned": 0, "recommended": 0}
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def add_run_funnel(self, funnel: Funnel):
        base = self.load_funnel_base()
        base["analyzed"] += funnel.analyzed
        base["concerned"] += funnel.concerned
        base["recommended"] += funnel.recommended
        tmp = self.path("funnel.json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(base, fh)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path("funnel.json"))

    def stats(self) -> Funnel:
        """Cumulative funnel; verdict counts derived live from the log."""
        base = self.load_funnel_base()
        accepted, rejected, by_reason = feedback_funnel_counts(
            self.feedback, self.recommended_shas()
        )
        return Funnel(
            analyzed=base["analyzed"],
            concerned=base["concerned"],
            recommended=base["recommended"],
            accepted=accepted,
            rejected=rejected,
            rejected_by_reason=by_reason,
        ).validate()

    # -- asynchronous jobs ---------------------------------------------------

    def _next_job_id(self) -> str:
        counter = self.path(os.path.join("jobs", "counter"))
        n = 0
        if os.path.exists(counter):
            with open(counter, "r", encoding="utf-8") as fh:
                n = int(fh.read().strip() or 0)
        n += 1
        with open(counter, "w", encoding="utf-8") as fh:
            fh.write(str(n))
        return f"job-{n}"

    def job_path(self, job_id: str) -> str:
        return self.path(os.path.join("jobs", job_id + ".json"))

    def job_create(self, kind: str, now: int) -> dict:
        job = {
            "id": self._next_job_id(),
            "kind": kind,
            "state": "queued",
            "detail": None,
            "created_ts": now,
            "finished_ts": None,
            "result": None,
        }
        self._job_write(job)
        return job

    def job_update(self, job: dict) -> dict:
        self._job_write(job)
        return job

    def _job_write(self, job: dict):
        tmp = self.job_path(job["id"]) + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(job, fh)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.job_path(job["id"]))

    def job_get(self, job_id: str):
        path = self.job_path(job_id)
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    # -- exclusivity ---------------------------------------------------------

    def lock(self) -> "StoreLock":
        return StoreLock(self.path(LOCK_NAME))


class StoreLock:
    """Lock file guarding ingest/retrain exclusivity for one store."""

    def __init__(self, path: str):
        self.path = path
        self._fd = None

    def __enter__(self):
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RetrainInProgress(f"an ingest or retrain job already holds {self.path}")
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
            os.unlink(self.path)
        return False
