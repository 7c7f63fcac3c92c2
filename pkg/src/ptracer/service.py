"""HTTP/JSON service consumed by the review UI.

The app is a factory so tests can inject a fixed clock. All mutation of
the feedback log goes through one writer lock; ingest and retrain run as
background jobs serialized by the store lock file, with polled job
records persisted under the store directory. Timestamps are epoch
seconds at rest and ISO-8601 UTC on the wire.
"""

import os
import threading
from datetime import datetime, timezone

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import Config
from .errors import InvalidRecord, PTracerError, UnknownSha
from .feedback import FeedbackRecord, ReasonCategory, Verdict, record_feedback
from .runs import run_ingest, run_predict, run_retrain
from .store import Store

_STATUS_BY_CODE = {
    "unknown_sha": 404,
    "unknown_job": 404,
    "invalid_record": 400,
    "retrain_in_progress": 409,
}


class UnknownJob(PTracerError):
    code = "unknown_job"


def _iso(ts) -> str | None:
    if ts is None:
        return None
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_ts_param(name: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        pass
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise InvalidRecord(f"query parameter {name}={value!r} is not a timestamp")
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _feedback_view(store: Store, sha: str) -> dict:
    rec = store.feedback.latest().get(sha)
    if rec is None:
        return {"status": "pending", "reason": None, "note": None, "reviewer": None, "ts": None}
    return {
        "status": rec.verdict.value,
        "reason": rec.reason.value if rec.reason else None,
        "note": rec.note,
        "reviewer": rec.reviewer,
        "ts": _iso(rec.ts),
    }


def _job_view(job: dict) -> dict:
    return {
        "id": job["id"],
        "kind": job["kind"],
        "state": job["state"],
        "detail": job["detail"],
        "created": _iso(job["created_ts"]),
        "finished": _iso(job["finished_ts"]),
        "result": job["result"],
    }


def create_app(cfg: Config, clock=None) -> FastAPI:
    if clock is None:
        import time

        def clock():
            return int(time.time())

    app = FastAPI(title="ptracer", docs_url=None, redoc_url=None)
    store = Store(cfg.store_dir)
    write_lock = threading.Lock()
    app.state.store = store
    app.state.config = cfg

    @app.exception_handler(PTracerError)
    async def domain_error(request: Request, exc: PTracerError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(
            status_code=status,
            content={"error": {"code": exc.code, "detail": exc.detail}},
        )

    @app.get("/api/recommendations")
    def recommendations(since: str = None, until: str = None):
        lo = _parse_ts_param("since", since) if since is not None else None
        hi = _parse_ts_param("until", until) if until is not None else None
        rows = []
        for sha, row in store.load_scored().items():
            if not row["recommended"]:
                continue
            if lo is not None and row["author_date"] < lo:
                continue
            if hi is not None and row["author_date"] >= hi:
                continue
            fb = _feedback_view(store, sha)
            rows.append({
                "sha": sha,
                "subject": row["subject"],
                "raw_score": row["raw_score"],
                "final_score": row["final_score"],
                "cc_stable": row["cc_stable"],
                "paths": row["paths"],
                "author_date": _iso(row["author_date"]),
                "status": fb["status"],
                "reason": fb["reason"],
            })
        rows.sort(key=lambda r: (-r["final_score"], r["sha"]))
        return rows

    @app.get("/api/patches/{sha}")
    def patch_detail(sha: str):
        row = store.load_scored().get(sha)
        if row is None:
            raise UnknownSha(f"no scored patch with sha {sha}")
        return {
            "sha": sha,
            "subject": row["subject"],
            "message": row["message"],
            "diff": row["diff"],
            "raw_score": row["raw_score"],
            "final_score": row["final_score"],
            "cc_stable": row["cc_stable"],
            "recommended": row["recommended"],
            "paths": row["paths"],
            "author": {
                "name": row["author_name"],
                "email": row["author_email"],
                "date": _iso(row["author_date"]),
            },
            "feedback": _feedback_view(store, sha),
        }

    @app.post("/api/patches/{sha}/feedback", status_code=201)
    async def post_feedback(sha: str, request: Request):
        try:
            payload = await request.json()
        except Exception:
            raise InvalidRecord("request body is not valid JSON")
        if not isinstance(payload, dict):
            raise InvalidRecord("request body must be a JSON object")
        verdict_raw = payload.get("verdict")
        try:
            verdict = Verdict(verdict_raw)
        except ValueError:
            raise InvalidRecord(f"verdict must be one of {[v.value for v in Verdict]}, got {verdict_raw!r}")
        reason_raw = payload.get("reason")
        if reason_raw is None:
            reason = None
        else:
            try:
                reason = ReasonCategory(reason_raw)
            except ValueError:
                raise InvalidRecord(
                    f"reason must be one of {[r.value for r in ReasonCategory]}, got {reason_raw!r}"
                )
        rec = FeedbackRecord(
            sha=sha,
            verdict=verdict,
            reason=reason,
            note=str(payload.get("note") or ""),
            reviewer=str(payload.get("reviewer") or ""),
            ts=clock(),
        )
        with write_lock:
            record_feedback(rec, store.feedback, known_shas=set(store.load_scored()))
        return {
            "sha": sha,
            "status": rec.verdict.value,
            "reason": rec.reason.value if rec.reason else None,
            "ts": _iso(rec.ts),
        }

    @app.get("/api/stats")
    def stats():
        return store.stats().as_dict()

    def _spawn_job(kind: str, work):
        """Create the record, take the store lock, run in a thread."""
        lock = store.lock()
        lock.__enter__()  # raises RetrainInProgress -> 409 before the 202
        job = store.job_create(kind, clock())

        def body():
            job["state"] = "running"
            store.job_update(job)
            try:
                job["result"] = work(job)
                job["state"] = "done"
            except Exception as exc:
                job["state"] = "failed"
                job["detail"] = f"{getattr(exc, 'code', 'error')}: {exc}"
            finally:
                job["finished_ts"] = clock()
                # release before publishing the terminal record: a client
                # that polls "done" may immediately start the next job
                lock.__exit__(None, None, None)
                store.job_update(job)

        threading.Thread(target=body, name=f"ptracer-{job['id']}", daemon=True).start()
        return JSONResponse(status_code=202, content=_job_view(job))

    @app.post("/api/ingest/run")
    def ingest_run():
        def work(job):
            summary = run_ingest(cfg, now=clock())
            w = summary["window"]
            _, scored, funnel, _ = run_predict(
                cfg, since=w["since"], until=w["until"], now=clock()
            )
            return {
                "ingest": summary,
                "predict": {
                    "analyzed": funnel.analyzed,
                    "concerned": funnel.concerned,
                    "recommended": funnel.recommended,
                },
            }

        return _spawn_job("ingest", work)

    @app.post("/api/retrain")
    def retrain():
        def work(job):
            out_dir = store.path(os.path.join("bundles", job["id"]))
            return run_retrain(cfg, out_dir)

        return _spawn_job("retrain", work)

    @app.get("/api/jobs/{job_id}")
    def job_detail(job_id: str):
        job = store.job_get(job_id)
        if job is None:
            raise UnknownJob(f"no job with id {job_id}")
        return _job_view(job)

    ui_dir = os.environ.get("PTRACER_UI_DIR")
    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
