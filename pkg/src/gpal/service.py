"""HTTP surface for a live labeling session.

The service is a transport wrapper around the same engine the benchmarks
use: one background thread executes the loop, and a blocking oracle hands
each selection batch to whoever answers over HTTP.  A scripted client that
replays ground truth reproduces the simulated-oracle curve exactly.

Endpoints (JSON unless noted):
  POST /api/session             create the single session (409 if one exists)
  GET  /api/session/{id}        status snapshot
  GET  /api/session/{id}/batch  pending items, highest uncertainty first
  POST /api/session/{id}/labels submit labels for the whole pending batch
  GET  /api/session/{id}/metrics curve and batch-composition rows
  GET  /api/image/{sample_id}   image bytes for a pending or known sample
  GET  /healthz                 liveness probe
Errors: {"error": {"code", "message"}} with a matching HTTP status.
"""

from __future__ import annotations

import itertools
import threading
import uuid
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import engine, reports
from .data import FeatureDataset
from .engine import ALConfig, CycleRecord, OracleQueryItem, RunReport
from .errors import OracleError, ValidationError

STATUS_TRAINING = "training"
STATUS_AWAITING = "awaiting_labels"
STATUS_FINISHED = "finished"

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".gif": "image/gif",
    ".bmp": "image/bmp",
    ".webp": "image/webp",
}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class Session:
    """Single labeling campaign: engine thread plus lock-guarded snapshots."""

    def __init__(
        self,
        ds: FeatureDataset,
        cfg: ALConfig,
        sync_retrain: bool = True,
        oracle_timeout: float = 600.0,
        out_dir: Path | None = None,
    ):
        self.id = uuid.uuid4().hex[:12]
        self.ds = ds
        self.cfg = cfg
        self.sync_retrain = sync_retrain
        self.oracle_timeout = oracle_timeout
        self.out_dir = out_dir
        self.cond = threading.Condition()
        self.status = STATUS_TRAINING
        self.pending: list[OracleQueryItem] = []
        self.records: list[CycleRecord] = []
        self.batch_rows: list[dict] = []
        self.report: RunReport | None = None
        self.generation = 0  # bumps whenever labels become wanted or the run ends
        self._submitted: dict[str, int] | None = None
        self._closing = False
        self._thread = threading.Thread(target=self._run, name=f"gpal-session-{self.id}", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def close(self) -> None:
        with self.cond:
            self._closing = True
            self.cond.notify_all()
        self._thread.join(timeout=5.0)

    # -- engine side -------------------------------------------------------

    def _run(self) -> None:
        try:
            report = engine.run_al(self.ds, self.cfg, _SessionOracle(self), observer=self._observe)
        except Exception as exc:  # surfaced through status for the client
            with self.cond:
                self.status = STATUS_FINISHED
                self.error = f"{type(exc).__name__}: {exc}"
                self.generation += 1
                self.cond.notify_all()
            return
        with self.cond:
            self.report = report
            self.status = STATUS_FINISHED
            self.generation += 1
            self.cond.notify_all()
        if self.out_dir is not None:
            reports.write_report(report, self.out_dir)

    def _observe(self, event: str, payload) -> None:
        with self.cond:
            if event == "training":
                self.status = STATUS_TRAINING
            elif event == "cycle_evaluated":
                self.records.append(payload)
            elif event == "batch_labeled":
                self.batch_rows.append(payload)
            self.cond.notify_all()

    def request_labels(self, items: Sequence[OracleQueryItem]) -> dict[str, int]:
        with self.cond:
            self.pending = list(items)
            self.status = STATUS_AWAITING
            self.generation += 1
            self.cond.notify_all()
            ok = self.cond.wait_for(
                lambda: self._submitted is not None or self._closing, timeout=self.oracle_timeout
            )
            if not ok or self._closing:
                raise OracleError("labeling session closed before labels arrived")
            answers = self._submitted
            self._submitted = None
            self.pending = []
            self.status = STATUS_TRAINING
            self.cond.notify_all()
            return answers

    # -- http side ----------------------------------------------------------

    def snapshot(self) -> dict:
        with self.cond:
            last = self.records[-1] if self.records else None
            return {
                "id": self.id,
                "status": self.status,
                "cycle": last.cycle if last else None,
                "labeled_count": last.labeled_count if last else None,
                "test_accuracy": last.test_accuracy if last else None,
                "error": getattr(self, "error", None),
            }

    def batch_payload(self) -> dict:
        with self.cond:
            if self.status == STATUS_FINISHED:
                raise ApiError(409, "finished", "session is finished; no batch pending")
            if self.status != STATUS_AWAITING or not self.pending:
                raise ApiError(409, "not_ready", "model is training; retry shortly")
            items = sorted(self.pending, key=lambda it: -it.score)
            return {
                "items": [
                    {"id": it.sample_id, "score": it.score, "image_uri": it.image_uri}
                    for it in items
                ],
                "class_names": list(self.ds.class_names),
            }

    def submit(self, labels: dict[str, int]) -> dict:
        with self.cond:
            if self.status == STATUS_FINISHED:
                raise ApiError(409, "finished", "session is finished")
            if self.status != STATUS_AWAITING:
                raise ApiError(409, "not_ready", "no batch is awaiting labels")
            pending_ids = {it.sample_id for it in self.pending}
            got = set(labels)
            if got != pending_ids:
                missing = sorted(pending_ids - got)[:5]
                extra = sorted(got - pending_ids)[:5]
                raise ApiError(
                    400,
                    "label_mismatch",
                    f"labels must cover the pending batch exactly; missing={missing} extra={extra}",
                )
            n_classes = self.ds.n_classes
            for sid, cls in labels.items():
                if not isinstance(cls, int) or not 0 <= cls < n_classes:
                    raise ApiError(400, "label_range", f"label for {sid!r} must be in [0, {n_classes})")
            gen0 = self.generation
            self._submitted = {sid: int(cls) for sid, cls in labels.items()}
            self.cond.notify_all()
            if not self.sync_retrain:
                return {"status": STATUS_TRAINING, "async": True}
            ok = self.cond.wait_for(lambda: self.generation > gen0, timeout=self.oracle_timeout)
            if not ok:
                raise ApiError(504, "timeout", "retraining did not finish in time")
            last = self.records[-1] if self.records else None
            return {
                "status": self.status,
                "labeled_count": last.labeled_count if last else None,
                "test_accuracy": last.test_accuracy if last else None,
            }

    def metrics_payload(self) -> dict:
        with self.cond:
            if self.report is not None:
                curve = list(self.report.curve)
                batches = list(self.report.batches)
            else:
                curve = [
                    {
                        "cycle": r.cycle,
                        "labeled_count": r.labeled_count,
                        "test_accuracy": r.test_accuracy,
                        "balanced_accuracy": r.balanced_accuracy,
                    }
                    for r in self.records
                ]
                batches = list(self.batch_rows)
            return {"curve": curve, "batches": batches, "status": self.status}


class _SessionOracle:
    """Engine-facing oracle that blocks on HTTP submissions."""

    def __init__(self, session: Session):
        self.session = session

    def request_labels(self, items: Sequence[OracleQueryItem]) -> dict[str, int]:
        return self.session.request_labels(items)


def create_app(
    ds: FeatureDataset,
    default_config: ALConfig | None = None,
    static_dir: str | None = None,
    image_root: str | None = None,
    out_dir: str | None = None,
) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if app.state.session is not None:
            app.state.session.close()

    app = FastAPI(title="gpal labeling service", lifespan=lifespan)
    app.state.session = None
    app.state.dataset = ds
    app.state.default_config = default_config
    app.state.image_root = Path(image_root).resolve() if image_root else None
    app.state.out_dir = Path(out_dir) if out_dir else None

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": {"code": exc.code, "message": exc.message}}
        )

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    async def _json_body(request: Request) -> dict:
        raw = await request.body()
        if not raw:
            return {}
        try:
            body = await request.json()
        except ValueError as exc:
            raise ApiError(400, "bad_request", f"body is not valid JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise ApiError(400, "bad_request", "body must be a JSON object")
        return body

    @app.post("/api/session", status_code=201)
    async def create_session(request: Request):
        body = await _json_body(request)
        if app.state.session is not None:
            raise ApiError(409, "session_exists", "this process already hosts a session")
        sync = bool(body.pop("sync_retrain", True))
        if body:
            try:
                cfg = ALConfig.from_dict(body)
            except (ValidationError, TypeError) as exc:
                raise ApiError(400, "bad_config", str(exc)) from exc
        elif app.state.default_config is not None:
            cfg = app.state.default_config
        else:
            cfg = ALConfig(initial_policy=engine.INITIAL_PRELABELED)
        if cfg.initial_policy == engine.INITIAL_PRELABELED:
            pool = ds.train_pool_indices()
            if not any(ds.has_label(int(i)) for i in pool):
                raise ApiError(400, "no_initial_labels", "sidecar provides no labeled initial subset")
        session = Session(ds, cfg, sync_retrain=sync, out_dir=app.state.out_dir)
        app.state.session = session
        session.start()
        return {"id": session.id, "config": cfg.to_dict()}

    def _get_session(session_id: str) -> Session:
        session = app.state.session
        if session is None or session.id != session_id:
            raise ApiError(404, "not_found", f"no session {session_id!r}")
        return session

    @app.get("/api/session/{session_id}")
    def get_status(session_id: str):
        return _get_session(session_id).snapshot()

    @app.get("/api/session/{session_id}/batch")
    def get_batch(session_id: str):
        return _get_session(session_id).batch_payload()

    @app.post("/api/session/{session_id}/labels")
    async def submit_labels(session_id: str, request: Request):
        session = _get_session(session_id)
        body = await _json_body(request)
        labels = body.get("labels")
        if not isinstance(labels, dict):
            raise ApiError(400, "bad_request", 'body must be {"labels": {sample_id: class_id}}')
        return session.submit(labels)

    @app.get("/api/session/{session_id}/metrics")
    def get_metrics(session_id: str):
        return _get_session(session_id).metrics_payload()

    @app.get("/api/image/{sample_id}")
    def get_image(sample_id: str):
        try:
            index = ds.index_of_id(sample_id)
        except ValidationError as exc:
            raise ApiError(404, "not_found", str(exc)) from exc
        uri = ds.image_uris[index]
        if uri is None:
            raise ApiError(404, "no_image", f"sample {sample_id!r} has no image")
        root = app.state.image_root
        if root is None:
            raise ApiError(404, "no_image_root", "service started without --image-root")
        resolved = (root / uri).resolve()
        if root not in itertools.chain([resolved], resolved.parents):
            raise ApiError(400, "bad_path", "image path escapes the configured root")
        if not resolved.is_file():
            raise ApiError(404, "not_found", f"no image at {uri!r}")
        media = _MEDIA_TYPES.get(resolved.suffix.lower(), "application/octet-stream")
        return FileResponse(resolved, media_type=media)

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
