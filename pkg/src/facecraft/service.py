"""HTTP job service: asynchronous inversion, editing, and generation.

Clients submit work with POST endpoints, poll GET /v1/jobs/{id} while the
job moves along queued -> running -> (done | failed), then fetch the result
as PNG from /v1/artifacts/{id}/face.png or /v1/artifacts/{id}/skin.png.
The artifact id of a job equals the job id, so a single handle tracks the
whole lifecycle. Jobs and artifacts persist to a data directory and survive
restarts; a bounded worker pool plus bounded queue provide backpressure
via 503.

All error responses carry ``{"detail": {"reason": <code>, "message": ...}}``.
"""

from __future__ import annotations

import contextlib
import json
import logging
import os
import queue
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from . import checkpoints
from .editing import EditConfig, edit
from .errors import FacecraftError, TooSmallError
from .generator import GeneratorWeights, ensure_w_avg, sample_random_latent, synthesize
from .inversion import InversionConfig, invert
from .scorers import as_prompt, get_scorer
from .textures import (
    default_base_skin,
    embed_face,
    face_png_bytes,
    load_face,
    load_image,
    load_skin,
    skin_png_bytes,
)

logger = logging.getLogger("facecraft.service")

JOB_STATES = ("queued", "running", "done", "failed")
_TRANSITIONS = {"queued": {"running"}, "running": {"done", "failed"}}


@dataclass(frozen=True)
class ServiceConfig:
    """Service settings; file values override defaults, env vars override both."""

    host: str = "127.0.0.1"
    port: int = 8765
    data_dir: str = "facecraft_data"
    weights_path: str = "weights.fcgw"
    workers: int = 2
    queue_size: int = 32
    max_upload_bytes: int = 4 * 1024 * 1024
    scorer: str = "mean-red"

    _ENV_PREFIX = "FACECRAFT_"
    _INT_FIELDS = ("port", "workers", "queue_size", "max_upload_bytes")

    @classmethod
    def load(cls, path: str | None = None) -> "ServiceConfig":
        values: dict = {}
        if path:
            values.update(json.loads(Path(path).read_text()))
        for name in cls.__dataclass_fields__:
            env = os.environ.get(cls._ENV_PREFIX + name.upper())
            if env is not None:
                values[name] = int(env) if name in cls._INT_FIELDS else env
        config = cls(**values)
        if config.workers < 1 or config.queue_size < 1 or config.max_upload_bytes < 1:
            raise ValueError("workers, queue_size, max_upload_bytes must be positive")
        return config


@dataclass
class Job:
    id: str
    kind: str  # invert | edit | generate_random | generate_average
    state: str = "queued"
    progress: float = 0.0
    params: dict = field(default_factory=dict)
    result_ref: str | None = None
    error: str | None = None

    def to_record(self) -> dict:
        return asdict(self)


def _error(status: int, reason: str, message: str):
    return HTTPException(status_code=status, detail={"reason": reason, "message": message})


class JobStore:
    """In-memory job table with write-through JSON persistence."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        for record_path in sorted(self.directory.glob("*.json")):
            record = json.loads(record_path.read_text())
            job = Job(**record)
            # A queued/running record can only mean the previous process died
            # mid-job; its optimization state is gone, so mark it failed.
            if job.state in ("queued", "running"):
                job.state = "failed"
                job.error = "interrupted by service restart"
                self._write(job)
            self._jobs[job.id] = job

    def _write(self, job: Job) -> None:
        path = self.directory / f"{job.id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(job.to_record(), sort_keys=True))
        tmp.replace(path)

    def create(self, job: Job) -> None:
        with self._lock:
            self._jobs[job.id] = job
            self._write(job)

    def delete(self, job_id: str) -> None:
        with self._lock:
            self._jobs.pop(job_id, None)
            (self.directory / f"{job_id}.json").unlink(missing_ok=True)

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def set_progress(self, job_id: str, progress: float) -> None:
        with self._lock:
            self._jobs[job_id].progress = float(progress)

    def transition(self, job_id: str, state: str, *, result_ref=None, error=None) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if state not in _TRANSITIONS.get(job.state, set()):
                raise RuntimeError(f"illegal job transition {job.state} -> {state}")
            job.state = state
            if state == "done":
                job.progress = 1.0
                job.result_ref = result_ref
            if state == "failed":
                job.error = error or "unknown failure"
            self._write(job)


class ArtifactStore:
    """Immutable per-job artifact directories: face.png, latent.fclt, meta.json."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, artifact_id: str) -> Path:
        return self.directory / artifact_id

    def exists(self, artifact_id: str) -> bool:
        return (self.path(artifact_id) / "meta.json").exists()

    def save(self, artifact_id: str, face, latent, provenance: list[str]) -> None:
        target = self.path(artifact_id)
        target.mkdir(parents=True, exist_ok=True)
        (target / "face.png").write_bytes(face_png_bytes(face))
        checkpoints.save_latent(latent, target / "latent.fclt")
        (target / "meta.json").write_text(
            json.dumps({"id": artifact_id, "provenance": provenance}, sort_keys=True)
        )

    def face_bytes(self, artifact_id: str) -> bytes:
        return (self.path(artifact_id) / "face.png").read_bytes()

    def latent(self, artifact_id: str) -> np.ndarray:
        return checkpoints.load_latent(self.path(artifact_id) / "latent.fclt")

    def provenance(self, artifact_id: str) -> list[str]:
        meta = json.loads((self.path(artifact_id) / "meta.json").read_text())
        return meta["provenance"]


class BaseStore:
    """Uploaded base skins addressable from skin.png?base=<id>."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)

    def save(self, data: bytes) -> str:
        base_id = uuid.uuid4().hex
        (self.directory / f"{base_id}.png").write_bytes(data)
        return base_id

    def load(self, base_id: str):
        path = self.directory / f"{base_id}.png"
        if not path.exists():
            return None
        return load_skin(path)


class ServiceState:
    """Everything the endpoints share: stores, weights, and the worker pool."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        data_dir = Path(config.data_dir)
        self.jobs = JobStore(data_dir / "jobs")
        self.artifacts = ArtifactStore(data_dir / "artifacts")
        self.bases = BaseStore(data_dir / "bases")
        self.weights: GeneratorWeights = checkpoints.load_weights(config.weights_path)
        ensure_w_avg(self.weights)  # cache before concurrent access
        self.queue: queue.Queue = queue.Queue(maxsize=config.queue_size)
        self.threads: list[threading.Thread] = []

    def start(self) -> None:
        for index in range(self.config.workers):
            thread = threading.Thread(
                target=self._worker, name=f"facecraft-worker-{index}", daemon=True
            )
            thread.start()
            self.threads.append(thread)

    def stop(self) -> None:
        for _ in self.threads:
            self.queue.put(None)
        for thread in self.threads:
            thread.join(timeout=30)

    def enqueue(self, job: Job, run) -> None:
        # Create before put so a worker can never see an unknown id; roll the
        # record back if the queue rejects the job.
        self.jobs.create(job)
        try:
            self.queue.put_nowait((job.id, run))
        except queue.Full:
            self.jobs.delete(job.id)
            raise _error(503, "queue_full", "job queue is full, retry later") from None

    def _worker(self) -> None:
        while True:
            item = self.queue.get()
            if item is None:
                return
            job_id, run = item
            self.jobs.transition(job_id, "running")
            try:
                face, latent, provenance = run(
                    lambda p: self.jobs.set_progress(job_id, p)
                )
                self.artifacts.save(job_id, face, latent, provenance)
                self.jobs.transition(job_id, "done", result_ref=job_id)
            except Exception as exc:  # noqa: BLE001 - job isolation boundary
                logger.exception("job %s failed", job_id)
                self.jobs.transition(job_id, "failed", error=str(exc))


def _job_response(job: Job, status: int = 200) -> JSONResponse:
    return JSONResponse(job.to_record(), status_code=status)


def _parse_invert_params(raw: str | None) -> InversionConfig:
    values = json.loads(raw) if raw else {}
    if not isinstance(values, dict):
        raise ValueError("params must be a JSON object")
    if "seed" in values:
        values["init_seed"] = values.pop("seed")
    allowed = {"lambda_mse", "lambda_stat", "steps", "learning_rate", "init", "init_seed"}
    unknown = set(values) - allowed
    if unknown:
        raise ValueError(f"unknown params: {sorted(unknown)}")
    return InversionConfig(**values)


def create_app(config: ServiceConfig) -> FastAPI:
    state = ServiceState(config)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        state.start()
        try:
            yield
        finally:
            state.stop()

    app = FastAPI(title="facecraft service", lifespan=lifespan)
    app.state.service = state

    @app.middleware("http")
    async def log_requests(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        logger.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "ms": round((time.perf_counter() - started) * 1000, 3),
                }
            )
        )
        return response

    def resolve_source(source) -> tuple[np.ndarray, list[str]]:
        """Latent plus provenance chain for an edit/generate source."""
        if source == "average":
            return ensure_w_avg(state.weights).copy(), []
        if isinstance(source, dict) and set(source) == {"random"}:
            return sample_random_latent(state.weights, truncation=1.0, seed=int(source["random"])), []
        if isinstance(source, str):
            if not state.artifacts.exists(source):
                raise _error(404, "unknown_artifact", f"no artifact {source!r}")
            return state.artifacts.latent(source), state.artifacts.provenance(source)
        raise _error(400, "bad_params", "source must be an artifact id, 'average', or {'random': seed}")

    @app.post("/v1/invert", status_code=202)
    async def invert_endpoint(
        image: UploadFile = File(...), params: str | None = Form(None)
    ):
        data = await image.read()
        if len(data) > config.max_upload_bytes:
            raise _error(413, "too_large", f"image exceeds {config.max_upload_bytes} bytes")
        try:
            inversion_config = _parse_invert_params(params)
        except (ValueError, TypeError, json.JSONDecodeError) as exc:
            raise _error(400, "bad_params", str(exc)) from exc
        scratch = Path(config.data_dir) / "uploads"
        scratch.mkdir(parents=True, exist_ok=True)
        upload_path = scratch / f"{uuid.uuid4().hex}.img"
        upload_path.write_bytes(data)
        try:
            source_image = load_image(upload_path)
        except TooSmallError as exc:
            raise _error(400, "too_small", str(exc)) from exc
        except FacecraftError as exc:
            raise _error(400, "undecodable", str(exc)) from exc
        finally:
            upload_path.unlink(missing_ok=True)

        job = Job(
            id=uuid.uuid4().hex,
            kind="invert",
            params={"params": json.loads(params) if params else {}, "filename": image.filename},
        )

        def run(progress_cb):
            result = invert(state.weights, source_image, inversion_config, progress_cb=progress_cb)
            return result.rendered, result.latent, [job.id]

        state.enqueue(job, run)
        return _job_response(job, status=202)

    @app.post("/v1/edit", status_code=202)
    async def edit_endpoint(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            raise _error(400, "bad_params", "body must be JSON") from exc
        if not isinstance(body, dict) or "source" not in body or "prompt" not in body:
            raise _error(400, "bad_params", "body needs 'source' and 'prompt'")
        prompt = body["prompt"]
        try:
            as_prompt(prompt)
        except (ValueError, TypeError) as exc:
            raise _error(400, "bad_prompt", str(exc)) from exc
        latent, provenance = resolve_source(body["source"])
        try:
            scorer = get_scorer(body.get("scorer", config.scorer))
            edit_config = EditConfig(
                lambda_l2=body.get("lambda_l2", EditConfig.lambda_l2),
                steps=body.get("steps", EditConfig.steps),
                learning_rate=body.get("learning_rate", EditConfig.learning_rate),
                seed=body.get("seed", EditConfig.seed),
            )
        except (ValueError, TypeError) as exc:
            raise _error(400, "bad_params", str(exc)) from exc

        job = Job(id=uuid.uuid4().hex, kind="edit", params=dict(body))

        def run(progress_cb):
            result = edit(state.weights, latent, prompt, scorer, edit_config, progress_cb=progress_cb)
            return result.rendered, result.latent, provenance + [job.id]

        state.enqueue(job, run)
        return _job_response(job, status=202)

    @app.post("/v1/generate", status_code=202)
    async def generate_endpoint(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            raise _error(400, "bad_params", "body must be JSON") from exc
        mode = body.get("mode")
        if mode not in ("random", "average"):
            raise _error(400, "bad_params", "mode must be 'random' or 'average'")
        truncation = float(body.get("truncation", 1.0))
        seed = int(body.get("seed", 0))
        if mode == "random" and not 0.0 <= truncation <= 1.0:
            raise _error(400, "bad_params", "truncation must be in [0, 1]")

        job = Job(id=uuid.uuid4().hex, kind=f"generate_{mode}", params=dict(body))

        def run(progress_cb):
            if mode == "average":
                latent = ensure_w_avg(state.weights).copy()
            else:
                latent = sample_random_latent(state.weights, truncation=truncation, seed=seed)
            progress_cb(1.0)
            return synthesize(state.weights, latent), latent, [job.id]

        state.enqueue(job, run)
        return _job_response(job, status=202)

    @app.post("/v1/bases", status_code=201)
    async def upload_base(skin: UploadFile = File(...)):
        data = await skin.read()
        if len(data) > config.max_upload_bytes:
            raise _error(413, "too_large", f"skin exceeds {config.max_upload_bytes} bytes")
        scratch = Path(config.data_dir) / "uploads"
        scratch.mkdir(parents=True, exist_ok=True)
        upload_path = scratch / f"{uuid.uuid4().hex}.png"
        upload_path.write_bytes(data)
        try:
            load_skin(upload_path)
        except (FacecraftError, ValueError) as exc:
            raise _error(400, "bad_skin", str(exc)) from exc
        finally:
            upload_path.unlink(missing_ok=True)
        return {"id": state.bases.save(data)}

    @app.get("/v1/jobs/{job_id}")
    async def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise _error(404, "unknown_job", f"no job {job_id!r}")
        return _job_response(job)

    def artifact_or_error(artifact_id: str):
        if state.artifacts.exists(artifact_id):
            return
        job = state.jobs.get(artifact_id)
        if job is None:
            raise _error(404, "unknown_artifact", f"no artifact {artifact_id!r}")
        raise _error(409, "not_done", f"job is {job.state}, artifact not available")

    @app.get("/v1/artifacts/{artifact_id}/face.png")
    async def get_face(artifact_id: str):
        artifact_or_error(artifact_id)
        return Response(state.artifacts.face_bytes(artifact_id), media_type="image/png")

    @app.get("/v1/artifacts/{artifact_id}/skin.png")
    async def get_skin(artifact_id: str, base: str = "default"):
        artifact_or_error(artifact_id)
        if base == "default":
            base_skin = default_base_skin()
        else:
            base_skin = state.bases.load(base)
            if base_skin is None:
                raise _error(404, "unknown_base", f"no base {base!r}")
        face = load_face(state.artifacts.path(artifact_id) / "face.png")
        return Response(skin_png_bytes(embed_face(face, base_skin)), media_type="image/png")

    @app.get("/v1/artifacts/{artifact_id}/meta")
    async def get_meta(artifact_id: str):
        artifact_or_error(artifact_id)
        return {"id": artifact_id, "provenance": state.artifacts.provenance(artifact_id)}

    return app
