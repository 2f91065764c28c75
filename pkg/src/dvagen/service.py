"""HTTP API for interactive generation and steering.

Five endpoints: health, generate, candidates, steer, viz. Sessions live in a
bounded LRU store; a completed session is immutable, and steering always
creates a new session by replaying the recorded choices up to the edited
position with the same table, mask, and random stream.

Every error body has the shape {"error": {"code": ..., "message": ...}},
including validation failures that FastAPI would normally format its own way.
"""

from __future__ import annotations

import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, fields, replace

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from .dva_model import DVAModel
from .inference_engine import (
    GenerationConfig,
    GenerationSession,
    generate_single,
    generate_with_table,
    serialize_session,
)
from .phrase_sampler import CorpusIndex, SamplerConfig
from .retriever import RetrievalIndex
from .text_base import DocumentSet

FILTERS = ("phrases", "tokens", "both")
_GEN_KEYS = {f.name for f in fields(GenerationConfig)}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_body(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


@dataclass
class ServiceContext:
    """Everything the endpoints share: the model and the generation defaults,
    plus optional retrieval wiring. All of it is read-only at request time."""

    model: DVAModel
    sampler: SamplerConfig
    generation: GenerationConfig
    index: RetrievalIndex | None = None
    corpus: DocumentSet | None = None
    corpus_index: CorpusIndex | None = None
    session_capacity: int = 256


class SessionStore:
    """Thread-safe LRU of completed sessions. Eviction is silent here; the
    endpoints translate a miss into a structured not-found error."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._lock = threading.Lock()
        self._items: OrderedDict[str, GenerationSession] = OrderedDict()

    def put(self, session: GenerationSession) -> str:
        session_id = uuid.uuid4().hex
        with self._lock:
            self._items[session_id] = session
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)
        return session_id

    def get(self, session_id: str) -> GenerationSession | None:
        with self._lock:
            session = self._items.get(session_id)
            if session is not None:
                self._items.move_to_end(session_id)
            return session

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class GenerateRequest(BaseModel):
    prefix: str
    phrases: list[str] | None = None
    config: dict | None = None


class SteerRequest(BaseModel):
    session_id: str
    position: int
    replacement_id: int


# Two light-to-dark ramps: blues for tokens, purple-reds for phrases. Shades
# interpolate linearly per 8-bit channel, so equal probabilities map to
# identical colors and higher probability is always darker.
_RAMPS = {
    "token": ((222, 235, 247), (8, 48, 107)),
    "phrase": ((253, 224, 221), (122, 1, 119)),
}


def segment_color(kind: str, probability: float) -> str:
    light, dark = _RAMPS[kind]
    p = min(max(probability, 0.0), 1.0)
    channel = [round(lo + (hi - lo) * p) for lo, hi in zip(light, dark)]
    return "#{:02x}{:02x}{:02x}".format(*channel)


def heat_svg(segments: list[dict]) -> str:
    """One <g> per segment: a shaded box and its text. A two-ramp legend with
    probability endpoints sits at the top."""
    x, pad, box_h, y = 20, 8, 26, 70
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="900" height="140" '
        'font-family="monospace" font-size="13">'
    ]
    for kind, lx in (("token", 20), ("phrase", 320)):
        parts.append(f'<text x="{lx}" y="20" font-size="11">{kind} 0.0</text>')
        for i in range(6):
            color = segment_color(kind, i / 5)
            parts.append(f'<rect x="{lx + 60 + i * 18}" y="10" width="18" '
                         f'height="12" fill="{color}"/>')
        parts.append(f'<text x="{lx + 60 + 6 * 18 + 6}" y="20" font-size="11">1.0</text>')
    for seg in segments:
        prob = seg["probability"] if seg["probability"] is not None else 0.0
        w = 7.8 * len(seg["text"]) + 2 * pad
        color = segment_color(seg["kind"], prob)
        shade = "#ffffff" if prob > 0.55 else "#111111"
        parts.append(
            f'<g><rect x="{x:.1f}" y="{y}" width="{w:.1f}" height="{box_h}" '
            f'rx="4" fill="{color}"/>'
            f'<text x="{x + pad:.1f}" y="{y + 18}" fill="{shade}">{seg["text"]}</text></g>'
        )
        x += w + 6
    parts.append("</svg>")
    return "\n".join(parts)


def _session_payload(session_id: str, session: GenerationSession,
                     model: DVAModel) -> dict:
    sample = serialize_session(session, model.vocab)["samples"][0]
    return {
        "session_id": session_id,
        "prefix": sample["prefix"],
        "ids": sample["ids"],
        "text": sample["text"],
        "segments": sample["segments"],
        "candidates": sample["candidates"],
    }


def create_app(ctx: ServiceContext) -> FastAPI:
    app = FastAPI(title="dvagen service", docs_url=None, redoc_url=None)
    store = SessionStore(ctx.session_capacity)

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, err: ApiError):
        return JSONResponse(status_code=err.status,
                            content=_error_body(err.code, err.message))

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, err: RequestValidationError):
        return JSONResponse(status_code=422,
                            content=_error_body("validation_error", str(err.errors())))

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, err: StarletteHTTPException):
        return JSONResponse(status_code=err.status_code,
                            content=_error_body("http_error", str(err.detail)))

    def fetch_session(session_id: str) -> GenerationSession:
        session = store.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session",
                           f"session {session_id!r} does not exist or was evicted")
        return session

    def generation_config(overrides: dict | None) -> GenerationConfig:
        if not overrides:
            return ctx.generation
        for key in overrides:
            if key not in _GEN_KEYS:
                raise ApiError(400, "invalid_config",
                               f"unknown generation setting {key!r}")
        try:
            return replace(ctx.generation, **overrides)
        except (TypeError, ValueError) as err:
            raise ApiError(400, "invalid_config", str(err)) from None

    @app.get("/api/health")
    def api_health():
        m = ctx.model
        return {
            "status": "ok",
            "model": {
                "fingerprint": m.fingerprint(),
                "vocab_size": m.vocab.size,
                "d_model": m.config.d_model,
                "n_layers": m.config.n_layers,
                "max_seq_len": m.config.max_seq_len,
            },
            "retrieval": ctx.index is not None,
            "sessions": len(store),
        }

    @app.post("/api/generate")
    def api_generate(request: GenerateRequest):
        if not request.prefix.strip():
            raise ApiError(400, "invalid_prefix", "prefix must be nonempty")
        config = generation_config(request.config)
        try:
            session = generate_single(
                request.prefix, ctx.model, config, ctx.sampler,
                explicit_phrases=request.phrases,
                index=ctx.index, corpus=ctx.corpus, corpus_index=ctx.corpus_index,
            )
        except ValueError as err:
            raise ApiError(400, "generation_failed", str(err)) from None
        return _session_payload(store.put(session), session, ctx.model)

    @app.get("/api/candidates")
    def api_candidates(session_id: str, position: int, filter: str = "both",
                       limit: int = 50):
        if filter not in FILTERS:
            raise ApiError(400, "invalid_filter",
                           f"filter must be one of {FILTERS}")
        if limit < 1:
            raise ApiError(400, "invalid_limit", "limit must be >= 1")
        session = fetch_session(session_id)
        record = session.records[0]
        if not 0 <= position < len(record.steps):
            raise ApiError(400, "position_out_of_range",
                           f"position {position} outside [0, {len(record.steps)})")
        vocab = ctx.model.vocab
        rows = []
        for cid, prob in record.steps[position].candidates:
            kind = "token" if cid < vocab.size else "phrase"
            if filter == "tokens" and kind != "token":
                continue
            if filter == "phrases" and kind != "phrase":
                continue
            text = (vocab.entries[cid] if cid < vocab.size
                    else session.table.surface_of(cid))
            rows.append({"id": cid, "text": text, "kind": kind,
                         "probability": prob})
            if len(rows) >= limit:
                break
        return {"session_id": session_id, "position": position,
                "filter": filter, "candidates": rows}

    @app.post("/api/steer")
    def api_steer(request: SteerRequest):
        session = fetch_session(request.session_id)
        record = session.records[0]
        if not 0 <= request.position < len(record.steps):
            raise ApiError(400, "position_out_of_range",
                           f"position {request.position} outside "
                           f"[0, {len(record.steps)})")
        step = record.steps[request.position]
        if all(cid != request.replacement_id for cid, _ in step.candidates):
            raise ApiError(400, "invalid_replacement",
                           f"id {request.replacement_id} is not among the stored "
                           f"candidates at position {request.position}")
        if request.replacement_id == ctx.model.vocab.eos_id:
            raise ApiError(400, "invalid_replacement",
                           "the end marker cannot be forced into a prefix")
        forced = tuple(record.output_ids[:request.position]) + (request.replacement_id,)
        try:
            steered = generate_with_table(
                [record.prefix], session.table, [record.mask], ctx.model,
                session.config, candidate_surfaces=[record.candidate_surfaces],
                forced=[forced],
            )
        except ValueError as err:
            raise ApiError(400, "generation_failed", str(err)) from None
        payload = _session_payload(store.put(steered), steered, ctx.model)
        payload["parent_session_id"] = request.session_id
        payload["position"] = request.position
        return payload

    @app.get("/api/viz")
    def api_viz(session_id: str):
        session = fetch_session(session_id)
        sample = serialize_session(session, ctx.model.vocab)["samples"][0]
        return {
            "session_id": session_id,
            "segments": sample["segments"],
            "svg": heat_svg(sample["segments"]),
        }

    return app
