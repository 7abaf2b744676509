"""HTTP composition service: generation, analysis, model listing, MIDI export.

Stateless by design: the evolving piece lives on the client, which re-seeds
each request. Models are loaded once at startup and never mutated, so
concurrent identical seeded requests return identical bodies.
"""

from __future__ import annotations

import secrets
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import TuneLmError
from .midi import DEFAULT_TEMPO_BPM, write_midi
from .sampling import GenerationConfig, LoadedModel, generate, stream_rng
from .score import (
    detect_structure,
    expand_repeats,
    find_errors,
    to_note_events,
    validate_measures,
)
from .tokens import (
    END_TOKEN,
    START_TOKEN,
    seq_from_text,
    seq_to_text,
    detokenize,
    tokenize_abc,
    transpose,
    validate_grammar,
)

MAX_CANDIDATES = 32


class GenerateRequest(BaseModel):
    model_id: str
    seed_abc: str = ""
    temperature: float = Field(1.0, gt=0.0, le=20.0)
    count: int = Field(1, ge=1, le=MAX_CANDIDATES)
    max_steps: int = Field(400, ge=1, le=20000)
    rng_seed: int | None = None


class StructureSummary(BaseModel):
    aabb8: bool
    sections: list[dict]


class Candidate(BaseModel):
    abc: str
    token_count: int
    grammar_valid: bool
    structure: StructureSummary
    stop_reason: str


class GenerateResponse(BaseModel):
    candidates: list[Candidate]
    rng_seed: int


class AnalyzeRequest(BaseModel):
    abc: str


class AnalyzeResponse(BaseModel):
    token_count: int
    grammar_ok: bool
    grammar_violations: list[dict]
    duration_error_count: int
    measure_count: int
    measures: list[dict]
    structure: StructureSummary
    findings: list[dict]


class ExportMidiRequest(BaseModel):
    abc: str
    tempo_bpm: int = Field(DEFAULT_TEMPO_BPM, gt=0)
    program: int = Field(0, ge=0, le=127)


def load_service_config(path: str | Path) -> tuple[dict[str, Path], int | None]:
    """Plain key=value file: ``model.<id> = path`` entries plus optional ``port``."""
    models: dict[str, Path] = {}
    port: int | None = None
    base = Path(path).parent
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TuneLmError(f"bad config line (expected key=value): {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "port":
            port = int(value)
        elif key.startswith("model."):
            model_path = Path(value)
            if not model_path.is_absolute():
                model_path = base / model_path
            models[key[len("model.") :]] = model_path
        else:
            raise TuneLmError(f"unknown config key {key!r}")
    return models, port


def _structure_summary(seq) -> StructureSummary:
    info = detect_structure(seq)
    return StructureSummary(
        aabb8=info.aabb8,
        sections=[
            {"bar_count": s.bar_count, "repeated": s.repeated, "content_hash": s.content_hash}
            for s in info.sections
        ],
    )


def _seed_for_model(model: LoadedModel, seed_abc: str) -> str:
    """Normalize a request seed to what the sampler expects."""
    text = seed_abc.strip("\n")
    if model.mode == "char":
        return seed_abc if seed_abc else ""
    if not text.strip():
        return ""
    if START_TOKEN in text:
        return " ".join(text.split())
    # raw ABC: tokenize and transpose into the model's root-C space
    seq, key = tokenize_abc(text)
    seq = transpose(seq, key)
    return seq_to_text(seq[:-1])  # drop the terminal: the model continues from here


def create_app(model_paths: dict[str, str | Path] | None = None) -> FastAPI:
    from fastapi.exceptions import RequestValidationError

    app = FastAPI(title="tunelm composition service")
    app.state.ready = False
    app.state.models = {}

    @app.exception_handler(RequestValidationError)
    async def _flag_errors(request: Request, exc: RequestValidationError):
        # invalid request flags are client errors, reported as 400 with detail
        return JSONResponse({"detail": exc.errors()}, status_code=400)

    @app.on_event("startup")
    def _load_models() -> None:
        for model_id, path in (model_paths or {}).items():
            app.state.models[model_id] = LoadedModel.from_checkpoint(path)
        app.state.ready = True

    @app.middleware("http")
    async def _readiness(request: Request, call_next):
        if not getattr(app.state, "ready", False):
            return JSONResponse({"detail": "models are still loading"}, status_code=503)
        return await call_next(request)

    @app.get("/api/models")
    def list_models() -> dict:
        return {
            "models": [
                {
                    "id": model_id,
                    "mode": m.mode,
                    "vocab_size": m.config.vocab_size,
                    "layers": m.config.layers,
                    "hidden_size": m.config.hidden_size,
                    "dropout_rate": m.config.dropout_rate,
                }
                for model_id, m in sorted(app.state.models.items())
            ]
        }

    @app.post("/api/generate", response_model=GenerateResponse)
    def api_generate(req: GenerateRequest) -> GenerateResponse:
        model = app.state.models.get(req.model_id)
        if model is None:
            raise HTTPException(status_code=404, detail=f"unknown model {req.model_id!r}")
        try:
            seed = _seed_for_model(model, req.seed_abc)
        except TuneLmError as exc:
            raise HTTPException(status_code=400, detail=f"bad seed: {exc}") from exc
        effective_seed = req.rng_seed if req.rng_seed is not None else secrets.randbits(31)
        candidates = []
        for i in range(req.count):
            config = GenerationConfig(
                seed=seed,
                temperature=req.temperature,
                max_steps=req.max_steps,
                rng_seed=effective_seed,
            )
            try:
                result = generate(model, config, stream=i)
            except TuneLmError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            if model.mode == "token":
                seed_tokens = seed.split() if seed else [START_TOKEN]
                full = seed_tokens + result.elements
                try:
                    seq = seq_from_text(" ".join(full))
                    report = validate_grammar(seq)
                    structure = _structure_summary(seq)
                    abc_text = detokenize(seq) if report.ok else result.text
                    valid = report.ok
                except TuneLmError:
                    structure = StructureSummary(aabb8=False, sections=[])
                    abc_text = result.text
                    valid = False
            else:
                spliced = req.seed_abc + result.text
                valid, structure = _analyze_char_candidate(spliced)
                abc_text = result.text
            candidates.append(
                Candidate(
                    abc=abc_text,
                    token_count=len(result.elements),
                    grammar_valid=valid,
                    structure=structure,
                    stop_reason=result.stop_reason,
                )
            )
        return GenerateResponse(candidates=candidates, rng_seed=effective_seed)

    @app.post("/api/analyze", response_model=AnalyzeResponse)
    def api_analyze(req: AnalyzeRequest) -> AnalyzeResponse:
        try:
            seq = _tokenize_request_abc(req.abc)
        except TuneLmError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        report = validate_grammar(seq)
        validation = validate_measures(seq)
        return AnalyzeResponse(
            token_count=len(seq),
            grammar_ok=report.ok,
            grammar_violations=[
                {"code": v.code, "position": v.position, "message": v.message}
                for v in report.violations
            ],
            duration_error_count=validation.error_count,
            measure_count=len(validation.measures),
            measures=[
                {
                    "nominal": str(m.nominal),
                    "actual": str(m.actual),
                    "classification": m.classification,
                }
                for m in validation.measures
            ],
            structure=_structure_summary(seq),
            findings=[{"kind": e.kind, "position": e.position} for e in find_errors(seq)],
        )

    @app.post("/api/export/midi")
    def api_export_midi(req: ExportMidiRequest) -> Response:
        try:
            seq = _tokenize_request_abc(req.abc)
            events = to_note_events(expand_repeats(seq))
            blob = write_midi(events, tempo_bpm=req.tempo_bpm, program=req.program)
        except (TuneLmError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return Response(content=blob, media_type="audio/midi")

    return app


def _tokenize_request_abc(text: str):
    stripped = text.strip()
    if stripped.startswith(START_TOKEN):
        return seq_from_text(" ".join(stripped.split()))
    seq, _ = tokenize_abc(text)
    return seq


def _analyze_char_candidate(spliced_abc: str) -> tuple[bool, StructureSummary]:
    try:
        seq, _ = tokenize_abc(spliced_abc)
    except TuneLmError:
        return False, StructureSummary(aabb8=False, sections=[])
    return validate_grammar(seq).ok, _structure_summary(seq)
