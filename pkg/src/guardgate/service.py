"""HTTP front door: classify endpoint, health, and windowed metrics.

The app owns one scheduler loop over a simulated backend. Handlers are
stateless; all mutable state lives in the scheduler and an atomic metrics
registry. `realtime=True` (the default for `guardgate serve`) makes the
loop actually sleep the simulated latencies so the service behaves like
the modeled deployment; tests and demos run with a virtual clock instead.
"""

from __future__ import annotations

import asyncio
import json
import os
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .codec import Verdict, encode_verdict
from .lexicon import Lexicon
from .loadgen import ServiceMetrics
from .scheduler import (
    MODE_AUTO,
    MODE_LONG,
    MODE_SHORT,
    ClassifyRequest,
    FastClock,
    InvalidInputError,
    QueueFullError,
    RealClock,
    Scheduler,
    SchedulerConfig,
    SimulatedBackend,
)
from .simulator import load_profile

ENV_CONFIG = "GG_CONFIG"
ENV_PORT = "GG_PORT"
ENV_PROFILE = "GG_PROFILE"

DEFAULT_PORT = 8080


def default_lexicon() -> Lexicon:
    """The bundled illustrative lexicon."""
    with resources.as_file(
        resources.files("guardgate").joinpath("data/lexicon.csv")
    ) as path:
        return Lexicon.load_csv(path)


@dataclass(frozen=True)
class ServiceConfig:
    profile: str = "mistral7b-a100"
    lexicon_path: str | None = None  # None -> bundled lexicon
    port: int = DEFAULT_PORT
    corruption_short: float = 0.0
    corruption_long: float = 0.0
    threshold: float = 0.5
    metrics_window_s: float = 60.0
    max_body_bytes: int = 1_000_000
    realtime: bool = True
    seed: int = 0
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ServiceConfig":
        """Build from a JSON config file plus GG_* environment overrides."""
        obj: dict = {}
        path = path or os.environ.get(ENV_CONFIG)
        if path:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        sched = SchedulerConfig(**obj.get("scheduler", {}))
        cfg = cls(
            profile=os.environ.get(ENV_PROFILE, obj.get("profile", cls.profile)),
            lexicon_path=obj.get("lexicon_path"),
            port=int(os.environ.get(ENV_PORT, obj.get("port", DEFAULT_PORT))),
            corruption_short=obj.get("corruption_short", 0.0),
            corruption_long=obj.get("corruption_long", 0.0),
            threshold=obj.get("threshold", 0.5),
            metrics_window_s=obj.get("metrics_window_s", 60.0),
            max_body_bytes=obj.get("max_body_bytes", 1_000_000),
            realtime=obj.get("realtime", True),
            seed=obj.get("seed", 0),
            scheduler=sched,
        )
        return cfg


class MetricsRegistry:
    """Thread-safe counters and a sliding window of completions."""

    def __init__(self, window_s: float = 60.0):
        self.window_s = window_s
        self._lock = threading.Lock()
        self._events: list[tuple[float, bool, float, bool]] = []  # (ts, ok, latency, fallback)
        self.submissions = 0
        self.successes = 0
        self.errors = 0
        self.rejections = 0

    def record_submission(self) -> None:
        with self._lock:
            self.submissions += 1

    def record_rejection(self) -> None:
        with self._lock:
            self.submissions += 1
            self.rejections += 1

    def record_outcome(self, ok: bool, latency_ms: float, used_fallback: bool) -> None:
        with self._lock:
            if ok:
                self.successes += 1
            else:
                self.errors += 1
            self._events.append((time.monotonic(), ok, latency_ms, used_fallback))
            cutoff = time.monotonic() - 10 * self.window_s
            if len(self._events) > 100_000:
                self._events = [e for e in self._events if e[0] >= cutoff]

    def snapshot(self, window_s: float | None = None) -> ServiceMetrics:
        window_s = window_s or self.window_s
        now = time.monotonic()
        with self._lock:
            recent = [e for e in self._events if e[0] >= now - window_s]
            submissions = self.submissions
            successes = self.successes
            errors = self.errors
            rejections = self.rejections
        latencies = sorted(e[2] for e in recent)

        def rank(q: float) -> float:
            if not latencies:
                return 0.0
            import math

            return latencies[math.ceil(q * len(latencies)) - 1]

        completed = len(recent)
        return ServiceMetrics(
            window_s=window_s,
            qps=completed / window_s,
            latency_ms_p50=rank(0.50),
            latency_ms_p90=rank(0.90),
            latency_ms_p95=rank(0.95),
            error_rate=errors / submissions if submissions else 0.0,
            availability=successes / submissions if submissions else 1.0,
            fallback_rate=(sum(1 for e in recent if e[3]) / completed) if completed else 0.0,
            submissions=submissions,
            successes=successes,
            errors=errors,
            rejections=rejections,
        )


def _verdict_payload(v: Verdict) -> dict:
    return {
        "verdict": v.flag,
        "scores": v.scores.as_display_dict(),
        "coded": encode_verdict(v).text,
    }


def create_app(config: ServiceConfig | None = None, lexicon: Lexicon | None = None) -> FastAPI:
    config = config or ServiceConfig()
    if lexicon is None:
        lexicon = Lexicon.load_csv(config.lexicon_path) if config.lexicon_path else default_lexicon()
    profile = load_profile(config.profile)
    backend = SimulatedBackend(
        profile,
        lexicon,
        config.scheduler,
        corruption_short=config.corruption_short,
        corruption_long=config.corruption_long,
        threshold=config.threshold,
        seed=config.seed,
    )
    clock = RealClock() if config.realtime else FastClock()
    scheduler = Scheduler(backend, config.scheduler, clock=clock)
    registry = MetricsRegistry(window_s=config.metrics_window_s)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        scheduler.start()
        yield
        scheduler.stop()

    app = FastAPI(title="guardgate", lifespan=lifespan)
    app.state.scheduler = scheduler
    app.state.metrics = registry
    app.state.config = config
    request_counter = iter(range(1, 1 << 62))

    @app.post("/v1/classify")
    async def classify(request: Request):
        body = await request.body()
        if len(body) > config.max_body_bytes:
            return JSONResponse({"error": "body too large"}, status_code=413)
        try:
            payload = json.loads(body)
        except json.JSONDecodeError:
            return JSONResponse({"error": "invalid JSON body"}, status_code=400)
        if not isinstance(payload, dict):
            return JSONResponse({"error": "body must be an object"}, status_code=400)
        text = payload.get("text")
        mode = payload.get("mode", MODE_AUTO)
        if not isinstance(text, str) or not text.strip():
            return JSONResponse({"error": "text must be a non-empty string"}, status_code=400)
        if mode not in (MODE_AUTO, MODE_SHORT, MODE_LONG):
            return JSONResponse({"error": "mode must be auto|short|long"}, status_code=400)

        req = ClassifyRequest(id=f"http-{next(request_counter)}", text=text, mode_hint=mode)
        try:
            future = scheduler.submit(req)
        except QueueFullError:
            registry.record_rejection()
            return JSONResponse({"error": "queue full"}, status_code=429)
        except InvalidInputError:
            return JSONResponse({"error": "text must be a non-empty string"}, status_code=400)
        registry.record_submission()
        outcome = await asyncio.wait_for(asyncio.wrap_future(future), timeout=300)
        registry.record_outcome(outcome.ok, outcome.latency_ms, outcome.used_fallback)
        if not outcome.ok:
            return JSONResponse(
                {"error": outcome.error, "attempts": outcome.attempts}, status_code=500
            )
        overall = _verdict_payload(outcome.verdict)
        overall["chunks"] = [_verdict_payload(v) for v in outcome.chunk_verdicts]
        overall["attempts"] = outcome.attempts
        overall["used_fallback"] = outcome.used_fallback
        overall["latency_ms"] = outcome.latency_ms
        return JSONResponse(overall)

    @app.get("/healthz")
    async def healthz():
        if scheduler.running:
            return JSONResponse({"status": "ok"})
        return JSONResponse({"status": "down"}, status_code=503)

    @app.get("/metrics")
    async def metrics(window: float | None = None):
        snap = registry.snapshot(window)
        return JSONResponse(snap.__dict__)

    return app
