"""Request admission, batched classification, and the short/long fallback.

A single scheduler loop owns the task queue and the generation backend.
Producers hand requests over through `submit`, which returns a one-shot
future resolving to exactly one `ClassifyOutcome`. Each request is chunked;
chunks are classified in short mode (coded output, small decode budget) and
retried in long mode (uncoded JSON, bigger budgets) when the coded output
fails to parse. A request only fails terminally when both routes fail,
which bounds the error rate at the product of the two parse-failure rates.

Batch latency comes from the simulator and is charged to every member of
the batch; the failed-parse retry re-enqueues at the queue head. The loop
runs against a pluggable clock so tests and the load generator can advance
time without sleeping.
"""

from __future__ import annotations

import itertools
import threading
import time
from collections import deque
from concurrent.futures import Future
from dataclasses import dataclass, field

import numpy as np

from .chunking import Chunk, TokenizerPolicy, aggregate_verdicts, count_tokens, split_chunks
from .codec import ParseError, Verdict, decode_verdict, parse_uncoded
from .lexicon import Lexicon, ScoredText, score_text
from .simulator import (
    MODE_LONG,
    MODE_SHORT,
    DeploymentProfile,
    decode_latency,
    generate_output,
    prefill_latency_mixed,
)

MODE_AUTO = "auto"


class QueueFullError(RuntimeError):
    pass


class InvalidInputError(ValueError):
    pass


class BackendError(RuntimeError):
    pass


ERROR_TERMINAL_PARSE = "terminal_parse_error"
ERROR_BACKEND = "backend_error"


@dataclass(frozen=True)
class SchedulerConfig:
    max_batch: int = 16
    batch_window_ms: float = 20.0
    short_decode_len: int = 20
    long_decode_len: int = 64
    short_prompt_tokens: int = 100
    long_prompt_tokens: int = 397
    max_fallback_attempts: int = 1  # 0 disables the long-mode retry
    queue_bound: int = 1024
    max_chunk_tokens: int = 3000

    def __post_init__(self) -> None:
        for name in (
            "max_batch", "short_decode_len", "long_decode_len",
            "short_prompt_tokens", "long_prompt_tokens", "queue_bound",
            "max_chunk_tokens",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_fallback_attempts < 0:
            raise ValueError("max_fallback_attempts must be >= 0")
        if self.batch_window_ms < 0:
            raise ValueError("batch_window_ms must be >= 0")

    def prompt_tokens(self, mode: str) -> int:
        return self.short_prompt_tokens if mode == MODE_SHORT else self.long_prompt_tokens

    def decode_len(self, mode: str) -> int:
        return self.short_decode_len if mode == MODE_SHORT else self.long_decode_len


@dataclass(frozen=True)
class ClassifyRequest:
    id: str
    text: str
    mode_hint: str = MODE_AUTO
    enqueue_time: float | None = None

    def __post_init__(self) -> None:
        if self.mode_hint not in (MODE_AUTO, MODE_SHORT, MODE_LONG):
            raise ValueError(f"mode_hint must be auto|short|long, got {self.mode_hint!r}")


@dataclass(frozen=True)
class ClassifyOutcome:
    verdict: Verdict | None
    chunk_verdicts: tuple[Verdict, ...]
    attempts: int
    used_fallback: bool
    latency_ms: float
    error: str | None = None  # ERROR_TERMINAL_PARSE | ERROR_BACKEND

    @property
    def ok(self) -> bool:
        return self.error is None


# -- clocks -------------------------------------------------------------------


class RealClock:
    """Wall-clock time; `sleep_ms` actually sleeps."""

    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    def sleep_ms(self, ms: float) -> None:
        if ms > 0:
            time.sleep(ms / 1000.0)


class FastClock:
    """Virtual clock: `sleep_ms` advances time instantly.

    Lets the scheduler loop account simulated latencies without waiting,
    so tests and accelerated load runs finish in wall-clock milliseconds.
    """

    def __init__(self) -> None:
        self._now = 0.0
        self._lock = threading.Lock()

    def now_ms(self) -> float:
        with self._lock:
            return self._now

    def sleep_ms(self, ms: float) -> None:
        with self._lock:
            self._now += max(0.0, ms)


# -- generation backend -------------------------------------------------------


@dataclass(frozen=True)
class BatchGeneration:
    outputs: tuple[str, ...]
    prefill_ms: float
    decode_ms: float

    @property
    def total_ms(self) -> float:
        return self.prefill_ms + self.decode_ms


class SimulatedBackend:
    """Generation backend over the lexicon scorer and latency simulator.

    Produces, for a batch of (chunk text, mode) items, the raw model output
    per item plus the batch's phase latencies. Output corruption is drawn
    per item from a seeded stream at the configured per-mode rate, which
    exercises the parse-error fallback path deterministically.
    """

    def __init__(
        self,
        profile: DeploymentProfile,
        lexicon: Lexicon,
        config: SchedulerConfig | None = None,
        *,
        corruption_short: float = 0.0,
        corruption_long: float = 0.0,
        threshold: float = 0.5,
        seed: int = 0,
    ):
        if not 0 <= corruption_short <= 1 or not 0 <= corruption_long <= 1:
            raise ValueError("corruption rates must be in [0, 1]")
        self.profile = profile
        self.config = config or SchedulerConfig()
        self.lexicon = lexicon
        self.threshold = threshold
        self.corruption = {MODE_SHORT: corruption_short, MODE_LONG: corruption_long}
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed & (2**64 - 1))))
        self._call_counter = itertools.count()
        self._score_cache: dict[str, ScoredText] = {}
        self._token_cache: dict[str, int] = {}

    @property
    def max_batch(self) -> int:
        return self.profile.max_batch

    def score(self, text: str) -> ScoredText:
        cached = self._score_cache.get(text)
        if cached is None:
            cached = score_text(text, self.lexicon, threshold=self.threshold)
            if len(self._score_cache) < 4096:
                self._score_cache[text] = cached
        return cached

    def seq_tokens(self, text: str, mode: str) -> int:
        n = self._token_cache.get(text)
        if n is None:
            n = count_tokens(text)
            if len(self._token_cache) < 4096:
                self._token_cache[text] = n
        return n + self.config.prompt_tokens(mode)

    def generate_batch(self, items: list[tuple[str, str]]) -> BatchGeneration:
        """Run one batch; items are (chunk_text, mode) pairs."""
        if not items:
            raise ValueError("empty batch")
        seqs = [self.seq_tokens(text, mode) for text, mode in items]
        decode_len = max(self.config.decode_len(mode) for _, mode in items)
        batch_seed = next(self._call_counter)
        pre = prefill_latency_mixed(self.profile, seqs, rng_seed=batch_seed)
        dec = decode_latency(self.profile, len(items), decode_len, rng_seed=batch_seed)
        outputs = []
        for text, mode in items:
            scored = self.score(text)
            rate = self.corruption[mode]
            corrupt = rate > 0 and float(self._rng.random()) < rate
            outputs.append(
                generate_output(
                    scored,
                    mode,
                    corruption_rate=1.0 if corrupt else 0.0,
                    rng_seed=next(self._call_counter),
                )
            )
        return BatchGeneration(outputs=tuple(outputs), prefill_ms=pre, decode_ms=dec)


# -- per-request state machine ------------------------------------------------


@dataclass
class ChunkTask:
    state: "RequestState"
    chunk_index: int
    mode: str


@dataclass
class RequestState:
    """Mutable bookkeeping for one in-flight request."""

    request: ClassifyRequest
    chunks: list[Chunk]
    chunk_verdicts: list[Verdict | None] = field(default_factory=list)
    attempts: int = 0
    used_fallback: bool = False
    error: str | None = None
    service_ms: float = 0.0
    outstanding: int = 0

    @classmethod
    def create(cls, request: ClassifyRequest, cfg: SchedulerConfig) -> "RequestState":
        policy = TokenizerPolicy(max_tokens=cfg.max_chunk_tokens)
        chunks = split_chunks(request.text, policy)
        if not chunks:
            raise InvalidInputError("text is empty after trimming")
        state = cls(request=request, chunks=chunks)
        state.chunk_verdicts = [None] * len(chunks)
        state.outstanding = len(chunks)
        return state

    def initial_tasks(self) -> list[ChunkTask]:
        mode = MODE_LONG if self.request.mode_hint == MODE_LONG else MODE_SHORT
        return [ChunkTask(state=self, chunk_index=c.index, mode=mode) for c in self.chunks]

    def parse_output(self, task: ChunkTask, raw: str, cfg: SchedulerConfig) -> ChunkTask | None:
        """Apply one generation result; returns a follow-up task when the
        output failed to parse and a fallback attempt remains."""
        self.attempts += 1
        try:
            if task.mode == MODE_SHORT:
                verdict = decode_verdict(raw)
            else:
                verdict = parse_uncoded(raw)
        except ParseError:
            fallback_allowed = (
                task.mode == MODE_SHORT
                and self.request.mode_hint == MODE_AUTO
                and cfg.max_fallback_attempts >= 1
            )
            if fallback_allowed:
                self.used_fallback = True
                return ChunkTask(state=self, chunk_index=task.chunk_index, mode=MODE_LONG)
            self.error = ERROR_TERMINAL_PARSE
            self.outstanding -= 1
            return None
        self.chunk_verdicts[task.chunk_index] = verdict
        self.outstanding -= 1
        return None

    def fail(self, error: str) -> None:
        self.error = error
        self.outstanding = 0

    @property
    def complete(self) -> bool:
        return self.outstanding == 0 or self.error is not None

    def build_outcome(self, latency_ms: float) -> ClassifyOutcome:
        if self.error is not None:
            return ClassifyOutcome(
                verdict=None,
                chunk_verdicts=(),
                attempts=max(self.attempts, 1),
                used_fallback=self.used_fallback,
                latency_ms=latency_ms,
                error=self.error,
            )
        verdicts = [v for v in self.chunk_verdicts if v is not None]
        return ClassifyOutcome(
            verdict=aggregate_verdicts(verdicts),
            chunk_verdicts=tuple(verdicts),
            attempts=self.attempts,
            used_fallback=self.used_fallback,
            latency_ms=latency_ms,
        )


def classify_with_fallback(
    text: str, cfg: SchedulerConfig, backend: SimulatedBackend, mode_hint: str = MODE_AUTO
) -> ClassifyOutcome:
    """Classify one text synchronously (each attempt is a batch of one).

    Chunks the text, decodes short-mode output per chunk, retries in long
    mode on parse failure, and aggregates. Latency accumulates across all
    attempts; exhausting the fallback yields an error outcome rather than
    an exception.
    """
    request = ClassifyRequest(id="sync", text=text, mode_hint=mode_hint)
    state = RequestState.create(request, cfg)
    total_ms = 0.0
    pending = deque(state.initial_tasks())
    while pending:
        task = pending.popleft()
        chunk = state.chunks[task.chunk_index]
        try:
            gen = backend.generate_batch([(chunk.text, task.mode)])
        except Exception:
            state.attempts += 1  # the dispatched attempt counts
            state.fail(ERROR_BACKEND)
            break
        total_ms += gen.total_ms
        follow_up = state.parse_output(task, gen.outputs[0], cfg)
        if follow_up is not None:
            pending.appendleft(follow_up)
    return state.build_outcome(total_ms)


# -- the scheduler loop -------------------------------------------------------


class Scheduler:
    """Single-loop scheduler: producers submit, the loop owns queue and
    backend, outcomes resolve through one-shot futures."""

    def __init__(
        self,
        backend: SimulatedBackend,
        config: SchedulerConfig | None = None,
        clock: RealClock | FastClock | None = None,
    ):
        self.backend = backend
        self.config = config or backend.config
        self.clock = clock or RealClock()
        self.max_batch = min(self.config.max_batch, getattr(backend, "max_batch", self.config.max_batch))
        self._queue: deque[ChunkTask] = deque()
        self._futures: dict[str, Future] = {}
        self._seen_ids: set[str] = set()
        self._cv = threading.Condition()
        self._stop = False
        self._thread: threading.Thread | None = None

    # lifecycle

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stop = False
        self._thread = threading.Thread(target=self._loop, name="guardgate-scheduler", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._cv:
            self._stop = True
            self._cv.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    # producer side

    def submit(self, req: ClassifyRequest) -> Future:
        """Enqueue a request; the future resolves to its ClassifyOutcome
        exactly once. Raises InvalidInputError for blank text and
        QueueFullError when the backlog exceeds the configured bound."""
        if not req.text.strip():
            raise InvalidInputError("text is empty after trimming")
        future: Future = Future()
        with self._cv:
            if req.id in self._seen_ids:
                raise ValueError(f"duplicate request id {req.id!r}")
            if len(self._queue) >= self.config.queue_bound:
                raise QueueFullError(f"queue backlog at bound {self.config.queue_bound}")
            if req.enqueue_time is None:
                req = ClassifyRequest(
                    id=req.id, text=req.text, mode_hint=req.mode_hint,
                    enqueue_time=self.clock.now_ms(),
                )
            state = RequestState.create(req, self.config)
            self._seen_ids.add(req.id)
            self._futures[req.id] = future
            self._queue.extend(state.initial_tasks())
            self._cv.notify_all()
        return future

    def classify(self, text: str, mode_hint: str = MODE_AUTO, request_id: str | None = None) -> ClassifyOutcome:
        """Submit and wait; convenience wrapper for synchronous callers."""
        if request_id is None:
            request_id = f"req-{len(self._seen_ids)}-{id(self) & 0xFFFF}"
        return self.submit(
            ClassifyRequest(id=request_id, text=text, mode_hint=mode_hint)
        ).result(timeout=120)

    # loop side

    def form_batch(self) -> list[ChunkTask]:
        """Take up to max_batch tasks in FIFO order, waiting at most
        batch_window_ms for the queue to become non-empty."""
        with self._cv:
            if not self._queue and not self._stop:
                self._cv.wait(timeout=self.config.batch_window_ms / 1000.0)
            batch = []
            while self._queue and len(batch) < self.max_batch:
                batch.append(self._queue.popleft())
            return batch

    def _loop(self) -> None:
        while True:
            with self._cv:
                if self._stop and not self._queue:
                    break
            batch = self.form_batch()
            if not batch:
                continue
            self._process(batch)

    def _process(self, batch: list[ChunkTask]) -> None:
        items = [(t.state.chunks[t.chunk_index].text, t.mode) for t in batch]
        try:
            gen = self.backend.generate_batch(items)
        except Exception:
            for task in batch:
                task.state.attempts += 1  # the dispatched attempt counts
                task.state.fail(ERROR_BACKEND)
            self._complete_finished(batch)
            return
        self.clock.sleep_ms(gen.total_ms)
        retries = []
        for task, raw in zip(batch, gen.outputs):
            follow_up = task.state.parse_output(task, raw, self.config)
            if follow_up is not None:
                retries.append(follow_up)
        if retries:
            with self._cv:
                self._queue.extendleft(reversed(retries))  # retry at queue head
        self._complete_finished(batch)

    def _complete_finished(self, batch: list[ChunkTask]) -> None:
        now = self.clock.now_ms()
        done: list[RequestState] = []
        seen: set[str] = set()
        for task in batch:
            state = task.state
            if state.request.id in seen:
                continue
            seen.add(state.request.id)
            if state.complete:
                done.append(state)
        for state in done:
            future = self._futures.pop(state.request.id, None)
            if future is None:
                continue  # already resolved
            start = state.request.enqueue_time
            if start is None:
                start = now
            future.set_result(state.build_outcome(latency_ms=now - start))


# -- fallback error-budget study ----------------------------------------------


@dataclass(frozen=True)
class FallbackStudy:
    requests: int
    terminal_errors: int
    fallbacks: int
    p50_ms: float
    p95_ms: float

    @property
    def terminal_error_rate(self) -> float:
        return self.terminal_errors / self.requests


def run_fallback_study(
    n_requests: int,
    backend: SimulatedBackend,
    cfg: SchedulerConfig | None = None,
    batch_size: int = 8,
    text: str = "students compared notes about the science fair",
) -> FallbackStudy:
    """Stream `n_requests` single-chunk classifications through static
    batch cycles and measure the fallback protocol.

    Requests all use one benign text so the run isolates the corruption /
    retry arithmetic: per-request latency is the sum of the batch latencies
    the request participated in, long-mode retries re-enqueue at the queue
    head and slow their whole batch (the p95 tail effect), and a request is
    a terminal error only when both routes failed to parse.
    """
    cfg = cfg or backend.config
    latencies = np.zeros(n_requests)
    queue: deque[tuple[int, str]] = deque()  # (request index, mode)
    next_to_enqueue = 0
    terminal = 0
    fallbacks = 0

    while queue or next_to_enqueue < n_requests:
        while len(queue) < batch_size and next_to_enqueue < n_requests:
            queue.append((next_to_enqueue, MODE_SHORT))
            next_to_enqueue += 1
        batch = [queue.popleft() for _ in range(min(batch_size, len(queue)))]
        gen = backend.generate_batch([(text, mode) for _, mode in batch])
        retries = []
        for (idx, mode), raw in zip(batch, gen.outputs):
            latencies[idx] += gen.total_ms
            try:
                if mode == MODE_SHORT:
                    decode_verdict(raw)
                else:
                    parse_uncoded(raw)
            except ParseError:
                if mode == MODE_SHORT and cfg.max_fallback_attempts >= 1:
                    fallbacks += 1
                    retries.append((idx, MODE_LONG))
                else:
                    terminal += 1
        queue.extendleft(reversed(retries))

    ordered = np.sort(latencies)
    return FallbackStudy(
        requests=n_requests,
        terminal_errors=terminal,
        fallbacks=fallbacks,
        p50_ms=float(ordered[int(np.ceil(0.5 * n_requests)) - 1]),
        p95_ms=float(ordered[int(np.ceil(0.95 * n_requests)) - 1]),
    )
