"""Open-loop load generator and SLO verdict over modeled replicas.

Drives Poisson (or constant-rate) arrivals at a target QPS for a fixed
duration against N in-process replica engines on a virtual clock, so an
accelerated run measures minutes of traffic in wall-clock milliseconds.

Serving model: one shared admission queue feeds the N engines. Each engine
processes FIFO batches of up to max_batch tasks; a batch's latency is the
simulator's prefill + decode for its composition and is charged to every
member. As the desk-scale stand-in for in-flight batching, an engine may
start prefilling its next batch while the previous batch decodes (two-stage
pipeline). Failed coded parses re-enqueue in long mode at the queue head,
exactly as the live scheduler does.

Inputs are drawn so the model sequence (chunk tokens + short prompt
overhead) lands in the SLA's sequence range.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from .lexicon import Lexicon
from .planner import SlaSpec
from .scheduler import (
    ChunkTask,
    ClassifyRequest,
    RequestState,
    SchedulerConfig,
    SimulatedBackend,
)
from .simulator import DeploymentProfile

ARRIVAL_POISSON = "poisson"
ARRIVAL_CONSTANT = "constant"

_VOCAB = (
    "the students reviewed their notes about plants rivers music history math "
    "science art reading maps weather seasons animals planets numbers shapes"
).split()


def synthetic_text(token_count: int, salt: int = 0) -> str:
    """Deterministic benign text with exactly `token_count` whitespace tokens."""
    n = len(_VOCAB)
    return " ".join(_VOCAB[(salt + j * 7) % n] for j in range(token_count))


@dataclass(frozen=True)
class TextMix:
    """Input-length mix: sequence lengths (chunk + prompt overhead) drawn
    uniformly from the SLA range, realized from a fixed pool of texts."""

    seq_range: tuple[int, int] = (500, 1000)
    pool_size: int = 64

    def build_pool(self, prompt_overhead: int, seed: int) -> list[str]:
        lo = max(1, self.seq_range[0] - prompt_overhead)
        hi = max(lo, self.seq_range[1] - prompt_overhead)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed & (2**64 - 1), 2))))
        counts = rng.integers(lo, hi + 1, size=self.pool_size)
        return [synthetic_text(int(c), salt=i) for i, c in enumerate(counts)]


@dataclass(frozen=True)
class LoadTestConfig:
    target_qps: float
    duration_s: float
    replicas: int = 4
    arrival: str = ARRIVAL_POISSON
    mix: TextMix = field(default_factory=TextMix)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.target_qps <= 0 or self.duration_s <= 0 or self.replicas < 1:
            raise ValueError("target_qps, duration_s, replicas must be positive")
        if self.arrival not in (ARRIVAL_POISSON, ARRIVAL_CONSTANT):
            raise ValueError(f"arrival must be poisson|constant, got {self.arrival!r}")


@dataclass(frozen=True)
class ServiceMetrics:
    window_s: float
    qps: float
    latency_ms_p50: float
    latency_ms_p90: float
    latency_ms_p95: float
    error_rate: float
    availability: float
    fallback_rate: float
    submissions: int = 0
    successes: int = 0
    errors: int = 0
    rejections: int = 0


@dataclass(frozen=True)
class SlaCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class LoadTestReport:
    metrics: ServiceMetrics
    sla: str | None
    passed: bool | None
    checks: tuple[SlaCheck, ...]


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    if len(sorted_values) == 0:
        return 0.0
    return float(sorted_values[int(np.ceil(q * len(sorted_values))) - 1])


class _Engine:
    """One replica engine: two-stage (prefill/decode) pipeline state."""

    __slots__ = ("backend", "prefill_free_at", "decode_free_at", "armed")

    def __init__(self, backend: SimulatedBackend):
        self.backend = backend
        self.prefill_free_at = 0.0
        self.decode_free_at = 0.0
        self.armed = False


def load_test(
    cfg: LoadTestConfig,
    profile: DeploymentProfile,
    lexicon: Lexicon,
    scheduler_cfg: SchedulerConfig | None = None,
    sla: SlaSpec | None = None,
    corruption_short: float = 0.0,
    corruption_long: float = 0.0,
) -> LoadTestReport:
    """Run the open-loop test and judge the measured metrics against the SLA.

    SLA failures are reported in the verdict, never raised. Availability is
    successes/submissions: rejected (queue-full) and terminally failed
    requests both count against it.
    """
    scheduler_cfg = scheduler_cfg or SchedulerConfig()
    if sla is not None and sla.seq_range is not None and cfg.mix.seq_range != sla.seq_range:
        cfg = LoadTestConfig(
            target_qps=cfg.target_qps, duration_s=cfg.duration_s, replicas=cfg.replicas,
            arrival=cfg.arrival, mix=TextMix(seq_range=sla.seq_range, pool_size=cfg.mix.pool_size),
            seed=cfg.seed,
        )
    pool = cfg.mix.build_pool(scheduler_cfg.short_prompt_tokens, cfg.seed)

    engines = [
        _Engine(
            SimulatedBackend(
                profile, lexicon, scheduler_cfg,
                corruption_short=corruption_short, corruption_long=corruption_long,
                seed=cfg.seed + 101 * i,
            )
        )
        for i in range(cfg.replicas)
    ]
    max_batch = min(scheduler_cfg.max_batch, profile.max_batch)
    queue_bound = scheduler_cfg.queue_bound * cfg.replicas  # shared admission queue

    # Arrival times in ms over the open-loop window.
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed & (2**64 - 1), 1))))
    duration_ms = cfg.duration_s * 1000.0
    mean_gap_ms = 1000.0 / cfg.target_qps
    arrivals: list[float] = []
    t = 0.0
    while True:
        gap = rng.exponential(mean_gap_ms) if cfg.arrival == ARRIVAL_POISSON else mean_gap_ms
        t += gap
        if t >= duration_ms:
            break
        arrivals.append(t)

    # Event-driven run: (time, tiebreak, kind, payload).
    counter = itertools.count()
    events: list[tuple[float, int, str, object]] = []
    for i, at in enumerate(arrivals):
        heapq.heappush(events, (at, next(counter), "arrival", i))

    queue: list[ChunkTask] = []
    submissions = len(arrivals)
    rejections = 0
    latencies: list[float] = []
    fallbacks = 0
    errors = 0
    successes = 0

    def arm_engines(now: float) -> None:
        if not queue:
            return
        for engine in engines:
            if not engine.armed:
                engine.armed = True
                heapq.heappush(
                    events,
                    (max(now, engine.prefill_free_at), next(counter), "dispatch", engine),
                )

    def finish_request(state: RequestState, now: float) -> None:
        nonlocal successes, errors, fallbacks
        enqueued = state.request.enqueue_time if state.request.enqueue_time is not None else 0.0
        outcome = state.build_outcome(latency_ms=now - enqueued)
        latencies.append(outcome.latency_ms)
        if outcome.ok:
            successes += 1
        else:
            errors += 1
        if outcome.used_fallback:
            fallbacks += 1

    while events:
        now, _, kind, payload = heapq.heappop(events)
        if kind == "arrival":
            i = payload
            if len(queue) >= queue_bound:
                rejections += 1
                continue
            request = ClassifyRequest(id=f"lt-{i}", text=pool[i % len(pool)], enqueue_time=now)
            state = RequestState.create(request, scheduler_cfg)
            queue.extend(state.initial_tasks())
            arm_engines(now)
        elif kind == "dispatch":
            engine = payload
            engine.armed = False
            if not queue or now < engine.prefill_free_at:
                continue
            take = min(max_batch, len(queue))
            batch = queue[:take]
            del queue[:take]
            items = [(task.state.chunks[task.chunk_index].text, task.mode) for task in batch]
            gen = engine.backend.generate_batch(items)
            prefill_end = now + gen.prefill_ms
            decode_start = max(prefill_end, engine.decode_free_at)
            complete_at = decode_start + gen.decode_ms
            engine.decode_free_at = complete_at
            engine.prefill_free_at = prefill_end
            heapq.heappush(events, (complete_at, next(counter), "complete", (batch, gen.outputs)))
            heapq.heappush(events, (prefill_end, next(counter), "stage-free", None))
        elif kind == "stage-free":
            arm_engines(now)
        else:  # complete
            batch, outputs = payload
            retries: list[ChunkTask] = []
            finished: list[RequestState] = []
            seen: set[str] = set()
            for task, raw in zip(batch, outputs):
                follow_up = task.state.parse_output(task, raw, scheduler_cfg)
                if follow_up is not None:
                    retries.append(follow_up)
                if task.state.request.id not in seen:
                    seen.add(task.state.request.id)
                    if task.state.complete:
                        finished.append(task.state)
            if retries:
                queue[:0] = retries  # retry at queue head
                arm_engines(now)
            for state in finished:
                finish_request(state, now)

    ordered = np.sort(np.asarray(latencies)) if latencies else np.asarray([])
    completed = len(latencies)
    metrics = ServiceMetrics(
        window_s=cfg.duration_s,
        qps=completed / cfg.duration_s,
        latency_ms_p50=_nearest_rank(ordered, 0.50),
        latency_ms_p90=_nearest_rank(ordered, 0.90),
        latency_ms_p95=_nearest_rank(ordered, 0.95),
        error_rate=errors / submissions if submissions else 0.0,
        availability=successes / submissions if submissions else 1.0,
        fallback_rate=fallbacks / completed if completed else 0.0,
        submissions=submissions,
        successes=successes,
        errors=errors,
        rejections=rejections,
    )

    if sla is None:
        return LoadTestReport(metrics=metrics, sla=None, passed=None, checks=())
    checks = [
        SlaCheck(
            name="p50_latency",
            passed=metrics.latency_ms_p50 <= sla.p50_latency_ms,
            detail=f"p50 {metrics.latency_ms_p50:.0f} ms vs bound {sla.p50_latency_ms:.0f} ms",
        )
    ]
    if sla.availability is not None:
        checks.append(
            SlaCheck(
                name="availability",
                passed=metrics.availability >= sla.availability,
                detail=f"availability {metrics.availability:.6f} vs floor {sla.availability}",
            )
        )
    if sla.error_budget is not None:
        checks.append(
            SlaCheck(
                name="error_budget",
                passed=metrics.error_rate <= sla.error_budget,
                detail=f"error rate {metrics.error_rate:.2e} vs budget {sla.error_budget:.0e}",
            )
        )
    return LoadTestReport(
        metrics=metrics, sla=sla.name, passed=all(c.passed for c in checks), checks=tuple(checks)
    )
