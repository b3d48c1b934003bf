"""Regime classification, batch-size selection, and SLA/replica planning.

Works over a benchmark report: consecutive batch-size intervals are labeled
memory-bound while throughput still scales with batch (ratio >= theta per
doubling) and compute-bound once the ratio flattens. The operating point is
the largest batch entering on a memory-bound interval, or the lowest-latency
batch when everything is compute-bound. Derived QPS (batch * 1000 / total
latency) then sizes the replica count against the SLA's target rate,
assuming linear horizontal scaling.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .bench import BenchReport

DEFAULT_REGIME_THRESHOLD = 1.5

MEMORY_BOUND = "memory-bound"
COMPUTE_BOUND = "compute-bound"


class TooFewPointsError(ValueError):
    pass


class MissingCellError(KeyError):
    pass


@dataclass(frozen=True)
class SlaSpec:
    name: str
    p50_latency_ms: float
    target_qps: float | None = None
    availability: float | None = None
    error_budget: float | None = None
    seq_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.p50_latency_ms <= 0:
            raise ValueError("p50_latency_ms must be positive")
        if self.target_qps is not None and self.target_qps <= 0:
            raise ValueError("target_qps must be positive")


SLA_1 = SlaSpec(
    name="sla1",
    p50_latency_ms=1000.0,
    target_qps=50.0,
    availability=0.9999,
    error_budget=1e-4,
    seq_range=(500, 1000),
)

SLA_2 = SlaSpec(
    name="sla2",
    p50_latency_ms=3000.0,
    seq_range=(1000, 3000),
)

BUILTIN_SLAS = {"sla1": SLA_1, "sla2": SLA_2}


@dataclass(frozen=True)
class RegimeInterval:
    batch_from: int
    batch_to: int
    throughput_ratio: float
    label: str


@dataclass(frozen=True)
class PlanDecision:
    profile: str | None
    seq: int
    decode_len: int
    sla: str
    regimes: tuple[RegimeInterval, ...]
    selected_batch: int
    total_ms_p50: float
    derived_qps: float
    replicas: int | None
    sla_met: bool
    rationale: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def classify_regimes(
    points: list[tuple[int, float, float]], theta: float = DEFAULT_REGIME_THRESHOLD
) -> tuple[RegimeInterval, ...]:
    """Label each consecutive batch interval from (batch, latency_ms,
    throughput) points.

    An interval is memory-bound when throughput still scales: ratio >= theta
    per batch doubling (ratios are normalized per doubling for non-power-of-
    two spacing). Points must be in strictly ascending batch order.
    """
    if len(points) < 2:
        raise TooFewPointsError("need at least two points to classify regimes")
    intervals = []
    for (b1, _, t1), (b2, _, t2) in zip(points, points[1:]):
        if b2 <= b1:
            raise ValueError("points must be in strictly ascending batch order")
        if t1 <= 0:
            raise ValueError("throughput must be positive")
        doublings = math.log2(b2 / b1)
        ratio = (t2 / t1) ** (1.0 / doublings)
        label = MEMORY_BOUND if ratio >= theta else COMPUTE_BOUND
        intervals.append(
            RegimeInterval(batch_from=b1, batch_to=b2, throughput_ratio=ratio, label=label)
        )
    return tuple(intervals)


def select_batch(
    points: list[tuple[int, float, float]], regimes: tuple[RegimeInterval, ...]
) -> int:
    """The largest batch entering on a memory-bound interval, else the batch
    with the lowest latency among the points."""
    memory_bound_ends = [r.batch_to for r in regimes if r.label == MEMORY_BOUND]
    if memory_bound_ends:
        return max(memory_bound_ends)
    return min(points, key=lambda p: p[1])[0]


def derived_qps(batch: int, total_ms: float) -> float:
    """Per-replica capacity estimate: batch * 1000 / total latency in ms."""
    if total_ms <= 0:
        raise ValueError("total_ms must be positive")
    return batch * 1000.0 / total_ms


def plan(
    report: BenchReport,
    sla: SlaSpec,
    seq: int,
    decode_len: int,
    theta: float = DEFAULT_REGIME_THRESHOLD,
) -> PlanDecision:
    """Classify regimes for one (seq, decode) series, pick the operating
    batch, and size replicas against the SLA."""
    series = report.series(seq, decode_len)
    if not series:
        raise MissingCellError(f"report has no cells for seq={seq} decode_len={decode_len}")
    points = [(c.batch, c.total_ms_p50, c.derived_qps) for c in series]
    regimes = classify_regimes(points, theta=theta)
    selected = select_batch(points, regimes)
    cell = next(c for c in series if c.batch == selected)
    qps = derived_qps(selected, cell.total_ms_p50)
    replicas = math.ceil(sla.target_qps / qps) if sla.target_qps else None
    sla_met = cell.total_ms_p50 <= sla.p50_latency_ms

    if any(r.label == MEMORY_BOUND for r in regimes):
        branch = f"largest batch in the memory-bound region (batch {selected})"
    else:
        branch = f"lowest-latency batch in the compute-bound region (batch {selected})"
    regime_table = ", ".join(
        f"{r.batch_from}->{r.batch_to}: {r.label} (x{r.throughput_ratio:.2f}/doubling)"
        for r in regimes
    )
    rationale = (
        f"{branch}; regimes: {regime_table}; "
        f"p50 {cell.total_ms_p50:.0f} ms vs {sla.name} bound {sla.p50_latency_ms:.0f} ms; "
        f"derived QPS {qps:.2f}"
        + (f"; replicas = ceil({sla.target_qps:.0f}/{qps:.2f}) = {replicas}" if replicas else "")
    )
    return PlanDecision(
        profile=report.config.profile if report.config else None,
        seq=seq,
        decode_len=decode_len,
        sla=sla.name,
        regimes=regimes,
        selected_batch=selected,
        total_ms_p50=cell.total_ms_p50,
        derived_qps=qps,
        replicas=replicas,
        sla_met=sla_met,
        rationale=rationale,
    )
