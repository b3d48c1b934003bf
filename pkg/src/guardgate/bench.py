"""Static-batch benchmark runner.

Sweeps batch size x sequence length x decode length for a named deployment
profile, measuring each cell over `runs` simulated executions after
discarding warmup, and reports nearest-rank percentiles for latency and
throughput in both phases. Per-run seeds derive from (seed, batch, seq,
decode, run) so adding cells to a sweep never perturbs existing ones, and
identical configs produce byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .simulator import DeploymentProfile, OutOfMemoryError, load_profile, simulate_batch

DEFAULT_BATCH_SIZES = (1, 2, 4, 8, 16, 32)
DEFAULT_SEQ_LENS = (512, 1024, 2048, 3072)
DEFAULT_DECODE_LENS = (20, 64)


class EmptyInputError(ValueError):
    pass


def percentile(samples: list[float], q: float) -> float:
    """Nearest-rank percentile: sort ascending, take element ceil(q*n)-1."""
    if not samples:
        raise EmptyInputError("percentile of empty sample list")
    if not 0 < q <= 1:
        raise ValueError(f"q must be in (0, 1], got {q}")
    ordered = sorted(samples)
    rank = int(np.ceil(q * len(ordered)))
    return ordered[rank - 1]


def _ascending(values: tuple[int, ...]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class BenchConfig:
    profile: str
    batch_sizes: tuple[int, ...] = DEFAULT_BATCH_SIZES
    seq_lens: tuple[int, ...] = DEFAULT_SEQ_LENS
    decode_lens: tuple[int, ...] = DEFAULT_DECODE_LENS
    runs: int = 10
    warmup_runs: int = 1
    seed: int = 0
    jitter_cv: float | None = None  # override the profile's jitter when set

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.warmup_runs < 0:
            raise ValueError("warmup_runs must be >= 0")
        for name in ("batch_sizes", "seq_lens", "decode_lens"):
            values = getattr(self, name)
            if not values:
                raise ValueError(f"{name} must be non-empty")
            if not _ascending(tuple(values)):
                raise ValueError(f"{name} must be strictly ascending")


@dataclass(frozen=True)
class PhaseStats:
    latency_ms_p50: float
    latency_ms_p90: float
    latency_ms_p95: float
    throughput_tok_s_p50: float
    throughput_tok_s_p90: float
    throughput_tok_s_p95: float


@dataclass(frozen=True)
class BenchCell:
    batch: int
    seq: int
    decode_len: int
    oom: bool
    prefill: PhaseStats | None
    decode: PhaseStats | None
    total_ms_p50: float | None
    derived_qps: float | None


@dataclass(frozen=True)
class BenchReport:
    config: BenchConfig | None
    cells: tuple[BenchCell, ...]

    def cell(self, batch: int, seq: int, decode_len: int) -> BenchCell | None:
        for c in self.cells:
            if (c.batch, c.seq, c.decode_len) == (batch, seq, decode_len):
                return c
        return None

    def series(self, seq: int, decode_len: int) -> list[BenchCell]:
        """Non-OOM cells for one (seq, decode) pair, ascending batch."""
        return sorted(
            (c for c in self.cells if c.seq == seq and c.decode_len == decode_len and not c.oom),
            key=lambda c: c.batch,
        )


def _run_seed(seed: int, batch: int, seq: int, decode_len: int, run: int) -> int:
    ss = np.random.SeedSequence((seed & (2**64 - 1), batch, seq, decode_len, run))
    return int(ss.generate_state(1)[0])


def _phase_stats(latencies: list[float], throughputs: list[float]) -> PhaseStats:
    return PhaseStats(
        latency_ms_p50=percentile(latencies, 0.50),
        latency_ms_p90=percentile(latencies, 0.90),
        latency_ms_p95=percentile(latencies, 0.95),
        throughput_tok_s_p50=percentile(throughputs, 0.50),
        throughput_tok_s_p90=percentile(throughputs, 0.90),
        throughput_tok_s_p95=percentile(throughputs, 0.95),
    )


def run_bench(cfg: BenchConfig, profile: DeploymentProfile | None = None) -> BenchReport:
    """Execute the sweep. OOM cells (batch beyond the profile limit) carry
    the flag and no statistics."""
    if profile is None:
        profile = load_profile(cfg.profile)
    if cfg.jitter_cv is not None:
        profile = profile.with_jitter(cfg.jitter_cv)

    cells = []
    for seq in cfg.seq_lens:
        for decode_len in cfg.decode_lens:
            for batch in cfg.batch_sizes:
                if batch > profile.max_batch:
                    cells.append(
                        BenchCell(batch=batch, seq=seq, decode_len=decode_len, oom=True,
                                  prefill=None, decode=None, total_ms_p50=None, derived_qps=None)
                    )
                    continue
                pre_lat, pre_thr, dec_lat, dec_thr, totals = [], [], [], [], []
                for run in range(cfg.warmup_runs + cfg.runs):
                    seed = _run_seed(cfg.seed, batch, seq, decode_len, run)
                    try:
                        result = simulate_batch(profile, batch, seq, decode_len, seed=seed)
                    except OutOfMemoryError:
                        result = None
                    if run < cfg.warmup_runs or result is None:
                        continue
                    pre_lat.append(result.prefill_ms)
                    pre_thr.append(result.prefill_throughput_tok_s)
                    dec_lat.append(result.decode_ms)
                    dec_thr.append(result.decode_throughput_tok_s)
                    totals.append(result.total_ms)
                total_p50 = percentile(totals, 0.50)
                cells.append(
                    BenchCell(
                        batch=batch,
                        seq=seq,
                        decode_len=decode_len,
                        oom=False,
                        prefill=_phase_stats(pre_lat, pre_thr),
                        decode=_phase_stats(dec_lat, dec_thr),
                        total_ms_p50=total_p50,
                        derived_qps=batch * 1000.0 / total_p50,
                    )
                )
    return BenchReport(config=cfg, cells=tuple(cells))


# -- serialization ------------------------------------------------------------

_CSV_COLUMNS = [
    "batch", "seq", "decode_len", "oom",
    "prefill_latency_ms_p50", "prefill_latency_ms_p90", "prefill_latency_ms_p95",
    "prefill_throughput_tok_s_p50", "prefill_throughput_tok_s_p90", "prefill_throughput_tok_s_p95",
    "decode_latency_ms_p50", "decode_latency_ms_p90", "decode_latency_ms_p95",
    "decode_throughput_tok_s_p50", "decode_throughput_tok_s_p90", "decode_throughput_tok_s_p95",
    "total_ms_p50", "derived_qps",
]


def report_to_json(report: BenchReport) -> str:
    payload = {
        "config": asdict(report.config) if report.config else None,
        "cells": [asdict(c) for c in report.cells],
    }
    return json.dumps(payload, indent=2) + "\n"


def report_from_json(text: str) -> BenchReport:
    payload = json.loads(text)
    cfg = payload.get("config")
    config = None
    if cfg is not None:
        config = BenchConfig(
            profile=cfg["profile"],
            batch_sizes=tuple(cfg["batch_sizes"]),
            seq_lens=tuple(cfg["seq_lens"]),
            decode_lens=tuple(cfg["decode_lens"]),
            runs=cfg["runs"],
            warmup_runs=cfg["warmup_runs"],
            seed=cfg["seed"],
            jitter_cv=cfg.get("jitter_cv"),
        )
    cells = []
    for c in payload["cells"]:
        cells.append(
            BenchCell(
                batch=c["batch"], seq=c["seq"], decode_len=c["decode_len"], oom=c["oom"],
                prefill=PhaseStats(**c["prefill"]) if c["prefill"] else None,
                decode=PhaseStats(**c["decode"]) if c["decode"] else None,
                total_ms_p50=c["total_ms_p50"], derived_qps=c["derived_qps"],
            )
        )
    return BenchReport(config=config, cells=tuple(cells))


def report_to_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for c in report.cells:
        if c.oom:
            writer.writerow([c.batch, c.seq, c.decode_len, "true"] + [""] * 14)
            continue
        writer.writerow(
            [c.batch, c.seq, c.decode_len, "false"]
            + [repr(v) for v in (
                c.prefill.latency_ms_p50, c.prefill.latency_ms_p90, c.prefill.latency_ms_p95,
                c.prefill.throughput_tok_s_p50, c.prefill.throughput_tok_s_p90, c.prefill.throughput_tok_s_p95,
                c.decode.latency_ms_p50, c.decode.latency_ms_p90, c.decode.latency_ms_p95,
                c.decode.throughput_tok_s_p50, c.decode.throughput_tok_s_p90, c.decode.throughput_tok_s_p95,
                c.total_ms_p50, c.derived_qps,
            )]
        )
    return buf.getvalue()


def report_from_csv(text: str) -> BenchReport:
    """Rebuild the cell table from CSV (config is not stored in CSV)."""
    reader = csv.DictReader(io.StringIO(text))
    cells = []
    for row in reader:
        oom = row["oom"] == "true"
        if oom:
            cells.append(BenchCell(batch=int(row["batch"]), seq=int(row["seq"]),
                                   decode_len=int(row["decode_len"]), oom=True,
                                   prefill=None, decode=None, total_ms_p50=None, derived_qps=None))
            continue
        cells.append(
            BenchCell(
                batch=int(row["batch"]), seq=int(row["seq"]), decode_len=int(row["decode_len"]), oom=False,
                prefill=PhaseStats(
                    latency_ms_p50=float(row["prefill_latency_ms_p50"]),
                    latency_ms_p90=float(row["prefill_latency_ms_p90"]),
                    latency_ms_p95=float(row["prefill_latency_ms_p95"]),
                    throughput_tok_s_p50=float(row["prefill_throughput_tok_s_p50"]),
                    throughput_tok_s_p90=float(row["prefill_throughput_tok_s_p90"]),
                    throughput_tok_s_p95=float(row["prefill_throughput_tok_s_p95"]),
                ),
                decode=PhaseStats(
                    latency_ms_p50=float(row["decode_latency_ms_p50"]),
                    latency_ms_p90=float(row["decode_latency_ms_p90"]),
                    latency_ms_p95=float(row["decode_latency_ms_p95"]),
                    throughput_tok_s_p50=float(row["decode_throughput_tok_s_p50"]),
                    throughput_tok_s_p90=float(row["decode_throughput_tok_s_p90"]),
                    throughput_tok_s_p95=float(row["decode_throughput_tok_s_p95"]),
                ),
                total_ms_p50=float(row["total_ms_p50"]),
                derived_qps=float(row["derived_qps"]),
            )
        )
    return BenchReport(config=None, cells=tuple(cells))


def write_report(report: BenchReport, path: str | Path, format: str = "json") -> None:
    path = Path(path)
    if format == "json":
        path.write_text(report_to_json(report), encoding="utf-8")
    elif format == "csv":
        path.write_text(report_to_csv(report), encoding="utf-8")
    else:
        raise ValueError(f"format must be json|csv, got {format!r}")


def read_report(path: str | Path, format: str | None = None) -> BenchReport:
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix == ".csv" else "json"
    text = path.read_text(encoding="utf-8")
    return report_from_csv(text) if format == "csv" else report_from_json(text)
