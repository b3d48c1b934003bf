"""Calibrated latency model of prefill/decode phases for named model/GPU
profiles, plus raw classifier-output generation with seeded corruption.

The model (all closed-form at jitter 0):

* prefill: latency-flat in batch while memory-bound, then proportional to
  batch past the saturation point; linear in sequence length.
  ``base = prefill_ms_ref * (seq / seq_ref) * max(1, batch / saturation_batch)``
* decode: linear in decode length, with a small per-doubling batch penalty.
  ``base = decode_len * decode_ms_per_token * (1 + decode_batch_slope * log2(batch))``

Run-to-run noise is multiplicative lognormal jitter with coefficient of
variation `jitter_cv`, seeded deterministically from (seed, phase, batch,
length) so benchmark runs are reproducible. Profiles are immutable and all
operations are pure given (inputs, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .codec import encode_verdict, render_uncoded
from .lexicon import ScoredText

MODE_SHORT = "short"
MODE_LONG = "long"


class OutOfMemoryError(RuntimeError):
    """Batch size exceeds the profile's out-of-memory limit."""


class UnknownProfileError(KeyError):
    pass


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class DeploymentProfile:
    """Latency-model parameters for one model/GPU deployment."""

    name: str
    prefill_ms_ref: float
    saturation_batch: int
    decode_ms_per_token: float
    decode_batch_slope: float
    seq_ref: int = 512
    max_batch: int = 16
    tensor_parallel: int = 1
    jitter_cv: float = 0.0
    notes: str = ""

    def __post_init__(self) -> None:
        if self.prefill_ms_ref <= 0 or self.decode_ms_per_token <= 0:
            raise ValueError("latencies must be positive")
        if self.seq_ref < 1:
            raise ValueError("seq_ref must be >= 1")
        if not _is_power_of_two(self.saturation_batch) or not _is_power_of_two(self.max_batch):
            raise ValueError("saturation_batch and max_batch must be powers of two")
        if self.saturation_batch > self.max_batch:
            raise ValueError("saturation_batch must be <= max_batch")
        if not 0 <= self.jitter_cv <= 0.2:
            raise ValueError("jitter_cv must be in [0, 0.2]")
        if self.decode_batch_slope < 0:
            raise ValueError("decode_batch_slope must be >= 0")

    def with_jitter(self, jitter_cv: float) -> "DeploymentProfile":
        return replace(self, jitter_cv=jitter_cv)


@dataclass(frozen=True)
class SimResult:
    prefill_ms: float
    decode_ms: float
    total_ms: float
    prefill_throughput_tok_s: float
    decode_throughput_tok_s: float
    regime_hint: str  # "memory-bound" | "compute-bound"


def _check_batch(p: DeploymentProfile, batch: int) -> None:
    if batch < 1:
        raise ValueError("batch must be >= 1")
    if batch > p.max_batch:
        raise OutOfMemoryError(f"batch {batch} exceeds {p.name} max_batch {p.max_batch}")


def _jitter_factor(cv: float, seed_parts: tuple[int, ...]) -> float:
    """Deterministic lognormal factor with mean 1 and the given CV."""
    if cv <= 0:
        return 1.0
    sigma = math.sqrt(math.log(1.0 + cv * cv))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_parts)))
    return float(rng.lognormal(mean=-0.5 * sigma * sigma, sigma=sigma))


def _seed_parts(rng_seed: int, *parts: int) -> tuple[int, ...]:
    return (rng_seed & 0xFFFFFFFFFFFFFFFF, *[p & 0xFFFFFFFFFFFFFFFF for p in parts])


def prefill_latency(p: DeploymentProfile, batch: int, seq: int, rng_seed: int = 0) -> float:
    """Prefill latency in ms for a static batch of `batch` sequences of
    length `seq`."""
    _check_batch(p, batch)
    if seq < 1:
        raise ValueError("seq must be >= 1")
    base = p.prefill_ms_ref * (seq / p.seq_ref) * max(1.0, batch / p.saturation_batch)
    return base * _jitter_factor(p.jitter_cv, _seed_parts(rng_seed, 0, batch, seq))


def prefill_latency_mixed(p: DeploymentProfile, seqs: list[int], rng_seed: int = 0) -> float:
    """Prefill latency for a ragged batch of mixed sequence lengths.

    Memory-bound cost is gated by the longest sequence; compute-bound cost
    is proportional to the total token count. On uniform batches this
    reduces exactly to `prefill_latency`.
    """
    _check_batch(p, len(seqs))
    if any(s < 1 for s in seqs):
        raise ValueError("seq must be >= 1")
    base = p.prefill_ms_ref * max(
        max(seqs) / p.seq_ref, sum(seqs) / (p.saturation_batch * p.seq_ref)
    )
    return base * _jitter_factor(p.jitter_cv, _seed_parts(rng_seed, 0, len(seqs), sum(seqs)))


def decode_latency(p: DeploymentProfile, batch: int, decode_len: int, rng_seed: int = 0) -> float:
    """Decode latency in ms for `decode_len` autoregressive steps;
    independent of sequence length."""
    _check_batch(p, batch)
    if decode_len < 1:
        raise ValueError("decode_len must be >= 1")
    base = decode_len * p.decode_ms_per_token * (1.0 + p.decode_batch_slope * math.log2(batch))
    return base * _jitter_factor(p.jitter_cv, _seed_parts(rng_seed, 1, batch, decode_len))


def simulate_batch(
    p: DeploymentProfile, batch: int, seq: int, decode_len: int, seed: int = 0
) -> SimResult:
    """Simulate one static batch: composed phase latencies plus throughput
    identities."""
    pre = prefill_latency(p, batch, seq, rng_seed=seed)
    dec = decode_latency(p, batch, decode_len, rng_seed=seed)
    regime = "compute-bound" if batch >= p.saturation_batch else "memory-bound"
    return SimResult(
        prefill_ms=pre,
        decode_ms=dec,
        total_ms=pre + dec,
        prefill_throughput_tok_s=batch * seq * 1000.0 / pre,
        decode_throughput_tok_s=batch * decode_len * 1000.0 / dec,
        regime_hint=regime,
    )


def generate_output(
    scored: ScoredText, mode: str, corruption_rate: float = 0.0, rng_seed: int = 0
) -> str:
    """Produce the raw classifier output text for a scored input.

    Short mode emits the coded string; long mode emits the uncoded JSON
    rendering with explanation. With probability `corruption_rate` (seeded)
    the output is mangled -- truncated inside the flag token or salted with
    an illegal character in short mode, stripped of closing braces and
    truncated in long mode -- so that parsing is guaranteed to fail.
    """
    if mode not in (MODE_SHORT, MODE_LONG):
        raise ValueError(f"mode must be short|long, got {mode!r}")
    if not 0 <= corruption_rate <= 1:
        raise ValueError("corruption_rate must be in [0, 1]")

    if mode == MODE_SHORT:
        out = encode_verdict(scored.verdict).text
    else:
        out = render_uncoded(scored.verdict, include_explanation=True)

    if corruption_rate <= 0:
        return out
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(_seed_parts(rng_seed, 2))))
    if corruption_rate < 1 and rng.random() >= corruption_rate:
        return out
    if mode == MODE_SHORT:
        if rng.integers(0, 2) == 0:
            return out[: int(rng.integers(1, 4))]  # clip inside the flag token
        pos = int(rng.integers(0, len(out) + 1))
        return out[:pos] + "z" + out[pos:]  # 'z' is illegal everywhere in the grammar
    mangled = out.replace("}", "")
    cut = int(rng.integers(1, len(mangled) + 1))
    return mangled[:cut]


# -- bundled profiles ---------------------------------------------------------


def _profile_dir():
    return resources.files("guardgate").joinpath("profiles")


def _profile_from_dict(obj: dict) -> DeploymentProfile:
    fields = {
        "name", "prefill_ms_ref", "saturation_batch", "decode_ms_per_token",
        "decode_batch_slope", "seq_ref", "max_batch", "tensor_parallel",
        "jitter_cv", "notes",
    }
    return DeploymentProfile(**{k: v for k, v in obj.items() if k in fields})


def list_profiles() -> list[str]:
    """Names of the bundled deployment profiles."""
    names = []
    for entry in _profile_dir().iterdir():
        if entry.name.endswith(".json"):
            names.append(entry.name[: -len(".json")])
    return sorted(names)


def load_profile(name: str, jitter_cv: float | None = None) -> DeploymentProfile:
    """Load a bundled profile by name, or any profile from a JSON path."""
    path = Path(name)
    if path.suffix == ".json" and path.exists():
        obj = json.loads(path.read_text(encoding="utf-8"))
    else:
        res = _profile_dir().joinpath(f"{name}.json")
        try:
            obj = json.loads(res.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UnknownProfileError(
                f"unknown profile {name!r}; available: {', '.join(list_profiles())}"
            ) from None
    profile = _profile_from_dict(obj)
    if jitter_cv is not None:
        profile = profile.with_jitter(jitter_cv)
    return profile
