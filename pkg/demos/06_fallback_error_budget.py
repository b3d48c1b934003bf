"""The short/long fallback and its error budget.

Short mode is cheap (coded output, 20 decode tokens) but occasionally the
output fails to parse; the scheduler then retries that chunk with the long
prompt and uncoded JSON. A request only fails terminally when *both*
routes fail, so the terminal rate is the product of the two parse-failure
rates -- 1e-2 x 1e-3 stays well inside a 1-in-10,000 budget. The retry
rides in a later batch with a 64-token decode, which slows that whole
batch: the median is untouched while the tail (p95) moves.
"""

from guardgate import load_profile
from guardgate.scheduler import SchedulerConfig, SimulatedBackend, run_fallback_study
from guardgate.service import default_lexicon

profile = load_profile("mistral7b-a100", jitter_cv=0.0)
lexicon = default_lexicon()
n = 200_000  # the acceptance suite runs 1e6; this is the quick look

cfg = SchedulerConfig()
backend = SimulatedBackend(
    profile, lexicon, cfg, corruption_short=1e-2, corruption_long=1e-3, seed=0
)
on = run_fallback_study(n, backend, cfg)
print(f"fallback ON : fallbacks={on.fallbacks} terminal={on.terminal_errors} "
      f"rate={on.terminal_error_rate:.1e} p50={on.p50_ms:.0f}ms p95={on.p95_ms:.0f}ms")

cfg_off = SchedulerConfig(max_fallback_attempts=0)
backend_off = SimulatedBackend(
    profile, lexicon, cfg_off, corruption_short=1e-2, corruption_long=1e-3, seed=0
)
off = run_fallback_study(n, backend_off, cfg_off)
print(f"fallback OFF: fallbacks={off.fallbacks} terminal={off.terminal_errors} "
      f"rate={off.terminal_error_rate:.1e} p50={off.p50_ms:.0f}ms p95={off.p95_ms:.0f}ms")

print(f"p50 shift: {abs(on.p50_ms - off.p50_ms) / off.p50_ms:.2%} (tail-only impact)")
print(f"p95 shift: {(on.p95_ms - off.p95_ms) / off.p95_ms:+.0%}")
