"""Capacity planning: label each batch-doubling interval memory- or
compute-bound from the throughput ratio, pick the operating batch size
(largest memory-bound entrant, else lowest latency), derive QPS, and size
replicas against the SLA.

Equivalent CLI:
    guardgate bench --profile mistral7b-a100 ... --out report.json
    guardgate plan --bench report.json --sla sla1 --seq 512 --decode 20
"""

from guardgate import BenchConfig, run_bench
from guardgate.planner import SLA_1, SLA_2, plan

report = run_bench(
    BenchConfig(
        profile="mistral7b-a100",
        batch_sizes=(1, 2, 4, 8, 16),
        seq_lens=(512, 1024),
        decode_lens=(20, 64),
        runs=10,
        warmup_runs=1,
        seed=0,
        jitter_cv=0.0,
    )
)

decision = plan(report, SLA_1, seq=512, decode_len=20)
for r in decision.regimes:
    print(f"  {r.batch_from:>2} -> {r.batch_to:<2}  x{r.throughput_ratio:.2f}/doubling  {r.label}")
print(
    f"selected batch {decision.selected_batch}: {decision.derived_qps:.2f} QPS, "
    f"p50 {decision.total_ms_p50:.0f} ms, replicas {decision.replicas}, "
    f"sla_met={decision.sla_met}"
)

# Longer sequences halve capacity; the same SLA needs more replicas.
longer = plan(report, SLA_1, seq=1024, decode_len=20)
print(
    f"seq 1024: batch {longer.selected_batch}, {longer.derived_qps:.2f} QPS, "
    f"replicas {longer.replicas}"
)

# The relaxed 3s SLA tolerates the long-decode cells easily on the A100...
relaxed = plan(report, SLA_2, seq=1024, decode_len=64)
print(f"sla2 @ seq 1024/decode 64: p50 {relaxed.total_ms_p50:.0f} ms, met={relaxed.sla_met}")

# ...while the L4 can't hold the tight one at long decode.
l4 = run_bench(
    BenchConfig(
        profile="mistral7b-l4", batch_sizes=(1, 2, 4, 8), seq_lens=(1024,),
        decode_lens=(64,), runs=5, warmup_runs=1, seed=0, jitter_cv=0.0,
    )
)
print("L4 @ seq 1024/decode 64 meets sla1:", plan(l4, SLA_1, 1024, 64).sla_met)
