"""The static-batch benchmark: sweep batch x seq x decode, ten measured
runs per cell after warmup, nearest-rank percentiles per phase.

Equivalent CLI:
    guardgate bench --profile mistral7b-a100 --batch-sizes 1,2,4,8,16,32 \
        --seq-lens 512,1024 --decode-lens 20,64 --runs 10 --warmup 1 \
        --seed 0 --out report.json --format json
"""

from guardgate import BenchConfig, run_bench

cfg = BenchConfig(
    profile="mistral7b-a100",
    batch_sizes=(1, 2, 4, 8, 16, 32),
    seq_lens=(512, 1024),
    decode_lens=(20, 64),
    runs=10,
    warmup_runs=1,
    seed=0,
)
report = run_bench(cfg)

print(f"{'batch':>5} {'seq':>5} {'dec':>4} {'prefill p50/p95':>17} {'decode p50/p95':>16} {'qps':>7}")
for c in report.cells:
    if c.oom:
        print(f"{c.batch:>5} {c.seq:>5} {c.decode_len:>4}   OOM")
        continue
    print(
        f"{c.batch:>5} {c.seq:>5} {c.decode_len:>4} "
        f"{c.prefill.latency_ms_p50:>7.0f}/{c.prefill.latency_ms_p95:<6.0f}ms "
        f"{c.decode.latency_ms_p50:>6.0f}/{c.decode.latency_ms_p95:<6.0f}ms "
        f"{c.derived_qps:>7.2f}"
    )

# The derived-QPS identity holds in every cell: qps * total_p50 == batch * 1000.
checks = [
    abs(c.derived_qps * c.total_ms_p50 - c.batch * 1000) < 1e-6
    for c in report.cells
    if not c.oom
]
print("derived-QPS identity holds in all cells:", all(checks))
