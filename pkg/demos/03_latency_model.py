"""The calibrated latency model: prefill flat then linear in batch,
decode linear in length with a mild batch penalty.

With jitter off, the headline numbers for the 7B model on an A100 are
closed-form: 267 ms prefill and 303 ms decode at batch 8 / seq 512 /
decode 20 (570 ms total, ~14 QPS), 330 ms decode and ~970 tok/s at
batch 16, out-of-memory at 32.
"""

from guardgate import OutOfMemoryError, load_profile, simulate_batch

profile = load_profile("mistral7b-a100", jitter_cv=0.0)

print(f"{'batch':>5} {'prefill':>9} {'decode':>8} {'total':>8} {'qps':>7} {'dec tok/s':>10}")
for batch in (1, 2, 4, 8, 16):
    r = simulate_batch(profile, batch, 512, 20)
    qps = batch * 1000 / r.total_ms
    print(
        f"{batch:>5} {r.prefill_ms:>7.0f}ms {r.decode_ms:>6.0f}ms {r.total_ms:>6.0f}ms "
        f"{qps:>7.2f} {r.decode_throughput_tok_s:>10.0f}"
    )

try:
    simulate_batch(profile, 32, 512, 20)
except OutOfMemoryError as exc:
    print("batch 32:", exc)

# Sequence doubling doubles prefill; decode doesn't care about seq.
for seq in (512, 1024, 2048, 3072):
    r = simulate_batch(profile, 8, seq, 20)
    print(f"seq {seq:>4}: prefill {r.prefill_ms:>5.0f}ms  total {r.total_ms:>5.0f}ms")

# With jitter on, repeated runs spread; the seed pins them down.
noisy = profile.with_jitter(0.08)
draws = [simulate_batch(noisy, 8, 512, 20, seed=s).total_ms for s in range(5)]
print("jittered totals:", [f"{d:.0f}" for d in draws])
print("same seed twice:", simulate_batch(noisy, 8, 512, 20, seed=0).total_ms
      == simulate_batch(noisy, 8, 512, 20, seed=0).total_ms)
