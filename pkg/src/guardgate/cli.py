"""Unified command line: serve, loadtest, bench, plan, eval, codec."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bench import BenchConfig, read_report, run_bench, write_report
from .codec import decode_verdict, encode_verdict, parse_uncoded, render_uncoded
from .evaluation import (
    ATTACK_NONE,
    BiasAttackSpec,
    LexiconClient,
    ServiceClient,
    evaluate,
    load_attack_config,
    load_dataset_csv,
)
from .lexicon import Lexicon
from .loadgen import LoadTestConfig, TextMix, load_test
from .planner import BUILTIN_SLAS, plan
from .scheduler import SchedulerConfig
from .service import ServiceConfig, create_app, default_lexicon
from .simulator import load_profile


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config = ServiceConfig.load(args.config)
    if args.port is not None:
        config = ServiceConfig(**{**config.__dict__, "port": args.port})
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=config.port, log_level="info")
    return 0


def cmd_loadtest(args: argparse.Namespace) -> int:
    sla = BUILTIN_SLAS[args.sla] if args.sla else None
    profile = load_profile(args.profile)
    lexicon = Lexicon.load_csv(args.lexicon) if args.lexicon else default_lexicon()
    seq_range = sla.seq_range if sla and sla.seq_range else (500, 1000)
    cfg = LoadTestConfig(
        target_qps=args.qps,
        duration_s=args.duration,
        replicas=args.replicas,
        arrival=args.arrival,
        mix=TextMix(seq_range=seq_range),
        seed=args.seed,
    )
    report = load_test(
        cfg,
        profile,
        lexicon,
        SchedulerConfig(),
        sla=sla,
        corruption_short=args.corruption_short,
        corruption_long=args.corruption_long,
    )
    m = report.metrics
    print(f"replicas={args.replicas} profile={args.profile} arrivals={m.submissions}")
    print(
        f"qps={m.qps:.1f} p50={m.latency_ms_p50:.0f}ms p90={m.latency_ms_p90:.0f}ms "
        f"p95={m.latency_ms_p95:.0f}ms"
    )
    print(
        f"availability={m.availability:.6f} error_rate={m.error_rate:.2e} "
        f"fallback_rate={m.fallback_rate:.4f} rejections={m.rejections}"
    )
    for check in report.checks:
        print(f"  [{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")
    if report.passed is not None:
        print(f"SLA {report.sla}: {'PASS' if report.passed else 'FAIL'}")
        return 0 if report.passed else 1
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = BenchConfig(
        profile=args.profile,
        batch_sizes=_ints(args.batch_sizes),
        seq_lens=_ints(args.seq_lens),
        decode_lens=_ints(args.decode_lens),
        runs=args.runs,
        warmup_runs=args.warmup,
        seed=args.seed,
        jitter_cv=args.jitter_cv,
    )
    report = run_bench(cfg)
    if args.out:
        write_report(report, args.out, format=args.format)
        print(f"wrote {len(report.cells)} cells to {args.out}")
    else:
        print(f"{'batch':>5} {'seq':>5} {'dec':>4} {'prefill p50':>12} {'decode p50':>11} "
              f"{'total p50':>10} {'qps':>7}")
        for c in report.cells:
            if c.oom:
                print(f"{c.batch:>5} {c.seq:>5} {c.decode_len:>4} {'OOM':>12}")
                continue
            print(
                f"{c.batch:>5} {c.seq:>5} {c.decode_len:>4} "
                f"{c.prefill.latency_ms_p50:>10.1f}ms {c.decode.latency_ms_p50:>9.1f}ms "
                f"{c.total_ms_p50:>8.1f}ms {c.derived_qps:>7.2f}"
            )
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    report = read_report(args.bench)
    sla = BUILTIN_SLAS[args.sla]
    decision = plan(report, sla, seq=args.seq, decode_len=args.decode, theta=args.theta)
    print(f"profile={decision.profile} seq={decision.seq} decode={decision.decode_len} sla={decision.sla}")
    print(f"{'interval':>12} {'ratio/doubling':>15} {'regime':>15}")
    for r in decision.regimes:
        print(f"{r.batch_from:>5}->{r.batch_to:<5} {r.throughput_ratio:>15.3f} {r.label:>15}")
    print(
        f"selected batch {decision.selected_batch}: p50 {decision.total_ms_p50:.0f} ms, "
        f"{decision.derived_qps:.2f} QPS"
        + (f", replicas {decision.replicas}" if decision.replicas else "")
    )
    print(f"sla_met={decision.sla_met}")
    print(decision.rationale)
    if args.out:
        Path(args.out).write_text(decision.to_json(), encoding="utf-8")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = load_dataset_csv(args.dataset)
    if args.client == "lexicon":
        lexicon = Lexicon.load_csv(args.lexicon) if args.lexicon else default_lexicon()
        client = LexiconClient(lexicon)
    elif args.client.startswith("service:"):
        client = ServiceClient(args.client.split(":", 1)[1])
    else:
        print(f"unknown client {args.client!r}; use lexicon or service:URL", file=sys.stderr)
        return 2
    if args.attack == ATTACK_NONE:
        attack = None
    elif args.attack_config:
        attack = load_attack_config(args.attack_config, kind=args.attack)
    else:
        attack = BiasAttackSpec(kind=args.attack)
    result = evaluate(dataset, client, attack=attack)
    m = result.metrics
    print("   AC    PR    RE    F1   AUC  (percent)")
    print(m.as_percent_row())
    defaulted = sum(1 for s in result.samples if s.defaulted)
    print(f"samples={len(result.samples)} defaulted_to_inappropriate={defaulted}")
    if args.out:
        payload = {
            "metrics": m.__dict__,
            "samples": [s.__dict__ for s in result.samples],
        }
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_codec(args: argparse.Namespace) -> int:
    text = args.text if args.text is not None else sys.stdin.read()
    if args.action == "encode":
        verdict = parse_uncoded(text)
        print(encode_verdict(verdict).text)
    else:
        verdict = decode_verdict(text.strip())
        print(render_uncoded(verdict))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guardgate", description=__doc__)
    parser.add_argument("--version", action="version", version=f"guardgate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the classification service")
    p.add_argument("--config", default=None, help="JSON config file (or GG_CONFIG)")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("loadtest", help="open-loop load test against modeled replicas")
    p.add_argument("--qps", type=float, required=True)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--sla", choices=sorted(BUILTIN_SLAS), default=None)
    p.add_argument("--profile", default="mistral7b-a100")
    p.add_argument("--replicas", type=int, default=4)
    p.add_argument("--arrival", choices=("poisson", "constant"), default="poisson")
    p.add_argument("--lexicon", default=None)
    p.add_argument("--corruption-short", type=float, default=0.0)
    p.add_argument("--corruption-long", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_loadtest)

    p = sub.add_parser("bench", help="static-batch benchmark sweep")
    p.add_argument("--profile", required=True)
    p.add_argument("--batch-sizes", default="1,2,4,8,16,32")
    p.add_argument("--seq-lens", default="512,1024,2048,3072")
    p.add_argument("--decode-lens", default="20,64")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter-cv", type=float, default=None, help="override profile jitter")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plan", help="regime analysis and SLA/replica planning")
    p.add_argument("--bench", required=True, help="bench report file (json or csv)")
    p.add_argument("--sla", choices=sorted(BUILTIN_SLAS), required=True)
    p.add_argument("--seq", type=int, required=True)
    p.add_argument("--decode", type=int, required=True)
    p.add_argument("--theta", type=float, default=1.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="toxicity evaluation harness")
    p.add_argument("--dataset", required=True, help="CSV with id,text,label")
    p.add_argument("--client", default="lexicon", help="lexicon or service:URL")
    p.add_argument("--lexicon", default=None)
    p.add_argument("--attack", choices=("none", "gender", "race"), default="none")
    p.add_argument("--attack-config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("codec", help="encode/decode verdict wire formats")
    p.add_argument("action", choices=("encode", "decode"))
    p.add_argument("text", nargs="?", default=None, help="input text (stdin when omitted)")
    p.set_defaults(func=cmd_codec)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
