"""Appropriateness guardrail service at desk scale.

Coded-verdict protocol, chunked text handling, SLA-aware batched serving
with long-mode fallback, a calibrated inference-latency simulator, a
static-batch benchmark toolkit, a roofline-style capacity planner, and a
toxicity evaluation harness with counterfactual bias attacks.
"""

from .codec import (
    ATTRIBUTE_NAMES,
    ATTRIBUTES,
    DISPLAY_NAMES,
    AttributeScores,
    CodedVerdict,
    ParseError,
    Verdict,
    decode_verdict,
    encode_verdict,
    parse_uncoded,
    render_uncoded,
)
from .chunking import Chunk, TokenizerPolicy, aggregate_verdicts, count_tokens, split_chunks
from .lexicon import Lexicon, LexiconEntry, ScoredText, score_text
from .simulator import (
    DeploymentProfile,
    OutOfMemoryError,
    SimResult,
    decode_latency,
    generate_output,
    list_profiles,
    load_profile,
    prefill_latency,
    prefill_latency_mixed,
    simulate_batch,
)
from .scheduler import (
    ClassifyOutcome,
    ClassifyRequest,
    Scheduler,
    SchedulerConfig,
    SimulatedBackend,
    classify_with_fallback,
    run_fallback_study,
)
from .bench import BenchConfig, BenchReport, percentile, read_report, run_bench, write_report
from .planner import (
    SLA_1,
    SLA_2,
    PlanDecision,
    SlaSpec,
    classify_regimes,
    derived_qps,
    plan,
    select_batch,
)
from .evaluation import (
    BiasAttackSpec,
    EvalMetrics,
    LexiconClient,
    Sample,
    ServiceClient,
    apply_bias_attack,
    auc_roc,
    confusion_metrics,
    evaluate,
    extract_label,
)
from .loadgen import LoadTestConfig, ServiceMetrics, TextMix, load_test
from .service import ServiceConfig, create_app, default_lexicon

__version__ = "0.1.0"
