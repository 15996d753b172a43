"""Causal structure discovery with compressed sufficient statistics.

The package combines three layers:

* exact discrete probability tables and information measures (:mod:`ibcd.probtable`),
* mixed causal graphs with separation queries (:mod:`ibcd.graphs`),
* an information-bottleneck engine plus a selection procedure that decides
  whether a conditional distribution factors through a coarser statistic of
  its inputs (:mod:`ibcd.bottleneck`, :mod:`ibcd.selection`).

On top of those sit orientation rules that exploit discovered statistics
(:mod:`ibcd.orientation`), benchmark system generators (:mod:`ibcd.generators`,
:mod:`ibcd.booldsl`) and the benchmark/demo drivers (:mod:`ibcd.bench`,
:mod:`ibcd.cli`).
"""

from ibcd.probtable import (
    VariableSpec,
    ProbTable,
    SampleDataset,
    estimate_joint,
    kl_divergence,
    independence_test,
)
from ibcd.graphs import (
    EndpointMark,
    MixedGraph,
    StatisticNodeSpec,
    d_separated,
    augment,
    intervene,
    render,
)
from ibcd.bottleneck import (
    IBInput,
    SoftMapping,
    SufficientStatistic,
    scale_beta,
    ib_optimize,
    harden,
    statistic_partition_equal,
    apply_statistic,
)
from ibcd.selection import (
    SelectionThresholds,
    IBSSIQuery,
    StatisticVerdict,
    algorithm1,
    split_criteria,
    ibssi_sweep,
    input_escalation,
    local_criteria,
    consistency_score,
)
from ibcd.generators import (
    GlmSpec,
    SystemConfig,
    FAMILIES,
    glm_exact_table,
    dormant_identified_table,
    true_partition,
    true_graph,
    sample,
    generate_suite,
)
from ibcd.booldsl import (
    BooleanRule,
    BooleanSystem,
    parse_boolean_rule,
    boolean_config,
    builtin_boolean_configs,
)
from ibcd.orientation import (
    SepRecord,
    StatisticQuery,
    DiscoveryConfig,
    DiscoveryResult,
    find_adjacencies,
    ci_ss,
)
from ibcd.demos import DEMO_IDS, build_demo, run_discovery_demo
from ibcd.bench import (
    ExperimentPlan,
    ExperimentReport,
    run_tpfp,
    run_cardinality_curve,
    soundness_suite,
    mark_violations,
    report_emit,
)

__version__ = "0.1.0"

__all__ = [
    "VariableSpec",
    "ProbTable",
    "SampleDataset",
    "estimate_joint",
    "kl_divergence",
    "independence_test",
    "EndpointMark",
    "MixedGraph",
    "StatisticNodeSpec",
    "d_separated",
    "augment",
    "intervene",
    "render",
    "IBInput",
    "SoftMapping",
    "SufficientStatistic",
    "scale_beta",
    "ib_optimize",
    "harden",
    "statistic_partition_equal",
    "apply_statistic",
    "SelectionThresholds",
    "IBSSIQuery",
    "StatisticVerdict",
    "algorithm1",
    "split_criteria",
    "ibssi_sweep",
    "input_escalation",
    "local_criteria",
    "consistency_score",
    "GlmSpec",
    "SystemConfig",
    "FAMILIES",
    "glm_exact_table",
    "dormant_identified_table",
    "true_partition",
    "true_graph",
    "sample",
    "generate_suite",
    "BooleanRule",
    "BooleanSystem",
    "parse_boolean_rule",
    "boolean_config",
    "builtin_boolean_configs",
    "SepRecord",
    "StatisticQuery",
    "DiscoveryConfig",
    "DiscoveryResult",
    "find_adjacencies",
    "ci_ss",
    "DEMO_IDS",
    "build_demo",
    "run_discovery_demo",
    "ExperimentPlan",
    "ExperimentReport",
    "run_tpfp",
    "run_cardinality_curve",
    "soundness_suite",
    "mark_violations",
    "report_emit",
]
