"""Experiment harness: acceptance-rate benchmarks and soundness sweeps.

Three study types, all driven by the generator families:

* :func:`run_tpfp` replays the acceptance protocol over whole config
  grids: per config, sweep every trade-off strength over the first input
  pool, escalate to the second pool when nothing is accepted, then judge
  each acceptance against the exact distribution.  Rates come out
  stratified by the configs' normalized dependence level.
* :func:`run_cardinality_curve` profiles the optimizer alone: recovered
  statistic cardinality and criteria pass rate as the cardinality cap
  slides over its range.
* :func:`soundness_suite` runs the discovery pipeline on exact tables of
  every family (plus the built-in demo systems) and collects any endpoint
  mark or noncollider claim contradicting the generating graph.

Reports are plain dataclasses with deterministic file emission
(:func:`report_emit`); wall-clock timings go to a separate sidecar file so
identical plans yield byte-identical report files regardless of thread
count.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ibcd.bottleneck import (
    BudgetExceededError,
    IBInput,
    harden,
    ib_optimize,
    scale_beta,
    statistic_partition_equal,
)
from ibcd.demos import DEMO_IDS, build_demo
from ibcd.generators import (
    FAMILIES,
    SystemConfig,
    dormant_identified_table,
    generate_suite,
    sample,
)
from ibcd.graphs import EndpointMark, MixedGraph
from ibcd.orientation import DiscoveryConfig, StatisticQuery, ci_ss
from ibcd.probtable import ProbTable, SampleDataset, estimate_joint
from ibcd.selection import (
    IBSSIQuery,
    SelectionThresholds,
    StatisticVerdict,
    algorithm1,
    consistency_score,
    split_criteria,
)

__all__ = [
    "SCHEMA_VERSION",
    "BETA_SET_WIDE",
    "BETA_SET_NARROW",
    "ExperimentPlan",
    "RateRow",
    "ExperimentReport",
    "CurveRow",
    "MarkViolation",
    "run_tpfp",
    "run_cardinality_curve",
    "soundness_suite",
    "mark_violations",
    "report_emit",
    "read_report_csv",
    "write_curve_csv",
    "validate_report_payload",
]

SCHEMA_VERSION = 1

# the two stock trade-off grids; reports label them "25-100" and "50-100"
BETA_SET_WIDE = (25.0, 50.0, 75.0, 100.0)
BETA_SET_NARROW = (50.0, 75.0, 100.0)

_STRATA = ("low", "medium", "high")
_STRATUM_ORDER = {"all": 0, "low": 1, "medium": 2, "high": 3}


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else str(float(v))


def _beta_label(bset: Sequence[float]) -> str:
    lo, hi = min(bset), max(bset)
    if lo == hi:
        return _fmt_num(lo)
    return f"{_fmt_num(lo)}-{_fmt_num(hi)}"


@dataclass
class ExperimentPlan:
    """Everything one acceptance-rate run depends on.

    ``n_rows`` entries are sample sizes; the entry 0 means "use the exact
    analysis table for both splits" and is how the infinite-data limit is
    run.  Desk-scale defaults keep a full run in the minutes range; the
    grids the original studies used are behind :meth:`paper_scale`.
    """

    families: tuple[str, ...] = ("additive", "saturated")
    n_rows: tuple[int, ...] = (2500, 5000, 10000, 20000)
    beta_sets: tuple[tuple[float, ...], ...] = (BETA_SET_WIDE, BETA_SET_NARROW)
    thresholds: SelectionThresholds = field(default_factory=SelectionThresholds)
    strata: tuple[str, ...] = _STRATA
    draws: int = 10
    trial_counts: tuple[int, ...] = (8,)
    sigmas: tuple[float, ...] = (1.0,)
    p_values: tuple[float, ...] = (0.5,)
    subform: str | None = None
    repetitions: int = 1
    restarts: int = 200
    require_initial_drop: bool = True
    seed: int = 0
    threads: int = 1
    max_seconds_per_ib: float | None = None
    out: str | None = None

    def __post_init__(self) -> None:
        self.families = tuple(self.families)
        self.n_rows = tuple(int(n) for n in self.n_rows)
        self.beta_sets = tuple(tuple(float(b) for b in s) for s in self.beta_sets)
        self.strata = tuple(self.strata)
        self.trial_counts = tuple(int(n) for n in self.trial_counts)
        self.sigmas = tuple(float(s) for s in self.sigmas)
        self.p_values = tuple(float(p) for p in self.p_values)
        if not self.families:
            raise ValueError("plan needs at least one family")
        if len(set(self.families)) != len(self.families):
            raise ValueError("duplicate families would double-count configs")
        for fam in self.families:
            if fam not in FAMILIES:
                raise ValueError(f"unknown family {fam!r}")
        if not self.n_rows:
            raise ValueError("plan needs a nonempty sample-size grid")
        for n in self.n_rows:
            if n < 0 or n == 1:
                raise ValueError("sample sizes must be 0 (exact) or at least 2")
        if not self.beta_sets or any(not s for s in self.beta_sets):
            raise ValueError("plan needs nonempty trade-off sets")
        if len({_beta_label(s) for s in self.beta_sets}) != len(self.beta_sets):
            raise ValueError("trade-off sets must have distinct labels")
        for s in self.beta_sets:
            if any(b <= 0 for b in s):
                raise ValueError("trade-off strengths must be positive")
        unknown = set(self.strata) - set(_STRATA)
        if unknown:
            raise ValueError(f"unknown strata {sorted(unknown)}")
        if self.draws < 1 or self.repetitions < 1 or self.restarts < 1:
            raise ValueError("draws, repetitions and restarts must be at least 1")
        if not self.trial_counts or not self.sigmas or not self.p_values:
            raise ValueError("generator grids must be nonempty")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @classmethod
    def paper_scale(cls, **overrides) -> "ExperimentPlan":
        """The full grids: 40 draws crossed with 4 levels x 9 base rates."""
        base = dict(
            families=(
                "additive",
                "additive_aux",
                "additive_child",
                "saturated",
                "additive_two",
                "products",
            ),
            draws=40,
            trial_counts=(4, 8, 16, 64),
            sigmas=(0.5, 1.0, 2.0, 3.0),
            p_values=(0.3, 0.5, 0.7),
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class RateRow:
    """One aggregation cell of an acceptance-rate run."""

    family: str
    n_rows: int
    beta_set: str
    stratum: str
    rep: int
    total: int
    tp_rate: float
    fp_rate: float
    tn_rate: float
    selection_ratio: float
    identification_ratio: float
    mean_cardinality: float | None
    budget_skipped: int


@dataclass
class ExperimentReport:
    """Aggregated rates plus run bookkeeping.

    ``timing`` holds wall-clock measurements and is deliberately not part
    of :meth:`to_payload`, so emitted report files are reproducible.
    """

    plan: dict
    rows: list[RateRow]
    budget: list[dict]
    timing: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_payload(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "plan": self.plan,
            "rows": [asdict(r) for r in self.rows],
            "budget": [dict(b) for b in self.budget],
        }


def _plan_payload(plan: ExperimentPlan) -> dict:
    # threads and the output path steer execution, not results; leaving
    # them out keeps reports byte-identical across worker counts
    return {
        "families": list(plan.families),
        "n_rows": list(plan.n_rows),
        "beta_sets": [list(s) for s in plan.beta_sets],
        "thresholds": asdict(plan.thresholds),
        "strata": list(plan.strata),
        "draws": plan.draws,
        "trial_counts": list(plan.trial_counts),
        "sigmas": list(plan.sigmas),
        "p_values": list(plan.p_values),
        "subform": plan.subform,
        "repetitions": plan.repetitions,
        "restarts": plan.restarts,
        "require_initial_drop": plan.require_initial_drop,
        "seed": plan.seed,
        "max_seconds_per_ib": plan.max_seconds_per_ib,
    }


# ---------------------------------------------------------------------------
# acceptance-rate protocol


@dataclass(frozen=True)
class _SetOutcome:
    outcome: str  # "tp" | "fp" | "tn"
    attempted: int
    accepted: int
    cards: tuple[int, ...]
    identified: bool


@dataclass(frozen=True)
class _ConfigOutcome:
    family: str
    n_rows: int
    rep: int
    index: int
    stratum: str
    sets: dict[str, _SetOutcome]
    budget_exceeded: bool
    seconds: float


def _train_test(config: SystemConfig, n_rows: int, seed: int) -> tuple[ProbTable, ProbTable]:
    """Half/half split of a fresh draw; n_rows=0 means the exact table twice.

    Dormant draws are observational; both halves go through the
    intervention-identification step (dropping cells the plug-in
    conditional cannot support) before any statistic is fit.
    """
    if n_rows == 0:
        exact = config.analysis_table()
        return exact, exact
    data = sample(config.spec, n_rows, seed)
    half = len(data) // 2
    first = SampleDataset(data.variables, data.rows[:half])
    second = SampleDataset(data.variables, data.rows[half:])
    if config.spec.family == "dormant":
        return (
            dormant_identified_table(estimate_joint(first), 1, on_empty="drop"),
            dormant_identified_table(estimate_joint(second), 1, on_empty="drop"),
        )
    return estimate_joint(first), estimate_joint(second)


def _evaluate_config(
    config: SystemConfig, n_rows: int, rep: int, plan: ExperimentPlan
) -> _ConfigOutcome:
    """Full protocol for one config at one sample size.

    Every trade-off strength in the union of the plan's sets runs once per
    input pool actually reached; each set is then classified from the
    shared verdicts.  A set escalates to the larger pool only when none of
    its strengths accepted on the smaller one.
    """
    t0 = time.perf_counter()
    stratum = config.stratum()
    ss = np.random.SeedSequence([plan.seed, rep, config.index, n_rows])
    children = ss.spawn(3)
    sample_seed = int(children[0].generate_state(1)[0])
    pool_seeds = [int(c.generate_state(1)[0]) for c in children[1:]]

    def done(sets: dict[str, _SetOutcome], exceeded: bool) -> _ConfigOutcome:
        return _ConfigOutcome(
            family=config.spec.family,
            n_rows=n_rows,
            rep=rep,
            index=config.index,
            stratum=stratum,
            sets=sets,
            budget_exceeded=exceeded,
            seconds=time.perf_counter() - t0,
        )

    try:
        train, test = _train_test(config, n_rows, sample_seed)
        pools = config.input_pools()
        exact = config.analysis_table()
        union = sorted({bp for s in plan.beta_sets for bp in s})
        verdicts: list[dict[float, StatisticVerdict]] = []

        def pool_verdicts(i: int) -> dict[float, StatisticVerdict]:
            while len(verdicts) <= i:
                j = len(verdicts)
                query = IBSSIQuery(
                    x="X",
                    z="Z",
                    inputs=pools[j],
                    train=train,
                    test=test,
                    thresholds=plan.thresholds,
                    restarts=plan.restarts,
                    require_initial_drop=plan.require_initial_drop,
                )
                verdicts.append(
                    {
                        bp: algorithm1(
                            query,
                            bp,
                            seed=pool_seeds[j],
                            max_seconds_per_ib=plan.max_seconds_per_ib,
                        )
                        for bp in union
                    }
                )
            return verdicts[i]

        has_stat = any(config.true_partition(p) is not None for p in pools)
        sets: dict[str, _SetOutcome] = {}
        for bset in plan.beta_sets:
            label = _beta_label(bset)
            used: int | None = None
            accepted: list[StatisticVerdict] = []
            for i in range(len(pools)):
                acc = []
                for bp in bset:
                    v = pool_verdicts(i)[bp]
                    if v.accepted:
                        acc.append(v)
                if acc:
                    used, accepted = i, acc
                    break
            pools_tried = len(pools) if used is None else used + 1
            attempted = len(bset) * pools_tried
            if not accepted:
                # a system with no statistic anywhere is the one case in
                # which rejecting everything is the correct retrieval
                sets[label] = _SetOutcome("tn", attempted, 0, (), identified=not has_stat)
                continue
            if not has_stat:
                outcome = "fp"
            else:
                consistent = all(
                    consistency_score(v.statistic, exact, "X", "Z").consistent
                    for v in accepted
                )
                outcome = "tp" if consistent else "fp"
            truth = config.true_partition(pools[used])
            identified = truth is not None and any(
                statistic_partition_equal(v.statistic, truth) for v in accepted
            )
            cards = tuple(v.statistic.cardinality for v in accepted)
            sets[label] = _SetOutcome(outcome, attempted, len(accepted), cards, identified)
        return done(sets, False)
    except BudgetExceededError:
        return done({}, True)


def _map_jobs(fn: Callable, jobs: list, threads: int) -> list:
    if threads <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def _aggregate(outcomes: list[_ConfigOutcome], plan: ExperimentPlan) -> list[RateRow]:
    labels = [_beta_label(s) for s in plan.beta_sets]
    buckets: dict[tuple, list[_ConfigOutcome]] = {}
    for oc in outcomes:
        strata = ["all"]
        if oc.stratum in plan.strata:
            strata.append(oc.stratum)
        for label in labels:
            for stratum in strata:
                key = (oc.family, oc.n_rows, label, stratum, oc.rep)
                buckets.setdefault(key, []).append(oc)

    def sort_key(key: tuple) -> tuple:
        family, n, label, stratum, rep = key
        return (family, n, label, _STRATUM_ORDER.get(stratum, 9), stratum, rep)

    rows: list[RateRow] = []
    for key in sorted(buckets, key=sort_key):
        family, n, label, stratum, rep = key
        group = buckets[key]
        live = [oc for oc in group if not oc.budget_exceeded]
        skipped = len(group) - len(live)
        total = len(live)
        if total == 0:
            rows.append(
                RateRow(family, n, label, stratum, rep, 0, 0.0, 0.0, 0.0, 0.0, 0.0, None, skipped)
            )
            continue
        picks = [oc.sets[label] for oc in live]
        attempted = sum(p.attempted for p in picks)
        accepted = sum(p.accepted for p in picks)
        cards = [c for p in picks for c in p.cards]
        rows.append(
            RateRow(
                family=family,
                n_rows=n,
                beta_set=label,
                stratum=stratum,
                rep=rep,
                total=total,
                tp_rate=sum(1 for p in picks if p.outcome == "tp") / total,
                fp_rate=sum(1 for p in picks if p.outcome == "fp") / total,
                tn_rate=sum(1 for p in picks if p.outcome == "tn") / total,
                selection_ratio=accepted / attempted if attempted else 0.0,
                identification_ratio=sum(1 for p in picks if p.identified) / total,
                mean_cardinality=sum(cards) / len(cards) if cards else None,
                budget_skipped=skipped,
            )
        )
    return rows


def run_tpfp(plan: ExperimentPlan) -> ExperimentReport:
    """Acceptance, consistency and identification rates over a plan's grid.

    Per config and sample size: the union of the plan's trade-off sets is
    swept on the first input pool, the protocol escalates to the second
    pool for any set with zero acceptances, and every acceptance is judged
    against the exact analysis table.  A config is a true positive for a
    set when it accepted somewhere and every accepted statistic screens
    exactly; any inconsistent acceptance makes it a false positive, and
    acceptance on a family with no statistic at all is a false positive by
    definition.  Never accepting is the true-negative outcome.

    Configs whose optimizer runs blow the per-run wall-clock budget are
    dropped from every denominator and listed in the report's budget
    section.
    """
    t0 = time.perf_counter()
    suites = {
        family: generate_suite(
            family,
            count=plan.draws,
            n_set=plan.trial_counts,
            sigma_set=plan.sigmas,
            p_set=plan.p_values,
            seed=plan.seed,
            subform=plan.subform if family == "roundexp" else None,
        )
        for family in plan.families
    }
    jobs = [
        (config, n, rep)
        for family in plan.families
        for config in suites[family]
        for n in plan.n_rows
        for rep in range(plan.repetitions)
    ]
    outcomes = _map_jobs(lambda job: _evaluate_config(job[0], job[1], job[2], plan), jobs, plan.threads)
    rows = _aggregate(outcomes, plan)
    budget = [
        {"family": oc.family, "n_rows": oc.n_rows, "rep": oc.rep, "config_index": oc.index}
        for oc in outcomes
        if oc.budget_exceeded
    ]
    budget.sort(key=lambda b: (b["family"], b["n_rows"], b["rep"], b["config_index"]))
    per_family: dict[str, float] = {}
    for oc in outcomes:
        per_family[oc.family] = per_family.get(oc.family, 0.0) + oc.seconds
    timing = {
        "total_seconds": time.perf_counter() - t0,
        "config_seconds": {k: per_family[k] for k in sorted(per_family)},
        "jobs": len(jobs),
    }
    return ExperimentReport(plan=_plan_payload(plan), rows=rows, budget=budget, timing=timing)


# ---------------------------------------------------------------------------
# cardinality curve


@dataclass(frozen=True)
class CurveRow:
    """Mean recovered cardinality and criteria pass rate at one cap."""

    beta_prime: float
    max_cardinality: int
    mean_cardinality: float
    selection_ratio: float
    runs: int


def run_cardinality_curve(
    family: str,
    inputs: Sequence[str],
    beta_primes: Sequence[float],
    n_rows: int,
    *,
    draws: int = 10,
    trial_counts: Sequence[int] = (8,),
    sigmas: Sequence[float] = (1.0,),
    p_values: Sequence[float] = (0.5,),
    subform: str | None = None,
    thresholds: SelectionThresholds | None = None,
    restarts: int = 200,
    seed: int = 0,
    threads: int = 1,
    max_seconds_per_ib: float | None = None,
    caps: Sequence[int] | None = None,
) -> list[CurveRow]:
    """Sweep the cardinality cap and record what the optimizer settles on.

    One optimizer run per (config, trade-off strength, cap); the mean
    cardinality averages over all runs at a cell while the selection ratio
    counts the fraction whose hardened statistic passes the held-out
    criteria.  Caps default to every value from 2 up to the joint input
    state count.
    """
    inputs = tuple(inputs)
    if "X" not in inputs:
        raise ValueError("the input set must contain the pair variable X")
    beta_primes = tuple(float(b) for b in beta_primes)
    if not beta_primes:
        raise ValueError("need at least one trade-off strength")
    th = thresholds or SelectionThresholds()
    suite = generate_suite(
        family,
        count=draws,
        n_set=tuple(trial_counts),
        sigma_set=tuple(sigmas),
        p_set=tuple(p_values),
        seed=seed,
        subform=subform if family == "roundexp" else None,
    )

    def eval_config(config: SystemConfig) -> dict[tuple[float, int], tuple[int, bool]]:
        ss = np.random.SeedSequence([seed, config.index, n_rows])
        sample_seed = int(ss.generate_state(1)[0])
        train, test = _train_test(config, n_rows, sample_seed)
        names = [*inputs, "Z"]
        train_m = train.marginal(names)
        test_m = test.marginal(names)
        n_states = int(np.prod([train_m.cardinality(n) for n in inputs]))
        cap_list = list(caps) if caps is not None else list(range(2, n_states + 1))
        out: dict[tuple[float, int], tuple[int, bool]] = {}
        for bp in beta_primes:
            try:
                beta = scale_beta(train_m, bp, target="Z")
            except ValueError:
                continue  # a no-information draw cannot anchor the trade-off
            for cap in cap_list:
                if not 2 <= cap <= n_states:
                    raise ValueError(f"cap {cap} outside 2..{n_states}")
                run_seed = np.random.SeedSequence(
                    [seed, config.index, int(round(bp * 1000)), cap]
                )
                mapping = ib_optimize(
                    IBInput(
                        joint=train_m,
                        beta=beta,
                        max_cardinality=cap,
                        target="Z",
                        restarts=restarts,
                    ),
                    seed=int(run_seed.generate_state(1)[0]),
                    max_seconds=max_seconds_per_ib,
                )
                stat = harden(mapping)
                ok, _ = split_criteria(test_m, stat, "X", "Z", th)
                out[(bp, cap)] = (stat.cardinality, ok)
        return out

    results = _map_jobs(eval_config, list(suite), threads)
    cells: dict[tuple[float, int], list[tuple[int, bool]]] = {}
    for res in results:
        for key, value in res.items():
            cells.setdefault(key, []).append(value)
    rows = []
    for (bp, cap) in sorted(cells):
        entries = cells[(bp, cap)]
        rows.append(
            CurveRow(
                beta_prime=bp,
                max_cardinality=cap,
                mean_cardinality=sum(c for c, _ in entries) / len(entries),
                selection_ratio=sum(1 for _, ok in entries if ok) / len(entries),
                runs=len(entries),
            )
        )
    return rows


def write_curve_csv(rows: Sequence[CurveRow], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta_prime", "max_cardinality", "mean_cardinality", "selection_ratio", "runs"])
        for r in rows:
            writer.writerow([r.beta_prime, r.max_cardinality, r.mean_cardinality, r.selection_ratio, r.runs])
    return path


# ---------------------------------------------------------------------------
# soundness


@dataclass(frozen=True)
class MarkViolation:
    """One discovered mark that contradicts the generating graph."""

    kind: str  # "arrowhead" | "tail" | "noncollider"
    at: str | None
    other: str | None
    triple: tuple[str, str, str] | None
    detail: str


def mark_violations(
    found: MixedGraph, truth: MixedGraph, selection: Iterable[str] = ()
) -> list[MarkViolation]:
    """Check every endpoint mark and noncollider claim against ancestry.

    An arrowhead at an endpoint asserts the endpoint is not an ancestor of
    the other end (or of any selection variable); a tail asserts it is; a
    noncollider mark asserts the middle node is an ancestor of an end or a
    selection variable.  Circles assert nothing.
    """
    sel = set(selection)
    for node in found.nodes:
        if not truth.has_node(node):
            raise ValueError(f"node {node!r} missing from the reference graph")
    for node in sel:
        if not truth.has_node(node):
            raise ValueError(f"selection node {node!r} missing from the reference graph")

    def ancestral(end: str, targets: set[str]) -> bool:
        return any(end in truth.ancestors(t) for t in targets | sel)

    out: list[MarkViolation] = []
    for a, b in sorted(found.edges()):
        for end, other in ((a, b), (b, a)):
            mark = found.mark_at(end, other)
            if mark is EndpointMark.ARROW and ancestral(end, {other}):
                out.append(
                    MarkViolation(
                        "arrowhead",
                        end,
                        other,
                        None,
                        f"arrowhead at {end} on edge to {other}, but {end} is ancestral",
                    )
                )
            elif mark is EndpointMark.TAIL and not ancestral(end, {other}):
                out.append(
                    MarkViolation(
                        "tail",
                        end,
                        other,
                        None,
                        f"tail at {end} on edge to {other}, but {end} is not ancestral",
                    )
                )
    for x, y, z in sorted(found.noncolliders()):
        if not ancestral(y, {x, z}):
            out.append(
                MarkViolation(
                    "noncollider",
                    y,
                    None,
                    (x, y, z),
                    f"noncollider at {y} between {x} and {z}, but {y} is not ancestral",
                )
            )
    return out


def _family_queries(config: SystemConfig) -> list[StatisticQuery]:
    """Statistic attempts worth trying on a family's exact table.

    Queries on triples that turn out nonadjacent are skipped by the
    pipeline, so these only need to be plausible, not guaranteed to fire.
    """
    pools = config.input_pools()
    family = config.spec.family
    if family == "selection":
        return [StatisticQuery(x="X", y="V1", z="Z", inputs=pools[0])]
    if family == "dormant":
        # keep the query on the small pool; the wide pool's input space is
        # dominated by the 17-state count variable
        return [StatisticQuery(x="X", y="V2", z="Z", inputs=pools[0])]
    if family == "additive_child":
        # ask the middle-node-inside form: it withholds the claim when a
        # weak draw lets the reduced pool screen numerically, where the
        # collider form would mark the child unsoundly
        return [StatisticQuery(x="X", y="Y", z="Z", inputs=pools[1])]
    third = pools[1][-1]
    return [
        StatisticQuery(x="X", y=third, z="Z", inputs=pools[0]),
        StatisticQuery(x="X", y="V1", z="Z", inputs=pools[1]),
    ]


def soundness_suite(
    seed: int = 0,
    draws: int = 2,
    cfg: DiscoveryConfig | None = None,
    families: Sequence[str] = FAMILIES,
    include_demos: bool = True,
) -> dict[str, list[MarkViolation]]:
    """Run discovery on exact tables and collect contradicted marks.

    Returns a mapping from run tag to that run's violations; an all-empty
    mapping is the expected outcome.  Demo systems run with statistics off
    and on; generated configs run the full pipeline with family-specific
    statistic queries.
    """
    cfg = cfg or DiscoveryConfig()
    out: dict[str, list[MarkViolation]] = {}
    if include_demos:
        for system_id in DEMO_IDS:
            demo = build_demo(system_id)
            off = ci_ss(demo.table, replace(cfg, statistics_enabled=False))
            on = ci_ss(demo.table, replace(cfg, statistics_enabled=True), queries=demo.queries)
            out[f"demo:{system_id}:off"] = mark_violations(off.graph, demo.truth, demo.selection)
            out[f"demo:{system_id}:on"] = mark_violations(on.graph, demo.truth, demo.selection)
    for family in families:
        configs = generate_suite(
            family,
            count=draws,
            n_set=(4,),
            p_set=(0.5,),
            seed=seed,
            subform="additive" if family == "roundexp" else None,
        )
        for k, config in enumerate(configs):
            table = config.exact_table()
            # weakly linked side variables (selection's V2, dormant's V3)
            # can sit at the independence floor and read as spuriously
            # independent, seeding unfounded collider claims; judge the
            # core variables
            if family == "selection":
                table = table.marginal(["X", "V1", "Z"])
            elif family == "dormant":
                table = table.marginal(["X", "V1", "V2", "Z"])
            result = ci_ss(table, cfg, queries=_family_queries(config))
            out[f"{family}:{k}"] = mark_violations(
                result.graph, config.true_graph(), config.selection_nodes()
            )
    return out


# ---------------------------------------------------------------------------
# report files


_CSV_HEADER = ("family", "n_rows", "beta_set", "stratum", "rep", "metric", "value")
_METRICS = (
    "total",
    "tp_rate",
    "fp_rate",
    "tn_rate",
    "selection_ratio",
    "identification_ratio",
    "mean_cardinality",
    "budget_skipped",
)
_RATE_METRICS = ("tp_rate", "fp_rate", "tn_rate", "selection_ratio", "identification_ratio")


def report_emit(
    report: ExperimentReport,
    out_dir: str | Path,
    formats: Sequence[str] = ("json", "csv"),
) -> list[Path]:
    """Write the report files; returns the paths written.

    ``report.json`` carries the full payload, ``report.csv`` one row per
    (cell, metric), and ``plot_tpfp.csv`` the rep-averaged rates against
    sample size with one series per stratum.  Timings always go to
    ``report_timing.json``, kept out of the deterministic set.
    """
    for fmt in formats:
        if fmt not in ("json", "csv"):
            raise ValueError(f"unknown report format {fmt!r}")
    payload = report.to_payload()
    validate_report_payload(payload)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        path = out / "report.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        written.append(path)
    if "csv" in formats:
        path = out / "report.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for row in report.rows:
                for metric in _METRICS:
                    value = getattr(row, metric)
                    writer.writerow(
                        [
                            row.family,
                            row.n_rows,
                            row.beta_set,
                            row.stratum,
                            row.rep,
                            metric,
                            "" if value is None else value,
                        ]
                    )
        written.append(path)
        written.append(_write_plot_csv(report.rows, out / "plot_tpfp.csv"))
    timing_path = out / "report_timing.json"
    timing_path.write_text(json.dumps(report.timing, indent=2, sort_keys=True) + "\n")
    written.append(timing_path)
    return written


def _write_plot_csv(rows: Sequence[RateRow], path: Path) -> Path:
    groups: dict[tuple, list[RateRow]] = {}
    for row in rows:
        groups.setdefault((row.family, row.beta_set, row.stratum, row.n_rows), []).append(row)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "beta_set", "stratum", "n_rows", "tp_rate", "fp_rate", "tn_rate"])
        for key in sorted(groups, key=lambda k: (k[0], k[1], _STRATUM_ORDER.get(k[2], 9), k[2], k[3])):
            cell = groups[key]
            family, beta_set, stratum, n = key
            writer.writerow(
                [
                    family,
                    beta_set,
                    stratum,
                    n,
                    sum(r.tp_rate for r in cell) / len(cell),
                    sum(r.fp_rate for r in cell) / len(cell),
                    sum(r.tn_rate for r in cell) / len(cell),
                ]
            )
    return path


def read_report_csv(path: str | Path) -> list[RateRow]:
    """Rebuild rate rows from ``report.csv``; exact round trip."""
    cells: dict[tuple, dict[str, str]] = {}
    order: list[tuple] = []
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != _CSV_HEADER:
            raise ValueError(f"unexpected report header {header}")
        for rec in reader:
            if not rec:
                continue
            family, n_rows, beta_set, stratum, rep, metric, value = rec
            key = (family, int(n_rows), beta_set, stratum, int(rep))
            if key not in cells:
                cells[key] = {}
                order.append(key)
            cells[key][metric] = value
    rows = []
    for key in order:
        family, n_rows, beta_set, stratum, rep = key
        m = cells[key]
        missing = [name for name in _METRICS if name not in m]
        if missing:
            raise ValueError(f"cell {key} lacks metrics {missing}")
        rows.append(
            RateRow(
                family=family,
                n_rows=n_rows,
                beta_set=beta_set,
                stratum=stratum,
                rep=rep,
                total=int(m["total"]),
                tp_rate=float(m["tp_rate"]),
                fp_rate=float(m["fp_rate"]),
                tn_rate=float(m["tn_rate"]),
                selection_ratio=float(m["selection_ratio"]),
                identification_ratio=float(m["identification_ratio"]),
                mean_cardinality=float(m["mean_cardinality"]) if m["mean_cardinality"] else None,
                budget_skipped=int(m["budget_skipped"]),
            )
        )
    return rows


def validate_report_payload(payload: dict) -> None:
    """Structural checks mirroring docs/report.schema.json; raises ValueError."""

    def fail(msg: str) -> None:
        raise ValueError(f"invalid report payload: {msg}")

    if not isinstance(payload, dict):
        fail("payload must be an object")
    required = {"schema_version", "plan", "rows", "budget"}
    missing = required - payload.keys()
    if missing:
        fail(f"missing keys {sorted(missing)}")
    if payload["schema_version"] != SCHEMA_VERSION:
        fail(f"schema_version must be {SCHEMA_VERSION}")
    if not isinstance(payload["plan"], dict):
        fail("plan must be an object")
    if not isinstance(payload["rows"], list):
        fail("rows must be an array")
    row_fields = {
        "family",
        "n_rows",
        "beta_set",
        "stratum",
        "rep",
        "total",
        "tp_rate",
        "fp_rate",
        "tn_rate",
        "selection_ratio",
        "identification_ratio",
        "mean_cardinality",
        "budget_skipped",
    }
    for i, row in enumerate(payload["rows"]):
        if not isinstance(row, dict) or set(row) != row_fields:
            fail(f"row {i} must have exactly the fields {sorted(row_fields)}")
        for name in ("family", "beta_set", "stratum"):
            if not isinstance(row[name], str) or not row[name]:
                fail(f"row {i}: {name} must be a nonempty string")
        for name in ("n_rows", "rep", "total", "budget_skipped"):
            if not isinstance(row[name], int) or isinstance(row[name], bool) or row[name] < 0:
                fail(f"row {i}: {name} must be a nonnegative integer")
        for name in _RATE_METRICS:
            value = row[name]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                fail(f"row {i}: {name} must be a number")
            if not 0.0 <= float(value) <= 1.0:
                fail(f"row {i}: {name}={value} outside [0, 1]")
        card = row["mean_cardinality"]
        if card is not None and (not isinstance(card, (int, float)) or isinstance(card, bool) or card < 1):
            fail(f"row {i}: mean_cardinality must be null or a number >= 1")
    if not isinstance(payload["budget"], list):
        fail("budget must be an array")
    entry_fields = {"family", "n_rows", "rep", "config_index"}
    for i, entry in enumerate(payload["budget"]):
        if not isinstance(entry, dict) or set(entry) != entry_fields:
            fail(f"budget entry {i} must have exactly the fields {sorted(entry_fields)}")
