"""Decides whether a target factors through a coarse statistic of its inputs.

The core decision (:func:`algorithm1`) compresses the joint input state
with the bottleneck optimizer at shrinking capacity limits and accepts
only when the recovered partition is stable across adjacent capacities
and, on a held-out table, (a) genuinely coarsens the inputs, (b) leaves
the target uncertain, and (c) absorbs nearly all of the pair's mutual
information.  On top of it sit a sweep over trade-off strengths and an
escalation over candidate input sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ibcd.bottleneck import (
    IBInput,
    SufficientStatistic,
    apply_statistic,
    harden,
    ib_optimize,
    scale_beta,
    statistic_partition_equal,
)
from ibcd.probtable import ProbTable

__all__ = [
    "SelectionThresholds",
    "IBSSIQuery",
    "StatisticVerdict",
    "EscalationResult",
    "ConsistencyResult",
    "algorithm1",
    "split_criteria",
    "ibssi_sweep",
    "input_escalation",
    "local_criteria",
    "consistency_score",
]

_STAT_COLUMN = "_stat"


@dataclass(frozen=True)
class SelectionThresholds:
    """Acceptance thresholds, as fractions of the unconditional quantities.

    A candidate statistic passes when, on the test table,
    H(x|stat) > input_entropy * H(x), H(z|stat) > target_entropy * H(z)
    and I(x;z|stat) < residual_info * I(x;z).
    """

    input_entropy: float = 0.1
    target_entropy: float = 0.1
    residual_info: float = 0.025


@dataclass
class IBSSIQuery:
    """One pair query: does z depend on x only through a statistic of inputs?

    ``train`` fits the bottleneck mappings, ``test`` evaluates the
    acceptance criteria; both may carry extra variables (they are
    marginalized down to ``inputs`` + target).  With an exact table, pass
    it as both splits.
    """

    x: str
    z: str
    inputs: tuple[str, ...]
    train: ProbTable
    test: ProbTable
    beta_primes: tuple[float, ...] = (25.0, 50.0, 75.0, 100.0)
    thresholds: SelectionThresholds = field(default_factory=SelectionThresholds)
    use_local_criteria: bool = False
    cross_consistent: bool = False
    restarts: int = 200
    tolerance: float = 1e-7
    max_iterations: int = 10_000
    require_initial_drop: bool = True

    def __post_init__(self) -> None:
        self.inputs = tuple(self.inputs)
        if self.x not in self.inputs:
            raise ValueError(f"pair variable {self.x!r} must be among inputs {self.inputs}")
        if self.z in self.inputs:
            raise ValueError(f"target {self.z!r} cannot be an input")
        for table_name, table in (("train", self.train), ("test", self.test)):
            missing = [n for n in (*self.inputs, self.z) if n not in table.names]
            if missing:
                raise KeyError(f"{table_name} table lacks variables {missing}")


@dataclass
class StatisticVerdict:
    """Outcome of one selection run, with per-capacity diagnostics."""

    accepted: bool
    statistic: SufficientStatistic | None
    beta_prime: float | None
    inputs: tuple[str, ...]
    reason: str
    diagnostics: list[dict] = field(default_factory=list)


def _run_seed(seed: int, beta_prime: float, max_cardinality: int) -> int:
    ss = np.random.SeedSequence([seed, int(round(beta_prime * 1000)), max_cardinality])
    return int(ss.generate_state(1)[0])


def _criteria(
    test: ProbTable,
    stat: SufficientStatistic,
    x: str,
    z: str,
    th: SelectionThresholds,
) -> tuple[bool, dict]:
    ext = apply_statistic(test, stat, name=_STAT_COLUMN)
    h_x = ext.entropy(x)
    h_z = ext.entropy(z)
    info = ext.mutual_info(x, z)
    h_x_given = ext.entropy(x, _STAT_COLUMN)
    h_z_given = ext.entropy(z, _STAT_COLUMN)
    info_given = ext.mutual_info(x, z, _STAT_COLUMN)
    values = {
        "input_entropy": (h_x_given, th.input_entropy * h_x),
        "target_entropy": (h_z_given, th.target_entropy * h_z),
        "residual_info": (info_given, th.residual_info * info),
    }
    ok = (
        h_x_given > th.input_entropy * h_x
        and h_z_given > th.target_entropy * h_z
        and info_given < th.residual_info * info
    )
    return ok, values


def split_criteria(
    test: ProbTable,
    stat: SufficientStatistic,
    x: str,
    z: str,
    thresholds: SelectionThresholds | None = None,
) -> tuple[bool, dict]:
    """Evaluate the held-out acceptance screens for a hardened statistic.

    Returns the overall verdict plus the measured (value, bound) pairs.
    """
    return _criteria(test, stat, x, z, thresholds or SelectionThresholds())


def algorithm1(
    query: IBSSIQuery,
    beta_prime: float,
    seed: int = 0,
    *,
    max_seconds_per_ib: float | None = None,
) -> StatisticVerdict:
    """Capacity-descent acceptance for a single trade-off strength.

    The first run is capped at the full input state count; unless the
    mapping already gives up at least one cluster there, no statistic
    exists (``require_initial_drop`` relaxes this for identification
    studies).  Capacity then shrinks one state at a time until the
    recovered cardinality changes or the floor of 2 is reached.  The last
    two mappings of the plateau must induce the same partition, which is
    then screened by the test-split criteria (and, if enabled, the
    local-support criteria).

    A training pair with no mutual information cannot be compressed
    meaningfully; that case is reported as a rejection rather than an
    error, so sweeps over many pair/input combinations stay total.
    """
    names = list(query.inputs)
    train = query.train.marginal(names + [query.z])
    test = query.test.marginal(names + [query.z])
    n_states = int(np.prod([train.cardinality(n) for n in names]))
    if n_states < 3:
        raise ValueError("input too small to compress: need at least 3 joint input states")

    diagnostics: list[dict] = []

    def verdict(accepted: bool, stat: SufficientStatistic | None, reason: str) -> StatisticVerdict:
        return StatisticVerdict(
            accepted=accepted,
            statistic=stat,
            beta_prime=beta_prime if accepted else None,
            inputs=query.inputs,
            reason=reason,
            diagnostics=diagnostics,
        )

    try:
        beta = scale_beta(train, beta_prime, target=query.z)
    except ValueError:
        diagnostics.append({"beta_prime": beta_prime, "note": "no information to preserve"})
        return verdict(False, None, "no information between inputs and target")

    def run(max_cardinality: int) -> SufficientStatistic:
        mapping = ib_optimize(
            IBInput(
                joint=train,
                beta=beta,
                max_cardinality=max_cardinality,
                target=query.z,
                restarts=query.restarts,
                tolerance=query.tolerance,
                max_iterations=query.max_iterations,
            ),
            seed=_run_seed(seed, beta_prime, max_cardinality),
            max_seconds=max_seconds_per_ib,
        )
        stat = harden(mapping)
        diagnostics.append(
            {
                "beta_prime": beta_prime,
                "max_cardinality": max_cardinality,
                "cardinality": stat.cardinality,
                "iterations": mapping.iterations,
                "converged": mapping.converged,
                "objective": mapping.objective,
            }
        )
        return stat

    thetas = [run(n_states)]
    if query.require_initial_drop and thetas[0].cardinality >= n_states:
        return verdict(False, None, "no compression at full capacity")

    k = 0
    while True:
        k += 1
        cap = n_states - k
        thetas.append(run(cap))
        if cap == 2 or thetas[k].cardinality != thetas[k - 1].cardinality:
            break

    if thetas[k].cardinality > thetas[k - 1].cardinality:
        return verdict(False, None, "cardinality grew as capacity shrank")
    if thetas[k].cardinality < thetas[k - 1].cardinality:
        k -= 1
        if k == 0:
            # the very first shrink already changed the result: no plateau
            return verdict(False, None, "no stable cardinality plateau")
    if not statistic_partition_equal(thetas[k], thetas[k - 1]):
        return verdict(False, None, "partition not reproduced across capacities")

    stat = thetas[k]
    ok, values = _criteria(test, stat, query.x, query.z, query.thresholds)
    diagnostics.append({"beta_prime": beta_prime, "criteria": values, "criteria_pass": ok})
    if not ok:
        return verdict(False, None, "test-split criteria failed")
    if query.use_local_criteria and not local_criteria(test, stat, query.x, query.z):
        diagnostics.append({"beta_prime": beta_prime, "local_criteria": False})
        return verdict(False, None, "local criteria failed")
    return verdict(True, stat, "accepted")


def ibssi_sweep(
    query: IBSSIQuery,
    seed: int = 0,
    *,
    max_seconds_per_ib: float | None = None,
) -> StatisticVerdict:
    """Try each trade-off strength in ascending order; first acceptance wins.

    In ``cross_consistent`` mode every strength is evaluated and an
    acceptance stands only when all accepted partitions agree.
    """
    order = sorted(query.beta_primes)
    if not order:
        raise ValueError("beta_primes must not be empty")
    all_diags: list[dict] = []
    accepted: list[StatisticVerdict] = []
    for bp in order:
        v = algorithm1(query, bp, seed=seed, max_seconds_per_ib=max_seconds_per_ib)
        all_diags.extend(v.diagnostics)
        if v.accepted:
            if not query.cross_consistent:
                v.diagnostics = all_diags
                return v
            accepted.append(v)
    if query.cross_consistent and accepted:
        first = accepted[0]
        agree = all(
            statistic_partition_equal(first.statistic, other.statistic) for other in accepted[1:]
        )
        if agree:
            first.diagnostics = all_diags
            return first
        return StatisticVerdict(
            accepted=False,
            statistic=None,
            beta_prime=None,
            inputs=query.inputs,
            reason="accepted partitions disagree across trade-off strengths",
            diagnostics=all_diags,
        )
    return StatisticVerdict(
        accepted=False,
        statistic=None,
        beta_prime=None,
        inputs=query.inputs,
        reason="no trade-off strength produced an accepted statistic",
        diagnostics=all_diags,
    )


@dataclass
class EscalationResult:
    verdict: StatisticVerdict
    inputs: tuple[str, ...] | None
    attempts: list[tuple[tuple[str, ...], StatisticVerdict]]


def input_escalation(
    query: IBSSIQuery,
    pools: Sequence[Sequence[str]],
    seed: int = 0,
    *,
    max_seconds_per_ib: float | None = None,
) -> EscalationResult:
    """Retry the sweep with progressively larger input sets.

    ``pools`` is an ordered list of candidate input sets (each must contain
    the pair variable).  The first accepted sweep ends the escalation; all
    attempts stay recorded.
    """
    if not pools:
        raise ValueError("input_escalation needs at least one candidate input set")
    attempts: list[tuple[tuple[str, ...], StatisticVerdict]] = []
    for pool in pools:
        q = replace(query, inputs=tuple(pool))
        v = ibssi_sweep(q, seed=seed, max_seconds_per_ib=max_seconds_per_ib)
        attempts.append((tuple(pool), v))
        if v.accepted:
            return EscalationResult(verdict=v, inputs=tuple(pool), attempts=attempts)
    return EscalationResult(verdict=attempts[-1][1], inputs=None, attempts=attempts)


def local_criteria(table: ProbTable, stat: SufficientStatistic, x: str, z: str) -> bool:
    """Some statistic state must leave both the pair variable and target random.

    Needed for rules whose output is deterministic given all arguments:
    without a state like that, the statistic carries no usable signal for
    orientation even if the factorization criteria hold.
    """
    ext = apply_statistic(table, stat, name=_STAT_COLUMN)
    margin = ext.marginal(_STAT_COLUMN).mass
    for state, mass in enumerate(margin):
        if mass <= 0:
            continue
        cell = ext.condition({_STAT_COLUMN: state})
        if cell.entropy(z) > 0 and cell.entropy(x) > 0:
            return True
    return False


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    residual_info: float
    input_entropy: float
    target_entropy: float


def consistency_score(
    stat: SufficientStatistic,
    exact: ProbTable,
    x: str,
    z: str,
    info_tol: float = 1e-9,
) -> ConsistencyResult:
    """Check a statistic against the exact distribution it claims to compress.

    Consistent means: on the exact table the statistic absorbs the full
    pair information (I(x;z|stat) <= tol) while collapsing neither the
    pair variable nor the target.  Coarser-than-truth partitions that
    still absorb everything count as consistent.
    """
    ext = apply_statistic(exact, stat, name=_STAT_COLUMN)
    info = ext.mutual_info(x, z, _STAT_COLUMN)
    h_x = ext.entropy(x, _STAT_COLUMN)
    h_z = ext.entropy(z, _STAT_COLUMN)
    return ConsistencyResult(
        consistent=bool(info <= info_tol and h_x > 0 and h_z > 0),
        residual_info=info,
        input_entropy=h_x,
        target_entropy=h_z,
    )
