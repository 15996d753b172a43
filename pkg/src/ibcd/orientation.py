"""Constraint-based structure discovery over mixed graphs.

The pipeline has three phases.  Phase A drops the edge between every
pair of variables that some conditioning set renders independent and
records that set.  Phase B.1 classifies triples: on unshielded triples
the middle node is a collider or a noncollider according to whether it
appears in the recorded separating set; on fully adjacent triples the
same classification can still be made when an accepted sufficient
statistic of designated inputs separates the outer pair.  Phase B.2
propagates endpoint marks to a fixpoint with four local rules.

Only the statistic steps (B.1 on adjacent triples and their mark
propagation counterpart) go beyond a classical constraint-based
learner; with ``statistics_enabled`` off the output is the standard
one.  Statistic queries are supplied by the caller per triple, there is
no automatic search over input pools here.

Every emitted mark carries provenance: the rule name and the record
(separating set or accepted statistic) that justified it.  Conflicting
claims are never applied silently; they are surfaced as diagnostics and
the existing mark is kept.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from ibcd.bottleneck import SufficientStatistic, apply_statistic
from ibcd.graphs import EndpointMark, MixedGraph
from ibcd.probtable import ProbTable, independence_test
from ibcd.selection import (
    IBSSIQuery,
    SelectionThresholds,
    StatisticVerdict,
    ibssi_sweep,
)

__all__ = [
    "SepRecord",
    "DiscoveryConfig",
    "StatisticQuery",
    "ProvenanceEntry",
    "DiscoveryResult",
    "find_adjacencies",
    "rule_c",
    "rule_nc",
    "rule_c_ss",
    "rule_nc_ss",
    "ci_ss",
]

_STAT_COLUMN = "_stat"
_ENTROPY_TOL = 1e-9


@dataclass(frozen=True)
class SepRecord:
    """Evidence that a pair of variables can be separated.

    Plain records hold the conditioning set found during the adjacency
    phase.  Statistic-based records additionally hold the accepted
    statistic and the input variables it was built from; the inputs act
    as the constituent-variable metadata needed by the statistic
    counterpart of the away-from-collider rule.
    """

    pair: tuple[str, str]
    sep: tuple[str, ...] = ()
    statistic_based: bool = False
    statistic: SufficientStatistic | None = None
    statistic_inputs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.pair) != 2 or self.pair[0] == self.pair[1]:
            raise ValueError("pair must name two distinct variables")
        if self.statistic_based and self.statistic is None:
            raise ValueError("statistic-based record needs the statistic")

    @property
    def key(self) -> tuple[str, str]:
        return tuple(sorted(self.pair))  # type: ignore[return-value]


@dataclass(frozen=True)
class StatisticQuery:
    """One caller-specified statistic attempt for an adjacent triple.

    ``(x, y, z)`` is the triple with middle node y; the statistic is fit
    with target z from ``inputs``.  Whether y belongs to ``inputs``
    decides the role: with y excluded a successful fit supports a
    collider at y, with y included it starts the noncollider protocol.
    """

    x: str
    y: str
    z: str
    inputs: tuple[str, ...]

    def __post_init__(self) -> None:
        if len({self.x, self.y, self.z}) != 3:
            raise ValueError("triple must name three distinct variables")
        if self.x not in self.inputs:
            raise ValueError("inputs must contain the pair variable x")
        if self.z in self.inputs:
            raise ValueError("inputs must not contain the target z")

    @property
    def role(self) -> str:
        return "noncollider" if self.y in self.inputs else "collider"


@dataclass(frozen=True)
class DiscoveryConfig:
    """Knobs for the full discovery run.

    The statistic-fitting fields mirror the selection procedure's
    defaults; they are copied into each per-triple query.
    """

    max_cond_size: int = 4
    ratio_threshold: float = 0.025
    absolute_floor: float = 1e-4
    statistics_enabled: bool = True
    beta_primes: tuple[float, ...] = (25.0, 50.0, 75.0, 100.0)
    thresholds: SelectionThresholds = field(default_factory=SelectionThresholds)
    restarts: int = 200
    tolerance: float = 1e-7
    max_iterations: int = 10_000
    require_initial_drop: bool = True
    seed: int = 0
    threads: int = 1
    max_seconds_per_ib: float | None = None

    def __post_init__(self) -> None:
        if self.max_cond_size < 0:
            raise ValueError("max_cond_size must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class ProvenanceEntry:
    rule: str
    detail: str
    edge: tuple[str, str] | None = None
    at: str | None = None
    mark: str | None = None
    triple: tuple[str, str, str] | None = None


@dataclass
class DiscoveryResult:
    graph: MixedGraph
    seps: dict[tuple[str, str], SepRecord]
    statistic_records: list[SepRecord]
    log: list[ProvenanceEntry]
    conflicts: list[ProvenanceEntry]


# ---------------------------------------------------------------------------
# phase A: adjacencies


def find_adjacencies(
    table: ProbTable, cfg: DiscoveryConfig
) -> tuple[MixedGraph, dict[tuple[str, str], SepRecord]]:
    """Drop separable pairs, keep the rest as circle-circle edges.

    Conditioning sets are searched in increasing size and then
    lexicographically over sorted names, so the recorded set is the
    smallest (first) one that works.
    """
    names = sorted(table.names)
    if len(names) < 3:
        raise ValueError("adjacency search needs at least 3 variables")

    def search(pair: tuple[str, str]) -> SepRecord | None:
        x, z = pair
        others = [v for v in names if v != x and v != z]
        for size in range(min(cfg.max_cond_size, len(others)) + 1):
            for s in itertools.combinations(others, size):
                res = independence_test(
                    table,
                    x,
                    z,
                    given=s,
                    ratio_threshold=cfg.ratio_threshold,
                    absolute_floor=cfg.absolute_floor,
                )
                if res.independent:
                    return SepRecord(pair=pair, sep=s)
        return None

    pairs = list(itertools.combinations(names, 2))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            found = list(pool.map(search, pairs))
    else:
        found = [search(p) for p in pairs]

    g = MixedGraph()
    for n in names:
        g.add_node(n)
    seps: dict[tuple[str, str], SepRecord] = {}
    for pair, rec in zip(pairs, found):
        if rec is None:
            g.add_edge(pair[0], pair[1], EndpointMark.CIRCLE, EndpointMark.CIRCLE)
        else:
            seps[pair] = rec
    return g, seps


# ---------------------------------------------------------------------------
# mark bookkeeping


def _norm_triple(x: str, y: str, z: str) -> tuple[str, str, str]:
    a, b = sorted((x, z))
    return (a, y, b)


def _set_mark(
    g: MixedGraph,
    at: str,
    other: str,
    mark: EndpointMark,
    rule: str,
    detail: str,
    log: list[ProvenanceEntry],
    conflicts: list[ProvenanceEntry],
    triple: tuple[str, str, str] | None = None,
) -> bool:
    """Upgrade one endpoint mark; circles only ever harden, never flip."""
    current = g.mark_at(at, other)
    entry = ProvenanceEntry(
        rule=rule,
        detail=detail,
        edge=tuple(sorted((at, other))),  # type: ignore[arg-type]
        at=at,
        mark=mark.name.lower(),
        triple=triple,
    )
    if current == mark:
        return False
    if current != EndpointMark.CIRCLE:
        conflicts.append(replace(entry, detail=f"kept {current.name.lower()}: {detail}"))
        return False
    g.set_mark(at, other, mark)
    log.append(entry)
    return True


def _add_noncollider(
    g: MixedGraph,
    triple: tuple[str, str, str],
    rule: str,
    detail: str,
    log: list[ProvenanceEntry],
    conflicts: list[ProvenanceEntry],
) -> bool:
    x, y, z = triple
    if g.is_noncollider(x, y, z):
        return False
    arrow_x = g.mark_at(y, x) == EndpointMark.ARROW
    arrow_z = g.mark_at(y, z) == EndpointMark.ARROW
    entry = ProvenanceEntry(rule=rule, detail=detail, triple=triple)
    if arrow_x and arrow_z:
        conflicts.append(replace(entry, detail=f"triple already a collider: {detail}"))
        return False
    g.add_noncollider(x, y, z)
    log.append(entry)
    return True


# ---------------------------------------------------------------------------
# phase B.1(a): standard collider / noncollider classification


def _standard_claims(
    g: MixedGraph, seps: dict[tuple[str, str], SepRecord]
) -> dict[tuple[str, str, str], str]:
    """Classify every unshielded triple by separating-set membership."""
    claims: dict[tuple[str, str, str], str] = {}
    for y in g.nodes:
        nb = sorted(g.neighbors(y))
        for x, z in itertools.combinations(nb, 2):
            if g.has_edge(x, z):
                continue
            rec = seps.get((x, z))
            if rec is None:
                continue
            claims[(x, y, z)] = "noncollider" if y in rec.sep else "collider"
    return claims


def _apply_claims(
    g: MixedGraph,
    claims: dict[tuple[str, str, str], str],
    rule_names: dict[tuple[str, str, str], str],
    details: dict[tuple[str, str, str], str],
    log: list[ProvenanceEntry],
    conflicts: list[ProvenanceEntry],
) -> None:
    for triple in sorted(claims):
        kind = claims[triple]
        x, y, z = triple
        rule = rule_names[triple]
        detail = details[triple]
        if kind == "collider":
            _set_mark(g, y, x, EndpointMark.ARROW, rule, detail, log, conflicts, triple)
            _set_mark(g, y, z, EndpointMark.ARROW, rule, detail, log, conflicts, triple)
        else:
            _add_noncollider(g, triple, rule, detail, log, conflicts)


def rule_c(
    g: MixedGraph, seps: dict[tuple[str, str], SepRecord]
) -> list[ProvenanceEntry]:
    """Orient unshielded colliders: middle node absent from the separator."""
    log: list[ProvenanceEntry] = []
    conflicts: list[ProvenanceEntry] = []
    claims = {t: k for t, k in _standard_claims(g, seps).items() if k == "collider"}
    rules = {t: "collider" for t in claims}
    details = {t: f"sep({t[0]},{t[2]})={seps[(t[0], t[2])].sep}" for t in claims}
    _apply_claims(g, claims, rules, details, log, conflicts)
    return log + conflicts


def rule_nc(
    g: MixedGraph, seps: dict[tuple[str, str], SepRecord]
) -> list[ProvenanceEntry]:
    """Mark unshielded noncolliders: middle node inside the separator."""
    log: list[ProvenanceEntry] = []
    conflicts: list[ProvenanceEntry] = []
    claims = {t: k for t, k in _standard_claims(g, seps).items() if k == "noncollider"}
    rules = {t: "noncollider" for t in claims}
    details = {t: f"sep({t[0]},{t[2]})={seps[(t[0], t[2])].sep}" for t in claims}
    _apply_claims(g, claims, rules, details, log, conflicts)
    return log + conflicts


# ---------------------------------------------------------------------------
# phase B.1(b): statistic-based classification on adjacent triples


@dataclass
class _StatContext:
    """Tables plus fitting knobs shared by the statistic rules."""

    train: ProbTable
    test: ProbTable
    cfg: DiscoveryConfig

    def sweep(self, x: str, z: str, inputs: tuple[str, ...]) -> StatisticVerdict:
        query = IBSSIQuery(
            x=x,
            z=z,
            inputs=inputs,
            train=self.train,
            test=self.test,
            beta_primes=self.cfg.beta_primes,
            thresholds=self.cfg.thresholds,
            restarts=self.cfg.restarts,
            tolerance=self.cfg.tolerance,
            max_iterations=self.cfg.max_iterations,
            require_initial_drop=self.cfg.require_initial_drop,
        )
        try:
            return ibssi_sweep(
                query, seed=self.cfg.seed, max_seconds_per_ib=self.cfg.max_seconds_per_ib
            )
        except ValueError as err:
            if "too small" not in str(err):
                raise
            # a pool with fewer than 3 joint states cannot carry a statistic
            return StatisticVerdict(
                accepted=False,
                statistic=None,
                beta_prime=None,
                inputs=inputs,
                reason="input too small to compress",
            )

    def with_statistic(self, stat: SufficientStatistic, extra: tuple[str, ...]) -> ProbTable:
        needed = sorted(set(stat.input_names) | set(extra))
        return apply_statistic(self.test.marginal(needed), stat, name=_STAT_COLUMN)

    def dependent(self, table: ProbTable, a: str, b: str) -> bool:
        res = independence_test(
            table,
            a,
            b,
            given=(_STAT_COLUMN,),
            ratio_threshold=self.cfg.ratio_threshold,
            absolute_floor=self.cfg.absolute_floor,
        )
        return not res.independent

    def independent(self, table: ProbTable, a: str, b: str) -> bool:
        return not self.dependent(table, a, b)


def rule_c_ss(
    ctx: _StatContext, x: str, y: str, z: str, inputs: tuple[str, ...]
) -> tuple[str | None, SepRecord | None, str]:
    """Collider from a statistic: fit on inputs that exclude the middle node.

    Requires an accepted statistic of ``inputs`` (x in, y and z out) and,
    on the held-out table, x and z each dependent on y but independent of
    each other given the statistic.  Returns (claim, record, detail).
    """
    if y in inputs or z in inputs:
        raise ValueError("collider query inputs must exclude the middle node and target")
    verdict = ctx.sweep(x, z, inputs)
    if not verdict.accepted or verdict.statistic is None:
        return None, None, f"no accepted statistic ({verdict.reason})"
    t = ctx.with_statistic(verdict.statistic, (x, y, z))
    if not ctx.dependent(t, x, y):
        return None, None, "x independent of middle given statistic"
    if not ctx.dependent(t, y, z):
        return None, None, "middle independent of z given statistic"
    if not ctx.independent(t, x, z):
        return None, None, "pair still dependent given statistic"
    rec = SepRecord(
        pair=(x, z),
        sep=(),
        statistic_based=True,
        statistic=verdict.statistic,
        statistic_inputs=inputs,
    )
    return "collider", rec, f"statistic of {inputs} separates ({x},{z})"


def rule_nc_ss(
    ctx: _StatContext, x: str, y: str, z: str, inputs: tuple[str, ...]
) -> tuple[str | None, SepRecord | None, str]:
    """Noncollider from a statistic: the middle node must be a needed input.

    Three stages on the held-out table: (1) a statistic fit with y among
    the inputs is accepted and separates x from z; (2) refitting without
    y fails to separate them; (3) no statistic of any input subset keeps
    x and y apart when y itself is the target.  Stage 3 enumerates
    subsets containing x up to the configured conditioning size.
    """
    if y not in inputs:
        raise ValueError("noncollider query inputs must contain the middle node")
    verdict = ctx.sweep(x, z, inputs)
    if not verdict.accepted or verdict.statistic is None:
        return None, None, f"no accepted statistic with middle node ({verdict.reason})"
    t = ctx.with_statistic(verdict.statistic, (x, z))
    if not ctx.independent(t, x, z):
        return None, None, "pair still dependent given statistic"

    reduced = tuple(v for v in inputs if v != y)
    drop = ctx.sweep(x, z, reduced)
    if drop.accepted and drop.statistic is not None:
        t2 = ctx.with_statistic(drop.statistic, (x, z))
        degenerate = t2.entropy(x, given=(_STAT_COLUMN,)) <= _ENTROPY_TOL
        if ctx.independent(t2, x, z) and not degenerate:
            return None, None, "pair separable without the middle node"

    # y as target: every subset of the remaining inputs must fail to
    # separate x from y (rejection, degenerate statistic, or residual
    # dependence all count as failing)
    rest = [v for v in reduced if v != x]
    limit = min(ctx.cfg.max_cond_size, len(rest))
    for size in range(limit + 1):
        for extra in itertools.combinations(rest, size):
            subset = tuple(v for v in reduced if v == x or v in extra)
            aux = ctx.sweep(x, y, subset)
            if not aux.accepted or aux.statistic is None:
                continue
            t3 = ctx.with_statistic(aux.statistic, (x, y))
            degenerate = t3.entropy(x, given=(_STAT_COLUMN,)) <= _ENTROPY_TOL
            if ctx.independent(t3, x, y) and not degenerate:
                return None, None, f"statistic of {subset} separates ({x},{y})"
    rec = SepRecord(
        pair=(x, z),
        sep=(),
        statistic_based=True,
        statistic=verdict.statistic,
        statistic_inputs=inputs,
    )
    return "noncollider", rec, f"statistic of {inputs} (middle node needed) separates ({x},{z})"


# ---------------------------------------------------------------------------
# phase B.2: mark propagation


def _b2_away_from_collider(
    g: MixedGraph,
    seps: dict[tuple[str, str], SepRecord],
    log: list[ProvenanceEntry],
    conflicts: list[ProvenanceEntry],
) -> bool:
    """Separator members adjacent to an unshielded collider get arrows in.

    A variable in the separating set that neighbors the collider node can
    only keep the pair blocked if it is not a descendant, so its edge
    must point at the collider.
    """
    changed = False
    for (x, z), rec in sorted(seps.items()):
        if rec.statistic_based or g.has_edge(x, z):
            continue
        common = sorted(g.neighbors(x) & g.neighbors(z))
        for y in common:
            if g.mark_at(y, x) != EndpointMark.ARROW or g.mark_at(y, z) != EndpointMark.ARROW:
                continue
            for w in rec.sep:
                if w == y or not g.has_edge(w, y):
                    continue
                changed |= _set_mark(
                    g,
                    y,
                    w,
                    EndpointMark.ARROW,
                    "away-from-collider",
                    f"{w} in sep({x},{z}) and {y} collides ({x},{z})",
                    log,
                    conflicts,
                    _norm_triple(x, y, z),
                )
    return changed


def _b2_away_from_collider_ss(
    g: MixedGraph,
    records: list[SepRecord],
    log: list[ProvenanceEntry],
    conflicts: list[ProvenanceEntry],
) -> bool:
    """Statistic counterpart: input variables of the separating statistic
    play the separator-member role for colliders between the pair."""
    changed = False
    for rec in records:
        x, z = rec.pair
        if not g.has_edge(x, z):
            continue
        if not rec.statistic_inputs:
            log.append(
                ProvenanceEntry(
                    rule="away-from-collider-ss",
                    detail=f"record for ({x},{z}) lacks input metadata; skipped",
                )
            )
            continue
        common = sorted(g.neighbors(x) & g.neighbors(z))
        for y in common:
            if g.mark_at(y, x) != EndpointMark.ARROW or g.mark_at(y, z) != EndpointMark.ARROW:
                continue
            for w in rec.statistic_inputs:
                if w in (x, y, z) or not g.has_edge(w, y):
                    continue
                changed |= _set_mark(
                    g,
                    y,
                    w,
                    EndpointMark.ARROW,
                    "away-from-collider-ss",
                    f"{w} feeds the statistic separating ({x},{z}) and {y} collides them",
                    log,
                    conflicts,
                    _norm_triple(x, y, z),
                )
    return changed


def _b2_directed_path(
    g: MixedGraph, log: list[ProvenanceEntry], conflicts: list[ProvenanceEntry]
) -> bool:
    changed = False
    for x in g.nodes:
        reachable = g.descendants(x) - {x}
        for y in sorted(reachable):
            if not g.has_edge(x, y):
                continue
            changed |= _set_mark(
                g,
                y,
                x,
                EndpointMark.ARROW,
                "directed-path",
                f"directed path {x} to {y} plus an edge",
                log,
                conflicts,
            )
    return changed


def _b2_noncollider_chain(
    g: MixedGraph, log: list[ProvenanceEntry], conflicts: list[ProvenanceEntry]
) -> bool:
    """An arrow into a known noncollider exits the triple as a directed edge."""
    changed = False
    for a, y, b in sorted(g.noncolliders()):
        for src, dst in ((a, b), (b, a)):
            if not g.has_edge(src, y) or not g.has_edge(y, dst):
                continue
            if g.mark_at(y, src) != EndpointMark.ARROW:
                continue
            detail = f"{src} points into noncollider {y}"
            triple = _norm_triple(a, y, b)
            changed |= _set_mark(
                g, y, dst, EndpointMark.TAIL, "noncollider-chain", detail, log, conflicts, triple
            )
            changed |= _set_mark(
                g, dst, y, EndpointMark.ARROW, "noncollider-chain", detail, log, conflicts, triple
            )
    return changed


# ---------------------------------------------------------------------------
# the full pipeline


def ci_ss(
    table: ProbTable,
    cfg: DiscoveryConfig | None = None,
    queries: tuple[StatisticQuery, ...] | list[StatisticQuery] = (),
    test_table: ProbTable | None = None,
) -> DiscoveryResult:
    """Run adjacency search, triple classification, and mark propagation.

    ``table`` drives the independence tests and statistic training;
    ``test_table`` (defaulting to ``table``) is the held-out table for
    statistic screening.  Statistic queries are only attempted on triples
    that survive the adjacency phase fully adjacent.
    """
    cfg = cfg or DiscoveryConfig()
    g, seps = find_adjacencies(table, cfg)
    log: list[ProvenanceEntry] = []
    conflicts: list[ProvenanceEntry] = []
    records: list[SepRecord] = []

    # B.1: collect all triple claims first so application order cannot matter
    claims = _standard_claims(g, seps)
    rule_names = {t: claims[t] for t in claims}
    details = {
        t: f"sep({t[0]},{t[2]})={seps[(t[0], t[2])].sep}" for t in claims
    }

    if cfg.statistics_enabled and queries:
        ctx = _StatContext(train=table, test=test_table or table, cfg=cfg)
        for q in queries:
            triple = _norm_triple(q.x, q.y, q.z)
            if not (
                g.has_edge(q.x, q.y) and g.has_edge(q.y, q.z) and g.has_edge(q.x, q.z)
            ):
                log.append(
                    ProvenanceEntry(
                        rule=f"{q.role}-ss",
                        detail="triple not fully adjacent; query skipped",
                        triple=triple,
                    )
                )
                continue
            if q.role == "collider":
                claim, rec, detail = rule_c_ss(ctx, q.x, q.y, q.z, q.inputs)
                rule_name = "collider-ss"
            else:
                claim, rec, detail = rule_nc_ss(ctx, q.x, q.y, q.z, q.inputs)
                rule_name = "noncollider-ss"
            if claim is None:
                log.append(
                    ProvenanceEntry(rule=rule_name, detail=detail, triple=triple)
                )
                continue
            if triple in claims and claims[triple] != claim:
                conflicts.append(
                    ProvenanceEntry(
                        rule=rule_name,
                        detail=f"conflicts with {claims[triple]} claim; both dropped",
                        triple=triple,
                    )
                )
                del claims[triple]
                continue
            claims[triple] = claim
            rule_names[triple] = rule_name
            details[triple] = detail
            if rec is not None:
                records.append(rec)

    # conflicting standard claims cannot arise (each unshielded pair has one
    # separating set), so application order over sorted triples is canonical
    _apply_claims(g, claims, rule_names, details, log, conflicts)

    # B.2 to fixpoint; every application hardens a circle so this terminates
    while True:
        changed = _b2_away_from_collider(g, seps, log, conflicts)
        if cfg.statistics_enabled:
            changed |= _b2_away_from_collider_ss(g, records, log, conflicts)
        changed |= _b2_directed_path(g, log, conflicts)
        changed |= _b2_noncollider_chain(g, log, conflicts)
        if not changed:
            break

    return DiscoveryResult(
        graph=g, seps=seps, statistic_records=records, log=log, conflicts=conflicts
    )
