"""Information bottleneck over discrete tables, hardened into statistics.

The optimizer compresses the joint state of a set of input variables into
at most ``max_cardinality`` clusters while preserving information about a
target variable.  It follows the classic self-consistent update scheme:
cluster prior and cluster-conditional target predictions are recomputed
from the current soft assignment, then each input state is reassigned
proportionally to ``prior * exp(-beta * KL(target|state || target|cluster))``.

All restarts run as one batched tensor iteration, which is what keeps the
benchmark drivers fast; per-restart seeding is order independent, so the
winning mapping does not depend on how many restarts run alongside it.

Units: reported entropies, informations and objectives are in bits; the
exponent of the assignment update uses the natural-log divergence, which
is the scale the self-consistent equations are derived in.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ibcd.probtable import ProbTable, VariableSpec

__all__ = [
    "IBInput",
    "SoftMapping",
    "SufficientStatistic",
    "BudgetExceededError",
    "scale_beta",
    "ib_optimize",
    "harden",
    "statistic_partition_equal",
    "apply_statistic",
]

_CLUSTER_MASS_FLOOR = 1e-12
_MIN_INFO = 1e-9


class BudgetExceededError(RuntimeError):
    """Raised when a single optimizer call exceeds its wall-clock budget."""


@dataclass
class IBInput:
    """One bottleneck problem: a joint table, a target, and knobs.

    ``target`` defaults to the last variable of the joint; all other
    variables form the compressed input vector, in table order.
    """

    joint: ProbTable
    beta: float
    max_cardinality: int
    target: str | None = None
    restarts: int = 200
    tolerance: float = 1e-7
    max_iterations: int = 10_000

    def __post_init__(self) -> None:
        if self.target is None:
            self.target = self.joint.names[-1]
        if self.target not in self.joint.names:
            raise KeyError(f"target {self.target!r} not in joint")
        if len(self.joint.names) < 2:
            raise ValueError("joint must contain the target and at least one input")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.max_cardinality < 2:
            raise ValueError("max_cardinality must be at least 2")
        if self.restarts < 1:
            raise ValueError("need at least one restart")

    @property
    def input_variables(self) -> tuple[VariableSpec, ...]:
        return tuple(v for v in self.joint.variables if v.name != self.target)


@dataclass
class SoftMapping:
    """Row-stochastic soft assignment of input states to clusters."""

    input_variables: tuple[VariableSpec, ...]
    rows: np.ndarray  # (n_input_states, n_clusters)
    objective: float  # I(cluster;input) - beta * I(cluster;target), bits
    iterations: int
    converged: bool
    restart_index: int
    input_mass: np.ndarray  # marginal over joint input states
    objective_trace: list[float] = field(default_factory=list)


@dataclass
class SufficientStatistic:
    """A total deterministic map from joint input states to a small label set.

    ``labels[i]`` is the label of the i-th input state in row-major order
    over ``input_variables``.
    """

    input_variables: tuple[VariableSpec, ...]
    labels: np.ndarray
    cardinality: int

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = int(np.prod([v.cardinality for v in self.input_variables]))
        if self.labels.shape != (n,):
            raise ValueError(f"labels must cover all {n} input states")

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.input_variables)

    def label_of(self, state: Sequence[int]) -> int:
        shape = tuple(v.cardinality for v in self.input_variables)
        return int(self.labels[int(np.ravel_multi_index(tuple(state), shape))])


def scale_beta(joint: ProbTable, beta_prime: float, target: str | None = None) -> float:
    """Convert a normalized trade-off beta' into the raw beta for this table.

    beta = beta' * H(inputs) / I(inputs; target), so equal beta' values are
    comparable across tables with different entropy scales.
    """
    if target is None:
        target = joint.names[-1]
    inputs = [n for n in joint.names if n != target]
    if not inputs:
        raise ValueError("joint must contain input variables besides the target")
    info = joint.mutual_info(inputs, target)
    if info < _MIN_INFO:
        raise ValueError("no information to preserve: inputs and target are independent")
    return beta_prime * joint.entropy(inputs) / info


def _input_decomposition(inp: IBInput) -> tuple[np.ndarray, np.ndarray]:
    """Flatten the joint into p(x) and p(z|x) over row-major input states.

    Input states never seen (zero mass) get a uniform conditional, so the
    hardened statistic is still a total map and does not depend on them.
    """
    names = [v.name for v in inp.input_variables]
    ordered = inp.joint.marginal(names + [inp.target])
    n_z = ordered.cardinality(inp.target)
    pxz = ordered.mass.reshape(-1, n_z)
    px = pxz.sum(axis=1)
    pzx = np.full_like(pxz, 1.0 / n_z)
    seen = px > 0
    pzx[seen] = pxz[seen] / px[seen, None]
    return px, pzx


def _mutual_info_bits(joint2d: np.ndarray) -> float:
    pa = joint2d.sum(axis=1, keepdims=True)
    pb = joint2d.sum(axis=0, keepdims=True)
    support = joint2d > 0
    ratio = np.ones_like(joint2d)
    denom = pa * pb
    ratio[support] = joint2d[support] / denom[support]
    return float((joint2d[support] * np.log2(ratio[support])).sum())


def _batched_objective(
    px: np.ndarray, pzx: np.ndarray, q: np.ndarray, beta: float
) -> np.ndarray:
    """Objective in bits for each restart of a (R, n_x, K) assignment."""
    objs = np.empty(q.shape[0])
    for r in range(q.shape[0]):
        pxt = px[:, None] * q[r]
        ptz = np.einsum("xk,xz->kz", pxt, pzx)
        objs[r] = _mutual_info_bits(pxt) - beta * _mutual_info_bits(ptz)
    return objs


def ib_optimize(
    inp: IBInput,
    seed: int = 0,
    *,
    track_objective: bool = False,
    max_seconds: float | None = None,
) -> SoftMapping:
    """Run the self-consistent iteration from many restarts; keep the best.

    Convergence is max-abs change of the assignment matrix below
    ``inp.tolerance``.  The winner is the restart with the lowest final
    objective; exact ties go to the earliest restart.  With
    ``track_objective`` the objective of restart 0 is recorded after every
    sweep (slow; meant for single-restart diagnostics and tests).
    """
    px, pzx = _input_decomposition(inp)
    n_x, n_z = pzx.shape
    k = inp.max_cardinality
    beta = float(inp.beta)
    deadline = None if max_seconds is None else time.monotonic() + max_seconds

    # natural-log entropy term of KL(p(z|x) || .), reused every iteration
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(pzx > 0, pzx * np.log(np.where(pzx > 0, pzx, 1.0)), 0.0)
    neg_h = plogp.sum(axis=1)  # (n_x,)

    children = np.random.SeedSequence(seed).spawn(inp.restarts)
    q = np.empty((inp.restarts, n_x, k))
    for r, child in enumerate(children):
        q[r] = np.random.default_rng(child).dirichlet(np.ones(k), size=n_x)

    active = np.ones(inp.restarts, dtype=bool)
    iterations = np.zeros(inp.restarts, dtype=int)
    trace: list[float] = []

    for step in range(1, inp.max_iterations + 1):
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceededError(
                f"bottleneck run exceeded {max_seconds:.3f}s wall-clock budget"
            )
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        qa = q[idx]
        qt = np.einsum("x,rxk->rk", px, qa)
        ptz = np.einsum("x,rxk,xz->rkz", px, qa, pzx)
        qz = np.full_like(ptz, 1.0 / n_z)
        pos = qt > 0
        qz[pos] = ptz[pos] / qt[pos][:, None]
        ln_qz = np.log(np.maximum(qz, 1e-12))
        kl = neg_h[None, :, None] - np.einsum("xz,rkz->rxk", pzx, ln_qz)
        np.maximum(kl, 0.0, out=kl)
        # subtracting the per-row minimum keeps exp() away from total underflow
        expo = -beta * (kl - kl.min(axis=2, keepdims=True))
        w = np.maximum(qt, 1e-300)[:, None, :] * np.exp(expo)
        q_new = w / w.sum(axis=2, keepdims=True)
        delta = np.abs(q_new - qa).max(axis=(1, 2))
        q[idx] = q_new
        iterations[idx] = step
        still = delta >= inp.tolerance
        active[idx] = still
        if track_objective:
            trace.append(float(_batched_objective(px, pzx, q[:1], beta)[0]))

    objectives = _batched_objective(px, pzx, q, beta)
    best = int(np.argmin(objectives))
    return SoftMapping(
        input_variables=inp.input_variables,
        rows=q[best],
        objective=float(objectives[best]),
        iterations=int(iterations[best]),
        converged=not bool(active[best]),
        restart_index=best,
        input_mass=px,
        objective_trace=trace,
    )


def harden(mapping: SoftMapping) -> SufficientStatistic:
    """Deterministic statistic from a soft mapping.

    Clusters whose total posterior mass is below 1e-12 are discarded, each
    input state takes its argmax cluster (ties to the lowest surviving
    cluster index), and labels are compacted in order of first appearance.
    """
    mass = mapping.input_mass @ mapping.rows
    keep = np.flatnonzero(mass >= _CLUSTER_MASS_FLOOR)
    if keep.size == 0:
        raise ValueError("all clusters fell below the mass floor")
    raw = keep[np.argmax(mapping.rows[:, keep], axis=1)]
    relabel: dict[int, int] = {}
    labels = np.empty(raw.shape[0], dtype=np.int64)
    for i, r in enumerate(raw):
        labels[i] = relabel.setdefault(int(r), len(relabel))
    return SufficientStatistic(
        input_variables=mapping.input_variables,
        labels=labels,
        cardinality=len(relabel),
    )


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    relabel: dict[int, int] = {}
    out = np.empty(labels.shape[0], dtype=np.int64)
    for i, r in enumerate(labels):
        out[i] = relabel.setdefault(int(r), len(relabel))
    return out


def statistic_partition_equal(a: SufficientStatistic, b: SufficientStatistic) -> bool:
    """Same partition of the same input space, ignoring label names.

    Both statistics must be defined over identical input variables;
    comparing partitions of different state spaces is a caller bug.
    """
    if a.input_names != b.input_names or tuple(
        v.cardinality for v in a.input_variables
    ) != tuple(v.cardinality for v in b.input_variables):
        raise ValueError("statistics are defined over different input variables")
    return bool(np.array_equal(_canonical_labels(a.labels), _canonical_labels(b.labels)))


def apply_statistic(table: ProbTable, stat: SufficientStatistic, name: str = "stat") -> ProbTable:
    """Extend a table with the statistic as a new deterministic last variable."""
    if name in table.names:
        raise ValueError(f"variable name {name!r} already present in table")
    for v in stat.input_variables:
        if v.name not in table.names:
            raise KeyError(f"statistic input {v.name!r} missing from table")
        if table.cardinality(v.name) != v.cardinality:
            raise ValueError(f"cardinality mismatch for {v.name!r}")
    axes = [table.axis(v.name) for v in stat.input_variables]
    cards = tuple(v.cardinality for v in stat.input_variables)
    out = np.zeros(table.mass.shape + (stat.cardinality,))
    grid = stat.labels.reshape(cards)
    for state in np.ndindex(*cards):
        idx: list[object] = [slice(None)] * table.mass.ndim
        for ax, st in zip(axes, state):
            idx[ax] = st
        out[tuple(idx) + (int(grid[state]),)] = table.mass[tuple(idx)]
    variables = list(table.variables) + [VariableSpec(name, stat.cardinality)]
    return ProbTable(variables, out)
