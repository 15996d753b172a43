"""Dense discrete probability tables and plug-in information measures.

Every distribution in this package is a joint table over a small set of
named finite variables.  Tables are exact objects: generators produce them
analytically, estimators produce them from count data, and all entropy or
independence queries reduce to axis reductions on the dense array.

Conventions
-----------
* All entropies and informations are in bits (log base 2), with 0*log(0)=0.
* A table's mass always sums to one within 1e-9; constructors renormalize
  only when asked to.
* Conditioning on a single state removes the variable; conditioning on a
  set of states keeps the variable with mass outside the set zeroed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "VariableSpec",
    "ProbTable",
    "SampleDataset",
    "estimate_joint",
    "kl_divergence",
    "independence_test",
    "IndependenceResult",
]

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class VariableSpec:
    """A named finite variable with a fixed number of states 0..cardinality-1."""

    name: str
    cardinality: int

    def __post_init__(self) -> None:
        if self.cardinality < 1:
            raise ValueError(f"variable {self.name!r} needs at least one state")


def _as_names(target: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(target, str):
        return (target,)
    return tuple(target)


class ProbTable:
    """Joint probability mass function over named discrete variables.

    Parameters
    ----------
    variables : sequence of VariableSpec
        Axis order of ``mass``; names must be unique.
    mass : ndarray
        Nonnegative array with shape equal to the variable cardinalities.
    normalize : bool
        Rescale ``mass`` to sum to one instead of requiring it.
    """

    __slots__ = ("variables", "mass", "_index")

    def __init__(
        self,
        variables: Sequence[VariableSpec],
        mass: np.ndarray,
        *,
        normalize: bool = False,
    ) -> None:
        variables = tuple(variables)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names: {names}")
        mass = np.asarray(mass, dtype=float)
        expected = tuple(v.cardinality for v in variables)
        if mass.shape != expected:
            raise ValueError(f"mass shape {mass.shape} does not match cardinalities {expected}")
        if np.any(mass < 0):
            raise ValueError("negative probability mass")
        total = float(mass.sum())
        if normalize:
            if total <= 0:
                raise ValueError("cannot normalize zero mass")
            mass = mass / total
        elif abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"mass sums to {total!r}, not 1")
        self.variables = variables
        self.mass = mass
        self._index = {v.name: i for i, v in enumerate(variables)}

    # -- introspection -------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def axis(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no variable named {name!r}; have {self.names}") from None

    def spec(self, name: str) -> VariableSpec:
        return self.variables[self.axis(name)]

    def cardinality(self, name: str) -> int:
        return self.spec(name).cardinality

    def __repr__(self) -> str:  # pragma: no cover
        dims = ", ".join(f"{v.name}:{v.cardinality}" for v in self.variables)
        return f"ProbTable({dims})"

    # -- core operations -----------------------------------------------

    def marginal(self, keep: str | Iterable[str]) -> "ProbTable":
        """Marginal table over ``keep``, axes ordered as requested."""
        keep = _as_names(keep)
        if len(set(keep)) != len(keep):
            raise ValueError(f"duplicate names in keep: {keep}")
        keep_axes = [self.axis(n) for n in keep]
        drop = tuple(i for i in range(len(self.variables)) if i not in keep_axes)
        reduced = self.mass.sum(axis=drop) if drop else self.mass
        # sum() preserves the original axis order of the survivors
        survivors = [i for i in range(len(self.variables)) if i not in drop]
        order = [survivors.index(a) for a in keep_axes]
        reduced = np.transpose(reduced, order)
        return ProbTable([self.variables[a] for a in keep_axes], reduced)

    def condition(self, evidence: Mapping[str, int | Iterable[int]]) -> "ProbTable":
        """Condition on observed states.

        Every evidence variable is removed from the result: single-state
        evidence slices its axis, a collection of admissible states sums
        the axis over them first.  Raises if the evidence has zero
        probability.
        """
        mass = self.mass
        single: dict[int, int] = {}
        ranged: list[int] = []
        for name, states in evidence.items():
            ax = self.axis(name)
            card = self.variables[ax].cardinality
            if isinstance(states, (int, np.integer)):
                if not 0 <= int(states) < card:
                    raise ValueError(f"unsupported evidence: {name}={states} out of range")
                sel = np.zeros(card, dtype=bool)
                sel[int(states)] = True
                single[ax] = int(states)
            else:
                idx = sorted(int(s) for s in states)
                if not idx or any(not 0 <= s < card for s in idx):
                    raise ValueError(f"unsupported evidence: {name} in {idx}")
                sel = np.zeros(card, dtype=bool)
                sel[idx] = True
                ranged.append(ax)
            shape = [1] * mass.ndim
            shape[ax] = card
            mass = mass * sel.reshape(shape)
        total = float(mass.sum())
        if total <= 0:
            raise ValueError(f"unsupported evidence: zero probability for {dict(evidence)!r}")
        mass = mass / total
        if ranged:
            mass = mass.sum(axis=tuple(ranged), keepdims=True)
        indexer: list[object] = [slice(None)] * mass.ndim
        for ax, state in single.items():
            indexer[ax] = state
        for ax in ranged:
            indexer[ax] = 0
        mass = mass[tuple(indexer)]
        keep = [i for i in range(len(self.variables)) if i not in single and i not in set(ranged)]
        return ProbTable([self.variables[i] for i in keep], mass)

    # -- information measures -------------------------------------------

    def _joint_entropy(self, names: tuple[str, ...]) -> float:
        if not names:
            return 0.0
        m = self.marginal(names).mass.ravel()
        m = m[m > 0]
        return float(-(m * np.log2(m)).sum())

    def entropy(self, target: str | Iterable[str], given: str | Iterable[str] = ()) -> float:
        """Conditional Shannon entropy H(target | given) in bits."""
        target = _as_names(target)
        given = _as_names(given)
        overlap = set(target) & set(given)
        if overlap:
            raise ValueError(f"target and given overlap: {sorted(overlap)}")
        return self._joint_entropy(target + given) - self._joint_entropy(given)

    def mutual_info(
        self,
        a: str | Iterable[str],
        b: str | Iterable[str],
        given: str | Iterable[str] = (),
    ) -> float:
        """Conditional mutual information I(a;b | given) in bits, clamped at 0.

        Computed as H(a|given) - H(a|b,given); tiny negative values from
        float cancellation are clamped, anything below -1e-9 is a bug.
        """
        a = _as_names(a)
        b = _as_names(b)
        given = _as_names(given)
        for x, y, what in ((a, b, "a/b"), (a, given, "a/given"), (b, given, "b/given")):
            overlap = set(x) & set(y)
            if overlap:
                raise ValueError(f"overlapping variable sets ({what}): {sorted(overlap)}")
        value = self.entropy(a, given) - self.entropy(a, b + given)
        if value < -_MASS_TOL:
            raise ArithmeticError(f"conditional mutual information {value} < -1e-9")
        return max(0.0, value)


@dataclass
class SampleDataset:
    """Integer-coded observations of a fixed variable set.

    ``rows`` has one column per variable, in ``variables`` order.
    """

    variables: tuple[VariableSpec, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        self.variables = tuple(self.variables)
        self.rows = np.asarray(self.rows, dtype=np.int64)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.variables):
            raise ValueError("rows must be N x len(variables)")
        for j, v in enumerate(self.variables):
            col = self.rows[:, j]
            if col.size and (col.min() < 0 or col.max() >= v.cardinality):
                raise ValueError(f"values of {v.name!r} outside 0..{v.cardinality - 1}")

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def project(self, names: Iterable[str]) -> "SampleDataset":
        names = _as_names(names)
        cols = [self.names.index(n) for n in names]
        return SampleDataset(tuple(self.variables[c] for c in cols), self.rows[:, cols])

    # -- CSV round trip -------------------------------------------------

    def write_csv(self, path: str | Path, *, with_schema: bool = True) -> None:
        """Write header + integer cells; optional sidecar declares cardinalities."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            writer.writerows(self.rows.tolist())
        if with_schema:
            schema = {
                "variables": [
                    {"name": v.name, "cardinality": v.cardinality} for v in self.variables
                ]
            }
            schema_path(path).write_text(json.dumps(schema, indent=2) + "\n")


def schema_path(csv_path: str | Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_suffix(csv_path.suffix + ".schema.json")


def read_csv(path: str | Path, schema: str | Path | None = None) -> SampleDataset:
    """Load a dataset written by :meth:`SampleDataset.write_csv`.

    Without a schema sidecar, each cardinality is taken as max observed
    value + 1.
    """
    path = Path(path)
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[int(c) for c in row] for row in reader if row]
    data = np.asarray(rows, dtype=np.int64).reshape(len(rows), len(header))
    if schema is None and schema_path(path).exists():
        schema = schema_path(path)
    if schema is not None:
        decl = json.loads(Path(schema).read_text())["variables"]
        by_name = {d["name"]: int(d["cardinality"]) for d in decl}
        variables = tuple(VariableSpec(h, by_name[h]) for h in header)
    else:
        cards = data.max(axis=0) + 1 if len(rows) else np.ones(len(header), dtype=int)
        variables = tuple(VariableSpec(h, int(c)) for h, c in zip(header, cards))
    return SampleDataset(variables, data)


def estimate_joint(data: SampleDataset, smoothing: float = 0.0) -> ProbTable:
    """Plug-in (optionally add-lambda smoothed) joint estimate.

    Each cell gets (count + smoothing) / (N + smoothing * #cells).
    """
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    n = len(data)
    if n == 0 and smoothing == 0:
        raise ValueError("no observations and no smoothing: joint is undefined")
    shape = tuple(v.cardinality for v in data.variables)
    counts = np.zeros(shape, dtype=float)
    if n:
        flat = np.ravel_multi_index(tuple(data.rows.T), shape)
        counts = np.bincount(flat, minlength=int(np.prod(shape))).astype(float).reshape(shape)
    counts += smoothing
    return ProbTable(data.variables, counts / counts.sum())


def kl_divergence(p: np.ndarray, q: np.ndarray, *, clamp: bool = False) -> float:
    """KL(p || q) in bits over matching state vectors.

    Strict mode raises when q has a zero where p does not; clamp mode
    floors q at 1e-12 instead (used inside the bottleneck iteration where
    intermediate cluster predictions can lose support).
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError("distributions must have matching length")
    support = p > 0
    if clamp:
        q = np.maximum(q, 1e-12)
    elif np.any(q[support] <= 0):
        raise ValueError("kl_divergence: q lacks support where p is positive")
    ps = p[support]
    return float((ps * (np.log2(ps) - np.log2(q[support]))).sum())


@dataclass(frozen=True)
class IndependenceResult:
    """Outcome of a conditional independence decision on a table."""

    independent: bool
    info: float
    baseline: float
    ratio: float | None


def independence_test(
    p: ProbTable,
    a: str | Iterable[str],
    b: str | Iterable[str],
    given: str | Iterable[str] = (),
    ratio_threshold: float = 0.025,
    absolute_floor: float = 1e-4,
) -> IndependenceResult:
    """Decide a (conditional) independence from the table itself.

    The decision is relative: independence holds when I(a;b|given) is less
    than ``ratio_threshold`` times the unconditional I(a;b).  When the pair
    carries almost no information to begin with (below ``absolute_floor``
    bits), the ratio is meaningless and the conditional information is
    compared against the floor directly.
    """
    info = p.mutual_info(a, b, given)
    baseline = p.mutual_info(a, b) if _as_names(given) else info
    if baseline < absolute_floor:
        return IndependenceResult(info < absolute_floor, info, baseline, None)
    ratio = info / baseline
    return IndependenceResult(ratio < ratio_threshold, info, baseline, ratio)
