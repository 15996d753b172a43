"""Independent reference implementations backing the test expectations.

Everything here is deliberately naive: partitions are enumerated
exhaustively from restricted-growth strings, graph separation walks every
simple path, and the benchmark joints are rebuilt from their generative
laws with nothing but numpy/scipy primitives.  The only thing borrowed
from the package is the raw mass array inside a table; none of its
information or graph code is reused.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from scipy.special import expit
from scipy.stats import binom


# --------------------------------------------------------------------------
# information measures on plain arrays


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def mutual_info_bits(m) -> float:
    """I(rows; cols) of a 2-D joint mass array, in bits."""
    m = np.asarray(m, dtype=float)
    return entropy_bits(m.sum(axis=1)) + entropy_bits(m.sum(axis=0)) - entropy_bits(m)


def joint_matrix(table, inputs, target):
    """Extract (states, M) with M[i, z] = p(inputs=state_i, target=z).

    Works directly on the table's mass array so the package's own
    marginalization code stays out of the loop.
    """
    inputs = list(inputs)
    order = inputs + [target]
    axes = [table.axis(n) for n in order]
    drop = tuple(i for i in range(table.mass.ndim) if i not in set(axes))
    m = table.mass.sum(axis=drop) if drop else table.mass.copy()
    kept = sorted(axes)
    m = np.transpose(m, [kept.index(a) for a in axes])
    cards = [table.cardinality(n) for n in inputs]
    states = list(itertools.product(*[range(c) for c in cards]))
    return states, m.reshape(len(states), table.cardinality(target))


# --------------------------------------------------------------------------
# set partitions


def set_partitions(items):
    """Yield every partition of ``items`` (restricted-growth strings)."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield ()
        return
    codes = [0] * n
    while True:
        cells: dict[int, list] = {}
        for item, label in zip(items, codes):
            cells.setdefault(label, []).append(item)
        yield tuple(tuple(cell) for cell in cells.values())
        i = n - 1
        while i > 0 and codes[i] > max(codes[:i]):
            i -= 1
        if i == 0:
            return
        codes[i] += 1
        for j in range(i + 1, n):
            codes[j] = 0


def canon(partition):
    """Order-free canonical form of a partition."""
    return frozenset(frozenset(cell) for cell in partition)


def stat_partition(stat):
    """Canonical partition induced by a hardened statistic's label map."""
    cards = [v.cardinality for v in stat.input_variables]
    states = list(itertools.product(*[range(c) for c in cards]))
    cells: dict[int, list] = {}
    for state, label in zip(states, np.asarray(stat.labels).tolist()):
        cells.setdefault(label, []).append(state)
    return canon(cells.values())


def cond_info_bits(states, m, partition) -> float:
    """I(input state; target | partition cell), straight from the definition."""
    index = {s: i for i, s in enumerate(states)}
    total = 0.0
    for cell in partition:
        block = np.asarray(m, dtype=float)[[index[s] for s in cell]]
        p_cell = block.sum()
        if p_cell <= 0:
            continue
        total += p_cell * mutual_info_bits(block / p_cell)
    return total


def coarsest_zero_ci(states, m, tol: float = 1e-9):
    """All minimum-cell-count partitions with I(state; target | cell) <= tol."""
    best: list = []
    best_cells = len(states) + 1
    for partition in set_partitions(states):
        if len(partition) > best_cells:
            continue
        if cond_info_bits(states, m, partition) <= tol:
            if len(partition) < best_cells:
                best, best_cells = [partition], len(partition)
            else:
                best.append(partition)
    return best


def row_partition(states, m, tol: float = 1e-9):
    """Group states whose conditional target rows coincide.

    This is the coarsest zero-information partition whenever "same row"
    is transitive at the given tolerance, which the generators' margin
    rejection guarantees; tests cross-check it against the exhaustive
    search on small spaces.
    """
    m = np.asarray(m, dtype=float)
    rows = []
    for i in range(len(states)):
        mass = m[i].sum()
        rows.append(m[i] / mass if mass > 0 else None)
    cells: list[list] = []
    reps: list = []
    for state, row in zip(states, rows):
        for k, rep in enumerate(reps):
            if row is None or rep is None:
                continue
            if np.max(np.abs(row - rep)) <= tol:
                cells[k].append(state)
                break
        else:
            cells.append([state])
            reps.append(row)
    return tuple(tuple(c) for c in cells)


# --------------------------------------------------------------------------
# d-separation by literal path enumeration


def dsep_paths(edges, a, b, s) -> bool:
    """Separation on a DAG edge list, checking every simple path.

    A path is active when each interior collider has itself or a
    descendant in ``s`` and no interior noncollider is in ``s``.
    """
    a, b, s = set(a), set(b), set(s)
    nodes = {n for e in edges for n in e} | a | b | s
    nbrs: dict = {n: set() for n in nodes}
    children: dict = {n: set() for n in nodes}
    into = set()
    for parent, child in edges:
        nbrs[parent].add(child)
        nbrs[child].add(parent)
        children[parent].add(child)
        into.add((parent, child))

    desc_cache: dict = {}

    def descendants(node):
        if node not in desc_cache:
            seen = set()
            stack = [node]
            while stack:
                for child in children[stack.pop()]:
                    if child not in seen:
                        seen.add(child)
                        stack.append(child)
            desc_cache[node] = seen
        return desc_cache[node]

    def active(path) -> bool:
        for i in range(1, len(path) - 1):
            prev, node, nxt = path[i - 1], path[i], path[i + 1]
            if (prev, node) in into and (nxt, node) in into:
                if node not in s and not (descendants(node) & s):
                    return False
            elif node in s:
                return False
        return True

    for src in sorted(a):
        stack = [(src, (src,))]
        while stack:
            node, path = stack.pop()
            if node in b and len(path) > 1 and active(path):
                return False
            for nxt in nbrs[node]:
                if nxt not in path:
                    stack.append((nxt, path + (nxt,)))
    return True


def random_dag(rng, n_nodes: int, edge_prob: float = 0.4):
    """Random DAG over a fixed topological order."""
    names = [f"N{i}" for i in range(n_nodes)]
    edges = [
        (names[i], names[j])
        for i in range(n_nodes)
        for j in range(i + 1, n_nodes)
        if rng.random() < edge_prob
    ]
    return names, edges


def random_binary_joint(rng, names, edges, margin: float = 0.05):
    """Exact joint from random CPTs, indexed in ``names`` order.

    Success probabilities stay inside [margin, 1-margin] and rows of a
    child's table are resampled until they spread by at least the margin,
    so sampled dependencies are never razor thin.
    """
    parents: dict = {n: [] for n in names}
    for parent, child in edges:
        parents[child].append(parent)
    idx = {n: i for i, n in enumerate(names)}
    cpt = {}
    for n in names:
        k = len(parents[n])
        while True:
            rows = margin + (1.0 - 2.0 * margin) * rng.random(2**k)
            if k == 0 or rows.max() - rows.min() >= margin:
                cpt[n] = rows
                break
    mass = np.zeros((2,) * len(names))
    for state in itertools.product((0, 1), repeat=len(names)):
        p = 1.0
        for n in names:
            code = 0
            for parent in parents[n]:
                code = code * 2 + state[idx[parent]]
            p1 = cpt[n][code]
            p *= p1 if state[idx[n]] == 1 else 1.0 - p1
        mass[state] = p
    return mass


# --------------------------------------------------------------------------
# benchmark joints rebuilt from their generative laws

DORMANT_V2_TRIALS = 16


def surgical_dormant_joint(coeffs, n_z: int, p_x: float, p_v1: float, v3_value: int):
    """p(X, V1, V2, Z | do(V3=v3)) built directly from the mechanism.

    The intervention replaces V3's own law, so the joint is the plain
    product over the remaining mechanisms with V3 clamped, the hidden
    fair binary cause summed out.  Indexed (x, v1, v2, z).
    """
    x = np.arange(2).reshape(2, 1, 1, 1)
    v1 = np.arange(2).reshape(1, 2, 1, 1)
    v2 = np.arange(DORMANT_V2_TRIALS + 1).reshape(1, 1, -1, 1)
    z = np.arange(n_z + 1).reshape(1, 1, 1, -1)
    t = x + v1
    out = np.zeros((2, 2, DORMANT_V2_TRIALS + 1, n_z + 1))
    for u in (0, 1):
        p_v2 = binom.pmf(v2, DORMANT_V2_TRIALS, 0.1 + 0.3 * x + 0.3 * u)
        h = (
            coeffs[0]
            + coeffs[1] * u
            + coeffs[2] * t
            + coeffs[3] * t**2
            + coeffs[4] * t * u
            + coeffs[5] * t**2 * u
        )
        if len(coeffs) == 7:
            h = h + coeffs[6] * v3_value
        p_z = binom.pmf(z, n_z, expit(h))
        weight = np.where(x == 1, p_x, 1 - p_x) * np.where(v1 == 1, p_v1, 1 - p_v1)
        out = out + 0.5 * weight * p_v2 * p_z
    return out


def window_states(n: int) -> list[int]:
    """Counts strictly inside (n/3, 2n/3), compared exactly."""
    lo, hi = Fraction(n, 3), Fraction(2 * n, 3)
    return [s for s in range(n + 1) if lo < Fraction(s) < hi]


def selection_window_joint(coeffs, n_s: int, p_x: float, p_v1: float, p_v2: float):
    """Window-conditioned selection joint over (X, V1, V2, Z).

    Builds the full joint including the score variable, keeps only the
    window slice, and renormalizes; the score itself is marginalized out.
    """
    window = window_states(n_s)
    out = np.zeros((2, 2, 2, 2))
    for x, v1, v2, zv in itertools.product(range(2), repeat=4):
        p_z = (0.4 + 0.2 * v2) if zv == 1 else 1.0 - (0.4 + 0.2 * v2)
        t = x + v1
        h = (
            coeffs[0]
            + coeffs[1] * zv
            + coeffs[2] * t
            + coeffs[3] * t**2
            + coeffs[4] * t * zv
            + coeffs[5] * t**2 * zv
        )
        in_window = sum(binom.pmf(s, n_s, expit(h)) for s in window)
        base = (
            (p_x if x else 1 - p_x)
            * (p_v1 if v1 else 1 - p_v1)
            * (p_v2 if v2 else 1 - p_v2)
        )
        out[x, v1, v2, zv] = base * p_z * in_window
    return out / out.sum()
