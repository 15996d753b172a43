"""Benchmark system generators: parametric mechanisms with known structure.

Each family is a small causal system in which a target Z is driven by a
generalized-linear mechanism over a handful of binary (or small-integer)
causes.  The point of every family is what the mechanism does or does not
factor through:

``additive``        Z ~ Binom(n, sigmoid(h(X+V1, V2))); the sum X+V1 is a
                    genuine 3-state statistic, V2 acts on Z directly.
``additive_aux``    h couples X+V1 with the auxiliary sum V1+V2; only the
                    joint (X+V1, V1+V2) screens X off from Z.
``additive_child``  like ``additive`` but the co-parent Y is itself a child
                    of X, so the conditioning set must include Y.
``saturated``       h carries all pairwise interactions of (X, V1, V2); no
                    coarse statistic exists.
``additive_two``    two overlapping sums X+V1 and X+V2; each alone leaves
                    residual dependence, jointly they screen X off.
``products``        h is linear in XV1, XV2 and V1V2; only the triple of
                    products forms a screening set.
``selection``       Z is caused by V2 alone, but the recorded data are
                    conditioned on a hidden score S with parents (X,V1,Z)
                    falling inside an acceptance window.
``dormant``         V2 is a collider between X and a latent cause of Z,
                    so any input set containing V2 admits no consistent
                    statistic; the X+V1 screen is judged on the do(V3=1)
                    table identified from the observational joint.  An
                    optional direct V3 effect on Z (seventh coefficient)
                    breaks the observational screen entirely.
``roundexp``        Z = round(exp(h) + noise): a rounded continuous
                    mechanism with the same four h shapes as above.

Exact joint tables, ground-truth partitions, generating graphs, sampling,
faithfulness screens and the do-intervention identification step for the
dormant family all live here.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import binom, norm

from ibcd.bottleneck import SufficientStatistic
from ibcd.graphs import MixedGraph
from ibcd.probtable import ProbTable, SampleDataset, VariableSpec

__all__ = [
    "GlmSpec",
    "SystemConfig",
    "FaithfulnessCheck",
    "FAMILIES",
    "glm_exact_table",
    "selection_full_table",
    "selection_window",
    "dormant_surgical_table",
    "dormant_identified_table",
    "reject_unfaithful",
    "true_partition",
    "true_graph",
    "sample",
    "generate_suite",
    "stratify",
    "family_bounds",
    "measure_variables",
    "input_pools",
]

# mechanism constants shared by several families
CHILD_Y_LINK = (0.3, 0.4)  # p(Y=1|x) = 0.3 + 0.4 x
SELECTION_Z_LINK = (0.4, 0.2)  # p(Z=1|v2) = 0.4 + 0.2 v2
DORMANT_V2_TRIALS = 16
DORMANT_V2_LINK = (0.1, 0.3, 0.3)  # Binom(16, 0.1 + 0.3 x + 0.3 u)
DORMANT_V3_LINK = (-2.0, 1.5 / 16.0, 2.5)  # p(V3=1|x,v2) = sigmoid(-2 + 1.5 v2/16 + 2.5 x)
ROUNDEXP_MEAN_CAP = 40.0  # keep round(exp(h)) supports tractable

_SUBFORMS = ("additive", "additive_aux", "additive_child", "saturated")

_COEFF_LEN = {
    "additive": 6,
    "additive_aux": 7,
    "additive_child": 6,
    "saturated": 7,
    "additive_two": 7,
    "products": 4,
    "selection": 6,
    "dormant": 6,  # 7th optional coefficient adds a direct V3 -> Z effect
}

# stratification bounds (a, b): low < a <= medium < b <= high
_BOUNDS = {
    "additive": (0.05, 0.10),
    "additive_aux": (0.15, 0.25),
    "additive_child": (0.10, 0.20),
    "saturated": (0.15, 0.25),
    "additive_two": (0.15, 0.25),
    "products": (0.10, 0.20),
    "selection": (0.10, 0.15),
    "dormant": (0.10, 0.15),
}
_ROUNDEXP_BOUNDS = {
    "additive": (0.15, 0.30),
    "additive_aux": (0.20, 0.40),
    "additive_child": (0.20, 0.40),
    "saturated": (0.20, 0.40),
}

# default half-width of the uniform coefficient draw; the additive value is
# calibrated so the three information strata center near their nominal means
_COEFF_SCALE = {
    "additive": 2.0,
    "additive_aux": 2.0,
    "additive_child": 2.0,
    "saturated": 2.0,
    "additive_two": 2.0,
    "products": 2.0,
    "selection": 2.0,
    "dormant": 2.0,
    "roundexp": 1.0,
}

FAMILIES = (
    "additive",
    "additive_aux",
    "additive_child",
    "saturated",
    "additive_two",
    "products",
    "selection",
    "dormant",
    "roundexp",
)


@dataclass(frozen=True)
class GlmSpec:
    """Fully parameterized instance of one mechanism family."""

    family: str
    coeffs: tuple[float, ...]
    p_x: float
    p_v1: float
    n: int | None = None
    sigma: float | None = None
    p_v2: float = 0.5
    subform: str | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "roundexp":
            if self.subform not in _SUBFORMS:
                raise ValueError(f"roundexp needs subform in {_SUBFORMS}")
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("roundexp needs a positive noise scale sigma")
            want = _COEFF_LEN[self.subform]
        else:
            if self.subform is not None:
                raise ValueError("subform only applies to roundexp")
            if self.n is None or self.n < 1:
                raise ValueError(f"family {self.family} needs a positive trial count n")
            want = _COEFF_LEN[self.family]
        got = len(self.coeffs)
        if self.family == "dormant":
            if got not in (want, want + 1):
                raise ValueError(f"dormant takes {want} or {want + 1} coefficients, got {got}")
        elif got != want:
            raise ValueError(f"family {self.family} takes {want} coefficients, got {got}")
        for p, label in ((self.p_x, "p_x"), (self.p_v1, "p_v1"), (self.p_v2, "p_v2")):
            if not 0 < p < 1:
                raise ValueError(f"{label} must be strictly between 0 and 1")

    @property
    def shape_family(self) -> str:
        """The h-shape actually used (resolves roundexp to its subform)."""
        return self.subform if self.family == "roundexp" else self.family


# ---------------------------------------------------------------------------
# mechanism link functions, broadcasting over numpy grids


def _h_additive(a: Sequence[float], t, v2):
    return a[0] + a[1] * v2 + a[2] * t + a[3] * t**2 + a[4] * t * v2 + a[5] * t**2 * v2


def _h_additive_aux(a: Sequence[float], t, g):
    return (
        a[0]
        + a[1] * g
        + a[2] * g**2
        + a[3] * t
        + a[4] * t * g
        + a[5] * t**2
        + a[6] * t**2 * g**2
    )


def _h_additive_child(a: Sequence[float], t, y):
    return a[0] + a[1] * y + a[2] * t + a[3] * t**2 + a[4] * t * y + a[5] * t**2 * y


def _h_saturated(a: Sequence[float], x, v1, v2):
    return (
        a[0]
        + a[1] * v1
        + a[2] * v2
        + a[3] * x
        + a[4] * x * v1
        + a[5] * x * v2
        + a[6] * v1 * v2
    )


def _h_additive_two(a: Sequence[float], t, s):
    return (
        a[0]
        + a[1] * s
        + a[2] * s**2
        + a[3] * t
        + a[4] * t * s
        + a[5] * t**2
        + a[6] * t**2 * s**2
    )


def _h_products(a: Sequence[float], xv1, xv2, v1v2):
    return a[0] + a[1] * xv1 + a[2] * xv2 + a[3] * v1v2


def _h_selection(a: Sequence[float], t, z):
    return a[0] + a[1] * z + a[2] * t + a[3] * t**2 + a[4] * t * z + a[5] * t**2 * z


def _h_dormant(a: Sequence[float], t, u, v3=0):
    h = a[0] + a[1] * u + a[2] * t + a[3] * t**2 + a[4] * t * u + a[5] * t**2 * u
    if len(a) == 7:
        h = h + a[6] * v3
    return h


def _bern(p: float) -> np.ndarray:
    return np.array([1.0 - p, p])


def _shape_h(spec: GlmSpec, x, v1, w):
    """Evaluate the h shape on broadcastable (x, v1, third-parent) grids."""
    a = spec.coeffs
    t = x + v1
    shape = spec.shape_family
    if shape == "additive":
        return _h_additive(a, t, w)
    if shape == "additive_aux":
        return _h_additive_aux(a, t, v1 + w)
    if shape == "additive_child":
        return _h_additive_child(a, t, w)
    if shape == "saturated":
        return _h_saturated(a, x, v1, w)
    if shape == "additive_two":
        return _h_additive_two(a, t, x + w)
    if shape == "products":
        return _h_products(a, x * v1, x * w, v1 * w)
    raise AssertionError(shape)


def _third_parent(spec: GlmSpec) -> str:
    return "Y" if spec.shape_family == "additive_child" else "V2"


def _third_parent_dist(spec: GlmSpec) -> np.ndarray:
    """p(third parent | x), shaped (x, 1, third) for the table grids."""
    if spec.shape_family == "additive_child":
        p1 = CHILD_Y_LINK[0] + CHILD_Y_LINK[1] * np.arange(2)
        return np.stack([1.0 - p1, p1], axis=-1).reshape(2, 1, 2)
    return _bern(spec.p_v2).reshape(1, 1, 2)


# ---------------------------------------------------------------------------
# exact tables


@functools.lru_cache(maxsize=512)
def glm_exact_table(spec: GlmSpec) -> ProbTable:
    """Exact observable joint for a spec.

    For ``selection`` this is the window-conditioned table, because the
    window is the only distribution an observer of that system sees.
    """
    if spec.family == "selection":
        full = selection_full_table(spec)
        window = selection_window(int(spec.n))
        return full.condition({"S": window}).marginal(["X", "V1", "V2", "Z"])
    if spec.family == "dormant":
        return _dormant_observable_table(spec)
    if spec.family == "roundexp":
        return _roundexp_table(spec)
    return _binomial_table(spec)


def _binomial_table(spec: GlmSpec) -> ProbTable:
    n = int(spec.n)
    x = np.arange(2).reshape(2, 1, 1)
    v1 = np.arange(2).reshape(1, 2, 1)
    w = np.arange(2).reshape(1, 1, 2)
    p = expit(_shape_h(spec, x, v1, w))
    pmf = binom.pmf(np.arange(n + 1), n, p[..., None])
    weight = (
        _bern(spec.p_x).reshape(2, 1, 1)
        * _bern(spec.p_v1).reshape(1, 2, 1)
        * _third_parent_dist(spec)
    )
    third = _third_parent(spec)
    variables = [
        VariableSpec("X", 2),
        VariableSpec("V1", 2),
        VariableSpec(third, 2),
        VariableSpec("Z", n + 1),
    ]
    return ProbTable(variables, weight[..., None] * pmf)


def _roundexp_table(spec: GlmSpec) -> ProbTable:
    sigma = float(spec.sigma)
    x = np.arange(2).reshape(2, 1, 1)
    v1 = np.arange(2).reshape(1, 2, 1)
    w = np.arange(2).reshape(1, 1, 2)
    mean = np.exp(_shape_h(spec, x, v1, w))
    z_max = int(math.ceil(mean.max() + 4.0 * sigma))
    z_max = max(z_max, 1)
    # mass of round-to-k with the tails absorbed into 0 and z_max
    k = np.arange(z_max + 1)
    hi = np.where(k < z_max, norm.cdf((k + 0.5 - mean[..., None]) / sigma), 1.0)
    lo = np.where(k > 0, norm.cdf((k - 0.5 - mean[..., None]) / sigma), 0.0)
    pmf = hi - lo
    weight = (
        _bern(spec.p_x).reshape(2, 1, 1)
        * _bern(spec.p_v1).reshape(1, 2, 1)
        * _third_parent_dist(spec)
    )
    third = _third_parent(spec)
    variables = [
        VariableSpec("X", 2),
        VariableSpec("V1", 2),
        VariableSpec(third, 2),
        VariableSpec("Z", z_max + 1),
    ]
    return ProbTable(variables, weight[..., None] * pmf)


def selection_window(n: int) -> list[int]:
    """Score states kept by the acceptance filter: n/3 < s < 2n/3, strict."""
    states = [s for s in range(n + 1) if 3 * s > n and 3 * s < 2 * n]
    if not states:
        raise ValueError(f"selection window is empty for n={n}")
    return states


@functools.lru_cache(maxsize=512)
def selection_full_table(spec: GlmSpec) -> ProbTable:
    """Pre-selection joint over (X, V1, V2, Z, S); S is the hidden score."""
    if spec.family != "selection":
        raise ValueError("full table with score only exists for the selection family")
    n = int(spec.n)
    x = np.arange(2).reshape(2, 1, 1, 1)
    v1 = np.arange(2).reshape(1, 2, 1, 1)
    v2 = np.arange(2).reshape(1, 1, 2, 1)
    z = np.arange(2).reshape(1, 1, 1, 2)
    pz1 = SELECTION_Z_LINK[0] + SELECTION_Z_LINK[1] * v2
    pz = np.where(z == 1, pz1, 1.0 - pz1)
    ps = expit(_h_selection(spec.coeffs, x + v1, z))
    pmf_s = binom.pmf(np.arange(n + 1), n, ps[..., None])
    weight = (
        _bern(spec.p_x).reshape(2, 1, 1, 1)
        * _bern(spec.p_v1).reshape(1, 2, 1, 1)
        * _bern(spec.p_v2).reshape(1, 1, 2, 1)
        * pz
    )
    variables = [
        VariableSpec("X", 2),
        VariableSpec("V1", 2),
        VariableSpec("V2", 2),
        VariableSpec("Z", 2),
        VariableSpec("S", n + 1),
    ]
    return ProbTable(variables, weight[..., None] * pmf_s)


def _dormant_mechanism_grids(spec: GlmSpec):
    """Broadcast grids over (x, v1, v2, v3, u, z)."""
    n = int(spec.n)
    x = np.arange(2).reshape(2, 1, 1, 1, 1, 1)
    v1 = np.arange(2).reshape(1, 2, 1, 1, 1, 1)
    v2 = np.arange(DORMANT_V2_TRIALS + 1).reshape(1, 1, -1, 1, 1, 1)
    v3 = np.arange(2).reshape(1, 1, 1, 2, 1, 1)
    u = np.arange(2).reshape(1, 1, 1, 1, 2, 1)
    z = np.arange(n + 1).reshape(1, 1, 1, 1, 1, -1)
    return x, v1, v2, v3, u, z


@functools.lru_cache(maxsize=512)
def _dormant_observable_table(spec: GlmSpec) -> ProbTable:
    x, v1, v2, v3, u, z = _dormant_mechanism_grids(spec)
    b0, bx, bu = DORMANT_V2_LINK
    pv2 = binom.pmf(v2, DORMANT_V2_TRIALS, b0 + bx * x + bu * u)
    c0, cv2, cx = DORMANT_V3_LINK
    pv3_1 = expit(c0 + cv2 * v2 + cx * x)
    pv3 = np.where(v3 == 1, pv3_1, 1.0 - pv3_1)
    pz = binom.pmf(z, int(spec.n), expit(_h_dormant(spec.coeffs, x + v1, u, v3)))
    weight = _bern(spec.p_x).reshape(2, 1, 1, 1, 1, 1) * _bern(spec.p_v1).reshape(
        1, 2, 1, 1, 1, 1
    ) * 0.5
    mass = (weight * pv2 * pv3 * pz).sum(axis=4)
    variables = [
        VariableSpec("X", 2),
        VariableSpec("V1", 2),
        VariableSpec("V2", DORMANT_V2_TRIALS + 1),
        VariableSpec("V3", 2),
        VariableSpec("Z", int(spec.n) + 1),
    ]
    return ProbTable(variables, mass)


def dormant_surgical_table(spec: GlmSpec, v3_value: int) -> ProbTable:
    """Ground-truth interventional joint: V3 forced, its mechanism cut."""
    if spec.family != "dormant":
        raise ValueError("surgical table only defined for the dormant family")
    x, v1, v2, _, u, z = _dormant_mechanism_grids(spec)
    b0, bx, bu = DORMANT_V2_LINK
    pv2 = binom.pmf(v2, DORMANT_V2_TRIALS, b0 + bx * x + bu * u)
    pz = binom.pmf(z, int(spec.n), expit(_h_dormant(spec.coeffs, x + v1, u, v3_value)))
    weight = _bern(spec.p_x).reshape(2, 1, 1, 1, 1, 1) * _bern(spec.p_v1).reshape(
        1, 2, 1, 1, 1, 1
    ) * 0.5
    mass = (weight * pv2 * pz).sum(axis=4)[:, :, :, 0, :]
    variables = [
        VariableSpec("X", 2),
        VariableSpec("V1", 2),
        VariableSpec("V2", DORMANT_V2_TRIALS + 1),
        VariableSpec("Z", int(spec.n) + 1),
    ]
    return ProbTable(variables, mass)


def dormant_identified_table(
    observed: ProbTable, v3_value: int, on_empty: str = "error"
) -> ProbTable:
    """Interventional joint recovered from the observational table alone.

    Uses the factorization p(x, v1, v2, z | do(v3)) =
    p(z | x, v1, v2, v3) * p(x, v2) * p(v1), which holds because V3 has no
    unobserved parent shared with Z once (X, V2) are fixed.

    ``on_empty`` controls cells where the needed conditional is undefined
    (p(x, v1, v2, v3)=0 while p(x, v2) p(v1)>0): "error" raises,
    "drop" zeroes those cells and renormalizes, which is the only workable
    policy for plug-in estimates from finite samples.
    """
    names = ("X", "V1", "V2", "V3", "Z")
    if tuple(observed.names) != names:
        observed = observed.marginal(names)
    if on_empty not in ("error", "drop"):
        raise ValueError(f"unknown on_empty policy {on_empty!r}")
    joint = observed.mass
    v3 = int(v3_value)
    if not 0 <= v3 < observed.cardinality("V3"):
        raise ValueError(f"V3 has no state {v3_value}")
    numer = joint[:, :, :, v3, :]
    denom = numer.sum(axis=-1)
    p_x_v2 = joint.sum(axis=(1, 3, 4))
    p_v1 = joint.sum(axis=(0, 2, 3, 4))
    need = (p_x_v2[:, None, :] * p_v1[None, :, None]) > 0
    undefined = need & (denom <= 0)
    if undefined.any():
        if on_empty == "error":
            raise ValueError(
                "positivity violated: no observations of V3="
                f"{v3} for {int(undefined.sum())} required (X,V1,V2) cells"
            )
        need = need & ~undefined
    cond = np.zeros_like(numer)
    ok = denom > 0
    cond[ok] = numer[ok] / denom[ok][..., None]
    mass = cond * (p_x_v2[:, None, :, None] * p_v1[None, :, None, None]) * need[..., None]
    variables = [
        VariableSpec("X", 2),
        VariableSpec("V1", observed.cardinality("V1")),
        VariableSpec("V2", observed.cardinality("V2")),
        VariableSpec("Z", observed.cardinality("Z")),
    ]
    return ProbTable(variables, mass, normalize=True)


# ---------------------------------------------------------------------------
# ground truth: mechanism cells, partitions, graphs


def _class_keys(spec: GlmSpec) -> tuple[list[tuple], np.ndarray]:
    """Mechanism-cell class keys and values for the faithfulness screen.

    Returns one entry per joint parent state: a hashable key identifying
    which states the mechanism treats identically, and the mechanism value
    (success probability, or conditional mean for roundexp).
    """
    shape = spec.shape_family
    keys: list[tuple] = []
    vals: list[float] = []
    if spec.family == "dormant":
        a = spec.coeffs
        for xx in range(2):
            for vv1 in range(2):
                for uu in range(2):
                    t = xx + vv1
                    keys.append((t, uu))
                    vals.append(float(expit(_h_dormant(a, t, uu, 1))))
        return keys, np.asarray(vals)
    if spec.family == "selection":
        a = spec.coeffs
        for xx in range(2):
            for vv1 in range(2):
                for zz in range(2):
                    keys.append((xx + vv1, zz))
                    vals.append(float(expit(_h_selection(a, xx + vv1, zz))))
        return keys, np.asarray(vals)
    for xx in range(2):
        for vv1 in range(2):
            for ww in range(2):
                h = float(np.asarray(_shape_h(spec, xx, vv1, ww)))
                if shape == "additive":
                    key = (xx + vv1, ww)
                elif shape == "additive_aux":
                    key = (xx + vv1, vv1 + ww)
                elif shape == "additive_child":
                    key = (xx + vv1, ww)
                elif shape == "saturated":
                    key = (xx, vv1, ww)
                elif shape == "additive_two":
                    key = (xx + vv1, xx + ww)
                elif shape == "products":
                    key = (xx * vv1, xx * ww, vv1 * ww)
                else:
                    raise AssertionError(shape)
                keys.append(key)
                vals.append(math.exp(h) if spec.family == "roundexp" else float(expit(h)))
    return keys, np.asarray(vals)


@dataclass(frozen=True)
class FaithfulnessCheck:
    ok: bool
    detail: str


def reject_unfaithful(
    spec: GlmSpec,
    margin: float = 0.05,
    info_floor: float = 0.05,
    mean_margin: float = 0.5,
) -> FaithfulnessCheck:
    """Screen a spec for near-unfaithful parameter draws.

    Mechanism cells that differ structurally must differ numerically by
    ``margin`` (for roundexp: conditional means by ``mean_margin``, and the
    largest mean must stay below a support cap).  The selection and dormant
    families additionally require their observed/identified tables to carry
    at least ``info_floor`` of normalized information, since their whole
    point is a detectable post-conditioning dependence.
    """
    keys, vals = _class_keys(spec)
    by_class: dict[tuple, float] = {}
    for key, val in zip(keys, vals):
        if key in by_class:
            if abs(by_class[key] - val) > 1e-12:
                raise AssertionError(f"class {key} not constant: {by_class[key]} vs {val}")
        else:
            by_class[key] = val
    items = sorted(by_class.items())
    gap = mean_margin if spec.family == "roundexp" else margin
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            ki, vi = items[i]
            kj, vj = items[j]
            if spec.family == "dormant" and ki[0] == kj[0]:
                continue  # same statistic value: cells may legitimately coincide
            if abs(vi - vj) < gap:
                return FaithfulnessCheck(False, f"cells {ki} and {kj} differ by {abs(vi - vj):.4f}")
    if spec.family == "roundexp" and vals.max() > ROUNDEXP_MEAN_CAP:
        return FaithfulnessCheck(False, f"conditional mean {vals.max():.1f} above support cap")
    if spec.family == "selection":
        table = glm_exact_table(spec)
        pair = table.marginal(["X", "V1", "Z"])
        # the window-conditioned target must track the statistic cleanly
        cond: dict[int, list[float]] = {}
        for xx in range(2):
            for vv1 in range(2):
                cell = pair.condition({"X": xx, "V1": vv1})
                cond.setdefault(xx + vv1, []).append(float(cell.mass[1]))
        for t, ps in cond.items():
            if max(ps) - min(ps) > 1e-9:
                raise AssertionError("window conditional not constant within statistic class")
        levels = sorted((min(ps) for ps in cond.values()))
        for a, b in zip(levels, levels[1:]):
            if b - a < margin:
                return FaithfulnessCheck(False, f"window conditionals {a:.4f} and {b:.4f} too close")
        h_z = table.entropy("Z")
        if h_z <= 0 or table.mutual_info(["X", "V1"], "Z") / h_z < info_floor:
            return FaithfulnessCheck(False, "window dependence below the information floor")
    if spec.family == "dormant":
        ident = dormant_identified_table(glm_exact_table(spec), 1)
        h_z = ident.entropy("Z")
        if h_z <= 0:
            return FaithfulnessCheck(False, "degenerate target under intervention")
        if ident.mutual_info(["X", "V1"], "Z") / h_z < info_floor:
            return FaithfulnessCheck(False, "intervened statistic dependence below floor")
        if ident.mutual_info("V2", "Z") / h_z < info_floor:
            return FaithfulnessCheck(False, "intervened confounded dependence below floor")
    return FaithfulnessCheck(True, "ok")


_PARTITION_KEYS = {
    # family -> {input names -> state key function}
    "additive": {
        ("X", "V1"): lambda x, v1: x + v1,
        ("X", "V1", "V2"): lambda x, v1, v2: (x + v1, v2),
    },
    "additive_aux": {
        ("X", "V1"): None,
        ("X", "V1", "V2"): lambda x, v1, v2: (x + v1, v1 + v2),
    },
    "additive_child": {
        ("X", "V1"): None,
        ("X", "V1", "Y"): lambda x, v1, y: (x + v1, y),
    },
    "saturated": {
        ("X", "V1"): None,
        ("X", "V1", "V2"): None,
    },
    "additive_two": {
        ("X", "V1"): None,
        ("X", "V1", "V2"): lambda x, v1, v2: (x + v1, x + v2),
    },
    "products": {
        ("X", "V1"): None,
        ("X", "V1", "V2"): lambda x, v1, v2: (x * v1, x * v2, v1 * v2),
    },
    "selection": {
        ("X", "V1"): lambda x, v1: x + v1,
        ("X", "V1", "V2"): lambda x, v1, v2: (x + v1, v2),
    },
    "dormant": {
        ("X", "V1"): lambda x, v1: x + v1,
        ("X", "V1", "V2"): None,
    },
}


def true_partition(spec: GlmSpec, inputs: Iterable[str]) -> SufficientStatistic | None:
    """Analytic screening partition of an input set, or None if none exists.

    For the dormant family this refers to the identified interventional
    table; when the spec carries the direct-effect coefficient the
    observational joint does not factor through the same partition.
    """
    inputs = tuple(inputs)
    table = _PARTITION_KEYS[spec.shape_family if spec.family == "roundexp" else spec.family]
    if inputs not in table:
        raise KeyError(f"no ground-truth record for inputs {inputs}")
    key_fn = table[inputs]
    if key_fn is None:
        return None
    cards = tuple(2 for _ in inputs)
    labels = np.empty(int(np.prod(cards)), dtype=np.int64)
    seen: dict[tuple, int] = {}
    for i, state in enumerate(np.ndindex(*cards)):
        key = key_fn(*state)
        labels[i] = seen.setdefault(key, len(seen))
    return SufficientStatistic(
        input_variables=tuple(VariableSpec(n, 2) for n in inputs),
        labels=labels,
        cardinality=len(seen),
    )


def true_graph(spec: GlmSpec) -> MixedGraph:
    """Generating structure over the observable variables plus any latents."""
    g = MixedGraph()
    shape = spec.shape_family
    if spec.family == "selection":
        for node in ("X", "V1", "V2", "Z", "S"):
            g.add_node(node)
        g.add_directed_edge("V2", "Z")
        for parent in ("X", "V1", "Z"):
            g.add_directed_edge(parent, "S")
    elif spec.family == "dormant":
        for node in ("X", "V1", "V2", "V3", "Z"):
            g.add_node(node)
        g.add_node("U", "latent")
        g.add_directed_edge("X", "V2")
        g.add_directed_edge("U", "V2")
        g.add_directed_edge("U", "Z")
        g.add_directed_edge("X", "Z")
        g.add_directed_edge("V1", "Z")
        g.add_directed_edge("X", "V3")
        g.add_directed_edge("V2", "V3")
        if len(spec.coeffs) == 7:
            g.add_directed_edge("V3", "Z")
    elif shape == "additive_child":
        for node in ("X", "V1", "Y", "Z"):
            g.add_node(node)
        g.add_directed_edge("X", "Y")
        for parent in ("X", "V1", "Y"):
            g.add_directed_edge(parent, "Z")
    else:
        for node in ("X", "V1", "V2", "Z"):
            g.add_node(node)
        for parent in ("X", "V1", "V2"):
            g.add_directed_edge(parent, "Z")
    g.validate()
    return g


def measure_variables(spec: GlmSpec) -> tuple[str, ...]:
    shape = spec.shape_family
    if spec.family in ("selection", "dormant") or shape == "additive":
        return ("X", "V1")
    if shape == "additive_child":
        return ("X", "V1", "Y")
    return ("X", "V1", "V2")


def family_bounds(family: str, subform: str | None = None) -> tuple[float, float]:
    if family == "roundexp":
        if subform not in _ROUNDEXP_BOUNDS:
            raise KeyError(f"roundexp bounds need a subform, got {subform!r}")
        return _ROUNDEXP_BOUNDS[subform]
    return _BOUNDS[family]


def stratify(value: float, bounds: tuple[float, float]) -> str:
    """Closed-left bins: low < a, medium in [a, b), high >= b."""
    a, b = bounds
    if not a < b:
        raise ValueError(f"bounds must increase, got {bounds}")
    if value < a:
        return "low"
    if value < b:
        return "medium"
    return "high"


def input_pools(spec: GlmSpec) -> list[tuple[str, ...]]:
    """Candidate input sets for the pair (X, Z), smallest first."""
    if spec.shape_family == "additive_child":
        return [("X", "V1"), ("X", "V1", "Y")]
    return [("X", "V1"), ("X", "V1", "V2")]


# ---------------------------------------------------------------------------
# configured systems, sampling, suite generation


@dataclass(frozen=True)
class SystemConfig:
    """A spec plus its benchmark bookkeeping (seed, grid index)."""

    spec: GlmSpec
    seed: int
    index: int

    def exact_table(self) -> ProbTable:
        return glm_exact_table(self.spec)

    def analysis_table(self) -> ProbTable:
        """The table statistics are judged against.

        For the dormant family this is the identified interventional
        table; for every other family the observable exact joint.
        """
        if self.spec.family == "dormant":
            return dormant_identified_table(self.exact_table(), 1)
        return self.exact_table()

    def true_graph(self) -> MixedGraph:
        return true_graph(self.spec)

    def true_partition(self, inputs: Iterable[str]) -> SufficientStatistic | None:
        return true_partition(self.spec, inputs)

    def input_pools(self) -> list[tuple[str, ...]]:
        return input_pools(self.spec)

    def selection_nodes(self) -> set[str]:
        return {"S"} if self.spec.family == "selection" else set()

    def measure(self) -> float:
        table = self.analysis_table()
        h_z = table.entropy("Z")
        if h_z <= 0:
            return 0.0
        return table.mutual_info(list(measure_variables(self.spec)), "Z") / h_z

    def stratum(self) -> str:
        return stratify(self.measure(), family_bounds(self.spec.family, self.spec.subform))


def sample(spec: GlmSpec, n_rows: int, seed: int) -> SampleDataset:
    """Draw observations of the observable variables.

    All families draw directly from the exact observable table, which is
    distribution-identical to ancestral sampling.  The selection family
    instead simulates the acceptance process: draw the full system
    including the score, keep rows falling in the window, and drop the
    score column once ``n_rows`` rows are collected.
    """
    rng = np.random.default_rng(seed)
    if spec.family == "selection":
        full = selection_full_table(spec)
        window = set(selection_window(int(spec.n)))
        flat = full.mass.ravel()
        shape = full.mass.shape
        s_axis = full.axis("S")
        keep_rate = sum(
            full.mass.take(s, axis=s_axis).sum() for s in window
        )
        collected: list[np.ndarray] = []
        total = 0
        while total < n_rows:
            batch = int((n_rows - total) / max(keep_rate, 1e-6) * 1.2) + 16
            idx = rng.choice(flat.size, size=batch, p=flat)
            rows = np.stack(np.unravel_index(idx, shape), axis=1)
            ok = np.isin(rows[:, s_axis], list(window))
            rows = rows[ok]
            collected.append(rows)
            total += rows.shape[0]
        rows = np.concatenate(collected)[:n_rows]
        keep_cols = [i for i in range(len(full.variables)) if i != s_axis]
        return SampleDataset(
            tuple(full.variables[i] for i in keep_cols), rows[:, keep_cols]
        )
    table = glm_exact_table(spec)
    flat = table.mass.ravel()
    idx = rng.choice(flat.size, size=n_rows, p=flat)
    rows = np.stack(np.unravel_index(idx, table.mass.shape), axis=1)
    return SampleDataset(table.variables, rows)


def generate_suite(
    family: str,
    count: int = 40,
    n_set: Sequence[int] = (4, 8, 16, 64),
    sigma_set: Sequence[float] = (0.5, 1.0, 2.0, 3.0),
    p_set: Sequence[float] = (0.3, 0.5, 0.7),
    seed: int = 0,
    coeff_scale: float | None = None,
    subform: str | None = None,
    margin: float = 0.05,
    max_draws: int = 100_000,
) -> list[SystemConfig]:
    """Draw ``count`` coefficient vectors and cross them with the grids.

    Each vector is rejection-sampled (uniform on [-scale, scale]) until
    :func:`reject_unfaithful` passes for every grid combination it will be
    paired with, so all count * len(grid) configs are usable.  Runs out of
    budget loudly rather than silently shipping near-unfaithful systems.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if family == "roundexp":
        if subform not in _SUBFORMS:
            raise ValueError(f"roundexp suite needs subform in {_SUBFORMS}")
        coeff_len = _COEFF_LEN[subform]
        level_grid: list[dict] = [{"sigma": float(s)} for s in sigma_set]
    else:
        if subform is not None:
            raise ValueError("subform only applies to roundexp")
        coeff_len = _COEFF_LEN[family]
        level_grid = [{"n": int(n)} for n in n_set]
    scale = _COEFF_SCALE[family] if coeff_scale is None else float(coeff_scale)
    grid = [
        dict(level, p_x=float(px), p_v1=float(pv1))
        for level in level_grid
        for px in p_set
        for pv1 in p_set
    ]
    root = np.random.SeedSequence([seed, len(grid), count])
    draw_rng = np.random.default_rng(root.spawn(1)[0])
    config_seeds = [int(s.generate_state(1)[0]) for s in root.spawn(count * len(grid) + 1)[1:]]

    def build(a: np.ndarray, cell: dict) -> GlmSpec:
        return GlmSpec(
            family=family,
            coeffs=tuple(float(v) for v in a),
            subform=subform,
            **cell,
        )

    configs: list[SystemConfig] = []
    for k in range(count):
        coeffs = None
        for _ in range(max_draws):
            a = draw_rng.uniform(-scale, scale, size=coeff_len)
            if all(reject_unfaithful(build(a, cell), margin=margin).ok for cell in grid):
                coeffs = a
                break
        if coeffs is None:
            raise RuntimeError(
                f"rejection budget exhausted after {max_draws} draws for family {family}"
            )
        for cell in grid:
            index = len(configs)
            configs.append(
                SystemConfig(spec=build(coeffs, cell), seed=config_seeds[index], index=index)
            )
    return configs
