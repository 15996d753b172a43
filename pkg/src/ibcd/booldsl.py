"""A small Boolean rule language and the discrete systems built from it.

Rules describe deterministic gate mechanisms like ``(X AND U1) OR V1`` or
threshold gates like ``X + V1 + V2 > 1``.  Grammar::

    expr   := term (OR term)*
    term   := factor (AND factor)*
    factor := NOT factor | '(' expr ')' | var | sumcmp
    sumcmp := var ('+' var)* ('>' | '>=' | '=') integer

A configured system fixes which rule arguments are observable; the rest
are independent hidden coins.  The target Z is deterministic given all
arguments, so randomness seen from the observables comes entirely from
marginalized hidden variables.  That makes these systems the sharp test
bed for the local-support criteria: a statistic can exist and still be
unusable because every one of its states pins down either the target or
the pair variable.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from ibcd.bottleneck import SufficientStatistic
from ibcd.probtable import ProbTable, SampleDataset, VariableSpec
from ibcd.selection import local_criteria

__all__ = [
    "Var",
    "Not",
    "And",
    "Or",
    "SumCmp",
    "BooleanRule",
    "parse_boolean_rule",
    "BooleanSystem",
    "boolean_config",
    "builtin_boolean_configs",
]

OBS_X_P = 0.5
OBS_V1_LINK = (0.4, 0.2)  # p(V1=1|x) = 0.4 + 0.2 x


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Node"


@dataclass(frozen=True)
class And:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class SumCmp:
    terms: tuple[str, ...]
    op: str  # '>', '>=' or '='
    bound: int


Node = Var | Not | And | Or | SumCmp


def _collect_vars(node: Node, out: list[str]) -> None:
    if isinstance(node, Var):
        if node.name not in out:
            out.append(node.name)
    elif isinstance(node, Not):
        _collect_vars(node.child, out)
    elif isinstance(node, (And, Or)):
        for c in node.children:
            _collect_vars(c, out)
    elif isinstance(node, SumCmp):
        for t in node.terms:
            if t not in out:
                out.append(t)


def _eval(node: Node, env: Mapping[str, int]) -> int:
    if isinstance(node, Var):
        return int(env[node.name])
    if isinstance(node, Not):
        return 1 - _eval(node.child, env)
    if isinstance(node, And):
        return int(all(_eval(c, env) for c in node.children))
    if isinstance(node, Or):
        return int(any(_eval(c, env) for c in node.children))
    if isinstance(node, SumCmp):
        total = sum(int(env[t]) for t in node.terms)
        if node.op == ">":
            return int(total > node.bound)
        if node.op == ">=":
            return int(total >= node.bound)
        return int(total == node.bound)
    raise AssertionError(node)


def _render(node: Node, parent: str) -> str:
    # precedence: OR < AND < NOT; sumcmp and var are atoms except under NOT
    if isinstance(node, Var):
        return node.name
    if isinstance(node, SumCmp):
        body = " + ".join(node.terms) + f" {node.op} {node.bound}"
        return f"({body})" if parent in ("and", "or", "not") and len(node.terms) >= 1 else body
    if isinstance(node, Not):
        inner = _render(node.child, "not")
        return f"NOT {inner}"
    if isinstance(node, And):
        body = " AND ".join(_render(c, "and") for c in node.children)
        return f"({body})" if parent in ("and", "not") else body
    if isinstance(node, Or):
        body = " OR ".join(_render(c, "or") for c in node.children)
        return f"({body})" if parent in ("and", "or", "not") else body
    raise AssertionError(node)


@dataclass(frozen=True)
class BooleanRule:
    """Parsed rule with its argument list in first-appearance order."""

    root: Node
    variables: tuple[str, ...]

    def evaluate(self, env: Mapping[str, int]) -> int:
        return _eval(self.root, env)

    def render(self) -> str:
        return _render(self.root, "top")


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<lpar>\()|(?P<rpar>\))|(?P<plus>\+)|(?P<geq>>=)|(?P<gt>>)|(?P<eq>=)"
    r"|(?P<int>\d+)|(?P<word>[A-Za-z_][A-Za-z0-9_]*))"
)

_KEYWORDS = {"AND", "OR", "NOT"}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ValueError(f"cannot tokenize rule at: {rest[:20]!r}")
        pos = m.end()
        kind = m.lastgroup
        value = m.group(kind)
        if kind == "word" and value in _KEYWORDS:
            tokens.append((value, value))
        else:
            tokens.append((kind, value))
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str:
        return self.tokens[self.pos][0]

    def eat(self, kind: str) -> str:
        got, value = self.tokens[self.pos]
        if got != kind:
            raise ValueError(f"expected {kind} but found {value!r} (token {self.pos})")
        self.pos += 1
        return value

    def expr(self) -> Node:
        terms = [self.term()]
        while self.peek() == "OR":
            self.eat("OR")
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def term(self) -> Node:
        factors = [self.factor()]
        while self.peek() == "AND":
            self.eat("AND")
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else And(tuple(factors))

    def factor(self) -> Node:
        kind = self.peek()
        if kind == "NOT":
            self.eat("NOT")
            return Not(self.factor())
        if kind == "lpar":
            self.eat("lpar")
            node = self.expr()
            self.eat("rpar")
            return node
        if kind == "word":
            first = self.eat("word")
            if self.peek() in ("plus", "gt", "geq", "eq"):
                return self.sumcmp(first)
            return Var(first)
        raise ValueError(f"unexpected token {self.tokens[self.pos][1]!r} in rule")

    def sumcmp(self, first: str) -> Node:
        terms = [first]
        while self.peek() == "plus":
            self.eat("plus")
            terms.append(self.eat("word"))
        kind = self.peek()
        if kind == "geq":
            op = self.eat("geq")
        elif kind == "gt":
            op = self.eat("gt")
        elif kind == "eq":
            op = self.eat("eq")
        else:
            raise ValueError("sum comparison needs '>', '>=' or '='")
        bound = int(self.eat("int"))
        return SumCmp(tuple(terms), op, bound)


def parse_boolean_rule(text: str) -> BooleanRule:
    parser = _Parser(text)
    root = parser.expr()
    parser.eat("end")
    names: list[str] = []
    _collect_vars(root, names)
    if not names:
        raise ValueError("rule references no variables")
    return BooleanRule(root=root, variables=tuple(names))


# ---------------------------------------------------------------------------
# configured systems


@dataclass
class BooleanSystem:
    """A rule with designated observables, ready for benchmarking.

    ``statistic`` is the coarsest partition of the observable input states
    whose cells share identical target conditionals (None when every state
    has a distinct conditional).  ``local_ok`` says whether that partition
    also has a state leaving both X and Z random, which is what makes it
    usable for orientation.
    """

    name: str
    rule: BooleanRule
    observables: tuple[str, ...]
    hidden: tuple[str, ...]
    hidden_p: dict[str, float]
    exact: ProbTable
    statistic: SufficientStatistic | None
    local_ok: bool

    def sample(self, n_rows: int, seed: int) -> SampleDataset:
        flat = self.exact.mass.ravel()
        rng = np.random.default_rng(seed)
        idx = rng.choice(flat.size, size=n_rows, p=flat)
        rows = np.stack(np.unravel_index(idx, self.exact.mass.shape), axis=1)
        return SampleDataset(self.exact.variables, rows)


def _observable_weight(observables: tuple[str, ...], state: tuple[int, ...]) -> float:
    by_name = dict(zip(observables, state))
    x = by_name["X"]
    w = OBS_X_P if x == 1 else 1 - OBS_X_P
    p_v1 = OBS_V1_LINK[0] + OBS_V1_LINK[1] * x
    w *= p_v1 if by_name["V1"] == 1 else 1 - p_v1
    if "V2" in by_name:
        w *= 0.5
    return w


def boolean_config(
    rule: BooleanRule | str,
    observables: Iterable[str] = ("X", "V1"),
    hidden_p: float | Mapping[str, float] = 0.5,
    name: str = "",
) -> BooleanSystem:
    """Fix observables and hidden marginals; precompute table and ground truth.

    Observables are X, V1 and optionally V2; X is a fair coin, V1 follows
    the standard link p(V1=1|x)=0.4+0.2x, V2 (when present) is an
    independent fair coin, and every hidden variable is an independent
    coin with marginal ``hidden_p`` (a float, or a per-name mapping).
    """
    if isinstance(rule, str):
        rule = parse_boolean_rule(rule)
    observables = tuple(observables)
    if observables not in (("X", "V1"), ("X", "V1", "V2")):
        raise ValueError("observables must be ('X','V1') or ('X','V1','V2')")
    missing = [v for v in observables if v not in rule.variables]
    if missing:
        raise ValueError(f"observables {missing} do not appear in the rule")
    hidden = tuple(v for v in rule.variables if v not in observables)
    if isinstance(hidden_p, Mapping):
        p_map = {h: float(hidden_p.get(h, 0.5)) for h in hidden}
    else:
        p_map = {h: float(hidden_p) for h in hidden}
    for h, p in p_map.items():
        if not 0 < p < 1:
            raise ValueError(f"hidden marginal for {h} must be in (0,1)")

    obs_shape = tuple(2 for _ in observables)
    mass = np.zeros(obs_shape + (2,))
    for obs_state in np.ndindex(*obs_shape):
        w_obs = _observable_weight(observables, obs_state)
        for hid_state in np.ndindex(*(2 for _ in hidden)):
            w = w_obs
            for h, s in zip(hidden, hid_state):
                w *= p_map[h] if s == 1 else 1 - p_map[h]
            env = dict(zip(observables, obs_state)) | dict(zip(hidden, hid_state))
            mass[obs_state + (rule.evaluate(env),)] += w
    variables = [VariableSpec(v, 2) for v in observables] + [VariableSpec("Z", 2)]
    exact = ProbTable(variables, mass)

    statistic = _row_partition(exact, observables)
    local_ok = bool(statistic) and local_criteria(exact, statistic, "X", "Z")
    return BooleanSystem(
        name=name or rule.render(),
        rule=rule,
        observables=observables,
        hidden=hidden,
        hidden_p=p_map,
        exact=exact,
        statistic=statistic,
        local_ok=local_ok,
    )


def _row_partition(
    exact: ProbTable, inputs: tuple[str, ...], tol: float = 1e-12
) -> SufficientStatistic | None:
    """Coarsest screening partition: group equal target conditionals.

    Returns None when no two input states share a conditional (only the
    trivial identity partition screens, i.e. there is no statistic).
    """
    n_z = exact.cardinality("Z")
    ordered = exact.marginal(list(inputs) + ["Z"])
    rows = ordered.mass.reshape(-1, n_z)
    totals = rows.sum(axis=1)
    cond = np.divide(rows, totals[:, None], out=np.full_like(rows, np.nan), where=totals[:, None] > 0)
    labels = np.full(rows.shape[0], -1, dtype=np.int64)
    classes: list[np.ndarray] = []
    for i in range(rows.shape[0]):
        for ci, rep in enumerate(classes):
            same = (
                np.allclose(cond[i], rep, atol=tol, equal_nan=True)
                if totals[i] > 0
                else False
            )
            if same:
                labels[i] = ci
                break
        if labels[i] < 0:
            labels[i] = len(classes)
            classes.append(cond[i])
    if len(classes) >= rows.shape[0]:
        return None
    return SufficientStatistic(
        input_variables=tuple(VariableSpec(n, 2) for n in inputs),
        labels=labels,
        cardinality=len(classes),
    )


@functools.lru_cache(maxsize=1)
def builtin_boolean_configs() -> dict[str, BooleanSystem]:
    """Canonical gate systems used by the benchmarks and tests.

    Bivariate: ``or_gate`` and ``and_gate`` carry the textbook OR/AND
    statistics; ``gated_identity`` has a three-state statistic that fails
    the local criteria (every statistic state freezes X or Z);
    ``two_path`` has the sum statistic only because its two gates share
    the same hidden marginal; ``asym_two_path`` and ``asym_veto`` break
    that symmetry with unequal hidden chains and have no statistic at all.
    Trivariate: gates and a threshold rule over (X, V1, V2), a
    local-criteria failure, and an asymmetric no-statistic rule.
    """
    defs_bi = {
        "or_gate": "(X OR V1) AND U1",
        "and_gate": "(X AND V1) OR U1",
        "gated_identity": "V1 AND (X OR U1)",
        "two_path": "(X AND U1) OR (V1 AND U2)",
        "asym_two_path": "(X AND U1) OR (V1 AND U2 AND U3)",
        "asym_veto": "(X OR U1) AND (V1 OR (U2 AND U3))",
    }
    defs_tri = {
        "or3_gate": "(X OR V1 OR V2) AND U1",
        "and3_gate": "(X AND V1 AND V2) OR U1",
        "majority_gate": "(X + V1 + V2 > 1) AND U1",
        "gated_pair3": "V1 AND V2 AND (X OR U1)",
        "asym_three": "(X AND U1) OR (V1 AND U2 AND U3) OR (V2 AND U4 AND U5 AND U6)",
    }
    out: dict[str, BooleanSystem] = {}
    for name, text in defs_bi.items():
        out[name] = boolean_config(text, ("X", "V1"), name=name)
    for name, text in defs_tri.items():
        out[name] = boolean_config(text, ("X", "V1", "V2"), name=name)
    return out
