"""Boolean rule language and the gate systems configured from it."""

import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ibcd.booldsl import (
    And,
    Not,
    Or,
    SumCmp,
    Var,
    boolean_config,
    builtin_boolean_configs,
    parse_boolean_rule,
)

from oracles import coarsest_zero_ci, entropy_bits, joint_matrix, stat_partition

LI06_PATH = Path(__file__).resolve().parents[1] / "src" / "ibcd" / "data" / "li06_rules.txt"


# --- parsing and evaluation -----------------------------------------------


def test_evaluation_matches_python_semantics():
    rule = parse_boolean_rule("(X AND V1) OR (NOT U1)")
    assert rule.variables == ("X", "V1", "U1")
    for x, v1, u1 in itertools.product((0, 1), repeat=3):
        want = int((x and v1) or (not u1))
        assert rule.evaluate({"X": x, "V1": v1, "U1": u1}) == want
    # in particular the gate fires whenever both inputs do
    for u1 in (0, 1):
        assert rule.evaluate({"X": 1, "V1": 1, "U1": u1}) == 1


def test_threshold_form_equals_and_gate():
    threshold = parse_boolean_rule("X + V1 > 1")
    gate = parse_boolean_rule("X AND V1")
    for x, v1 in itertools.product((0, 1), repeat=2):
        env = {"X": x, "V1": v1}
        assert threshold.evaluate(env) == gate.evaluate(env)


def test_threshold_operators():
    env = {"X": 1, "V1": 0}
    assert parse_boolean_rule("X + V1 >= 1").evaluate(env) == 1
    assert parse_boolean_rule("X + V1 = 1").evaluate(env) == 1
    assert parse_boolean_rule("X + V1 = 2").evaluate(env) == 0


def test_syntax_errors_report_location():
    with pytest.raises(ValueError, match="unexpected token"):
        parse_boolean_rule("X OR")
    with pytest.raises(ValueError, match="expected rpar"):
        parse_boolean_rule("(X AND V1")
    with pytest.raises(ValueError, match="cannot tokenize"):
        parse_boolean_rule("X ? V1")
    with pytest.raises(ValueError, match="sum comparison"):
        parse_boolean_rule("X + V1")


def test_variables_listed_in_first_appearance_order():
    rule = parse_boolean_rule("(V1 AND X) OR (U1 AND V1)")
    assert rule.variables == ("V1", "X", "U1")


_names = st.sampled_from(["X", "V1", "V2", "U1", "U2"])
_atoms = st.one_of(
    _names.map(Var),
    st.builds(
        SumCmp,
        st.lists(_names, min_size=1, max_size=3, unique=True).map(tuple),
        st.sampled_from([">", ">=", "="]),
        st.integers(min_value=0, max_value=3),
    ),
)
_ast = st.recursive(
    _atoms,
    lambda inner: st.one_of(
        inner.map(Not),
        st.builds(And, st.lists(inner, min_size=2, max_size=3).map(tuple)),
        st.builds(Or, st.lists(inner, min_size=2, max_size=3).map(tuple)),
    ),
    max_leaves=12,
)


@given(_ast)
def test_render_parse_round_trip(node):
    from ibcd.booldsl import BooleanRule

    text = BooleanRule(root=node, variables=("X",)).render()
    assert parse_boolean_rule(text).root == node


# --- configured systems -----------------------------------------------------


def test_or_gate_has_two_state_statistic():
    system = builtin_boolean_configs()["or_gate"]
    assert system.statistic is not None
    assert system.statistic.cardinality == 2
    assert system.local_ok
    # the partition is exactly the OR of the observables
    or_rule = parse_boolean_rule("X OR V1")
    cells = {}
    for x, v1 in itertools.product((0, 1), repeat=2):
        cells.setdefault(or_rule.evaluate({"X": x, "V1": v1}), set()).add((x, v1))
    expected = frozenset(frozenset(c) for c in cells.values())
    assert stat_partition(system.statistic) == expected


def test_and_gate_statistic_matches_exhaustive_search():
    system = builtin_boolean_configs()["and_gate"]
    states, m = joint_matrix(system.exact, ("X", "V1"), "Z")
    coarsest = coarsest_zero_ci(states, m, tol=1e-12)
    assert len(coarsest) == 1
    assert frozenset(frozenset(c) for c in coarsest[0]) == stat_partition(system.statistic)


def test_gated_identity_statistic_exists_but_is_unusable():
    system = builtin_boolean_configs()["gated_identity"]
    assert system.statistic is not None
    assert system.statistic.cardinality == 3
    assert system.local_ok is False
    # reference check: every statistic cell pins down X or Z
    states, m = joint_matrix(system.exact, ("X", "V1"), "Z")
    labels = np.asarray(system.statistic.labels).tolist()
    for cell in range(system.statistic.cardinality):
        members = [i for i, lab in enumerate(labels) if lab == cell]
        block = m[members] / m[members].sum()
        p_z = block.sum(axis=0)
        p_x = np.zeros(2)
        for i, row in zip(members, block):
            p_x[states[i][0]] += row.sum()
        assert min(entropy_bits(p_x), entropy_bits(p_z)) <= 1e-12


def test_asymmetric_rules_admit_no_coarsening():
    systems = builtin_boolean_configs()
    for name in ("asym_two_path", "asym_veto", "asym_three"):
        system = systems[name]
        assert system.statistic is None, name
        states, m = joint_matrix(system.exact, system.observables, "Z")
        coarsest = coarsest_zero_ci(states, m, tol=1e-12)
        assert len(coarsest) == 1, name
        assert all(len(cell) == 1 for cell in coarsest[0]), name


def test_observable_marginals_and_link():
    system = builtin_boolean_configs()["or_gate"]
    table = system.exact
    assert table.marginal(["X"]).mass[1] == pytest.approx(0.5)
    for x in (0, 1):
        v1 = table.condition({"X": x}).marginal(["V1"]).mass
        assert v1[1] == pytest.approx(0.4 + 0.2 * x, abs=1e-12)


def test_unequal_hidden_coins_break_the_shared_path_statistic():
    symmetric = builtin_boolean_configs()["two_path"]
    assert symmetric.statistic is not None
    assert symmetric.statistic.cardinality == 3
    skewed = boolean_config(
        "(X AND U1) OR (V1 AND U2)", hidden_p={"U1": 0.3, "U2": 0.7}
    )
    assert skewed.hidden_p == {"U1": 0.3, "U2": 0.7}
    assert skewed.statistic is None


def test_builtin_roster():
    systems = builtin_boolean_configs()
    assert set(systems) == {
        "or_gate",
        "and_gate",
        "gated_identity",
        "two_path",
        "asym_two_path",
        "asym_veto",
        "or3_gate",
        "and3_gate",
        "majority_gate",
        "gated_pair3",
        "asym_three",
    }
    for name, system in systems.items():
        assert system.name == name
        assert system.exact.names[-1] == "Z"
        assert abs(system.exact.mass.sum() - 1.0) < 1e-12
    assert systems["majority_gate"].statistic.cardinality == 2
    assert systems["gated_pair3"].statistic.cardinality == 3
    assert systems["gated_pair3"].local_ok is False


def test_config_validation():
    with pytest.raises(ValueError, match="observables must be"):
        boolean_config("X AND V2", observables=("X", "V2"))
    with pytest.raises(ValueError, match="do not appear"):
        boolean_config("X AND U1", observables=("X", "V1"))
    with pytest.raises(ValueError, match="must be in"):
        boolean_config("X AND V1 AND U1", hidden_p=1.0)


def test_system_sampling_is_deterministic():
    system = builtin_boolean_configs()["or_gate"]
    a = system.sample(100, seed=5)
    b = system.sample(100, seed=5)
    assert np.array_equal(a.rows, b.rows)
    assert a.rows.shape == (100, 3)
    assert a.names == ("X", "V1", "Z")


@pytest.mark.skipif(not LI06_PATH.exists(), reason="rule transcription file not shipped")
def test_transcribed_rule_corpus_parses():
    for line in LI06_PATH.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rule = parse_boolean_rule(line.split("|")[-1])
        assert rule.variables
