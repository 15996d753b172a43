"""Statistic selection: capacity descent, strength sweeps, input escalation.

The screening partition each family admits is recomputed with the
exhaustive-partition oracle before any selection verdict is trusted.
"""

import numpy as np
import pytest

from ibcd import (
    IBSSIQuery,
    ProbTable,
    SufficientStatistic,
    VariableSpec,
    algorithm1,
    builtin_boolean_configs,
    consistency_score,
    estimate_joint,
    generate_suite,
    ibssi_sweep,
    input_escalation,
    local_criteria,
    sample,
    split_criteria,
    statistic_partition_equal,
)
from ibcd.generators import GlmSpec

from oracles import canon, coarsest_zero_ci, joint_matrix, stat_partition


def one_config(family, n=4, seed=0):
    return generate_suite(
        family, count=1, n_set=(n,), p_set=(0.5,), sigma_set=(1.0,), seed=seed
    )[0]


def exact_query(config, inputs=("X", "V1"), **kw):
    exact = config.analysis_table()
    return IBSSIQuery(x="X", z="Z", inputs=tuple(inputs), train=exact, test=exact, **kw)


# Low-information system used for the strength-set contrast below; drawn
# from the additive generator (suite seed 0, grid slot 798) and frozen so
# the test does not pay for regenerating the whole suite.
LOW_INFO_SPEC = GlmSpec(
    family="additive",
    coeffs=(
        -0.5762965708043799,
        -1.1641693675041376,
        1.5653225621224531,
        -0.7214432525841974,
        -0.20633641894799615,
        0.13563438237384062,
    ),
    p_x=0.7,
    p_v1=0.3,
    n=4,
)


# --- single-strength decision ----------------------------------------------


def test_accepts_additive_exact_and_matches_partition_oracle():
    config = one_config("additive")
    exact = config.analysis_table()
    states, m = joint_matrix(exact, ("X", "V1"), "Z")
    coarsest = coarsest_zero_ci(states, m)
    assert len(coarsest) == 1
    expected = canon(coarsest[0])
    assert len(expected) == 3

    verdict = algorithm1(exact_query(config), 50.0, seed=0)
    assert verdict.accepted
    assert verdict.beta_prime == 50.0
    assert verdict.statistic.cardinality == 3
    assert stat_partition(verdict.statistic) == expected
    assert verdict.reason == "accepted"


def test_rejects_saturated_exact_input():
    config = one_config("saturated")
    verdict = algorithm1(exact_query(config, inputs=("X", "V1", "V2")), 100.0, seed=0)
    assert not verdict.accepted
    assert verdict.statistic is None
    assert verdict.beta_prime is None
    # the map never gives up a cluster, so the run stops at the first gate
    assert verdict.reason == "no compression at full capacity"


def test_identity_statistic_fails_input_entropy_screen():
    config = one_config("additive")
    exact = config.analysis_table()
    identity = SufficientStatistic(
        input_variables=(VariableSpec("X", 2), VariableSpec("V1", 2)),
        labels=np.arange(4),
        cardinality=4,
    )
    ok, values = split_criteria(exact, identity, "X", "Z")
    assert not ok
    value, bound = values["input_entropy"]
    assert value == pytest.approx(0.0, abs=1e-12)
    assert bound > 0


def test_rejects_pair_with_no_information():
    mass = np.full((2, 2, 2), 0.125)
    table = ProbTable(
        [VariableSpec("X", 2), VariableSpec("V1", 2), VariableSpec("Z", 2)], mass
    )
    q = IBSSIQuery(x="X", z="Z", inputs=("X", "V1"), train=table, test=table)
    verdict = algorithm1(q, 50.0, seed=0)
    assert not verdict.accepted
    assert verdict.reason == "no information between inputs and target"
    assert any("no information" in d.get("note", "") for d in verdict.diagnostics)


def test_single_binary_input_is_too_small():
    config = one_config("additive")
    exact = config.analysis_table()
    q = IBSSIQuery(x="X", z="Z", inputs=("X",), train=exact, test=exact)
    with pytest.raises(ValueError, match="too small to compress"):
        algorithm1(q, 50.0)


def test_query_validation():
    config = one_config("additive")
    exact = config.analysis_table()
    with pytest.raises(ValueError, match="must be among inputs"):
        IBSSIQuery(x="V2", z="Z", inputs=("X", "V1"), train=exact, test=exact)
    with pytest.raises(ValueError, match="cannot be an input"):
        IBSSIQuery(x="X", z="Z", inputs=("X", "Z"), train=exact, test=exact)
    with pytest.raises(KeyError, match="lacks variables"):
        IBSSIQuery(x="X", z="W", inputs=("X", "V1"), train=exact, test=exact)


def test_diagnostics_trace_capacity_descent():
    config = one_config("additive")
    verdict = algorithm1(exact_query(config), 50.0, seed=0)
    caps = [d["max_cardinality"] for d in verdict.diagnostics if "max_cardinality" in d]
    assert caps[0] == 4
    assert caps == sorted(caps, reverse=True)
    assert any("criteria" in d for d in verdict.diagnostics)


# --- sweep over trade-off strengths ----------------------------------------


def test_sweep_accepts_every_strength_on_exact_additive():
    config = one_config("additive")
    q = exact_query(config)
    for bp in (25.0, 50.0, 75.0, 100.0):
        assert algorithm1(q, bp, seed=0).accepted, bp


def test_sweep_rejects_saturated_for_all_strengths():
    config = one_config("saturated")
    verdict = ibssi_sweep(exact_query(config, inputs=("X", "V1", "V2")), seed=0)
    assert not verdict.accepted
    assert verdict.reason == "no trade-off strength produced an accepted statistic"


def test_low_information_system_only_weakest_strength_accepts():
    # At this sample size the stronger trade-offs refuse to compress the
    # noisy table at all, so widening the strength set flips the verdict.
    train = estimate_joint(sample(LOW_INFO_SPEC, 5000, seed=80806))
    test = estimate_joint(sample(LOW_INFO_SPEC, 5000, seed=80807))
    full = IBSSIQuery(x="X", z="Z", inputs=("X", "V1"), train=train, test=test)
    verdict = ibssi_sweep(full, seed=0)
    assert verdict.accepted
    assert verdict.beta_prime == 25.0
    assert verdict.statistic.cardinality == 3

    trimmed = IBSSIQuery(
        x="X",
        z="Z",
        inputs=("X", "V1"),
        train=train,
        test=test,
        beta_primes=(50.0, 75.0, 100.0),
    )
    assert not ibssi_sweep(trimmed, seed=0).accepted


def test_sweep_rejection_survives_strength_removal():
    # if the full set rejects, every subset must reject as well
    config = one_config("saturated")
    exact = config.analysis_table()
    for subset in ((25.0, 50.0), (100.0,), (25.0,)):
        q = IBSSIQuery(
            x="X",
            z="Z",
            inputs=("X", "V1", "V2"),
            train=exact,
            test=exact,
            beta_primes=subset,
        )
        assert not ibssi_sweep(q, seed=0).accepted, subset


def test_sweep_requires_nonempty_strength_set():
    config = one_config("additive")
    q = exact_query(config)
    q.beta_primes = ()
    with pytest.raises(ValueError, match="must not be empty"):
        ibssi_sweep(q)


def test_cross_consistent_mode_accepts_agreeing_strengths():
    config = one_config("additive")
    verdict = ibssi_sweep(exact_query(config, cross_consistent=True), seed=0)
    assert verdict.accepted
    assert verdict.statistic.cardinality == 3
    # every strength was evaluated, not just the first acceptance
    strengths = {d["beta_prime"] for d in verdict.diagnostics}
    assert strengths == {25.0, 50.0, 75.0, 100.0}


# --- escalation over candidate input sets -----------------------------------


def test_escalation_stops_at_first_pool_for_additive():
    config = one_config("additive")
    result = input_escalation(exact_query(config), config.input_pools(), seed=0)
    assert result.inputs == ("X", "V1")
    assert len(result.attempts) == 1
    assert result.verdict.accepted


def test_escalation_needs_extra_parent_for_additive_child():
    config = one_config("additive_child", n=8)
    exact = config.analysis_table()
    result = input_escalation(exact_query(config), config.input_pools(), seed=0)
    assert result.inputs == ("X", "V1", "Y")
    assert result.verdict.accepted
    assert result.verdict.statistic.cardinality == 6
    assert [(pool, v.accepted) for pool, v in result.attempts] == [
        (("X", "V1"), False),
        (("X", "V1", "Y"), True),
    ]
    truth = config.true_partition(("X", "V1", "Y"))
    assert statistic_partition_equal(result.verdict.statistic, truth)
    ok, _ = split_criteria(exact, result.verdict.statistic, "X", "Z")
    assert ok


def test_escalation_needs_second_noise_parent_for_additive_aux():
    config = one_config("additive_aux", n=8)
    result = input_escalation(exact_query(config), config.input_pools(), seed=0)
    assert result.inputs == ("X", "V1", "V2")
    assert result.verdict.statistic.cardinality == 7
    assert not result.attempts[0][1].accepted
    truth = config.true_partition(("X", "V1", "V2"))
    assert statistic_partition_equal(result.verdict.statistic, truth)


def test_escalation_reports_exhausted_pools():
    config = one_config("saturated", n=8)
    result = input_escalation(exact_query(config), config.input_pools(), seed=0)
    assert result.inputs is None
    assert not result.verdict.accepted
    assert len(result.attempts) == 2


def test_escalation_rejects_empty_pool_list():
    config = one_config("additive")
    with pytest.raises(ValueError, match="at least one candidate"):
        input_escalation(exact_query(config), [], seed=0)


# --- local support criteria --------------------------------------------------


def test_local_criteria_rejects_gated_identity_rule():
    system = builtin_boolean_configs()["gated_identity"]
    assert system.local_ok is False
    assert not local_criteria(system.exact, system.statistic, "X", "Z")


def test_local_criteria_accepts_additive_sum():
    config = one_config("additive")
    exact = config.analysis_table()
    stat = config.true_partition(("X", "V1"))
    assert local_criteria(exact, stat, "X", "Z")


def test_local_criteria_accepts_or_gate():
    system = builtin_boolean_configs()["or_gate"]
    assert system.local_ok is True
    assert local_criteria(system.exact, system.statistic, "X", "Z")


def test_local_criteria_constant_statistic_tracks_marginal_entropies():
    constant = SufficientStatistic(
        input_variables=(VariableSpec("X", 2), VariableSpec("V1", 2)),
        labels=np.zeros(4, dtype=np.int64),
        cardinality=1,
    )
    config = one_config("additive")
    assert local_criteria(config.analysis_table(), constant, "X", "Z")

    # collapse the pair variable: no statistic state can leave it random
    frozen_x = ProbTable(
        [VariableSpec("X", 2), VariableSpec("V1", 2), VariableSpec("Z", 2)],
        np.array([[[0.3, 0.2], [0.25, 0.25]], [[0.0, 0.0], [0.0, 0.0]]]),
    )
    assert not local_criteria(frozen_x, constant, "X", "Z")


# --- consistency against the exact generator ---------------------------------


def test_true_partition_is_consistent():
    config = one_config("additive")
    exact = config.analysis_table()
    result = consistency_score(config.true_partition(("X", "V1")), exact, "X", "Z")
    assert result.consistent
    assert result.residual_info <= 1e-9
    assert result.input_entropy > 0
    assert result.target_entropy > 0


def test_refined_partial_partition_stays_consistent():
    # splitting one cell of the screening partition loses nothing: the
    # 7-cell refinement on the widened pool still absorbs all pair info
    config = one_config("additive", n=8)
    exact = config.analysis_table()
    truth = config.true_partition(("X", "V1", "V2"))
    assert truth.cardinality == 6
    labels = truth.labels.copy()
    split_at = 5  # state (x=1, v1=0, v2=1), row-major
    assert int(np.sum(labels == labels[split_at])) >= 2
    labels[split_at] = truth.cardinality
    refined = SufficientStatistic(
        input_variables=truth.input_variables,
        labels=labels,
        cardinality=truth.cardinality + 1,
    )
    result = consistency_score(refined, exact, "X", "Z")
    assert result.consistent
    assert result.residual_info <= 1e-9


def test_merging_states_with_different_responses_is_inconsistent():
    config = one_config("additive")
    exact = config.analysis_table()
    merged = SufficientStatistic(
        input_variables=(VariableSpec("X", 2), VariableSpec("V1", 2)),
        labels=np.array([0, 1, 1, 0]),  # pools x+v1 = 0 with x+v1 = 2
        cardinality=2,
    )
    result = consistency_score(merged, exact, "X", "Z")
    assert not result.consistent
    assert result.residual_info > 1e-6


# --- cross-cutting properties -------------------------------------------------


def test_acceptance_implies_test_criteria_hold():
    config = one_config("additive")
    exact = config.analysis_table()
    verdict = ibssi_sweep(exact_query(config), seed=0)
    assert verdict.accepted
    ok, values = split_criteria(exact, verdict.statistic, "X", "Z")
    assert ok
    for key in ("input_entropy", "target_entropy", "residual_info"):
        assert key in values


def test_relabeling_changes_no_screen():
    config = one_config("additive")
    exact = config.analysis_table()
    truth = config.true_partition(("X", "V1"))
    perm = np.array([2, 0, 1])
    shuffled = SufficientStatistic(
        input_variables=truth.input_variables,
        labels=perm[truth.labels],
        cardinality=truth.cardinality,
    )
    assert statistic_partition_equal(truth, shuffled)
    assert split_criteria(exact, truth, "X", "Z")[0] == split_criteria(
        exact, shuffled, "X", "Z"
    )[0]
    a = consistency_score(truth, exact, "X", "Z")
    b = consistency_score(shuffled, exact, "X", "Z")
    assert a.consistent == b.consistent
    assert a.residual_info == pytest.approx(b.residual_info, abs=1e-12)
    assert local_criteria(exact, truth, "X", "Z") == local_criteria(
        exact, shuffled, "X", "Z"
    )


def test_exact_acceptances_are_always_consistent():
    for family in ("additive", "additive_aux", "additive_child", "additive_two", "products"):
        config = one_config(family, n=8)
        exact = config.analysis_table()
        q = IBSSIQuery(
            x="X", z="Z", inputs=("X", "V1"), train=exact, test=exact, beta_primes=(100.0,)
        )
        result = input_escalation(q, config.input_pools(), seed=0)
        assert result.verdict.accepted, family
        score = consistency_score(result.verdict.statistic, exact, "X", "Z")
        assert score.consistent, family
        truth = config.true_partition(result.inputs)
        assert statistic_partition_equal(result.verdict.statistic, truth), family
