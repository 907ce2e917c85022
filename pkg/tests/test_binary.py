"""State classification, boundary blends, and the acceptance-hull LP."""

import numpy as np
import pytest

import oracles
from persuade import (
    ActionSpace,
    Belief,
    OptimalPlan,
    PersuasionInstance,
    SenderUtility,
    StateSpace,
    classify_states,
    compute_k01,
    full_persuasion_binary,
    make_model,
    solve_binary,
    verify_threshold,
)
from persuade.binary import accept_vertices
from conftest import threshold_instance


def _binary_instance(prior, receiver, labels=None, v1=None):
    d = len(prior)
    names = labels or tuple(str(w) for w in range(d))
    table = np.column_stack([np.zeros(d), np.ones(d) if v1 is None else v1])
    return PersuasionInstance(
        states=StateSpace(names),
        actions=ActionSpace(("no", "yes")),
        prior=Belief(np.asarray(prior, dtype=float)),
        sender=SenderUtility(table),
        receiver=receiver,
    )


def _queue_style_model(d, tau, beta):
    lengths = np.arange(1.0, d + 1.0)
    u = np.column_stack([np.zeros(d), tau - lengths])
    g = np.column_stack([np.zeros(d), lengths])
    return make_model("mean_stdev", u=u, g_mean=g, g_var=g, beta=beta)


def _expected_binary(du):
    du = np.asarray(du, dtype=float)
    return make_model("expected", u=np.column_stack([np.zeros(du.size), du]))


def test_classify_states_queue_frozen():
    inst = _binary_instance(
        np.full(6, 1.0 / 6.0), _queue_style_model(6, 7.5, 2.5)
    )
    cls = classify_states(inst)
    assert cls.accept == (0, 1, 2)
    assert cls.strict_reject == (3, 4, 5)
    assert cls.reject == (3, 4, 5)
    expected = [
        4.0,
        1.9644660940672622,
        0.16987298107780724,
        -1.5,
        -3.0901699437494745,
        -4.623724356957945,
    ]
    assert np.allclose(cls.differentials, expected, atol=1e-12)


def test_classify_boundary_state_joins_both_sides():
    inst = _binary_instance([0.4, 0.3, 0.3], _expected_binary([0.0, 1.0, -1.0]))
    cls = classify_states(inst)
    assert 0 in cls.accept and 0 in cls.reject
    assert cls.strict_reject == (2,)


def test_compute_k01_threshold_game():
    inst = threshold_instance()
    k01 = compute_k01(inst)
    assert len(k01) == 3
    for vert, w1 in zip(k01, (0, 1, 2)):
        assert (vert.reject_state, vert.accept_state) == (3, w1)
        assert vert.gamma == pytest.approx(1.0 / 3.0, abs=1e-9)
        target = np.zeros(4)
        target[3], target[w1] = vert.gamma, 1 - vert.gamma
        assert np.allclose(vert.posterior, target)
        assert not vert.degenerate


def test_compute_k01_accepts_closed_form_and_checks_boundary():
    inst = threshold_instance()
    k01 = compute_k01(inst, gamma_fn=lambda w0, w1: 1.0 / 3.0)
    assert all(v.gamma == pytest.approx(1.0 / 3.0, abs=1e-15) for v in k01)
    with pytest.raises(ValueError, match="boundary"):
        compute_k01(inst, gamma_fn=lambda w0, w1: 0.9)


def test_compute_k01_degenerate_boundary_accept_state():
    inst = _binary_instance([0.4, 0.3, 0.3], _expected_binary([1.0, 0.0, -1.0]))
    k01 = compute_k01(inst)
    by_pair = {(v.reject_state, v.accept_state): v for v in k01}
    assert set(by_pair) == {(2, 0), (2, 1)}
    assert by_pair[(2, 0)].gamma == pytest.approx(0.5, abs=1e-9)
    vert = by_pair[(2, 1)]
    assert vert.gamma == 0.0
    assert vert.degenerate
    assert np.allclose(vert.posterior, [0.0, 1.0, 0.0])


def test_compute_k01_empty_without_strict_rejects():
    inst = _binary_instance([0.5, 0.5], _expected_binary([1.0, 2.0]))
    assert compute_k01(inst) == ()


def test_accept_vertices_orders_pures_then_blends():
    inst = threshold_instance()
    cls = classify_states(inst)
    k01 = compute_k01(inst, cls)
    v1, tags = accept_vertices(cls, k01, inst.n_states)
    assert v1.shape == (6, 4)
    assert np.allclose(v1[:3], np.eye(4)[:3])
    assert tags[:3] == [None, None, None]
    assert all(t is not None for t in tags[3:])


def test_solve_binary_two_state_frozen():
    inst = _binary_instance(
        [0.7, 0.3],
        _expected_binary([-1.0, 1.0]),
        labels=("innocent", "guilty"),
    )
    plan = solve_binary(inst)
    assert plan.value == pytest.approx(0.6, abs=1e-9)
    assert np.allclose(plan.t[1], [0.3, 0.3], atol=1e-9)
    assert np.allclose(plan.t[0], [0.4, 0.0], atol=1e-9)
    labels = {a.label for a in plan.atoms}
    assert labels == {"mix(innocent,guilty,0.5)", "innocent"}
    assert oracles.revelation_lp(
        inst.prior.weights,
        np.array(inst.receiver.params["u"], dtype=float),
        inst.sender.table,
    ) == pytest.approx(plan.value, abs=1e-9)


def test_solve_binary_threshold_game_full_value():
    inst = threshold_instance()
    plan = solve_binary(inst)
    assert plan.value == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(plan.t[1], inst.prior.weights, atol=1e-8)
    assert plan.t[0].sum() <= 1e-8
    assert len(plan.atoms) <= 4
    assert full_persuasion_binary(inst)


def test_solve_binary_matches_brute_force_oracle():
    cases = [
        ([0.2, 0.2, 0.6], [1.0, 1.0, -2.0], 0.6),
        ([0.1, 0.6, 0.3], [2.0, -1.0, -1.0], 0.3),
    ]
    for prior, du, frozen in cases:
        inst = _binary_instance(prior, _expected_binary(du))
        plan = solve_binary(inst)
        assert plan.value == pytest.approx(frozen, abs=1e-9)
        v = inst.sender.table
        oracle = oracles.split_brute_force(
            np.asarray(prior),
            lambda mu, a, du=np.asarray(du): float(mu @ du) if a else 0.0,
            v,
            k=6,
        )
        assert plan.value == pytest.approx(oracle, abs=1e-9)


def test_solve_binary_spot_check_catches_false_convexity():
    # Rejection holds on two disjoint slabs of mu_0; declaring the region
    # convex is a lie the midpoint probe should expose.
    model = make_model(
        "custom",
        evaluator=lambda mu, a: 0.2 - abs(mu[0] - 0.5) if a else 0.0,
        n_states=3,
        n_actions=2,
        convex_reject_region=True,
    )
    inst = _binary_instance([0.4, 0.3, 0.3], model)
    with pytest.raises(ValueError, match="midpoint"):
        solve_binary(inst)


def test_solve_binary_requires_declaration_and_sender_preference():
    undeclared = make_model(
        "custom",
        evaluator=lambda mu, a: mu[0] - 0.5 if a else 0.0,
        n_states=2,
        n_actions=2,
        convex_reject_region=False,
    )
    with pytest.raises(ValueError, match="convex_reject_region"):
        solve_binary(_binary_instance([0.5, 0.5], undeclared))

    inst = _binary_instance(
        [0.5, 0.5], _expected_binary([1.0, -1.0]), v1=np.array([-1.0, -1.0])
    )
    with pytest.raises(ValueError, match="prefer"):
        solve_binary(inst)

    three = threshold_instance()
    wide = PersuasionInstance(
        states=three.states,
        actions=ActionSpace(("a", "b", "c")),
        prior=three.prior,
        sender=SenderUtility(np.zeros((4, 3))),
        receiver=make_model("expected", u=np.zeros((4, 3))),
    )
    with pytest.raises(ValueError, match="two actions"):
        solve_binary(wide)


def test_full_persuasion_binary_frontier():
    model = _expected_binary([-1.0, 1.0])
    # Acceptance hull is {mu_1 >= 1/2}: the 0.3 prior misses, 0.6 makes it.
    out = _binary_instance([0.7, 0.3], model)
    inside = _binary_instance([0.4, 0.6], model)
    assert not full_persuasion_binary(out)
    assert full_persuasion_binary(inside)
    flat = _binary_instance([0.7, 0.3], model, v1=np.zeros(2))
    with pytest.raises(ValueError, match="strict"):
        full_persuasion_binary(flat)


def _plan(t1, t0, prior):
    return OptimalPlan(
        t=np.vstack([t0, t1]),
        prior=np.asarray(prior, dtype=float),
        value=float(np.sum(t1)),
        atoms=(),
    )


def test_verify_threshold_cutoff_and_witness():
    prior = [0.2, 0.2, 0.2, 0.4]
    good = _plan([0.2, 0.2, 0.1, 0.0], [0.0, 0.0, 0.1, 0.4], prior)
    report = verify_threshold(good, [0, 1, 2, 3])
    assert report.holds
    assert report.threshold_state == 2
    assert report.witness is None

    bad = _plan([0.2, 0.1, 0.2, 0.0], [0.0, 0.1, 0.0, 0.4], prior)
    report = verify_threshold(bad, [0, 1, 2, 3])
    assert not report.holds
    assert report.witness == (1, 2)

    full = _plan(prior, [0.0] * 4, prior)
    report = verify_threshold(full, [0, 1, 2, 3])
    assert report.holds and report.threshold_state is None

    with pytest.raises(ValueError):
        verify_threshold(good, [0, 1, 1, 3])


def test_verify_threshold_audits_order_against_blends():
    d = 6
    prior = np.array([0.2, 0.2, 0.2, 0.2, 0.1, 0.1])
    inst = _binary_instance(prior, _queue_style_model(d, 7.5, 2.5))
    t1 = prior * np.array([1, 1, 1, 0, 0, 0])
    plan = _plan(t1, prior - t1, prior)

    report = verify_threshold(plan, list(range(d)), instance=inst)
    assert report.holds and report.threshold_state == 3
    assert report.monotone_ok
    assert report.violations == ()

    swapped = verify_threshold(plan, [0, 1, 2, 4, 3, 5], instance=inst)
    assert swapped.monotone_ok is False
    assert any("blend weight" in v for v in swapped.violations)

    misplaced = verify_threshold(plan, [0, 1, 3, 2, 4, 5], instance=inst)
    assert misplaced.monotone_ok is False
    assert any("not strict-reject" in v for v in misplaced.violations)
