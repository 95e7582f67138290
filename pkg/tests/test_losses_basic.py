"""Behavioral tests for the component class library.

Hand-computed prox values, structural invariants of the constrained
classes, parameter validation, and property tests for the reduction
that lets every masked prox ignore unknown entries.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import sigdecomp.losses as L
from sigdecomp.exceptions import DataError
from sigdecomp.signal import mask, mask_adjoint

from conftest import (
    all_class_instances,
    make_instance,
    prox_objective,
    production_prox,
    stable_seed,
)


def col(*entries):
    return np.asarray(entries, dtype=float).reshape(-1, 1)


# ---------------------------------------------------------------------------
# separable classes, scalar examples


def test_sum_square_scalar_prox():
    # min (1/(Tp)) x^2 + (rho/2)(x - v)^2  with T = p = 1, rho = 2
    out = L.SumSquare(1.0).mprox(col(1.0), 2.0)
    assert out.item() == pytest.approx(0.5)


def test_average_abs_soft_threshold():
    cls = L.AverageAbs(1.0)
    assert cls.mprox(col(3.0), 1.0).item() == pytest.approx(2.0)
    assert cls.mprox(col(-3.0), 1.0).item() == pytest.approx(-2.0)
    assert cls.mprox(col(0.7), 1.0).item() == 0.0


def test_quantile_asymmetric_threshold():
    cls = L.Quantile(1.0, tau=0.75)
    assert cls.mprox(col(3.0), 1.0).item() == pytest.approx(1.5)
    assert cls.mprox(col(-3.0), 1.0).item() == pytest.approx(-2.5)


def test_quantile_at_half_matches_average_abs():
    rng = np.random.default_rng(stable_seed("q50"))
    v = rng.normal(size=(9, 2))
    a = L.Quantile(1.7, tau=0.5).mprox(v, 0.9)
    b = L.AverageAbs(1.7).mprox(v, 0.9)
    np.testing.assert_array_equal(a, b)


def test_huber_prox_both_regimes():
    cls = L.Huber(1.0, M=1.0)
    # far from zero the penalty is linear, shrink by 2*lam*M/(Tp*rho)
    assert cls.mprox(col(5.0), 1.0).item() == pytest.approx(3.0)
    # near zero it is quadratic, same map as sum_square
    assert cls.mprox(col(0.5), 1.0).item() == pytest.approx(1.0 / 6.0)


def test_cardinality_hard_threshold():
    out = L.Cardinality(1.0).mprox(np.array([[2.0, 0.1]]), 1.0)
    np.testing.assert_array_equal(out, np.array([[2.0, 0.0]]))


def test_nonneg_clips_and_eval():
    cls = L.NonNeg()
    out = cls.mprox(col(-2.0, 1.5), 1.0)
    np.testing.assert_array_equal(out, col(0.0, 1.5))
    assert cls.eval_loss(col(0.0, 1.5)) == 0.0
    assert cls.eval_loss(col(-1e-9, 1.5)) == np.inf


def test_interval_clips_and_eval():
    cls = L.Interval(-1.0, 2.0)
    out = cls.mprox(col(-3.0, 0.3, 9.0), 1.0)
    np.testing.assert_array_equal(out, col(-1.0, 0.3, 2.0))
    assert cls.eval_loss(col(2.0)) == 0.0
    assert cls.eval_loss(col(2.1)) == np.inf


def test_finite_set_values_sorted_unique():
    cls = L.FiniteSet([2.0, -1.0, 2.0])
    np.testing.assert_array_equal(cls.values, [-1.0, 2.0])


def test_boolean_rounds_to_nearest_and_breaks_ties_down():
    cls = L.Boolean(0.765)
    v = col(0.4, 0.765 / 2.0, -5.0)
    np.testing.assert_array_equal(cls.mprox(v, 2.0), col(0.765, 0.0, 0.0))
    assert cls.eval_loss(col(0.0, 0.765)) == 0.0
    assert cls.eval_loss(col(0.2)) == np.inf


def test_finite_set_unweighted_entries_take_value_nearest_zero():
    cls = L.FiniteSet([-2.0, 0.5, 3.0])
    v = np.array([[2.9], [2.9], [-5.0]])
    w = np.array([[1.0], [0.0], [1.0]])
    out = cls.mprox(v, 1.0, weights=w)
    np.testing.assert_array_equal(out, col(3.0, 0.5, -2.0))


# ---------------------------------------------------------------------------
# time-structured classes


def test_smooth_fixed_points():
    t = np.arange(8.0).reshape(-1, 1)
    affine = 0.3 * t - 1.0
    np.testing.assert_allclose(L.Smooth(5.0, order=2).mprox(affine, 1.0), affine)
    const = np.full((8, 1), 2.5)
    np.testing.assert_allclose(L.Smooth(5.0, order=1).mprox(const, 1.0), const)
    assert L.Smooth(5.0, order=2).eval_loss(affine) == pytest.approx(0.0)


def test_l1_second_diff_affine_fixed_point():
    t = np.arange(6.0).reshape(-1, 1)
    affine = 1.2 * t + 0.4
    cls = L.L1SecondDiff(0.8)
    np.testing.assert_allclose(cls.mprox(affine, 1.0), affine, atol=1e-12)
    assert cls.eval_loss(affine) == pytest.approx(0.0, abs=1e-12)


def test_l1_second_diff_first_value_zero_constraint():
    cls = L.L1SecondDiff(1.0, first_value_zero=True)
    assert cls.eval_loss(np.ones((4, 1))) == np.inf
    ramp = 0.3 * np.arange(5.0).reshape(-1, 1)
    assert cls.eval_loss(ramp) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(stable_seed("fv0"))
    out = cls.mprox(rng.normal(size=(7, 2)), 1.0)
    np.testing.assert_array_equal(out[0], 0.0)


def test_monotone_pools_adjacent_violators():
    out = L.Monotone().mprox(col(3.0, 1.0, 2.0), 1.0)
    np.testing.assert_allclose(out, col(2.0, 2.0, 2.0))
    sorted_v = col(-1.0, 0.0, 2.0)
    np.testing.assert_allclose(L.Monotone().mprox(sorted_v, 1.0), sorted_v)


def test_monotone_output_nondecreasing_under_weights():
    rng = np.random.default_rng(stable_seed("mono"))
    v = rng.normal(size=(20, 2))
    w = rng.uniform(0.1, 2.0, size=(20, 2))
    out = L.Monotone(extra_smooth=0.3).mprox(v, 1.3, weights=w)
    assert np.all(np.diff(out, axis=0) >= -1e-10)


def test_sum_l2_row_soft_threshold():
    out = L.SumL2(1.0).mprox(np.array([[0.01, 0.02], [3.0, 4.0]]), 1.0)
    np.testing.assert_allclose(out, np.array([[0.0, 0.0], [2.4, 3.2]]))


def test_basis_projects_onto_span():
    rng = np.random.default_rng(stable_seed("basis"))
    theta = rng.normal(size=(10, 3))
    cls = L.Basis(theta)
    v = rng.normal(size=(10, 2))
    out = cls.mprox(v, 1.0)
    # output lies in the span and projecting again is a no-op
    z, *_ = np.linalg.lstsq(theta, out, rcond=None)
    np.testing.assert_allclose(theta @ z, out, atol=1e-10)
    np.testing.assert_allclose(cls.mprox(out, 1.0), out, atol=1e-10)
    assert cls.eval_loss(out) == 0.0
    assert cls.eval_loss(v) == np.inf


def test_soft_basis_zero_only_on_span():
    rng = np.random.default_rng(stable_seed("soft_basis"))
    theta = rng.normal(size=(8, 2))
    cls = L.SoftBasis(2.0, theta)
    z = rng.normal(size=(2, 1))
    assert cls.eval_loss(theta @ z) == pytest.approx(0.0, abs=1e-12)
    assert cls.eval_loss(rng.normal(size=(8, 1))) > 1e-4


def test_index_offset_constant_per_channel():
    cls = L.IndexOffset()
    v = np.array([[1.0, 4.0], [3.0, 8.0]])
    out = cls.mprox(v, 1.0)
    np.testing.assert_allclose(out, np.array([[2.0, 6.0], [2.0, 6.0]]))
    assert cls.eval_loss(out) == 0.0
    assert cls.eval_loss(v) == np.inf
    # weighted mean when some entries carry more weight
    w = np.array([[3.0, 1.0], [1.0, 1.0]])
    out_w = cls.mprox(v, 1.0, weights=w)
    assert out_w[0, 0] == pytest.approx((3.0 * 1.0 + 3.0) / 4.0)


def test_close_entries_constant_rows_fixed():
    v = np.array([[2.0, 2.0, 2.0], [-1.0, -1.0, -1.0]])
    cls = L.CloseEntries(4.0)
    np.testing.assert_allclose(cls.mprox(v, 1.0), v)
    assert cls.eval_loss(v) == pytest.approx(0.0)


def test_periodic_replicates_phase_means():
    cls = L.Periodic(2)
    v = np.arange(8.0).reshape(4, 2)
    out = cls.mprox(v, 1.0)
    np.testing.assert_allclose(out[:2], out[2:])
    np.testing.assert_allclose(out[0], v[[0, 2]].mean(axis=0))
    assert cls.eval_loss(out) == 0.0
    assert cls.eval_loss(v) == np.inf


def test_periodic_smooth_zero_sum_profile():
    rng = np.random.default_rng(stable_seed("ps_zero"))
    cls = L.PeriodicSmooth(1.0, period=3, zero_sum=True)
    out = cls.mprox(rng.normal(size=(9, 2)), 1.0)
    np.testing.assert_allclose(out[:3], out[3:6])
    np.testing.assert_allclose(out[:3].sum(axis=0), 0.0, atol=1e-10)


def test_quasi_periodic_zero_on_exact_repetition():
    rng = np.random.default_rng(stable_seed("qp"))
    profile = rng.normal(size=(4, 2))
    x = np.vstack([profile, profile, profile])
    assert L.QuasiPeriodic(2.0, period=4).eval_loss(x) == pytest.approx(0.0)


def test_smooth_periodic_close_is_hard_periodic():
    rng = np.random.default_rng(stable_seed("spc"))
    v = rng.normal(size=(12, 3))
    cls = L.SmoothPeriodicClose(1.0, 1.0, period=4)
    out = cls.mprox(v, 1.0)
    np.testing.assert_allclose(out[:4], out[4:8], atol=1e-12)
    np.testing.assert_allclose(out[:4], out[8:], atol=1e-12)
    assert np.isinf(cls.eval_loss(v))
    # wrap-around smoothing changes the answer when disabled
    free = L.SmoothPeriodicClose(1.0, 1.0, period=4, boundary_smooth=False)
    assert not np.allclose(free.mprox(v, 1.0), out)


def test_blockwise_mean_averages_blocks():
    cls = L.Blockwise(2)
    v = col(1.0, 3.0, -2.0, 0.0)
    out = cls.mprox(v, 1.0)
    np.testing.assert_allclose(out, col(2.0, 2.0, -1.0, -1.0))
    assert cls.eval_loss(out) == 0.0
    assert cls.eval_loss(v) == np.inf


def test_blockwise_l1_thresholds_block_levels():
    cls = L.Blockwise(2, penalty="l1", lam=1.0)
    out = cls.mprox(col(0.1, 0.2, 4.0, 6.0), 1.0)
    np.testing.assert_allclose(out, col(0.0, 0.0, 4.0, 4.0))


def test_markov_states_and_transition_cost():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    cls = L.Markov([0.0, 1.0], C, np.zeros(2))
    assert cls.eval_loss(col(0.0, 0.0, 1.0)) == pytest.approx(1.0)
    rng = np.random.default_rng(stable_seed("markov_basic"))
    out = cls.mprox(rng.normal(size=(6, 1)), 1.0)
    assert np.isin(out, [0.0, 1.0]).all()


def test_r_sparse_keeps_at_most_r_entries():
    rng = np.random.default_rng(stable_seed("rsparse"))
    cls = L.RSparse(2)
    out = cls.mprox(rng.normal(size=(4, 2)), 1.0)
    assert np.count_nonzero(out) <= 2
    assert cls.eval_loss(np.ones((4, 2))) == np.inf
    assert cls.eval_loss(out) == 0.0


def test_single_jump_shape_and_fee():
    cls = L.SingleJump(0.25)
    zeros = np.zeros((6, 1))
    jump = zeros.copy()
    jump[3:] = -0.5
    assert cls.eval_loss(zeros) == 0.0
    assert cls.eval_loss(jump) == pytest.approx(0.25)
    assert cls.eval_loss(col(1.0, 0.0, 0.0)) == np.inf

    rng = np.random.default_rng(stable_seed("sj_shape"))
    out = cls.mprox(rng.normal(size=(12, 3)), 1.0)
    for i in range(out.shape[1]):
        changes = np.flatnonzero(np.diff(out[:, i]) != 0.0)
        assert changes.size <= 1
        if changes.size:
            assert np.all(out[: changes[0] + 1, i] == 0.0)


def test_single_jump_negative_sign_constraint():
    cls = L.SingleJump(1e-6, sign="negative")
    rng = np.random.default_rng(stable_seed("sj_neg"))
    v = np.abs(rng.normal(size=(16, 2))) + 0.5  # pushes toward positive jumps
    out = cls.mprox(v, 1.0)
    assert np.all(out <= 0.0)
    assert cls.eval_loss(np.vstack([np.zeros((2, 1)), np.full((3, 1), 0.4)])) == np.inf


def test_common_term_reduces_to_inner_prox_of_channel_mean():
    rng = np.random.default_rng(stable_seed("common"))
    inner = L.Quantile(1.3, tau=0.6)
    cls = L.CommonTerm(L.Quantile(1.3, tau=0.6))
    v = rng.normal(size=(5, 3))
    out = cls.mprox(v, 0.7)
    single = inner.mprox(v.mean(axis=1, keepdims=True), 0.7 * 3)
    np.testing.assert_allclose(out, np.broadcast_to(single, (5, 3)), atol=1e-12)
    assert np.ptp(out, axis=1).max() == 0.0


# ---------------------------------------------------------------------------
# validation and flags


@pytest.mark.parametrize(
    "build",
    [
        lambda: L.Blockwise(0),
        lambda: L.FiniteSet([]),
        lambda: L.Quantile(tau=1.5),
        lambda: L.Quantile(tau=0.0),
        lambda: L.Smooth(order=3),
        lambda: L.SingleJump(sign="up"),
        lambda: L.Interval(2.0, -1.0),
        lambda: L.RSparse(-1),
        lambda: L.Huber(M=-1.0),
        lambda: L.Periodic(0),
        lambda: L.SumSquare(lam=-0.5),
    ],
)
def test_bad_parameters_raise_data_error(build):
    with pytest.raises(DataError):
        build()


def test_convexity_flags():
    assert L.SumSquare().convex
    assert L.AverageAbs().convex
    assert L.Monotone().convex
    assert L.Interval().convex
    assert L.CommonTerm(L.Smooth(1.0)).convex
    assert not L.Boolean(1.0).convex
    assert not L.Cardinality(1.0).convex
    assert not L.SingleJump(1.0).convex
    assert not L.RSparse(1).convex
    assert not L.CommonTerm(L.Boolean(1.0)).convex
    # a one-point finite set is a fixed constant, hence convex
    assert L.FiniteSet([2.0]).convex
    assert not L.FiniteSet([0.0, 2.0]).convex


# ---------------------------------------------------------------------------
# masked prox reduction, property style


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_masked_prox_ignores_unknown_entries(seed):
    """mprox(v) must equal mprox of v with unknowns zeroed, bit for bit."""
    rng = np.random.default_rng(seed)
    cls = [
        L.AverageAbs(0.7),
        L.Smooth(3.0, order=2),
        L.Boolean(0.9),
        L.Monotone(),
        L.SumL2(1.1),
    ][seed % 5]
    T, p = int(rng.integers(4, 20)), int(rng.integers(1, 4))
    v = rng.normal(size=(T, p))
    known = rng.random((T, p)) < 0.7
    known[rng.integers(T), :] = True
    masked_v = mask_adjoint(mask(v, known), known)
    a = cls.mprox(v, 1.3, known)
    b = cls.mprox(masked_v, 1.3, known)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_full_mask_matches_unmasked_prox(seed):
    rng = np.random.default_rng(seed)
    cls = [L.Quantile(0.8, 0.3), L.Huber(1.2, 0.5), L.Smooth(2.0, order=1)][seed % 3]
    v = rng.normal(size=(9, 2))
    plain = cls.mprox(v, 0.9)
    full = cls.mprox(v, 0.9, np.ones((9, 2), dtype=bool))
    weighted = cls.mprox(v, 0.9, weights=np.ones((9, 2)))
    np.testing.assert_array_equal(plain, full)
    np.testing.assert_array_equal(plain, weighted)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n_values=st.integers(1, 5),
)
def test_finite_set_prox_stays_in_value_set(seed, n_values):
    rng = np.random.default_rng(seed)
    values = np.round(rng.normal(size=n_values) * 3, 2)
    cls = L.FiniteSet(values)
    out = cls.mprox(rng.normal(size=(7, 2)), 0.5)
    assert np.isin(out, cls.values).all()


def test_prox_never_increases_prox_objective():
    """The prox output must beat both the zero-filled input and zero."""
    for name, inst in all_class_instances(seed_base=7):
        x = production_prox(inst)
        f_star = prox_objective(inst, x)
        for ref in (inst.zeroed_v(), np.zeros_like(inst.v)):
            f_ref = prox_objective(inst, ref)
            assert f_star <= f_ref + 1e-9 * max(1.0, abs(f_ref)), name
