from __future__ import annotations

import numpy as np
import pytest

from fswl.entropy import (
    TestFunction,
    default_test_functions,
    entropy_balance_residual,
    smooth_capped_entropy,
    weak_residual_u,
    weak_residual_v,
)
from fswl.fractional import frac_laplacian_spectral
from fswl.grid import Field, make_grid
from fswl.solver import (
    PerturbedRun,
    SystemParams,
    g_tanh_blend,
    g_zero,
    solve_perturbed,
)


def linear_params():
    return SystemParams(alpha=0.0, beta=0.0, s=0.75, g=g_zero(), gamma=0.0)


def coupled_params():
    return SystemParams(alpha=0.1, beta=0.1, s=0.75, g=g_tanh_blend(0.2, 1.0))


@pytest.fixture(scope="module")
def grid128():
    return make_grid(16.0, 128)


@pytest.fixture(scope="module")
def data(grid128):
    u0 = Field.from_function(
        grid128, lambda x: 0.4 * np.exp(-(x**2)) * np.exp(1j * 3 * np.pi / 16 * x))
    v0 = Field.from_function(grid128, lambda x: 0.4 * np.exp(-((x / 1.5) ** 2)), "real")
    return u0, v0


class TestTestFunctions:
    def test_support_validation(self, grid128):
        with pytest.raises(ValueError, match="leak"):
            TestFunction(grid=grid128, t_lo=0.0, t_hi=0.5, x_center=12.0, x_width=6.0,
                         amplitude=1 + 0j)
        with pytest.raises(ValueError, match="time"):
            TestFunction(grid=grid128, t_lo=0.5, t_hi=0.5, x_center=0.0, x_width=4.0,
                         amplitude=1 + 0j)
        with pytest.raises(ValueError, match="real"):
            TestFunction(grid=grid128, t_lo=0.0, t_hi=0.5, x_center=0.0, x_width=4.0,
                         amplitude=1j, flavor="real")

    def test_spectral_decay_certified(self, grid128):
        tf = TestFunction(grid=grid128, t_lo=0.0, t_hi=0.5, x_center=0.0, x_width=5.0,
                          amplitude=1 + 0j)
        assert tf._spectral_tail() < 1e-8
        # too narrow to resolve -> rejected
        with pytest.raises(ValueError, match="resolved"):
            TestFunction(grid=make_grid(16.0, 16), t_lo=0.0, t_hi=0.5, x_center=0.0,
                         x_width=1.0, amplitude=1 + 0j)

    def test_default_library_layout(self, grid128):
        tfs = default_test_functions(grid128, 1.0, seed=5)
        assert len(tfs) == 16
        assert sum(tf.flavor == "complex" for tf in tfs) == 8
        assert any(tf.t_lo < 0 for tf in tfs)
        assert all(tf.t_hi <= 0.9 for tf in tfs)

    def test_self_adjoint_transfer(self, grid128):
        # int ((-D)^{s/2} f) psi = int f ((-D)^{s/2} psi): the identity that
        # moves the operator onto the test function
        rng = np.random.default_rng(8)
        from fswl.sobolev import random_band_limited

        f = random_band_limited(grid128, rng, flavor="real")
        tf = TestFunction(grid=grid128, t_lo=0.0, t_hi=0.5, x_center=0.0, x_width=5.0,
                          amplitude=1.3 + 0j, flavor="real")
        psi = tf.space_values().real
        lhs = grid128.dx * np.sum(frac_laplacian_spectral(f, 0.375).values * psi)
        psi_frac = tf.space_frac(0.75).real
        rhs = grid128.dx * np.sum(f.values * psi_frac)
        assert lhs == pytest.approx(rhs, rel=1e-11)


class TestWeakResiduals:
    def test_exact_linear_solution_small_residuals(self, grid128, data):
        u0, v0 = data
        run = PerturbedRun(eps=0.1, T=1.0, dt=1e-3, eps_g=0.0)
        traj = solve_perturbed(u0, v0, linear_params(), run)
        tfc = TestFunction(grid=grid128, t_lo=-0.2, t_hi=0.75, x_center=1.0,
                           x_width=6.0, amplitude=0.8 + 0.5j)
        tfr = TestFunction(grid=grid128, t_lo=-0.1, t_hi=0.8, x_center=-1.0,
                           x_width=6.0, amplitude=1.1 + 0j, flavor="real")
        assert abs(weak_residual_u(traj, linear_params(), run, tfc)) <= 1e-8
        assert abs(weak_residual_v(traj, linear_params(), run, tfr)) <= 1e-8

    def test_support_after_horizon_zero(self, grid128, data):
        u0, v0 = data
        run = PerturbedRun(eps=0.1, T=2.0, dt=2e-3, eps_g=0.0)
        traj = solve_perturbed(u0, v0, linear_params(), run)
        tf = TestFunction(grid=grid128, t_lo=1.3, t_hi=1.7, x_center=0.0, x_width=4.0,
                          amplitude=1 + 0j)
        assert abs(weak_residual_u(traj, linear_params(), run, tf)) <= 1e-10

    def test_limit_form_residual_decreases_along_ladder(self, grid128, data):
        # the eps-free weak form is approached as the regularization vanishes
        u0, v0 = data
        params = coupled_params()
        tf = TestFunction(grid=grid128, t_lo=-0.1, t_hi=0.35, x_center=0.5,
                          x_width=6.0, amplitude=1.0 + 0.4j)
        residuals = []
        for eps in (0.4, 0.2, 0.1):
            run = PerturbedRun(eps=eps, T=0.5, dt=2e-3)
            traj = solve_perturbed(u0, v0, params, run)
            residuals.append(abs(weak_residual_u(traj, params, run, tf, perturbed=False)))
        assert residuals[2] < residuals[1] < residuals[0]

    def test_nonlinear_refinement_at_integrator_order(self, grid128, data):
        u0, v0 = data
        params = coupled_params()
        tfc = TestFunction(grid=grid128, t_lo=-0.1, t_hi=0.4, x_center=0.5,
                           x_width=6.0, amplitude=1.0 + 0.3j)
        tfr = TestFunction(grid=grid128, t_lo=-0.1, t_hi=0.4, x_center=-0.5,
                           x_width=6.0, amplitude=0.9 + 0j, flavor="real")
        dts = (4e-3, 2e-3, 1e-3)
        ru, rv = [], []
        for dt in dts:
            run = PerturbedRun(eps=0.1, T=0.5, dt=dt)
            traj = solve_perturbed(u0, v0, params, run)
            ru.append(abs(weak_residual_u(traj, params, run, tfc)))
            rv.append(abs(weak_residual_v(traj, params, run, tfr)))
        from oracles import fit_slope

        assert fit_slope(dts, ru) >= 1.8
        assert fit_slope(dts, rv) >= 1.8


class TestEntropyBalance:
    def test_linear_entropy_reduces_to_long_wave_equation(self, grid128, data):
        # eta(v) = v: no remainder, no dissipation density; the pairing is
        # exactly the long-wave weak form, so the residual sits at the
        # integrator's order
        u0, v0 = data
        params = coupled_params()
        run = PerturbedRun(eps=0.1, T=0.5, dt=2e-3)
        traj = solve_perturbed(u0, v0, params, run)
        eta_lin = smooth_capped_entropy(1.0)
        eta_lin = type(eta_lin)(
            eta=lambda v: np.asarray(v, dtype=float),
            eta_prime=lambda v: np.ones_like(np.asarray(v, dtype=float)),
            eta_pp=lambda v: np.zeros_like(np.asarray(v, dtype=float)),
            pp_support=(-1.0, 1.0),
            linear_coeff=1.0,
            label="identity",
        )
        tf = TestFunction(grid=grid128, t_lo=0.1, t_hi=0.4, x_center=0.0, x_width=5.0,
                          amplitude=1 + 0j, flavor="real")
        res = entropy_balance_residual(traj, eta_lin, params, run, tf)
        assert res < 5e-7

    def test_dissipation_term_sign(self, grid128):
        # pure decay of the long wave: the gradient-square density pairs
        # nonnegatively against a nonnegative test function
        params = SystemParams(alpha=0.0, beta=0.0, s=0.75, g=g_zero(), gamma=0.0)
        run = PerturbedRun(eps=0.5, T=0.5, dt=2e-3, eps_g=0.0)
        v0 = Field.from_function(grid128, lambda x: 0.6 * np.exp(-((x / 2) ** 2)), "real")
        traj = solve_perturbed(Field.zero(grid128), v0, params, run)
        eta = smooth_capped_entropy(0.8)
        tf = TestFunction(grid=grid128, t_lo=0.1, t_hi=0.4, x_center=0.0, x_width=5.0,
                          amplitude=1 + 0j, flavor="real")
        P = tf.time_value(traj.times)
        Q = tf.space_values().real
        total = 0.0
        eps_b = run.eps**run.b
        for i in range(len(traj)):
            if P[i] == 0.0:
                continue
            dvdx = grid128.from_spectrum(grid128.deriv_symbol() * traj.v_specs[i]).real
            v = grid128.from_spectrum(traj.v_specs[i]).real
            total += P[i] * grid128.dx * np.sum(eps_b * dvdx**2 * eta.eta_pp(v) * Q)
        assert total >= 0.0

    def test_joint_refinement_decreases(self, data):
        # the remainder superposition carries a spatial quadrature floor, so
        # the residual is driven down by refining space and time together
        params = coupled_params()
        eta = smooth_capped_entropy(0.6)
        residuals = []
        for N, dt in ((64, 8e-3), (128, 4e-3), (256, 2e-3)):  # joint space-time ladder
            grid = make_grid(16.0, N)
            u0 = Field.from_function(
                grid, lambda x: 0.4 * np.exp(-(x**2)) * np.exp(1j * 3 * np.pi / 16 * x))
            v0 = Field.from_function(grid, lambda x: 0.4 * np.exp(-((x / 1.5) ** 2)), "real")
            run = PerturbedRun(eps=0.1, T=0.4, dt=dt)
            traj = solve_perturbed(u0, v0, params, run)
            tf = TestFunction(grid=grid, t_lo=0.08, t_hi=0.32, x_center=0.0, x_width=5.0,
                              amplitude=1 + 0j, flavor="real")
            residuals.append(entropy_balance_residual(traj, eta, params, run, tf))
        assert residuals[2] < residuals[1] < residuals[0]


def test_weak_residual_rows_schema(grid128, data):
    from fswl.entropy import default_test_functions, weak_residual_rows

    u0, v0 = data
    run = PerturbedRun(eps=0.1, T=0.5, dt=5e-3)
    traj = solve_perturbed(u0, v0, coupled_params(), run)
    tfs = default_test_functions(grid128, 0.5, seed=2)[:4]
    rows = weak_residual_rows(traj, coupled_params(), run, tfs)
    assert len(rows) == 4
    for row in rows:
        assert {"test_id", "flavor", "eps", "residual", "refinement_level"} <= set(row)
        assert row["residual"] >= 0.0


def test_support_leak_rejected(grid128, data):
    u0, v0 = data
    run = PerturbedRun(eps=0.1, T=0.5, dt=5e-3)
    traj = solve_perturbed(u0, v0, coupled_params(), run)
    leaky = TestFunction(grid=grid128, t_lo=0.2, t_hi=0.6, x_center=0.0, x_width=4.0,
                         amplitude=1 + 0j)
    with pytest.raises(ValueError, match="horizon"):
        weak_residual_u(traj, coupled_params(), run, leaky)
    from fswl.entropy import smooth_capped_entropy, entropy_balance_residual

    bad_entropy_tf = TestFunction(grid=grid128, t_lo=-0.1, t_hi=0.3, x_center=0.0,
                                  x_width=4.0, amplitude=1 + 0j, flavor="real")
    with pytest.raises(ValueError, match="strictly inside"):
        entropy_balance_residual(traj, smooth_capped_entropy(0.5),
                                 coupled_params(), run, bad_entropy_tf)
