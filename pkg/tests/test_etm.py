import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etcsim.etm import (
    BerneburgParams,
    BerneburgScheme,
    DolkParams,
    DolkScheme,
    GarciaParams,
    GarciaScheme,
    SingleSystemHooks,
    SingleSystemScheme,
    ZenoGuaranteeError,
    c_lower_bound,
    eta_flow_derivative,
    eta_reset,
    gamma_sigma_from,
    omega,
    phi_solve,
    psi_berneburg,
    psi_dolk,
    psi_garcia,
    psi_single,
    tau_miet,
    trigger_decision,
)
from etcsim.graph import Graph, benchmark_topology
from etcsim.hybrid import HybridState


# ---------------------------------------------------------------------------
# closed forms and derived constants


def test_tau_miet_reference_values():
    assert tau_miet(0.5, 0.76, 4.478, 0.2) == pytest.approx(0.1562, abs=5e-4)
    assert tau_miet(0.5, 0.665, 5.482, 0.2) == pytest.approx(0.1180, abs=5e-4)


def test_tau_miet_exact_gamma():
    # with the exact gamma values the dwell times match to high precision
    g2 = math.sqrt(2 / 0.1 + 0.05)
    g3 = math.sqrt(3 / 0.1 + 0.05)
    assert tau_miet(0.5, 0.76, g2, 0.2) == pytest.approx(0.156171044770359, abs=1e-9)
    assert tau_miet(0.5, 0.665, g3, 0.2) == pytest.approx(0.118035300737759, abs=1e-9)


def test_tau_miet_degenerate_lambda():
    assert tau_miet(0.5, 0.76, 4.478, 1.0) == 0.0


def test_tau_miet_domain():
    with pytest.raises(ValueError):
        tau_miet(1.5, 0.76, 4.478, 0.2)
    with pytest.raises(ValueError):
        tau_miet(0.5, 0.76, -1.0, 0.2)


def test_gamma_sigma_from():
    g, s = gamma_sigma_from(0.1, 0.05, 0.05, 2)
    assert g == pytest.approx(4.478, abs=1e-3)
    assert s == pytest.approx(0.76)
    g3, s3 = gamma_sigma_from(0.1, 0.05, 0.05, 3)
    assert g3 == pytest.approx(5.482, abs=1e-3)
    assert g3 == pytest.approx(math.sqrt(30.05), rel=1e-12)
    assert s3 == pytest.approx(0.665)
    # modified coefficient form
    _, sm = gamma_sigma_from(0.1, 0.05, 0.05, 2, sigma_form="modified")
    assert sm == pytest.approx((1 - 0.05) * (1 - 2 * 0.1 * 2))


def test_gamma_sigma_domain():
    with pytest.raises(ValueError):
        gamma_sigma_from(0.3, 0.05, 0.05, 2)  # a too large for N=2
    with pytest.raises(ValueError):
        gamma_sigma_from(0.1, -1.0, 0.05, 2)


def test_omega_gate():
    tm = 0.1562
    assert omega(0.0, tm) == 1.0
    assert omega(0.5 * tm, tm) == 1.0
    assert omega(2 * tm, tm) == 0.0
    assert omega(tm, tm) == 0.0  # boundary selection: trigger armed
    with pytest.raises(ValueError):
        omega(-0.1, tm)


# ---------------------------------------------------------------------------
# trigger evaluations


def test_psi_garcia_examples():
    p = GarciaParams(a=0.1, sigma=0.5, c=0.0)
    assert psi_garcia(1.0, 0.0, 2, p) == pytest.approx(0.3)
    assert psi_garcia(0.0, 2e-4, 3, p) == pytest.approx(-1.2e-6)


def test_psi_garcia_original_form():
    p = GarciaParams(a=0.1, sigma=0.5, c=0.0, form="original")
    # original slope 1 - a*N
    assert psi_garcia(1.0, 0.0, 2, p) == pytest.approx(0.5 * 0.8)


def test_psi_berneburg_examples():
    # unit-weight degree-2 node with edge splits 0.25
    assert psi_berneburg(1.0, 0.0, d_i=2.0, vartheta_i=0.5, gamma_i=8.0,
                         sigma_i=0.5, c_i=0.0) == pytest.approx(0.25)
    assert psi_berneburg(0.0, 1e-3, d_i=2.0, vartheta_i=0.5, gamma_i=8.0,
                         sigma_i=0.5, c_i=0.0) == pytest.approx(-1.6e-5)
    with pytest.raises(ValueError):
        psi_berneburg(1.0, 0.0, 2.0, 1.5, 8.0, 0.5, 0.0)


def test_psi_dolk_examples():
    tm = tau_miet(0.5, 0.76, 4.478, 0.2)
    val = psi_dolk(0.0, 1.0, tau_i=2 * tm, tau_miet_i=tm,
                   alpha_i=0.5, sigma_i=0.76, gamma_i=4.478, lam_i=0.2, c_i=0.0)
    assert val == pytest.approx(-22.16, abs=1e-2)
    # inside the dwell time the error term is gated away
    gated = psi_dolk(0.0, 1.0, tau_i=0.5 * tm, tau_miet_i=tm,
                     alpha_i=0.5, sigma_i=0.76, gamma_i=4.478, lam_i=0.2, c_i=0.0)
    assert gated == 0.0
    quiet = psi_dolk(0.0, 0.0, tau_i=10.0, tau_miet_i=tm,
                     alpha_i=0.5, sigma_i=0.76, gamma_i=4.478, lam_i=0.2, c_i=3e-7)
    assert quiet == pytest.approx(3e-7)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(-100, 100), et=st.floats(-100, 100),
       frac=st.floats(0.0, 0.999))
def test_psi_dolk_nonnegative_inside_dwell(u, et, frac):
    tm = tau_miet(0.5, 0.76, 4.478, 0.2)
    val = psi_dolk(u, et, tau_i=frac * tm, tau_miet_i=tm,
                   alpha_i=0.5, sigma_i=0.76, gamma_i=4.478, lam_i=0.2, c_i=0.0)
    assert val >= 0.0


def test_psi_single():
    hooks = SingleSystemHooks(delta=lambda s: 0.0625 * s**2, beta=lambda s: 2 * s**2,
                              c=1e-7, w_bar=1e-4)
    assert psi_single(2.0, 0.0, hooks) == pytest.approx(0.25 + 1e-7)
    assert psi_single(0.0, 0.1, hooks) == pytest.approx(-0.02 + 1e-7)


# ---------------------------------------------------------------------------
# phi certificate


@pytest.mark.parametrize("sigma,gamma", [(0.76, math.sqrt(20.05)), (0.665, math.sqrt(30.05))])
def test_phi_solve_cross_validates_closed_form(sigma, gamma):
    sol = phi_solve(0.5, sigma, gamma, 0.2)
    tm = tau_miet(0.5, sigma, gamma, 0.2)
    assert sol.phis[0] == pytest.approx(5.0)  # 1/lambda
    assert sol.phis[-1] == pytest.approx(0.2, abs=1e-6)
    assert abs(sol.tau_end - tm) <= 1e-6 * (1 + tm)
    assert np.all(np.diff(sol.phis) < 0)  # strictly decreasing


def test_phi_solve_independent_rk4_oracle():
    # fine-step classical RK4 on the scalar ODE, written out by hand
    alpha, sigma, gamma, lam = 0.5, 0.76, math.sqrt(20.05), 0.2

    def f(phi):
        return -gamma * (phi**2 / (alpha * sigma) + 1.0)

    h = 1e-6
    phi, tau = 1.0 / lam, 0.0
    while phi > lam:
        k1 = f(phi)
        k2 = f(phi + 0.5 * h * k1)
        k3 = f(phi + 0.5 * h * k2)
        k4 = f(phi + h * k3)
        phi += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += h
    sol = phi_solve(alpha, sigma, gamma, lam)
    assert abs(tau - sol.tau_end) < 5e-6
    # interpolant agrees with the oracle at the midpoint
    assert float(sol(0.5 * sol.tau_end)) == pytest.approx(
        _rk4_phi_at(0.5 * sol.tau_end, alpha, sigma, gamma, lam), abs=1e-6
    )


def _rk4_phi_at(tau_target, alpha, sigma, gamma, lam):
    def f(phi):
        return -gamma * (phi**2 / (alpha * sigma) + 1.0)

    steps = 200000
    h = tau_target / steps
    phi = 1.0 / lam
    for _ in range(steps):
        k1 = f(phi)
        k2 = f(phi + 0.5 * h * k1)
        k3 = f(phi + 0.5 * h * k2)
        k4 = f(phi + h * k3)
        phi += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return phi


# ---------------------------------------------------------------------------
# eta dynamics and decisions


def test_eta_flow_derivative():
    assert eta_flow_derivative(0.0, 0.25, 0.05) == pytest.approx(0.25)
    assert eta_flow_derivative(2.0, 0.0, 0.05) == pytest.approx(-0.1)
    # fixed point of the linear ODE
    psi = 0.3
    eta_eq = psi / 0.05
    assert eta_flow_derivative(eta_eq, psi, 0.05) == pytest.approx(0.0)


def test_trigger_decision_rules():
    assert trigger_decision(0.0, -1.0, 0.0, "static") == "jump"
    assert trigger_decision(0.0, 1.0, 0.0, "static") == "flow"
    assert trigger_decision(0.5, -1.0, 0.0, "dynamic") == "flow"  # eta budget left
    assert trigger_decision(0.0, -1.0, 0.0, "dynamic") == "jump"
    # theta makes the combined predicate fire while eta alone would not
    assert trigger_decision(0.5, -1.0, 1.0, "dynamic") == "jump"


@settings(max_examples=200, deadline=None)
@given(eta=st.floats(0, 100), psi=st.floats(-100, 100),
       theta=st.floats(0, 10), scale=st.floats(1e-3, 1e3))
def test_trigger_decision_scale_invariant(eta, psi, theta, scale):
    before = trigger_decision(eta, psi, theta, "dynamic")
    after = trigger_decision(scale * eta, scale * psi, theta, "dynamic")
    assert before == after


def test_eta_reset_standard_and_remark5():
    std = DolkParams(a=0.1)
    assert eta_reset(0.7, 5.0, std, gamma_i=4.478, lam_i=0.2, w_bar_i=1e-4) == 0.7
    r5 = DolkParams(a=0.1, reset_mode="remark5")
    # measured error below the noise deadband leaves eta unchanged
    assert eta_reset(0.7, 1.5e-4, r5, gamma_i=4.478, lam_i=0.2, w_bar_i=1e-4) == 0.7
    got = eta_reset(0.0, 1.0, r5, gamma_i=4.478, lam_i=0.2, w_bar_i=1e-4)
    assert got == pytest.approx(4.478 * 0.2 * (1 - 2e-4) ** 2)
    assert got == pytest.approx(0.89524, abs=1e-5)


# ---------------------------------------------------------------------------
# schemes


def bench():
    return benchmark_topology()


def test_garcia_scheme_bounds_and_guard():
    p = GarciaParams(a=0.1, sigma=0.5, c=2e-6, w_bar=1e-4)
    sch = GarciaScheme(bench(), p)
    bound = c_lower_bound(sch)
    # (1/a) N (2 w_bar)^2: 8e-7 for N=2, 1.2e-6 for N=3
    expect = np.where(np.array([2, 3, 3, 2, 3, 2, 2, 3]) == 2, 8e-7, 1.2e-6)
    assert np.allclose(bound, expect, rtol=1e-12)
    with pytest.raises(ZenoGuaranteeError):
        GarciaScheme(bench(), GarciaParams(a=0.1, c=0.0, w_bar=1e-4))
    GarciaScheme(bench(), GarciaParams(a=0.1, c=0.0, w_bar=1e-4), allow_zeno=True)
    # noise-naive form always needs the explicit override
    with pytest.raises(ZenoGuaranteeError):
        GarciaScheme(bench(), GarciaParams(a=0.1, c=1.0, w_bar=1e-4, form="original"))


def test_garcia_a_domain():
    with pytest.raises(ValueError):
        GarciaScheme(bench(), GarciaParams(a=0.2, c=1.0), allow_zeno=True)


def test_c_lower_bound_monotone_in_noise():
    prev = None
    for w_bar in (0.0, 1e-5, 1e-4, 1e-3):
        sch = GarciaScheme(bench(), GarciaParams(a=0.1, c=1.0, w_bar=w_bar))
        b = sch.c_lower_bound()
        if prev is not None:
            assert np.all(b >= prev)
        prev = b


def test_dolk_scheme_derived():
    sch = DolkScheme(bench(), DolkParams(a=0.1, w_bar=1e-4))
    n2 = np.array([2, 3, 3, 2, 3, 2, 2, 3])
    assert np.allclose(sch.gamma, np.sqrt(n2 / 0.1 + 0.05))
    assert np.allclose(sch.sigma, np.where(n2 == 2, 0.76, 0.665))
    assert np.allclose(sch.tau_miet, np.where(n2 == 2, 0.156171044770359,
                                              0.118035300737759), atol=1e-9)
    assert np.array_equal(c_lower_bound(sch), np.zeros(8))
    assert sch.mode == "dynamic"


def test_dolk_psi_vec_gate():
    sch = DolkScheme(bench(), DolkParams(a=0.1, w_bar=1e-4))
    u = np.zeros(8)
    et = np.ones(8)
    inside = sch.psi_vec(u=u, e_tilde=et, tau=np.zeros(8), y_tilde=None)
    assert np.all(inside >= 0.0)
    beyond = sch.psi_vec(u=u, e_tilde=et, tau=np.full(8, 1.0), y_tilde=None)
    assert np.all(beyond < 0.0)
    # agent 0 has N=2: coefficient gamma^2 (lam^2/(alpha sigma) + 1)
    coef = 20.05 * (0.04 / (0.5 * 0.76) + 1.0)
    assert beyond[0] == pytest.approx(-coef)


def test_dolk_storage_uses_phi():
    sch = DolkScheme(bench(), DolkParams(a=0.1, w_bar=1e-4))
    x = np.zeros(8)
    e = np.zeros(8)
    e[0] = 1.0
    st0 = HybridState(x, e, np.zeros(8), np.zeros(8), np.zeros(8))
    # at tau=0 phi=1/lam=5, beyond the dwell time phi=lam=0.2
    assert sch.storage(st0) == pytest.approx(sch.gamma[0] * 5.0)
    st1 = HybridState(x, e, np.zeros(8), np.zeros(8), np.full(8, 1.0))
    assert sch.storage(st1) == pytest.approx(sch.gamma[0] * 0.2)


def test_berneburg_scheme_default_split():
    sch = BerneburgScheme(bench(), BerneburgParams(c=2e-6, w_bar=1e-4))
    # default rho 0.5/d_out gives vartheta = 0.5 on unit-weight graphs
    assert np.allclose(sch.vartheta, 0.5)
    # gamma_i = sum over in-neighbors of 1/rho_ji = sum 2 d_j
    deg = np.array([2, 3, 3, 2, 3, 2, 2, 3], dtype=float)
    g = benchmark_topology()
    expect = np.array([sum(2 * deg[j] for j in g.in_neighbors(i)) for i in range(8)])
    assert np.allclose(sch.gamma, expect)
    assert np.allclose(sch.c_lower_bound(), sch._e_coef * (2e-4) ** 2)


def test_berneburg_directed_cycle():
    g = Graph.from_edge_list(3, [(0, 1), (1, 2), (2, 0)], undirected=False)
    sch = BerneburgScheme(g, BerneburgParams(rho_edge={(0, 1): 0.5, (1, 2): 0.5, (2, 0): 0.5},
                                             c=1e-6, w_bar=0.0))
    assert np.allclose(sch.vartheta, 0.5)
    assert np.allclose(sch.gamma, 2.0)


def test_berneburg_invalid_split():
    with pytest.raises(ValueError):
        BerneburgScheme(bench(), BerneburgParams(rho_edge={
            (i, int(j)): 2.0 for i in range(8)
            for j in benchmark_topology().out_neighbors(i)}, c=1.0))


def test_single_system_scheme():
    hooks = SingleSystemHooks(delta=lambda s: 0.0625 * s**2, beta=lambda s: 2 * s**2,
                              c=1e-7, w_bar=1e-4)
    sch = SingleSystemScheme(hooks)
    assert sch.c_lower_bound()[0] == pytest.approx(2 * (2e-4) ** 2)
    with pytest.raises(ZenoGuaranteeError):
        SingleSystemScheme(SingleSystemHooks(delta=hooks.delta, beta=hooks.beta,
                                             c=0.0, w_bar=1e-4))


def test_fresh_transmission_reenables_flow():
    # psi at u=0, e_tilde=0 equals c for every scheme
    z = np.zeros(8)
    for sch in (
        GarciaScheme(bench(), GarciaParams(a=0.1, c=2e-6, w_bar=1e-4)),
        DolkScheme(bench(), DolkParams(a=0.1, c=1e-7, w_bar=1e-4)),
        BerneburgScheme(bench(), BerneburgParams(c=2e-6, w_bar=1e-4)),
    ):
        psi = sch.psi_vec(u=z, e_tilde=z, tau=np.full(8, 1.0), y_tilde=z)
        assert np.allclose(psi, sch.c)
        assert np.all(psi >= 0.0)
