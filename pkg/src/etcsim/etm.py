"""Event-triggering mechanisms.

Each scheme evaluates a per-agent trigger function psi from locally
available information (control input, measured error, clock). A jump is
commanded when psi falls to zero (static rule) or when the auxiliary
variable eta is exhausted as well (dynamic rule). Every scheme carries a
constant offset c_i that enlarges the flow set; under measurement noise
bounded by w_bar, Zeno-freeness requires c_i to exceed the scheme's
beta_i(2 w_bar) unless a timer gate enforces a dwell time instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.integrate import solve_ivp

from .graph import Graph, laplacian

__all__ = [
    "GarciaParams",
    "DolkParams",
    "BerneburgParams",
    "SingleSystemHooks",
    "GarciaScheme",
    "DolkScheme",
    "BerneburgScheme",
    "SingleSystemScheme",
    "ZenoGuaranteeError",
    "psi_garcia",
    "psi_berneburg",
    "psi_dolk",
    "psi_single",
    "tau_miet",
    "gamma_sigma_from",
    "omega",
    "phi_solve",
    "PhiSolution",
    "eta_flow_derivative",
    "trigger_decision",
    "eta_reset",
    "c_lower_bound",
]

Mode = Literal["static", "dynamic"]


class ZenoGuaranteeError(ValueError):
    """Raised when c_i is below the Zeno-freeness bound and the
    configuration did not explicitly allow it."""


def _per_agent(value, n: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n, arr[0])
    if arr.size != n:
        raise ValueError(f"expected scalar or length-{n} value, got size {arr.size}")
    return arr


# ---------------------------------------------------------------------------
# parameter records


@dataclass(frozen=True)
class GarciaParams:
    """Quadratic consensus trigger on undirected graphs.

    beta_i(s) = (1/a) N_i s^2, delta_i = sigma_i (1 - 2 a N_i) u_i^2,
    with N_i the neighbor count of agent i.
    """

    a: float
    sigma: float | np.ndarray = 0.5
    c: float | np.ndarray = 0.0
    theta: float | np.ndarray = 0.0
    w_bar: float | np.ndarray = 0.0
    mode: Mode = "static"
    eps_eta: float = 0.05  # linear eta-decay rate (dynamic mode)
    form: Literal["modified", "original"] = "modified"


@dataclass(frozen=True)
class DolkParams:
    """Timer-regularized dynamic consensus trigger.

    Derived per agent: gamma_i = sqrt(N_i/a + mu_i), sigma_i from the
    chosen form, and the dwell time tau_miet_i from the closed form.
    The timer gate makes psi nonnegative below tau_miet_i, so no lower
    bound on c_i is needed.
    """

    a: float
    varrho: float = 0.05
    mu: float | np.ndarray = 0.05
    alpha: float | np.ndarray = 0.5
    lam: float | np.ndarray = 0.2
    c: float | np.ndarray = 0.0
    theta: float | np.ndarray = 0.0
    w_bar: float | np.ndarray = 0.0
    eps_eta: float = 0.05
    reset_mode: Literal["standard", "remark5"] = "standard"
    # 'original' reproduces the published sigma_i = (1-varrho)(1-a N_i);
    # 'modified' uses (1-varrho)(1-2 a N_i).
    sigma_form: Literal["original", "modified"] = "original"


@dataclass(frozen=True)
class BerneburgParams:
    """Quadratic consensus trigger for weight-balanced digraphs.

    rho_edge maps directed edges (i, j) to the positive split weights;
    None selects the canonical default 0.5 / d_i_out, which yields
    theta_i = 0.5 on unit-weight graphs.
    """

    rho_edge: dict[tuple[int, int], float] | None = None
    sigma: float | np.ndarray = 0.5
    c: float | np.ndarray = 0.0
    theta: float | np.ndarray = 0.0
    w_bar: float | np.ndarray = 0.0
    mode: Mode = "static"
    eps_eta: float = 0.05


@dataclass(frozen=True)
class SingleSystemHooks:
    """Pluggable single-plant trigger: psi = delta(|y~|) - beta(|e~|) + c.

    beta must already be composed as s -> rho(2 s); it is evaluated on
    the measured-error norm directly.
    """

    delta: Callable[[float], float]
    beta: Callable[[float], float]
    c: float = 0.0
    w_bar: float = 0.0
    theta: float = 0.0
    mode: Mode = "static"
    eps_eta: float = 0.05


# ---------------------------------------------------------------------------
# scalar trigger evaluations


def psi_garcia(u_i: float, e_tilde_i: float, n_i: int, p: GarciaParams, agent: int = 0) -> float:
    sigma = float(np.atleast_1d(p.sigma)[agent] if np.ndim(p.sigma) else p.sigma)
    c = float(np.atleast_1d(p.c)[agent] if np.ndim(p.c) else p.c)
    slope = 1.0 - (2.0 if p.form == "modified" else 1.0) * p.a * n_i
    return sigma * slope * u_i**2 - (n_i / p.a) * e_tilde_i**2 + c


def psi_berneburg(
    u_i: float, e_tilde_i: float, d_i: float, vartheta_i: float, gamma_i: float,
    sigma_i: float, c_i: float,
) -> float:
    if not 0.0 < vartheta_i < 1.0:
        raise ValueError(f"vartheta={vartheta_i} must lie in (0,1)")
    return sigma_i * (1.0 - vartheta_i) * u_i**2 - (d_i**2 / vartheta_i + gamma_i) * e_tilde_i**2 + c_i


def psi_dolk(
    u_i: float, e_tilde_i: float, tau_i: float, tau_miet_i: float,
    alpha_i: float, sigma_i: float, gamma_i: float, lam_i: float, c_i: float,
) -> float:
    gate = 1.0 - omega(tau_i, tau_miet_i)
    coef = gamma_i**2 * (lam_i**2 / (alpha_i * sigma_i) + 1.0)
    return (1.0 - alpha_i) * sigma_i * u_i**2 + c_i - gate * coef * e_tilde_i**2


def psi_single(y_tilde_norm: float, e_tilde_norm: float, hooks: SingleSystemHooks) -> float:
    return hooks.delta(y_tilde_norm) - hooks.beta(e_tilde_norm) + hooks.c


# ---------------------------------------------------------------------------
# timer machinery


def tau_miet(alpha: float, sigma: float, gamma: float, lam: float) -> float:
    """Dwell time at which the certificate gain phi decays from 1/lam
    to lam. Positive for all valid parameters."""
    if not (0.0 < alpha < 1.0 and 0.0 < sigma < 1.0 and 0.0 < lam <= 1.0):
        raise ValueError(f"alpha={alpha}, sigma={sigma}, lam={lam} out of domain")
    if gamma <= 0.0:
        raise ValueError(f"gamma={gamma} must be positive")
    r = math.sqrt(alpha * sigma)
    return -(r / gamma) * math.atan((lam**2 - 1.0) * r / (lam * (alpha * sigma + 1.0)))


def gamma_sigma_from(
    a: float, mu_i: float, varrho: float, n_i: int,
    sigma_form: Literal["original", "modified"] = "original",
) -> tuple[float, float]:
    """Derived constants gamma_i and sigma_i of the timer scheme."""
    if not 0.0 < a < 1.0 / (2.0 * n_i):
        raise ValueError(f"a={a} must lie in (0, 1/(2*{n_i}))")
    if mu_i <= 0.0:
        raise ValueError(f"mu={mu_i} must be positive")
    if not 0.0 < varrho < 1.0:
        raise ValueError(f"varrho={varrho} must lie in (0,1)")
    gamma = math.sqrt(n_i / a + mu_i)
    factor = 1.0 if sigma_form == "original" else 2.0
    sigma = (1.0 - varrho) * (1.0 - factor * a * n_i)
    return gamma, sigma


def omega(tau_i: float, tau_miet_i: float) -> float:
    """Timer gate: 1 below the dwell time, 0 at and above it."""
    if tau_i < 0.0 or tau_miet_i < 0.0:
        raise ValueError("clock values must be nonnegative")
    return 1.0 if tau_i < tau_miet_i else 0.0


@dataclass(frozen=True)
class PhiSolution:
    """Sampled certificate gain phi on [0, tau_end], with phi(tau) = phi_end
    held for tau beyond the grid."""

    taus: np.ndarray
    phis: np.ndarray
    tau_end: float  # numerically detected time at which phi reaches lam

    def __call__(self, tau) -> np.ndarray:
        return np.interp(tau, self.taus, self.phis)


def phi_solve(alpha: float, sigma: float, gamma: float, lam: float, samples: int = 2001) -> PhiSolution:
    """Integrate d(phi)/d(tau) = -gamma (phi^2/(alpha sigma) + 1) from
    phi(0) = 1/lam down to phi = lam.

    Used for certificate monitoring only, never in the control loop.
    """
    if not (0.0 < alpha < 1.0 and 0.0 < sigma < 1.0 and 0.0 < lam < 1.0):
        raise ValueError(f"alpha={alpha}, sigma={sigma}, lam={lam} out of domain")
    if gamma <= 0.0:
        raise ValueError(f"gamma={gamma} must be positive")

    def rhs(_t, phi):
        return -gamma * (phi**2 / (alpha * sigma) + 1.0)

    def hit_lam(_t, phi):
        return phi[0] - lam

    hit_lam.terminal = True
    hit_lam.direction = -1
    horizon = 10.0 * tau_miet(alpha, sigma, gamma, lam)
    sol = solve_ivp(rhs, (0.0, horizon), [1.0 / lam], events=hit_lam,
                    rtol=1e-10, atol=1e-12, dense_output=True, max_step=horizon / 100)
    if not sol.success or sol.t_events[0].size == 0:
        raise RuntimeError(f"phi integration failed: {sol.message}")
    tau_end = float(sol.t_events[0][0])
    taus = np.linspace(0.0, tau_end, samples)
    phis = sol.sol(taus)[0]
    return PhiSolution(taus=taus, phis=phis, tau_end=tau_end)


# ---------------------------------------------------------------------------
# dynamic-trigger plumbing


def eta_flow_derivative(eta_i: float, psi_i: float, eps_eta: float) -> float:
    """Linear class-K-infinity decay choice: d(eta)/dt = psi - eps * eta."""
    return psi_i - eps_eta * eta_i


def trigger_decision(
    eta_i: float, psi_i: float, theta_i: float, mode: Mode, tol: float = 0.0,
) -> str:
    """'jump' when the trigger predicate holds (within tol), else 'flow'.

    Static rule: psi <= 0. Dynamic rule: eta + theta*psi <= 0 and psi <= 0.
    """
    if mode == "static":
        return "jump" if psi_i <= tol else "flow"
    return "jump" if (eta_i + theta_i * psi_i <= tol and psi_i <= tol) else "flow"


def eta_reset(eta_i: float, e_tilde_i: float, p: DolkParams, gamma_i: float, lam_i: float,
              w_bar_i: float) -> float:
    """eta reset at a jump: unchanged (standard) or increased by the
    conservative lower estimate of the dropped error term (remark5)."""
    if p.reset_mode == "standard":
        return eta_i
    gain = max(abs(e_tilde_i) - 2.0 * w_bar_i, 0.0)
    return eta_i + gamma_i * lam_i * gain**2


def c_lower_bound(scheme) -> np.ndarray:
    """Per-agent Zeno-freeness bound beta_i(2 w_bar_i) for the scheme."""
    return scheme.c_lower_bound()


# ---------------------------------------------------------------------------
# scheme objects (engine-facing, vectorized)


class _SchemeBase:
    """Common per-agent plumbing shared by all triggering schemes."""

    mode: Mode
    uses_timer: bool = False
    n: int

    def eta_derivative(self, eta: np.ndarray, psi: np.ndarray) -> np.ndarray:
        if self.mode == "static":
            return np.zeros_like(eta)
        return psi - self.eps_eta * eta

    def eta_reset(self, eta_i: float, e_tilde_i: float, agent: int) -> float:
        return eta_i

    def check_zeno_guarantee(self, allow_zeno: bool) -> None:
        bound = self.c_lower_bound()
        bad = np.flatnonzero(self.c <= bound)
        # agents with a zero bound only need c >= 0
        bad = bad[(bound[bad] > 0.0) | (self.c[bad] < 0.0)]
        if bad.size and not allow_zeno:
            i = int(bad[0])
            raise ZenoGuaranteeError(
                f"c[{i}]={self.c[i]:g} does not exceed the Zeno-freeness bound "
                f"beta_i(2*w_bar)={bound[i]:g}; pass allow_zeno=True to override"
            )

    def derived_constants(self) -> dict:
        return {"c_lower_bound": self.c_lower_bound().tolist()}


class GarciaScheme(_SchemeBase):
    def __init__(self, graph: Graph, params: GarciaParams, allow_zeno: bool = False):
        self.graph = graph
        self.params = params
        self.allow_zeno = allow_zeno
        self.n = graph.n
        self.n_i = graph.neighbor_counts.astype(float)
        self.mode = params.mode
        self.eps_eta = params.eps_eta
        self.sigma = _per_agent(params.sigma, self.n)
        self.c = _per_agent(params.c, self.n)
        self.theta = _per_agent(params.theta, self.n)
        self.w_bar = _per_agent(params.w_bar, self.n)
        if (2.0 * params.a * self.n_i >= 1.0).any():
            raise ValueError(f"a={params.a} violates a < 1/(2 max_i N_i)")
        factor = 2.0 if params.form == "modified" else 1.0
        self._u_coef = self.sigma * (1.0 - factor * params.a * self.n_i)
        self._e_coef = self.n_i / params.a
        self._lap = laplacian(graph)
        if params.form == "modified":
            self.check_zeno_guarantee(allow_zeno)
        elif not allow_zeno:
            raise ZenoGuaranteeError("the noise-naive trigger form carries no Zeno guarantee; "
                                     "pass allow_zeno=True")

    def psi_vec(self, u, e_tilde, tau, y_tilde) -> np.ndarray:
        return self._u_coef * u * u - self._e_coef * e_tilde * e_tilde + self.c

    def c_lower_bound(self) -> np.ndarray:
        return self._e_coef * (2.0 * self.w_bar) ** 2

    def storage(self, state) -> float:
        w = 0.5 * state.x @ self._lap @ state.x
        return float(w + state.eta.sum())

    def derived_constants(self) -> dict:
        return {
            "N_i": self.n_i.tolist(),
            "u_coef": self._u_coef.tolist(),
            "e_coef": self._e_coef.tolist(),
            "c_lower_bound": self.c_lower_bound().tolist(),
        }


class DolkScheme(_SchemeBase):
    mode: Mode = "dynamic"
    uses_timer = True

    def __init__(self, graph: Graph, params: DolkParams, allow_zeno: bool = False):
        self.graph = graph
        self.params = params
        self.allow_zeno = allow_zeno
        self.n = graph.n
        self.n_i = graph.neighbor_counts.astype(float)
        self.eps_eta = params.eps_eta
        self.mu = _per_agent(params.mu, self.n)
        self.alpha = _per_agent(params.alpha, self.n)
        self.lam = _per_agent(params.lam, self.n)
        self.c = _per_agent(params.c, self.n)
        self.theta = _per_agent(params.theta, self.n)
        self.w_bar = _per_agent(params.w_bar, self.n)
        gamma = np.empty(self.n)
        sigma = np.empty(self.n)
        for i in range(self.n):
            gamma[i], sigma[i] = gamma_sigma_from(
                params.a, self.mu[i], params.varrho, int(self.n_i[i]), params.sigma_form
            )
        self.gamma = gamma
        self.sigma = sigma
        self.tau_miet = np.array([
            tau_miet(self.alpha[i], self.sigma[i], self.gamma[i], self.lam[i])
            for i in range(self.n)
        ])
        self._u_coef = (1.0 - self.alpha) * self.sigma
        self._e_coef = self.gamma**2 * (self.lam**2 / (self.alpha * self.sigma) + 1.0)
        self._lap = laplacian(graph)
        self._phi = [phi_solve(self.alpha[i], self.sigma[i], self.gamma[i], self.lam[i])
                     for i in range(self.n)]
        self.check_zeno_guarantee(allow_zeno)

    def psi_vec(self, u, e_tilde, tau, y_tilde) -> np.ndarray:
        gate = np.where(tau < self.tau_miet, 0.0, self._e_coef)
        return self._u_coef * u * u + self.c - gate * e_tilde * e_tilde

    def eta_reset(self, eta_i: float, e_tilde_i: float, agent: int) -> float:
        return eta_reset(eta_i, e_tilde_i, self.params, self.gamma[agent],
                         self.lam[agent], self.w_bar[agent])

    def c_lower_bound(self) -> np.ndarray:
        # the timer gate enforces the dwell time; no positive bound needed
        return np.zeros(self.n)

    def phi_at(self, agent: int, tau: float) -> float:
        if tau >= self._phi[agent].tau_end:
            return float(self.lam[agent])
        return float(self._phi[agent](tau))

    def storage(self, state) -> float:
        w = 0.5 * state.x @ self._lap @ state.x
        cert = sum(
            self.gamma[i] * self.phi_at(i, state.tau[i]) * state.e[i] ** 2
            for i in range(self.n)
        )
        return float(w + cert + state.eta.sum())

    def derived_constants(self) -> dict:
        return {
            "N_i": self.n_i.tolist(),
            "gamma": self.gamma.tolist(),
            "sigma": self.sigma.tolist(),
            "tau_miet": self.tau_miet.tolist(),
            "e_coef": self._e_coef.tolist(),
            "c_lower_bound": self.c_lower_bound().tolist(),
        }


class BerneburgScheme(_SchemeBase):
    def __init__(self, graph: Graph, params: BerneburgParams, allow_zeno: bool = False):
        self.graph = graph
        self.params = params
        self.allow_zeno = allow_zeno
        self.n = graph.n
        self.mode = params.mode
        self.eps_eta = params.eps_eta
        self.sigma = _per_agent(params.sigma, self.n)
        self.c = _per_agent(params.c, self.n)
        self.theta = _per_agent(params.theta, self.n)
        self.w_bar = _per_agent(params.w_bar, self.n)
        adj = graph.adjacency
        rho = params.rho_edge
        if rho is None:
            out_deg = graph.out_degrees
            rho = {(i, j): 0.5 / out_deg[i]
                   for i in range(self.n) for j in graph.out_neighbors(i)}
        self.rho_edge = dict(rho)
        self.vartheta = np.zeros(self.n)
        self.gamma = np.zeros(self.n)
        for i in range(self.n):
            for j in graph.out_neighbors(i):
                self.vartheta[i] += adj[i, j] * self.rho_edge[(i, int(j))]
            for j in graph.in_neighbors(i):
                self.gamma[i] += adj[j, i] / self.rho_edge[(int(j), i)]
        if ((self.vartheta <= 0.0) | (self.vartheta >= 1.0)).any():
            raise ValueError(f"vartheta={self.vartheta} must lie in (0,1); adjust rho_edge")
        self.degree = graph.out_degrees
        self._u_coef = self.sigma * (1.0 - self.vartheta)
        self._e_coef = self.degree**2 / self.vartheta + self.gamma
        self._lap = laplacian(graph)
        self.check_zeno_guarantee(allow_zeno)

    def psi_vec(self, u, e_tilde, tau, y_tilde) -> np.ndarray:
        return self._u_coef * u * u - self._e_coef * e_tilde * e_tilde + self.c

    def c_lower_bound(self) -> np.ndarray:
        return self._e_coef * (2.0 * self.w_bar) ** 2

    def storage(self, state) -> float:
        w = 0.5 * state.x @ self._lap @ state.x
        return float(w + state.eta.sum())

    def derived_constants(self) -> dict:
        return {
            "degree": self.degree.tolist(),
            "vartheta": self.vartheta.tolist(),
            "gamma": self.gamma.tolist(),
            "e_coef": self._e_coef.tolist(),
            "c_lower_bound": self.c_lower_bound().tolist(),
        }


class SingleSystemScheme(_SchemeBase):
    """Single-plant trigger built from user-supplied delta/beta hooks."""

    n = 1

    def __init__(self, hooks: SingleSystemHooks, allow_zeno: bool = False):
        self.hooks = hooks
        self.allow_zeno = allow_zeno
        self.mode = hooks.mode
        self.eps_eta = hooks.eps_eta
        self.c = np.array([hooks.c])
        self.theta = np.array([hooks.theta])
        self.w_bar = np.array([hooks.w_bar])
        self.check_zeno_guarantee(allow_zeno)

    def psi_vec(self, u, e_tilde, tau, y_tilde) -> np.ndarray:
        return np.array([psi_single(abs(float(y_tilde[0])), abs(float(e_tilde[0])), self.hooks)])

    def c_lower_bound(self) -> np.ndarray:
        return np.array([self.hooks.beta(2.0 * self.hooks.w_bar)])

    def storage(self, state) -> float:
        return float(0.5 * state.x[0] ** 2 + state.eta.sum())
