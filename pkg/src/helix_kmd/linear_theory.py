"""Linearized Liouville operator: kernel, projections, radial solver.

The linearization Delta + e^Gamma around the unit bubble has a
three-dimensional bounded kernel

    Z0 = 2 + y . grad Gamma = 2 (1-|y|^2)/(1+|y|^2),
    Zi = d Gamma / d y_i    = -4 y_i/(1+|y|^2),

which obstructs solvability: the desk-scale projected solver expands the
right-hand side in angular modes and solves each radial two-point
problem on a log grid, bordering the resonant modes (k = 0 against Z0,
k = 1 against the radial factor of Z1/Z2) with a multiplier d_j and an
orthogonality row, so that

    Delta phi + e^Gamma phi + h = d0 e^G Z0 + d1 e^G Z1 + d2 e^G Z2.

For h orthogonal-ish to the kernel the d_j reproduce the projection
formula d_j ~ gamma_j \int h Z_j with gamma_j^-1 = \int e^G Z_j^2
= 32 pi / 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.sparse import lil_matrix
from scipy.sparse.linalg import spsolve

from .errors import ODESolveFailure, QuadratureFailure, SlowDecay

__all__ = [
    "kernel_Z",
    "phi2o",
    "gamma_constants",
    "ProjectedSolution",
    "projected_solve",
    "b_eps_bound_check",
]


def kernel_Z(j: int, y: np.ndarray) -> np.ndarray:
    """Bounded kernel elements of the linearized bubble operator."""
    y = np.asarray(y, dtype=float)
    v = np.einsum("...i,...i->...", y, y)
    if j == 0:
        return 2.0 * (1.0 - v) / (1.0 + v)
    if j in (1, 2):
        return -4.0 * y[..., j - 1] / (1.0 + v)
    raise ValueError("kernel index must be 0, 1 or 2")


def phi2o(y: np.ndarray | float) -> np.ndarray:
    """Radial solution of Delta p + e^G p + e^G Z0 = 0, p(0) = -8/3."""
    y = np.asarray(y, dtype=float)
    v = np.einsum("...i,...i->...", y, y) if y.shape and y.shape[-1] == 2 else y * y
    return (4.0 / 3.0) * (v - 1.0) / (v + 1.0) * np.log1p(v) - (8.0 / 3.0) / (v + 1.0)


def gamma_constants(tol: float = 1e-12) -> tuple[float, float]:
    """(gamma_0, gamma_1) with gamma_j^-1 = int e^Gamma Z_j^2 over the plane."""

    def w0(s):
        return math.pi * 32.0 * (1.0 - s) ** 2 / (1.0 + s) ** 4

    def w1(s):
        return 64.0 * math.pi * s / (1.0 + s) ** 4

    i0, e0 = quad(w0, 0.0, np.inf, epsabs=tol, epsrel=tol)
    i1, e1 = quad(w1, 0.0, np.inf, epsabs=tol, epsrel=tol)
    if e0 > 1e-8 or e1 > 1e-8:
        raise QuadratureFailure("kernel normalization quadrature failed")
    return 1.0 / i0, 1.0 / i1


def _e_gamma(rho: np.ndarray) -> np.ndarray:
    return 8.0 / (1.0 + rho * rho) ** 2


def _z0_radial(rho: np.ndarray) -> np.ndarray:
    return 2.0 * (1.0 - rho * rho) / (1.0 + rho * rho)


def _z1_radial(rho: np.ndarray) -> np.ndarray:
    return -4.0 * rho / (1.0 + rho * rho)


def _mode_matrix(u: np.ndarray, k: int) -> lil_matrix:
    """Rows of phi_uu - k^2 phi + e^{2u} e^G phi on the log-radius grid."""
    n = u.size
    du = u[1] - u[0]
    rho = np.exp(u)
    diag = np.exp(2.0 * u) * _e_gamma(rho) - float(k * k)
    A = lil_matrix((n, n))
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * du * du)
    for i in range(2, n - 2):
        for m in range(5):
            A[i, i - 2 + m] = c2[m]
        A[i, i] += diag[i]
    for i in (1, n - 2):
        A[i, i - 1] = 1.0 / du**2
        A[i, i] = -2.0 / du**2 + diag[i]
        A[i, i + 1] = 1.0 / du**2
    return A


def _apply_bcs(A: lil_matrix, rhs: np.ndarray, u: np.ndarray, k: int):
    """Inner regularity and outer decay-matched Robin rows."""
    n = u.size
    du = u[1] - u[0]
    if k == 0:
        # phi_u(umin) = 0 (radial regularity)
        A[0, 0] = -1.5 / du
        A[0, 1] = 2.0 / du
        A[0, 2] = -0.5 / du
        # outer: kill the log branch, phi_u(umax) = 0
        A[n - 1, n - 1] = 1.5 / du
        A[n - 1, n - 2] = -2.0 / du
        A[n - 1, n - 3] = 0.5 / du
    else:
        A[0, 0] = 1.0
        # outer: phi ~ rho^-k, i.e. phi_u + k phi = 0
        A[n - 1, n - 1] = 1.5 / du + float(k)
        A[n - 1, n - 2] = -2.0 / du
        A[n - 1, n - 3] = 0.5 / du
    rhs[0] = 0.0
    rhs[n - 1] = 0.0
    return A, rhs


def _solve_radial(u: np.ndarray, k: int, h_k: np.ndarray,
                  border: np.ndarray | None):
    """Solve one mode; bordered with multiplier d when `border` is given.

    k = 0: the multiplier removes the log branch, so both the value and
    the slope can be pinned at the outer edge and the solution decays;
    no kernel ambiguity remains.  k = 1: the bounded kernel element
    satisfies the homogeneous problem, so the border is paired with an
    e^Gamma-weighted orthogonality row instead.
    """
    n = u.size
    du = u[1] - u[0]
    rho = np.exp(u)
    e2u = np.exp(2.0 * u)
    A = _mode_matrix(u, k)
    rhs = -(e2u * h_k).astype(float)
    A, rhs = _apply_bcs(A, rhs, u, k)
    if border is None:
        sol = spsolve(A.tocsc(), rhs)
        if not np.all(np.isfinite(sol)):
            raise ODESolveFailure(f"mode {k} radial solve diverged")
        return sol, 0.0
    B = lil_matrix((n + 1, n + 1))
    B[:n, :n] = A
    col = e2u * _e_gamma(rho) * border
    col[0] = 0.0
    col[-1] = 0.0
    B[:n, n] = -col[:, None]
    big = np.concatenate([rhs, [0.0]])
    if k == 0:
        B[n, n - 1] = 1.0                      # outer Dirichlet row
    else:
        w = e2u * _e_gamma(rho) * border       # orthogonality row
        B[n, :n] = w[None, :]
    sol = spsolve(B.tocsc(), big)
    if not np.all(np.isfinite(sol)):
        raise ODESolveFailure(f"bordered mode {k} radial solve diverged")
    return sol[:n], float(sol[n])


@dataclass
class ProjectedSolution:
    """phi and the kernel multipliers (d0, d1, d2) of a projected solve."""

    u: np.ndarray
    cos_modes: dict
    sin_modes: dict
    d: tuple[float, float, float]
    rho_max: float

    def __post_init__(self):
        self._cs = {k: CubicSpline(self.u, v) for k, v in self.cos_modes.items()}
        self._ss = {k: CubicSpline(self.u, v) for k, v in self.sin_modes.items()}

    def phi(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        rho = np.hypot(y[..., 0], y[..., 1])
        theta = np.arctan2(y[..., 1], y[..., 0])
        uc = np.clip(np.log(np.maximum(rho, 1e-300)), self.u[0], self.u[-1])
        out = np.zeros_like(rho)
        for k, s in self._cs.items():
            out += s(uc) * np.cos(k * theta)
        for k, s in self._ss.items():
            out += s(uc) * np.sin(k * theta)
        return out

    def weighted_norm(self, m: float, n_samples: int = 400) -> float:
        """sup (1+|y|)^{m-2} |phi| over the solved disk."""
        rho = np.geomspace(np.exp(self.u[0]), self.rho_max, n_samples)
        th = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
        y = np.zeros((rho.size, th.size, 2))
        y[..., 0] = rho[:, None] * np.cos(th)[None, :]
        y[..., 1] = rho[:, None] * np.sin(th)[None, :]
        vals = np.abs(self.phi(y))
        w = (1.0 + rho) ** (m - 2.0)
        return float(np.max(vals * w[:, None]))


def _decay_exponent(h_func, rho_max: float) -> float:
    """Fitted decay rate of max_theta |h| over the outer decade."""
    rho = np.geomspace(rho_max / 10.0, rho_max, 12)
    th = np.linspace(0.0, 2.0 * np.pi, 32, endpoint=False)
    y = np.zeros((rho.size, th.size, 2))
    y[..., 0] = rho[:, None] * np.cos(th)[None, :]
    y[..., 1] = rho[:, None] * np.sin(th)[None, :]
    prof = np.max(np.abs(h_func(y)), axis=1)
    if np.max(prof) < 1e-14:
        return np.inf
    prof = np.maximum(prof, 1e-300)
    return -float(np.polyfit(np.log(rho), np.log(prof), 1)[0])


def projected_solve(
    h_func,
    rho_max: float = 100.0,
    modes: int = 8,
    n_radial: int = 3072,
    rho_min: float = 1e-5,
    check_decay: bool = True,
) -> ProjectedSolution:
    """Solve the projected linearized problem for a planar source h(y).

    h_func must be vectorized over y of shape (..., 2) and decay faster
    than |y|^-2 (checked unless disabled).  Returns the solution with
    kernel components removed and the multipliers (d0, d1, d2).
    """
    if check_decay:
        m_fit = _decay_exponent(h_func, rho_max)
        if m_fit <= 2.0:
            raise SlowDecay(f"source decays like |y|^-{m_fit:.2f}; need faster than -2")
    n_theta = max(32, 4 * modes)
    u = np.linspace(math.log(rho_min), math.log(rho_max), n_radial)
    rho = np.exp(u)
    th = np.arange(n_theta) * (2.0 * np.pi / n_theta)
    y = np.zeros((n_radial, n_theta, 2))
    y[..., 0] = rho[:, None] * np.cos(th)[None, :]
    y[..., 1] = rho[:, None] * np.sin(th)[None, :]
    hh = np.fft.rfft(h_func(y), axis=1)
    cos_modes, sin_modes = {}, {}
    d0 = d1 = d2 = 0.0
    z0 = _z0_radial(rho)
    z1 = _z1_radial(rho)
    for k in range(min(modes, n_theta // 2) + 1):
        scale = 1.0 / n_theta if k in (0, n_theta // 2) else 2.0 / n_theta
        hc = scale * hh[:, k].real
        hs = -scale * hh[:, k].imag
        if k == 0:
            sol, d0 = _solve_radial(u, 0, hc, border=z0)
            cos_modes[0] = sol
            continue
        if k == 1:
            solc, d1 = _solve_radial(u, 1, hc, border=z1)
            sols, d2 = _solve_radial(u, 1, hs, border=z1)
        else:
            solc, _ = _solve_radial(u, k, hc, border=None)
            sols, _ = _solve_radial(u, k, hs, border=None)
        if np.max(np.abs(solc)) > 0.0:
            cos_modes[k] = solc
        if np.max(np.abs(sols)) > 0.0:
            sin_modes[k] = sols
    # remove residual k=1 kernel components in the e^Gamma-weighted product
    # (mode 0 is already unique: its far field is pinned to zero)
    e2u = np.exp(2.0 * u)
    wq = e2u * _e_gamma(rho)
    nz1 = np.sum(wq * z1 * z1)
    if 1 in cos_modes:
        cos_modes[1] = cos_modes[1] - (np.sum(wq * z1 * cos_modes[1]) / nz1) * z1
    if 1 in sin_modes:
        sin_modes[1] = sin_modes[1] - (np.sum(wq * z1 * sin_modes[1]) / nz1) * z1
    return ProjectedSolution(
        u=u, cos_modes=cos_modes, sin_modes=sin_modes,
        d=(float(d0), float(d1), float(d2)), rho_max=rho_max,
    )


def b_eps_bound_check(ctx, a_decay: float = 0.8, y_cap: float = 200.0,
                      n_r: int = 96, n_theta: int = 64) -> float:
    """Fitted constant of the derivative-deviation bound.

    Computes b(y) = (eps mu)^2 F'(s(x(y))) - e^Gamma(y) on the inner disk
    and returns sup |b| (1+|y|^{2+a}) / (eps mu sqrt|log eps|).
    """
    from .stream import b_eps_inner

    ymax = min(y_cap, 0.9 * ctx.inner_radius_y)
    rr = np.concatenate([[0.0], np.geomspace(0.05, ymax, n_r)])
    th = (np.arange(n_theta) + 0.5) * (2.0 * np.pi / n_theta)
    y = np.zeros((rr.size, n_theta, 2))
    y[..., 0] = rr[:, None] * np.cos(th)[None, :]
    y[..., 1] = rr[:, None] * np.sin(th)[None, :]
    vals = b_eps_inner(y.reshape(-1, 2), ctx)
    yn = np.hypot(y[..., 0], y[..., 1]).ravel()
    weight = (1.0 + yn ** (2.0 + a_decay)) / (ctx.eps_mu * ctx.sqrt_log)
    return float(np.max(np.abs(vals) * weight))
