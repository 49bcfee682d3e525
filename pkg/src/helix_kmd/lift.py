"""Helical lift of planar vorticity and weak-convergence diagnostics.

A planar scalar w lifts to the divergence-free, screw-symmetric field

    omega(x) = w(Q_{-x3/h} x') * ((1/h) Q_{pi/2} x', 1),
    Q_{pi/2} x' = (-x2, x1),

which is 2 pi h periodic in x3 and satisfies omega(S_{-rho} x)
= R_rho omega(x) for every rotation-translation S_rho of the screw
group.  For the constructed vorticity w = F(psi_* - (alpha/2)
|log eps||x'|^2) the field concentrates around the helices

    gamma_j(s) = (R exp(i s/h) exp(i theta_j), s),   R = r/sqrt|log eps|,

with unit mass 8 pi per cross-section, and the weak-convergence gap

    int omega . phi dx  -  8 pi sum_j int phi(gamma_j(s)) . gamma_j'(s) ds

is evaluated with per-core planar quadrature in the concentrated
variable (where w dx' = det M U(y) eta e^{ds} dy stays O(1)) and
periodic trapezoid rules along the axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import QuadratureFailure

__all__ = [
    "VectorField3",
    "FilamentCurve",
    "lift_vorticity",
    "lifted_field",
    "helical_symmetry_defect",
    "fd_divergence",
    "filament_curves",
    "weak_convergence_gap",
    "bump_test_field",
    "stream_vorticity",
]


@dataclass(frozen=True)
class VectorField3:
    """3D vector field with a provenance tag ('lifted-from-w' | 'analytic')."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    provenance: str
    h: float | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class FilamentCurve:
    """Parametrized curve s -> R^3 with tangent and circulation weight."""

    curve: Callable[[np.ndarray], np.ndarray]
    tangent: Callable[[np.ndarray], np.ndarray]
    weight: float = 8.0 * np.pi
    period: float = 2.0 * np.pi


def _rotate_planar(xy: np.ndarray, angle: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty_like(xy)
    out[..., 0] = c * xy[..., 0] - s * xy[..., 1]
    out[..., 1] = s * xy[..., 0] + c * xy[..., 1]
    return out


def lift_vorticity(w, x: np.ndarray, h: float) -> np.ndarray:
    """omega(x) for x of shape (..., 3); w vectorized over (..., 2)."""
    x = np.asarray(x, dtype=float)
    xp = x[..., :2]
    scal = w(_rotate_planar(xp, -x[..., 2] / h))
    out = np.empty(x.shape)
    out[..., 0] = -x[..., 1] / h * scal
    out[..., 1] = x[..., 0] / h * scal
    out[..., 2] = scal
    return out


def lifted_field(w, h: float) -> VectorField3:
    return VectorField3(lambda x: lift_vorticity(w, x, h), "lifted-from-w", h)


def helical_symmetry_defect(
    field: VectorField3, rho_angle: float, box: float = 2.0,
    n_samples: int = 200, seed: int = 0, normalized: bool = False,
) -> float:
    """max |omega(S_{-rho} x) - R_{-rho} omega(x)| over random box samples.

    The screw action rotates the planar components with the same sign as
    the argument shift; lifted fields satisfy the identity exactly.
    """
    if field.h is None:
        raise ValueError("field carries no pitch; cannot apply the screw action")
    h = field.h
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, size=(n_samples, 3))
    x[:, 2] = rng.uniform(0.0, 2.0 * np.pi * abs(h), size=n_samples)
    sx = np.empty_like(x)
    sx[:, :2] = _rotate_planar(x[:, :2], -rho_angle)
    sx[:, 2] = x[:, 2] - h * rho_angle
    w1 = field(sx)
    w0 = field(x)
    rw = np.empty_like(w0)
    rw[:, :2] = _rotate_planar(w0[:, :2], -rho_angle)
    rw[:, 2] = w0[:, 2]
    diff = np.max(np.abs(w1 - rw), axis=1)
    if normalized:
        scale = np.maximum(np.max(np.abs(w0), axis=1), 1e-300)
        return float(np.max(diff / scale))
    return float(np.max(diff))


def fd_divergence(field: VectorField3, x: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """Centered-difference divergence at x of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        out += (field(x + e)[..., i] - field(x - e)[..., i]) / (2.0 * step)
    return out


def filament_curves(ctx) -> list[FilamentCurve]:
    """Concentration helices of a stream context at t = 0."""
    curves = []
    nu = 1.0 / ctx.h
    for j in range(ctx.n):
        theta_j = 2.0 * np.pi * j / ctx.n

        def curve(s, th=theta_j):
            s = np.asarray(s, dtype=float)
            out = np.empty(s.shape + (3,))
            out[..., 0] = ctx.R * np.cos(nu * s + th)
            out[..., 1] = ctx.R * np.sin(nu * s + th)
            out[..., 2] = s
            return out

        def tangent(s, th=theta_j):
            s = np.asarray(s, dtype=float)
            out = np.empty(s.shape + (3,))
            out[..., 0] = -ctx.R * nu * np.sin(nu * s + th)
            out[..., 1] = ctx.R * nu * np.cos(nu * s + th)
            out[..., 2] = 1.0
            return out

        curves.append(
            FilamentCurve(curve, tangent, weight=8.0 * np.pi,
                          period=2.0 * np.pi * abs(ctx.h))
        )
    return curves


def stream_vorticity(ctx):
    """Planar vorticity w of a stream context (direct evaluation)."""
    from .stream import nonlinearity_F, rotating_argument

    def w(xp):
        return nonlinearity_F(rotating_argument(xp, ctx), ctx)

    return w


def bump_test_field(
    center: np.ndarray, radius: float, axial_center: float,
    axial_radius: float, component: int = 2,
) -> VectorField3:
    """Compactly supported C^2 test field along one coordinate axis."""
    center = np.asarray(center, dtype=float)

    def smooth_bump(t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        q = 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        return q

    def ev(x):
        x = np.asarray(x, dtype=float)
        rp = np.hypot(x[..., 0] - center[0], x[..., 1] - center[1])
        ax = np.abs(x[..., 2] - axial_center)
        val = smooth_bump(rp / radius) * smooth_bump(ax / axial_radius)
        out = np.zeros(x.shape)
        out[..., component] = val
        return out

    return VectorField3(ev, "analytic", None)


def _core_quadrature(ctx, y_cap: float = 40.0, n_seg: int = 16, n_theta: int = 48):
    ymax = min(y_cap, 0.9 * ctx.inner_radius_y)
    if ymax <= 2.0:
        raise QuadratureFailure("inner region too small for core quadrature")
    edges = [0.0, 1.0]
    while edges[-1] < ymax:
        edges.append(min(2.0 * edges[-1], ymax))
    nodes, weights = np.polynomial.legendre.leggauss(n_seg)
    rr, ww = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        rr.append(mid + half * nodes)
        ww.append(half * weights)
    rr = np.concatenate(rr)
    ww = np.concatenate(ww)
    th = (np.arange(n_theta) + 0.5) * (2.0 * np.pi / n_theta)
    y = np.zeros((rr.size, n_theta, 2))
    y[..., 0] = rr[:, None] * np.cos(th)[None, :]
    y[..., 1] = rr[:, None] * np.sin(th)[None, :]
    w2d = (ww * rr)[:, None] * np.ones(n_theta)[None, :] * (2.0 * np.pi / n_theta)
    return y.reshape(-1, 2), w2d.ravel()


def weak_convergence_gap(
    ctx, test_field: VectorField3, n_axial: int = 48,
    y_cap: float = 40.0, return_parts: bool = False,
):
    """Volume pairing of the lifted vorticity minus the filament line sums.

    Time is frozen at t = 0: in the co-rotating construction all times
    are equivalent up to a global rotation.
    """
    from .stream import _eta_of_s, delta_s_inner
    import math

    h = ctx.h
    period = 2.0 * np.pi * abs(h)
    s3 = np.arange(n_axial) * (period / n_axial)      # periodic trapezoid
    y, wq = _core_quadrature(ctx, y_cap=y_cap)
    # scaled vorticity on the core grid: w dxi = detM * U eta e^{ds} dy
    volume = 0.0
    det_m = float(np.linalg.det(ctx.frames[0].M))
    for j, f in enumerate(ctx.frames):
        ds = delta_s_inner(y, ctx, vertex=j + 1)
        yn2 = np.einsum("...i,...i->...", y, y)
        u = 8.0 / (1.0 + yn2) ** 2
        gam = math.log(8.0) - np.log1p(yn2) * 2.0
        s_arg = gam - 4.0 * math.log(ctx.eps) - 2.0 * ctx.log_mu + ds
        eta, _ = _eta_of_s(ctx, s_arg)
        w_scaled = u * eta * np.exp(ds)               # w * (eps mu)^2
        xi = f.P + ctx.eps_mu * np.einsum("ij,...j->...i", f.Mj, y)
        for x3 in s3:
            xp = _rotate_planar(xi, x3 / h)
            pts = np.concatenate([xp, np.full(xp.shape[:-1] + (1,), x3)], axis=-1)
            phi = test_field(pts)
            integrand = w_scaled * (
                -xp[..., 1] / h * phi[..., 0]
                + xp[..., 0] / h * phi[..., 1]
                + phi[..., 2]
            )
            volume += det_m * float(np.sum(integrand * wq)) * (period / n_axial)
    line = 0.0
    for c in filament_curves(ctx):
        ss = np.arange(n_axial * 4) * (c.period / (n_axial * 4))
        pts = c.curve(ss)
        tan = c.tangent(ss)
        phi = test_field(pts)
        line += c.weight * float(
            np.sum(np.einsum("...i,...i->...", phi, tan)) * (c.period / (n_axial * 4))
        )
    gap = volume - line
    if return_parts:
        return gap, volume, line
    return gap
