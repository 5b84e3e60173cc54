"""Deterministic evaluation of the integral-equation right-hand side.

    rhs(x, y; b) = int_0^inf e^{-rt} int rho1(t, x, psi)
                   int_{b(psi)}^inf (Q1 psi + Q2 eta - rI) rho2(t, y, eta) d eta d psi dt

The eta-integral is a log-normal partial expectation and is done in closed
form.  The psi-integral runs over the standard-normal variable of log X_t,
split at ``x_end`` beyond which ``b`` is constant (that part is closed form
too).  The time integral is mapped to ``u = 1 - e^{-rt}`` on ``[0, u_max]``.
Only meant for spot checks: every evaluation nests two adaptive quadratures.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .boundary import Boundary
from .model import ModelParams

# below this many standard deviations the log-price density carries < 1e-32 mass
_Z_FLOOR = -12.0


class QuadratureAccuracyError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate {estimate:.12g}, error bound {error_bound:.3g})")
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class QuadConfig:
    t_cutoff: float | None = None  # None: the time where 1 - e^{-rt} = 1 - 1e-8
    rel_tol: float = 1e-8
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.t_cutoff is not None and not self.t_cutoff > 0:
            raise ValueError("t_cutoff must be positive")
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError("rel_tol must lie in (0, 1e-2]")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")

    def horizon(self, r: float) -> float:
        return self.t_cutoff if self.t_cutoff is not None else math.log(1e8) / r


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_bound: float
    tail_bound: float


def _quad(func, a, b, q: QuadConfig, what: str, points=None, abs_floor: float = 0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(func, a, b, epsrel=q.rel_tol, epsabs=abs_floor,
                             limit=q.max_subdivisions, points=points, full_output=1)
    value, err = out[0], out[1]
    if len(out) > 3 and err > max(q.rel_tol * abs(value), abs_floor) * 10:
        raise QuadratureAccuracyError(f"{what}: {out[3].splitlines()[0]}", value, err)
    return value, err


_GL_LO = np.polynomial.legendre.leggauss(10)
_GL_HI = np.polynomial.legendre.leggauss(21)


def _panel_sums(func, a: np.ndarray, b: np.ndarray, rule) -> np.ndarray:
    nodes, weights = rule
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ weights)


def adaptive_gauss_legendre(func, edges, rel_tol: float, abs_tol: float, max_subdivisions: int,
                            max_width: float = np.inf):
    """Integrate a vectorised ``func`` over ``[edges[0], edges[-1]]``.

    Panels start at the given edges (put kinks there) and are bisected until
    the 10- and 21-point Gauss-Legendre sums agree.  Returns ``(value, error)``.
    """
    edges = np.asarray(edges, dtype=float)
    if np.isfinite(max_width):
        pieces = [np.linspace(lo, hi, int(np.ceil((hi - lo) / max_width)) + 1)[:-1]
                  for lo, hi in zip(edges[:-1], edges[1:])]
        edges = np.append(np.concatenate(pieces), edges[-1])
    lo, hi = edges[:-1], edges[1:]
    total, total_err = 0.0, 0.0
    for _ in range(max_subdivisions):
        fine = _panel_sums(func, lo, hi, _GL_HI)
        coarse = _panel_sums(func, lo, hi, _GL_LO)
        err = np.abs(fine - coarse)
        budget = max(rel_tol * abs(total + fine.sum()), abs_tol)
        done = err <= budget * (hi - lo) / (edges[-1] - edges[0])
        total += fine[done].sum()
        total_err += err[done].sum()
        if done.all():
            return total, total_err
        lo, hi = lo[~done], hi[~done]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    rest = _panel_sums(func, lo, hi, _GL_HI).sum()
    raise QuadratureAccuracyError("space integral: subdivision limit reached", total + rest,
                                  total_err + float(np.abs(rest)))


def _upper_tail_masses(start: float, alpha: float, sigma: float, t: float, cut):
    """``(P(S_t >= cut), E[S_t 1{S_t >= cut}])`` for a GBM started at ``start``."""
    cut = np.asarray(cut, dtype=float)
    if start <= 0:
        hit = (cut <= 0).astype(float)
        return hit, np.zeros_like(hit)
    growth = start * math.exp(alpha * t)
    sd = sigma * math.sqrt(t)
    with np.errstate(divide="ignore"):
        log_ratio = np.where(cut > 0, np.log(start / np.where(cut > 0, cut, 1.0)), np.inf)
    d2 = (log_ratio + (alpha - 0.5 * sigma * sigma) * t) / sd
    d1 = d2 + sd
    return ndtr(d2), growth * ndtr(d1)


def inner_integral(p: ModelParams, psi, t: float, y: float, cut):
    """``int_cut^inf (Q1 psi + Q2 eta - rI) rho2(t, y, eta) d eta`` in closed form."""
    prob, partial = _upper_tail_masses(y, p.alpha2, p.sigma2, t, cut)
    return (p.Q1 * np.asarray(psi) - p.r * p.I) * prob + p.Q2 * partial


def _space_integral(p: ModelParams, x: float, y: float, b: Boundary, t: float, q: QuadConfig):
    """``E[inner(X_t, t, y, b(X_t))]`` with ``X_0 = x``."""
    if x <= 0:
        return float(inner_integral(p, 0.0, t, y, b(0.0))), 0.0
    sd = p.sigma1 * math.sqrt(t)
    drift = (p.alpha1 - 0.5 * p.sigma1**2) * t
    prob_y, part_y = _upper_tail_masses(y, p.alpha2, p.sigma2, t, b.tail)
    if b.is_constant:
        part_x = x * math.exp(p.alpha1 * t)
        return float((p.Q1 * part_x - p.r * p.I) * prob_y + p.Q2 * part_y), 0.0
    # region beyond the grid, where b equals its constant tail
    z_end = (math.log(b.x_end / x) - drift) / sd
    tail_x_prob = ndtr(-z_end)
    tail_x_part = x * math.exp(p.alpha1 * t) * ndtr(sd - z_end)
    closed = float((p.Q1 * tail_x_part - p.r * p.I * tail_x_prob) * prob_y + p.Q2 * part_y * tail_x_prob)
    if z_end <= _Z_FLOOR:
        return closed, 0.0

    def integrand(z):
        psi = x * np.exp(drift + sd * z)
        return inner_integral(p, psi, t, y, b(psi)) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

    zs = (np.log(b.xs[1:-1] / x) - drift) / sd
    edges = np.unique(np.concatenate([[_Z_FLOOR, z_end], zs[(zs > _Z_FLOOR) & (zs < z_end)]]))
    scale = p.Q1 * x * math.exp(p.alpha1 * t) + p.Q2 * y * math.exp(p.alpha2 * t) + p.r * p.I
    val, err = adaptive_gauss_legendre(integrand, edges, q.rel_tol, 1e-3 * q.rel_tol * scale,
                                       q.max_subdivisions, max_width=1.0)
    return closed + val, err


def _decade_points(u_max: float) -> list[float]:
    # near u = 1 the integrand grows like (1 - u)^(-alpha/r); one panel per decade
    # keeps QUADPACK from underestimating its error there
    pts, k = [], 1
    while 1.0 - 10.0**-k < u_max:
        pts.append(1.0 - 10.0**-k)
        k += 1
    return pts


def _time_tail_bound(p: ModelParams, x: float, y: float, horizon: float) -> float:
    # |integrand| <= e^{-rt} (Q1 x e^{a1 t} + Q2 y e^{a2 t} + rI)
    return (p.Q1 * x * math.exp(-p.delta1 * horizon) / p.delta1
            + p.Q2 * y * math.exp(-p.delta2 * horizon) / p.delta2
            + p.I * math.exp(-p.r * horizon))


def rhs_quadrature_detail(p: ModelParams, x: float, y: float, b: Boundary,
                          q: QuadConfig | None = None) -> QuadResult:
    q = q or QuadConfig()
    if x < 0 or y < 0:
        raise ValueError("rhs_quadrature needs x >= 0 and y >= 0")
    if b.is_constant and math.isinf(b.tail):
        return QuadResult(0.0, 0.0, 0.0)
    horizon = q.horizon(p.r)
    u_max = 1.0 - math.exp(-p.r * horizon)

    def integrand(u):
        if u <= 0.0:
            # t -> 0: X_t = x, Y_t = y
            g = p.Q1 * x + p.Q2 * y - p.r * p.I
            return g if y >= b(x) else 0.0
        t = -math.log1p(-u) / p.r
        val, _ = _space_integral(p, x, y, b, t, q)
        return val

    scale = (p.Q1 * x / p.delta1 + p.Q2 * y / p.delta2 + p.I) * p.r
    val, err = _quad(integrand, 0.0, u_max, q, "time integral", _decade_points(u_max) or None,
                     abs_floor=1e-3 * q.rel_tol * scale)
    return QuadResult(val / p.r, err / p.r, _time_tail_bound(p, x, y, horizon))


def rhs_quadrature(p: ModelParams, x: float, y: float, b: Boundary, q: QuadConfig | None = None) -> float:
    """Expected discounted ``(Q1 X + Q2 Y - rI)`` accrued while ``Y >= b(X)``."""
    return rhs_quadrature_detail(p, x, y, b, q).value


def psi_quadrature(p: ModelParams, x: float, y: float, b: Boundary, q: QuadConfig | None = None) -> float:
    """The fixed-point operator evaluated by quadrature instead of sampling."""
    return float(p.lam * (p.I - p.Q1 * x / p.delta1)) + p.lam * rhs_quadrature(p, x, y, b, q)


def fredholm_kernel_K(p: ModelParams, x: float, psi: float, alpha_start: float, beta_cut: float,
                      q: QuadConfig | None = None) -> float:
    """``int_0^inf e^{-rt} rho1(t, x, psi) int_beta^inf (Q1 psi + Q2 eta - rI) rho2(t, alpha, eta)``."""
    q = q or QuadConfig()
    if not psi > 0 or not alpha_start > 0:
        raise ValueError("fredholm_kernel_K needs psi > 0 and alpha_start > 0")
    if math.isinf(beta_cut) and beta_cut > 0:
        return 0.0
    if x <= 0:
        return 0.0  # X stays at 0, so its law has no density on psi > 0
    horizon = q.horizon(p.r)
    u_max = 1.0 - math.exp(-p.r * horizon)
    log_ratio = math.log(psi / x)

    def integrand(u):
        if u <= 0.0:
            return 0.0
        t = -math.log1p(-u) / p.r
        sd = p.sigma1 * math.sqrt(t)
        m = log_ratio - (p.alpha1 - 0.5 * p.sigma1**2) * t
        dens = math.exp(-m * m / (2 * sd * sd)) / (psi * sd * math.sqrt(2 * math.pi))
        if dens == 0.0:
            return 0.0
        return dens * float(inner_integral(p, psi, t, alpha_start, beta_cut))

    # the time density is sharply peaked where the log-price drift reaches psi
    points = _decade_points(u_max)
    mu = p.alpha1 - 0.5 * p.sigma1**2
    if mu != 0 and log_ratio / mu > 0:
        t_peak = log_ratio / mu
        if t_peak < horizon:
            points = sorted(set(points) | {1.0 - math.exp(-p.r * t_peak)})
    val, _ = _quad(integrand, 0.0, u_max, q, "kernel time integral", points or None)
    return val / p.r


def kernel_integral(p: ModelParams, x: float, y: float, b: Boundary, q: QuadConfig | None = None,
                    log_span: float = 30.0) -> float:
    """``int_0^inf K(x, psi, y, b(psi)) d psi``: the right-hand side with the
    space and time integrals taken in the opposite order."""
    q = q or QuadConfig()
    if x <= 0:
        raise ValueError("kernel_integral needs x > 0")
    centre = math.log(x)
    lo, hi = centre - log_span, centre + log_span
    split = math.log(b.x_end)
    kinks = [math.log(v) for v in b.xs[1:-1]] + [centre]

    def integrand(s):
        psi = math.exp(s)
        return fredholm_kernel_K(p, x, psi, y, float(b(psi)), q) * psi

    total = 0.0
    for a, c in ((lo, min(split, hi)), (max(split, lo), hi)):
        if c <= a:
            continue
        pts = sorted({k for k in kinks if a < k < c}) or None
        if pts is not None and len(pts) >= q.max_subdivisions:
            pts = None
        val, _ = _quad(integrand, a, c, q, "kernel space integral", pts)
        total += val
    return total
