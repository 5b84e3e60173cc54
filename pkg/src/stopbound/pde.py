"""Finite-difference obstacle problem ``max{(L - r)v, F - v} = 0``.

Solved by projected SOR on a uniform grid over ``[0, x_max] x [0, y_max]``.
The axes are degenerate for the generator (both coefficients vanish), so the
one-product values ``v1`` and ``v2`` are imposed there; the far edges lie deep
in the stopping region and carry ``v = F``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .boundary import Boundary, project_feasible
from .closed_form import v1, v2, x_star, y_star
from .model import ModelParams, payoff_F

log = logging.getLogger(__name__)


class PdeConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last max update {residual:.3g})")
        self.residual = residual


class TruncationError(RuntimeError):
    """The truncated domain is too small to contain the free boundary."""


@dataclass(frozen=True)
class PdeConfig:
    x_max: float = 250.0
    y_max: float = 150.0
    nx: int = 200
    ny: int = 200
    omega: float = 1.9
    psor_tol: float = 1e-9
    max_sweeps: int = 100_000

    def validate(self, p: ModelParams) -> None:
        if self.x_max <= 1.5 * x_star(p):
            raise ValueError(f"x_max={self.x_max} must exceed 1.5 x* = {1.5 * x_star(p):.6g}")
        if self.y_max <= 1.5 * y_star(p):
            raise ValueError(f"y_max={self.y_max} must exceed 1.5 y* = {1.5 * y_star(p):.6g}")
        if self.nx < 50 or self.ny < 50:
            raise ValueError("nx and ny must be at least 50")
        if not 1.0 < self.omega < 2.0:
            raise ValueError("omega must lie in (1, 2)")
        if not self.psor_tol > 0 or self.max_sweeps < 1:
            raise ValueError("psor_tol must be positive and max_sweeps >= 1")


@dataclass
class PdeSolution:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # indexed [i, j] <-> (xs[i], ys[j])
    boundary: Boundary | None
    max_residual: float
    sweeps: int
    config: PdeConfig

    @property
    def payoff(self) -> np.ndarray:
        return self._payoff

    def attach_payoff(self, F: np.ndarray) -> None:
        self._payoff = F


def _axis_coefficients(sigma: float, alpha: float, z: np.ndarray, dz: float):
    """Neighbour weights of ``0.5 s^2 z^2 d2/dz2 + a z d/dz`` at nodes ``z``.

    Central differences, switched to one-sided upwinding where the drift would
    make a neighbour weight negative.
    """
    diff = 0.5 * sigma * sigma * z * z / (dz * dz)
    drift = alpha * z
    lower = diff - drift / (2 * dz)
    upper = diff + drift / (2 * dz)
    bad_lower = lower < 0
    bad_upper = upper < 0
    lower = np.where(bad_lower, diff, lower)
    upper = np.where(bad_lower, diff + drift / dz, upper)
    upper = np.where(bad_upper, diff, upper)
    lower = np.where(bad_upper, diff - drift / dz, lower)
    return lower, upper


def _psor(v, F, weights, diag, omega, tol, max_sweeps, colour_masks):
    """Red-black projected SOR on the interior of ``v`` (modified in place)."""
    shifts = weights  # list of (weight_array, neighbour-slicer)
    for sweep in range(1, max_sweeps + 1):
        biggest = 0.0
        for mask in colour_masks:
            acc = np.zeros_like(diag)
            for w, take in shifts:
                acc += w * take(v)
            inner = v[1:-1, 1:-1] if v.ndim == 2 else v[1:-1]
            obst = F[1:-1, 1:-1] if v.ndim == 2 else F[1:-1]
            target = np.maximum(obst, inner + omega * (acc / diag - inner))
            delta = np.abs(target - inner)[mask]
            if delta.size:
                biggest = max(biggest, float(delta.max()))
            inner[mask] = target[mask]
        if biggest < tol:
            return sweep, biggest
    raise PdeConvergenceError(f"projected SOR did not converge in {max_sweeps} sweeps", biggest)


def _colour_masks(shape):
    idx = np.indices(shape).sum(axis=0)
    return [idx % 2 == 0, idx % 2 == 1]


def solve_vi(p: ModelParams, cfg: PdeConfig | None = None, extract: bool = True) -> PdeSolution:
    cfg = cfg or PdeConfig()
    cfg.validate(p)
    xs = np.linspace(0.0, cfg.x_max, cfg.nx + 1)
    ys = np.linspace(0.0, cfg.y_max, cfg.ny + 1)
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = payoff_F(p, X, Y)

    v = np.maximum(F, 0.0)
    v[0, :] = v2(p, ys)
    v[:, 0] = v1(p, xs)
    v[-1, :] = F[-1, :]
    v[:, -1] = F[:, -1]

    xi = X[1:-1, 1:-1]
    yi = Y[1:-1, 1:-1]
    west, east = _axis_coefficients(p.sigma1, p.alpha1, xi, dx)
    south, north = _axis_coefficients(p.sigma2, p.alpha2, yi, dy)
    diag = west + east + south + north + p.r
    weights = [
        (west, lambda a: a[:-2, 1:-1]),
        (east, lambda a: a[2:, 1:-1]),
        (south, lambda a: a[1:-1, :-2]),
        (north, lambda a: a[1:-1, 2:]),
    ]
    sweeps, _ = _psor(v, F, weights, diag, cfg.omega, cfg.psor_tol, cfg.max_sweeps,
                      _colour_masks(diag.shape))
    log.info("projected SOR converged after %d sweeps", sweeps)

    acc = sum(w * take(v) for w, take in weights)
    generator_residual = (acc - diag * v[1:-1, 1:-1]) / diag  # (L - r)v scaled to value units
    gap = v[1:-1, 1:-1] - F[1:-1, 1:-1]
    max_residual = float(np.max(np.abs(np.minimum(gap, -generator_residual))))

    sol = PdeSolution(xs, ys, v, None, max_residual, sweeps, cfg)
    sol.attach_payoff(F)
    if extract:
        sol.boundary = extract_boundary(sol, p)
    return sol


def contact_heights(sol: PdeSolution, contact_tol: float) -> np.ndarray:
    """Raw free-boundary height in every x-column of the grid.

    The first node with ``v - F < contact_tol`` brackets the boundary.  Near
    contact ``v - F`` is quadratic in the distance, so the crossing is located
    by extrapolating ``sqrt(v - F)`` linearly from the two nodes below it.
    """
    gap = np.maximum(sol.values - sol.payoff, 0.0)
    ys = sol.ys
    dy = ys[1] - ys[0]
    heights = np.empty(len(sol.xs))
    for i in range(len(sol.xs)):
        hit = np.nonzero(gap[i] < contact_tol)[0]
        if hit.size == 0:
            raise TruncationError(
                f"no contact in column x={sol.xs[i]:.6g}; increase y_max beyond {sol.ys[-1]:.6g}"
            )
        j = int(hit[0])
        if j == 0:
            heights[i] = 0.0
            continue
        if j == 1:
            # one node below contact gives no slope; the crossing lies in (0, dy)
            heights[i] = 0.5 * dy
            continue
        s1 = np.sqrt(gap[i, j - 1])
        s2 = np.sqrt(gap[i, j - 2])
        step = s1 / (s2 - s1) if s2 > s1 else 0.0
        heights[i] = ys[j - 1] + dy * min(max(step, 0.0), 1.0)
    return heights


def extract_boundary(sol: PdeSolution, p: ModelParams, contact_tol: float | None = None,
                     project: bool = True) -> Boundary:
    """``b(x) = sup{y : v > F}`` on the x-nodes up to ``x*``, then ``(x*, 0)``."""
    if contact_tol is None:
        contact_tol = 1e-6 * p.I
    heights = contact_heights(sol, contact_tol)
    xe = x_star(p)
    keep = sol.xs < xe
    xs = np.append(sol.xs[keep], xe)
    bs = np.append(heights[keep], 0.0)
    if project:
        bs = project_feasible(p, xs, bs)
    return Boundary(xs, bs)


def solve_axis_vi(p: ModelParams, x_max: float, n: int, omega: float = 1.9, tol: float = 1e-10,
                  max_sweeps: int = 1_000_000):
    """One-product obstacle problem on the axis ``y = 0`` with the same stencil.

    Returns ``(xs, v)``; compared against the closed form ``v1`` this measures
    the discretisation order of the scheme.
    """
    xs = np.linspace(0.0, x_max, n + 1)
    dx = xs[1] - xs[0]
    F = p.Q1 * xs / p.delta1 - p.I
    v = np.maximum(F, 0.0)
    v[0] = 0.0
    v[-1] = F[-1]
    lower, upper = _axis_coefficients(p.sigma1, p.alpha1, xs[1:-1], dx)
    diag = lower + upper + p.r
    weights = [(lower, lambda a: a[:-2]), (upper, lambda a: a[2:])]
    masks = [np.arange(n - 1) % 2 == 0, np.arange(n - 1) % 2 == 1]
    _psor(v, F, weights, diag, omega, tol, max_sweeps, masks)
    return xs, v
