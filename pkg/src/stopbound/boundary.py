"""Optimal investment boundary as the fixed point of a Monte-Carlo operator.

The boundary ``b`` solves ``b(x) = Psi(x, b(x); b)`` where

    Psi(x, y; b) = f(x) + (lam / r) E[(Q1 X + Q2 Y - rI) 1{Y >= b(X)}]

with ``(X, Y)`` the prices at an independent Exp(r) time started from
``(x, y)``.  Iterating ``b_n(x) = Psi(x, b_{n-1}(x); b_{n-1})`` from a
parabola anchored at ``(0, y*)`` and ``(x*, 0)`` converges to the boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .closed_form import x_star, y_star
from .model import ModelParams, indifference_f, kill_line_h
from .sampler import SamplerConfig, StateSample, derive_seed, draw_unit_batch, sample_mean

log = logging.getLogger(__name__)

ESTIMATORS = ("auto", "direct", "complement")


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    std_error: float
    n: int

    def __post_init__(self):
        if self.std_error < 0 or self.n < 1:
            raise ValueError("ValueEstimate needs std_error >= 0 and n >= 1")

    def as_dict(self) -> dict:
        return {"mean": float(self.mean), "std_error": float(self.std_error), "n": int(self.n)}


@dataclass(frozen=True, eq=False)
class Boundary:
    """Piecewise-linear curve through ``(xs[i], bs[i])``, equal to ``tail`` past ``xs[-1]``."""

    xs: np.ndarray
    bs: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        bs = np.asarray(self.bs, dtype=float)
        if xs.ndim != 1 or xs.shape != bs.shape or len(xs) < 2:
            raise ValueError("Boundary needs matching 1-D node arrays of length >= 2")
        if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
            raise ValueError("Boundary grid must start at 0 and be strictly increasing")
        xs.setflags(write=False)
        bs.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "bs", bs)

    @classmethod
    def constant(cls, value: float, x_end: float = 1.0) -> "Boundary":
        """``b(x) = value`` for every ``x >= 0`` (``value`` may be ``inf``)."""
        return cls(np.array([0.0, x_end]), np.array([value, value]), tail=value)

    @property
    def x_end(self) -> float:
        return float(self.xs[-1])

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.bs == self.tail))

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.bs)) and math.isfinite(self.tail))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            out = np.full(x.shape, self.tail)
        else:
            out = np.interp(x, self.xs, self.bs, right=self.tail)
        return out if out.ndim else float(out)

    def __eq__(self, other):
        if not isinstance(other, Boundary):
            return NotImplemented
        return (
            np.array_equal(self.xs, other.xs)
            and np.array_equal(self.bs, other.bs)
            and self.tail == other.tail
        )

    def with_values(self, bs) -> "Boundary":
        return Boundary(self.xs, np.asarray(bs, dtype=float), self.tail)

    def scaled(self, factor: float) -> "Boundary":
        return Boundary(self.xs, self.bs * factor, self.tail * factor)


@dataclass
class SolveReport:
    iterations: int
    sup_change_history: list[float]
    residual: float
    residual_se: float
    converged: bool
    node_se: list[float] = field(default_factory=list)
    node_residual: list[float] = field(default_factory=list)
    tol: float = 0.0

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "sup_change_history": [float(v) for v in self.sup_change_history],
            "residual": float(self.residual),
            "residual_se": float(self.residual_se),
            "converged": bool(self.converged),
            "node_se": [float(v) for v in self.node_se],
            "node_residual": [float(v) for v in self.node_residual],
            "tol": float(self.tol),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolveReport":
        return cls(**data)


def chebyshev_grid(x_end: float, n: int) -> np.ndarray:
    """Chebyshev-Lobatto nodes on ``[0, x_end]``, clustered at both ends."""
    k = np.arange(n)
    xs = 0.5 * x_end * (1.0 - np.cos(np.pi * k / (n - 1)))
    xs[0], xs[-1] = 0.0, x_end
    return xs


def initial_parabola(p: ModelParams, grid_size: int = 40) -> Boundary:
    xe, ye = x_star(p), y_star(p)
    xs = chebyshev_grid(xe, grid_size)
    return Boundary(xs, ye * (1.0 - xs / xe) ** 2)


def initial_line(p: ModelParams, grid_size: int = 40) -> Boundary:
    """Straight segment from ``(0, y*)`` to ``(x*, 0)``."""
    xe, ye = x_star(p), y_star(p)
    xs = chebyshev_grid(xe, grid_size)
    return Boundary(xs, ye * (1.0 - xs / xe))


def _resolve_estimator(estimator: str, b: Boundary) -> str:
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    if estimator == "auto":
        return "complement" if b.is_finite else "direct"
    if estimator == "complement" and not b.is_finite:
        raise ValueError("complement estimator needs a finite boundary")
    return estimator


def stopping_terms(p: ModelParams, x: float, y: float, b: Boundary, batch: StateSample, estimator: str):
    """Per-sample ``g 1{A}`` where ``g = Q1 X + Q2 Y - rI``.

    ``direct`` uses the stopping event ``A = {Y >= b(X)}``; ``complement``
    uses ``A = {Y < b(X)}``.  Because ``E[g] = r F(x, y)`` exactly, the two
    carry the same information, but on the complement both prices are bounded
    by ``(x*, y*)`` so the summand is bounded and its variance finite.
    """
    X = x * batch.x_unit_at_zeta
    Y = y * batch.y_unit_at_zeta
    g = p.Q1 * X + p.Q2 * Y - p.r * p.I
    below = Y < b(X)
    if estimator == "direct":
        return np.where(below, 0.0, g)
    return np.where(below, g, 0.0)


def psi_on_batch(p: ModelParams, xs, ys, b: Boundary, batch: StateSample,
                 estimator: str = "auto", antithetic: bool = False):
    """Evaluate the operator at points ``(xs[i], ys[i])`` on one shared batch.

    Returns ``(means, std_errors)`` arrays.
    """
    estimator = _resolve_estimator(estimator, b)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    means = np.empty(len(xs))
    ses = np.empty(len(xs))
    scale = p.lam / p.r
    for i, (x, y) in enumerate(zip(xs, ys)):
        terms = stopping_terms(p, x, y, b, batch, estimator)
        m, se, _ = sample_mean(terms, antithetic)
        if estimator == "direct":
            means[i] = indifference_f(p, x) + scale * m
        else:
            means[i] = y - scale * m
        ses[i] = scale * se
    return means, ses


def psi(p: ModelParams, x: float, y: float, b: Boundary, cfg: SamplerConfig,
        estimator: str = "auto") -> ValueEstimate:
    """Monte-Carlo estimate of the operator at a single point."""
    if x < 0 or y < 0:
        raise ValueError("psi needs x >= 0 and y >= 0")
    batch = draw_unit_batch(p, cfg)
    m, se = psi_on_batch(p, [x], [y], b, batch, estimator, cfg.antithetic)
    return ValueEstimate(float(m[0]), float(se[0]), len(batch))


def project_feasible(p: ModelParams, xs: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Nearest class-M shape: clamp to ``[max(h, 0), y*]``, monotone, anchored."""
    ye = y_star(p)
    lo = np.maximum(kill_line_h(p, xs), 0.0)
    vals = np.clip(raw, lo, ye)
    vals = isotonic_regression(vals, increasing=False).x
    vals = np.maximum(vals, lo)
    vals[0] = ye
    vals[-1] = 0.0
    return vals


def iterate_once(p: ModelParams, b_prev: Boundary, cfg: SamplerConfig, relaxation: float = 1.0,
                 estimator: str = "auto", batch: StateSample | None = None) -> Boundary:
    """One sweep ``b_new(x) = Psi(x, b_prev(x); b_prev)`` over the grid nodes."""
    if not 0 < relaxation <= 1:
        raise ValueError("relaxation must lie in (0, 1]")
    if batch is None:
        batch = draw_unit_batch(p, cfg)
    raw, _ = psi_on_batch(p, b_prev.xs, b_prev.bs, b_prev, batch, estimator, cfg.antithetic)
    if relaxation < 1:
        raw = relaxation * raw + (1.0 - relaxation) * b_prev.bs
    return b_prev.with_values(project_feasible(p, b_prev.xs, raw))


def fixed_point_residual(p: ModelParams, b: Boundary, cfg: SamplerConfig, estimator: str = "auto"):
    """Per-node ``|b - Psi(., b; b)|`` and standard errors on an independent batch."""
    batch = draw_unit_batch(p, cfg)
    est, se = psi_on_batch(p, b.xs, b.bs, b, batch, estimator, cfg.antithetic)
    return np.abs(b.bs - est), se


def solve(p: ModelParams, grid_size: int = 40, cfg: SamplerConfig | None = None,
          tol: float | None = None, max_iter: int = 50, relaxation: float = 1.0,
          initial: Boundary | None = None, estimator: str = "auto") -> tuple[Boundary, SolveReport]:
    """Fixed-point iteration until the sup-norm change between sweeps drops below ``tol``.

    Iteration ``n`` draws from ``derive_seed(cfg.seed, n)``; the final residual
    uses ``derive_seed(cfg.seed, 0)``, which no iteration touches.
    Non-convergence is reported via ``SolveReport.converged``, never raised.
    """
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    cfg = cfg or SamplerConfig()
    if tol is None:
        tol = 0.005 * y_star(p)
    if not tol > 0:
        raise ValueError("tol must be positive")
    b = initial if initial is not None else initial_parabola(p, grid_size)
    history: list[float] = []
    converged = False
    for n in range(1, max_iter + 1):
        b_new = iterate_once(p, b, cfg.with_seed(derive_seed(cfg.seed, n)), relaxation, estimator)
        change = float(np.max(np.abs(b_new.bs - b.bs)))
        history.append(change)
        b = b_new
        log.debug("iteration %d: sup change %.6g", n, change)
        if change < tol:
            converged = True
            break
    resid, se = fixed_point_residual(p, b, cfg.with_seed(derive_seed(cfg.seed, 0)), estimator)
    interior = slice(1, -1)
    k = int(np.argmax(resid[interior])) + 1
    report = SolveReport(
        iterations=len(history),
        sup_change_history=history,
        residual=float(resid[k]),
        residual_se=float(se[k]),
        converged=converged,
        node_se=se.tolist(),
        node_residual=resid.tolist(),
        tol=float(tol),
    )
    return b, report


def invariant_violations(p: ModelParams, b: Boundary, tol: float = 1e-9, tol_convex: float = 0.0) -> list[str]:
    """Names of the class-M shape conditions that ``b`` fails (empty if none)."""
    xs, bs = b.xs, b.bs
    ye, xe = y_star(p), x_star(p)
    bad = []
    if abs(xs[-1] - xe) > 1e-9 * xe:
        bad.append("grid does not end at x*")
    if abs(bs[0] - ye) > tol:
        bad.append("b(0) != y*")
    if abs(bs[-1]) > tol:
        bad.append("b(x*) != 0")
    if np.any(np.diff(bs) > tol):
        bad.append("not nonincreasing")
    if np.any(bs < np.maximum(kill_line_h(p, xs), 0.0) - tol):
        bad.append("below max(h, 0)")
    if np.any(bs < indifference_f(p, xs) - tol):
        bad.append("below f")
    if np.any(bs > ye + tol):
        bad.append("above y*")
    if len(xs) >= 3:
        # height of each node above the chord through its neighbours
        w = (xs[1:-1] - xs[:-2]) / (xs[2:] - xs[:-2])
        chord = (1 - w) * bs[:-2] + w * bs[2:]
        if np.any(bs[1:-1] - chord > tol_convex + tol):
            bad.append("not convex")
    return bad
