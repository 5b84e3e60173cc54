"""One-dimensional benchmark problems: investing with only one product.

On the axis y = 0 only the first product matters and the optimal rule is to
invest once X reaches a threshold ``x*``; symmetrically on x = 0 with ``y*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ParameterError


@dataclass(frozen=True)
class OneDimSolution:
    beta1: float
    threshold: float
    coeff: float


def positive_root(alpha: float, sigma: float, r: float) -> float:
    """Positive root of ``0.5 sigma^2 b (b - 1) + alpha b - r = 0``.

    Written as ``a b^2 + c b - r`` with ``a = sigma^2/2`` and ``c = alpha - a``;
    the positive root is evaluated through the conjugate ``2r / (sqrt(D) - c)``
    whenever ``c < 0`` so that no cancellation occurs.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if not r > 0:
        raise ParameterError(f"r must be positive, got {r}")
    if not r > alpha:
        raise ParameterError(f"r={r} must exceed the drift alpha={alpha}")
    a = 0.5 * sigma * sigma
    c = alpha - a
    disc = math.sqrt(c * c + 4.0 * a * r)
    if c >= 0:
        return 2.0 * r / (c + disc)
    return (disc - c) / (2.0 * a)


def solve_one_dim(Q: float, delta: float, I: float, alpha: float, sigma: float, r: float) -> OneDimSolution:
    beta = positive_root(alpha, sigma, r)
    threshold = beta / ((beta - 1.0) * Q) * delta * I
    coeff = Q / (beta * delta) * threshold ** (1.0 - beta)
    return OneDimSolution(beta1=beta, threshold=threshold, coeff=coeff)


def value_v1(s: OneDimSolution, Q: float, delta: float, I: float, x):
    """Value of the one-product investment option at price(s) ``x``."""
    x = np.asarray(x, dtype=float)
    below = s.coeff * np.power(np.maximum(x, 0.0), s.beta1)
    out = np.where(x < s.threshold, below, Q * x / delta - I)
    return out if out.ndim else float(out)


def benchmark_x(p: ModelParams) -> OneDimSolution:
    """Solution on the axis y = 0 (first product only)."""
    return solve_one_dim(p.Q1, p.delta1, p.I, p.alpha1, p.sigma1, p.r)


def benchmark_y(p: ModelParams) -> OneDimSolution:
    """Solution on the axis x = 0 (second product only)."""
    return solve_one_dim(p.Q2, p.delta2, p.I, p.alpha2, p.sigma2, p.r)


def v1(p: ModelParams, x):
    return value_v1(benchmark_x(p), p.Q1, p.delta1, p.I, x)


def v2(p: ModelParams, y):
    return value_v1(benchmark_y(p), p.Q2, p.delta2, p.I, y)


def x_star(p: ModelParams) -> float:
    return benchmark_x(p).threshold


def y_star(p: ModelParams) -> float:
    return benchmark_y(p).threshold
