"""Monte-Carlo value function and martingale diagnostics.

The value has the representation

    V(x, y) = E int_0^inf e^{-rt} (Q1 X_t + Q2 Y_t - rI) 1{Y_t >= b(X_t)} dt,

which one exponential-time draw per sample collapses to
``E[(Q1 X + Q2 Y - rI) 1{Y >= b(X)}] / r`` at ``(X, Y) = (X_zeta, Y_zeta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import Boundary, ValueEstimate, _resolve_estimator, stopping_terms
from .model import ModelParams, payoff_F
from .sampler import SamplerConfig, StateSample, derive_seed, draw_unit_batch, gbm_step, sample_mean


def value_on_batch(p: ModelParams, x: float, y: float, b: Boundary, batch: StateSample,
                   estimator: str = "auto", antithetic: bool = False) -> ValueEstimate:
    estimator = _resolve_estimator(estimator, b)
    terms = stopping_terms(p, x, y, b, batch, estimator)
    m, se, _ = sample_mean(terms, antithetic)
    if estimator == "direct":
        mean = m / p.r
    else:
        # E[g] = r F(x, y) exactly, so only the continuation part is sampled
        mean = float(payoff_F(p, x, y)) - m / p.r
    return ValueEstimate(float(mean), float(se / p.r), len(batch))


def estimate_value(p: ModelParams, x: float, y: float, b: Boundary, cfg: SamplerConfig | None = None,
                   estimator: str = "auto") -> ValueEstimate:
    """Value of the investment opportunity at prices ``(x, y)`` under boundary ``b``."""
    if x < 0 or y < 0:
        raise ValueError("estimate_value needs x >= 0 and y >= 0")
    cfg = cfg or SamplerConfig()
    return value_on_batch(p, x, y, b, draw_unit_batch(p, cfg), estimator, cfg.antithetic)


def value_upper_constant(p: ModelParams) -> float:
    """``C`` with ``V(x, y) <= C (x + y)``."""
    return max(p.Q1 / p.delta1, p.Q2 / p.delta2)


@dataclass(frozen=True)
class MartingalePoint:
    horizon: float
    mean: float
    std_error: float
    z: float

    def as_dict(self) -> dict:
        return {"horizon": self.horizon, "mean": self.mean, "std_error": self.std_error, "z": self.z}


def _normals(seed: int, n: int, k: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    return rng.standard_normal((n, k))


def martingale_check(p: ModelParams, x: float, y: float, b: Boundary, horizons, cfg: SamplerConfig | None = None,
                     n_outer: int = 2000, n_inner: int = 2000, n_nodes: int = 16,
                     reference: ValueEstimate | None = None) -> list[MartingalePoint]:
    """z-scores of ``E[e^{-rt} V(X_t, Y_t) + int_0^t e^{-rs} H(X_s, Y_s) ds] - V(x, y)``.

    ``H = (Q1 x + Q2 y - rI) 1{y >= b(x)}``.  The Dynkin identity for ``F`` is
    used as a control variate, so only continuation-region terms are sampled.
    The time integral is estimated
    along each outer path at ``n_nodes`` stratified uniform times, with exact
    GBM increments between consecutive times, which keeps it unbiased.  The
    terminal value is ``F`` when ``(X_t, Y_t)`` is already in the stopping
    region of ``b`` and a fresh inner estimate (``n_inner`` samples) otherwise.
    A wrong ``b`` breaks the identity ``V = F`` on its own stopping region, so
    the check has power against it.
    """
    cfg = cfg or SamplerConfig()
    if reference is None:
        reference = estimate_value(p, x, y, b, cfg)
    out = []
    for h_index, t in enumerate(horizons):
        t = float(t)
        if t < 0:
            raise ValueError("horizons must be nonnegative")
        if t == 0:
            out.append(MartingalePoint(0.0, reference.mean, reference.std_error, 0.0))
            continue
        seed = derive_seed(cfg.seed, 7, h_index)
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, 1], dtype=np.uint64)))
        strata = (np.arange(n_nodes) + rng.random((n_outer, n_nodes))) * (t / n_nodes)
        times = np.concatenate([strata, np.full((n_outer, 1), t)], axis=1)
        steps = np.diff(np.concatenate([np.zeros((n_outer, 1)), times], axis=1), axis=1)
        zx = _normals(derive_seed(seed, 1), n_outer, n_nodes + 1)
        zy = _normals(derive_seed(seed, 2), n_outer, n_nodes + 1)
        drift_x = (p.alpha1 - 0.5 * p.sigma1**2) * steps
        drift_y = (p.alpha2 - 0.5 * p.sigma2**2) * steps
        X = x * np.exp(np.cumsum(drift_x + p.sigma1 * np.sqrt(steps) * zx, axis=1))
        Y = y * np.exp(np.cumsum(drift_y + p.sigma2 * np.sqrt(steps) * zy, axis=1))
        # Dynkin: e^{-rt} F(Z_t) + int_0^t e^{-rs} g(Z_s) ds has mean F(x, y); subtracting
        # it leaves terms that vanish on the stopping region, where prices are unbounded
        g = p.Q1 * X[:, :-1] + p.Q2 * Y[:, :-1] - p.r * p.I
        waiting_g = np.where(Y[:, :-1] < b(X[:, :-1]), g, 0.0)
        running = (t / n_nodes) * np.sum(np.exp(-p.r * times[:, :-1]) * waiting_g, axis=1)

        XT, YT = X[:, -1], Y[:, -1]
        premium = np.zeros(n_outer)  # V - F at the horizon
        waiting = np.nonzero(YT < b(XT))[0]
        inner_cfg = SamplerConfig(n_inner, 0, cfg.antithetic)
        for i in waiting:
            batch = draw_unit_batch(p, inner_cfg.with_seed(derive_seed(seed, 3, int(i))))
            est = value_on_batch(p, XT[i], YT[i], b, batch, antithetic=cfg.antithetic)
            premium[i] = est.mean - float(payoff_F(p, XT[i], YT[i]))
        sample = float(payoff_F(p, x, y)) + math.exp(-p.r * t) * premium - running
        mean, se, _ = sample_mean(sample)
        combined = math.hypot(float(se), reference.std_error)
        z = (float(mean) - reference.mean) / combined if combined > 0 else 0.0
        out.append(MartingalePoint(t, float(mean), float(se), float(z)))
    return out


def policy_value(p: ModelParams, x: float, y: float, b: Boundary, cfg: SamplerConfig | None = None,
                 dt: float = 0.05, horizon: float = 200.0) -> ValueEstimate:
    """Payoff of investing the first time ``Y >= b(X)`` on a time grid of step ``dt``.

    An admissible (suboptimal) stopping rule, so its value never exceeds ``V``.
    Paths still waiting at ``horizon`` are credited 0, the value of never investing.
    """
    cfg = cfg or SamplerConfig()
    n = cfg.n_samples
    X = np.full(n, float(x))
    Y = np.full(n, float(y))
    payoff = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    stop_now = Y >= b(X)
    payoff[stop_now] = payoff_F(p, X[stop_now], Y[stop_now])
    alive &= ~stop_now
    rng = np.random.Generator(np.random.Philox(key=np.array([cfg.seed, 2], dtype=np.uint64)))
    n_steps = int(math.ceil(horizon / dt))
    for k in range(1, n_steps + 1):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        X[idx] *= gbm_step(p.alpha1, p.sigma1, dt, rng.standard_normal(idx.size))
        Y[idx] *= gbm_step(p.alpha2, p.sigma2, dt, rng.standard_normal(idx.size))
        hit = idx[Y[idx] >= b(X[idx])]
        payoff[hit] = math.exp(-p.r * k * dt) * payoff_F(p, X[hit], Y[hit])
        alive[hit] = False
    mean, se, _ = sample_mean(payoff)
    return ValueEstimate(float(mean), float(se), n)
