"""Exact sampling of both price processes at an independent Exp(r) time.

For an exponential time ``zeta`` with rate r independent of the prices,
``E int_0^inf e^{-rt} g(Z_t) dt = E[g(Z_zeta)] / r``, so one draw of
``(zeta, X_zeta, Y_zeta)`` replaces a whole discounted path integral.

Randomness is counter based: samples are generated in fixed-size blocks and
block ``k`` draws from a Philox stream keyed by ``(seed, k)``.  Sample ``i``
therefore depends only on ``(seed, i)``, whatever order blocks are produced in.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .parallel import worker_count

BLOCK_SIZE = 8192
_TWO53 = float(2**53)


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int = 100_000
    seed: int = 1
    antithetic: bool = False

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError(f"n_samples must be a positive integer, got {self.n_samples}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    def with_seed(self, seed: int) -> "SamplerConfig":
        return SamplerConfig(self.n_samples, seed, self.antithetic)

    def with_samples(self, n_samples: int) -> "SamplerConfig":
        return SamplerConfig(n_samples, self.seed, self.antithetic)


@dataclass(frozen=True)
class StateSample:
    """Struct-of-arrays batch: element ``i`` is the ``i``-th sample."""

    zeta: np.ndarray
    x_at_zeta: np.ndarray
    y_unit_at_zeta: np.ndarray

    def __len__(self) -> int:
        return len(self.zeta)

    @property
    def x_unit_at_zeta(self) -> np.ndarray:
        # valid only for batches drawn with x0 = 1
        return self.x_at_zeta


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for a sub-stream (iteration, replicate, ...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _block_uniforms(seed: int, block: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))
    # open interval (0, 1) so both u and 1 - u give finite exponential times
    u = (rng.integers(0, 2**53, size=n, dtype=np.int64) + 0.5) / _TWO53
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    return u, z1, z2


def base_draws(seed: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``n`` counter-indexed triples ``(U, Z1, Z2)``."""
    n_blocks = -(-n // BLOCK_SIZE)
    workers = worker_count()

    def one(k):
        return _block_uniforms(seed, k, min(BLOCK_SIZE, n - k * BLOCK_SIZE))

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, range(n_blocks)))
    else:
        parts = [one(k) for k in range(n_blocks)]
    return tuple(np.concatenate([part[j] for part in parts]) for j in range(3))


def _draws(cfg: SamplerConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not cfg.antithetic:
        return base_draws(cfg.seed, cfg.n_samples)
    half = -(-cfg.n_samples // 2)
    u, z1, z2 = base_draws(cfg.seed, half)
    # base block first, mirrored block second; pair i is (i, half + i).
    # An odd n_samples is rounded up so that every draw has its mirror.
    return (
        np.concatenate([u, 1.0 - u]),
        np.concatenate([z1, -z1]),
        np.concatenate([z2, -z2]),
    )


def draw_batch(p: ModelParams, cfg: SamplerConfig, x0: float = 1.0) -> StateSample:
    if not x0 > 0:
        raise ValueError(f"x0 must be positive, got {x0}")
    u, z1, z2 = _draws(cfg)
    zeta = -np.log(u) / p.r
    root = np.sqrt(zeta)
    x = x0 * np.exp((p.alpha1 - 0.5 * p.sigma1**2) * zeta + p.sigma1 * root * z1)
    y = np.exp((p.alpha2 - 0.5 * p.sigma2**2) * zeta + p.sigma2 * root * z2)
    return StateSample(zeta=zeta, x_at_zeta=x, y_unit_at_zeta=y)


def draw_unit_batch(p: ModelParams, cfg: SamplerConfig) -> StateSample:
    """Batch with both processes started at 1; rescale by the start price."""
    return draw_batch(p, cfg, 1.0)


def gbm_step(alpha: float, sigma: float, dt: float, z: np.ndarray) -> np.ndarray:
    """Multiplicative GBM increment over ``dt`` for standard normals ``z``."""
    return np.exp((alpha - 0.5 * sigma * sigma) * dt + sigma * math.sqrt(dt) * z)


def sample_mean(values: np.ndarray, antithetic: bool = False, axis: int = -1) -> tuple[np.ndarray, np.ndarray, int]:
    """Mean and standard error; antithetic batches are averaged in pairs first.

    Returns ``(mean, std_error, n_independent)``.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if antithetic and n >= 2:
        if n % 2:
            raise ValueError("antithetic batches have an even number of samples")
        half = n // 2
        first = np.take(values, np.arange(half), axis=axis)
        second = np.take(values, np.arange(half, n), axis=axis)
        values = 0.5 * (first + second)
        n = half
    mean = values.mean(axis=axis)
    if n < 2:
        return mean, np.zeros_like(mean), n
    se = values.std(axis=axis, ddof=1) / math.sqrt(n)
    return mean, se, n


def density_rho(alpha: float, sigma: float, t, start, end):
    """Log-normal transition density of a GBM from ``start`` to ``end`` over ``t``."""
    t = np.asarray(t, dtype=float)
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    if np.any(t <= 0) or np.any(start <= 0) or np.any(end <= 0):
        raise ValueError("density_rho requires t > 0, start > 0 and end > 0")
    m = np.log(end) - np.log(start) - (alpha - 0.5 * sigma * sigma) * t
    var = sigma * sigma * t
    out = np.exp(-m * m / (2.0 * var)) / (sigma * end * np.sqrt(2.0 * np.pi * t))
    return out if out.ndim else float(out)
