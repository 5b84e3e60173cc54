"""Comparative statics: how the boundary and the value move with one parameter."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import Boundary, SolveReport, ValueEstimate, solve
from .closed_form import x_star, y_star
from .model import ModelParams
from .parallel import worker_count
from .sampler import SamplerConfig
from .value import estimate_value

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("sigma1", "sigma2", "alpha1", "alpha2", "r")

# +1: boundary rises with the parameter, -1: it falls
BOUNDARY_DIRECTION = {"sigma2": +1, "alpha2": -1, "r": +1}


@dataclass(frozen=True)
class SolverSettings:
    grid_size: int = 40
    cfg: SamplerConfig = SamplerConfig()
    tol: float | None = None  # None: 0.005 y* of each parameter set
    max_iter: int = 50
    relaxation: float = 1.0


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    base: ModelParams
    solver: SolverSettings = SolverSettings()
    probe: tuple[float, float] | None = None  # default (0.4 x*, 0.4 y*) of the base

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}, got {self.parameter!r}")
        values = tuple(float(v) for v in self.values)
        if len(values) < 1 or any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", values)
        for v in values:
            self.params_for(v)  # raises ParameterError for invalid combinations

    def params_for(self, value: float) -> ModelParams:
        return self.base.replace(**{self.parameter: value})

    def probe_point(self) -> tuple[float, float]:
        if self.probe is not None:
            return self.probe
        return 0.4 * x_star(self.base), 0.4 * y_star(self.base)


@dataclass
class SweepEntry:
    value: float
    params: ModelParams
    boundary: Boundary | None = None
    report: SolveReport | None = None
    probe_value: ValueEstimate | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class OrderingVerdict:
    lo: float
    hi: float
    expected: int
    worst_violation: float
    tolerance_at_worst: float
    passed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SweepReport:
    parameter: str
    entries: list[SweepEntry]
    probe: tuple[float, float]
    boundary_verdicts: list[OrderingVerdict] = field(default_factory=list)
    anchor_verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def boundaries(self) -> list[Boundary | None]:
        return [e.boundary for e in self.entries]

    @property
    def passed(self) -> bool:
        return (all(not e.failed for e in self.entries)
                and all(v.passed for v in self.boundary_verdicts)
                and all(self.anchor_verdicts.values()))

    def as_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "probe": list(self.probe),
            "entries": [
                {
                    "value": e.value,
                    "x_star": x_star(e.params),
                    "y_star": y_star(e.params),
                    "error": e.error,
                    "report": e.report.as_dict() if e.report else None,
                    "probe_value": e.probe_value.as_dict() if e.probe_value else None,
                }
                for e in self.entries
            ],
            "boundary_verdicts": [v.as_dict() for v in self.boundary_verdicts],
            "anchor_verdicts": self.anchor_verdicts,
            "passed": self.passed,
        }


def _solve_entry(spec: SweepSpec, value: float) -> SweepEntry:
    p = spec.params_for(value)
    entry = SweepEntry(value, p)
    s = spec.solver
    try:
        entry.boundary, entry.report = solve(p, s.grid_size, s.cfg, s.tol, s.max_iter, s.relaxation)
        x, y = spec.probe_point()
        # same seed for every entry: common random numbers across parameter values
        entry.probe_value = estimate_value(p, x, y, entry.boundary, s.cfg)
    except Exception as exc:  # one failed value must not abort the sweep
        log.warning("sweep %s=%g failed: %s", spec.parameter, value, exc)
        entry.error = f"{type(exc).__name__}: {exc}"
    return entry


def node_se(b: Boundary, report: SolveReport, xs: np.ndarray) -> np.ndarray:
    return np.interp(xs, b.xs, np.asarray(report.node_se), right=0.0)


def ordering_verdict(lo: SweepEntry, hi: SweepEntry, expected: int, n_points: int = 101,
                     n_se: float = 3.0) -> OrderingVerdict:
    """Check ``expected * (b_hi - b_lo) >= -n_se * SE`` on the overlap of both grids."""
    x_end = min(lo.boundary.x_end, hi.boundary.x_end)
    xs = np.linspace(0.0, x_end, n_points)
    gap = expected * (hi.boundary(xs) - lo.boundary(xs))
    tol = n_se * np.hypot(node_se(lo.boundary, lo.report, xs), node_se(hi.boundary, hi.report, xs))
    excess = -gap - tol
    k = int(np.argmax(excess))
    return OrderingVerdict(lo.value, hi.value, expected, float(-gap[k]), float(tol[k]), bool(excess[k] <= 1e-12))


def anchor_laws(parameter: str, params: list[ModelParams]) -> dict[str, bool]:
    xs = np.array([x_star(p) for p in params])
    ys = np.array([y_star(p) for p in params])
    same = lambda a: bool(np.all(np.abs(a - a[0]) <= 1e-12 * abs(a[0])))
    if parameter in ("sigma2", "alpha2"):
        verdicts = {"x_star_constant": same(xs)}
        step = np.diff(ys)
        if parameter == "sigma2":
            verdicts["y_star_nondecreasing"] = bool(np.all(step >= 0))
        else:
            verdicts["y_star_nonincreasing"] = bool(np.all(step <= 0))
        return verdicts
    if parameter in ("sigma1", "alpha1"):
        return {"y_star_constant": same(ys)}
    return {"x_star_moves": bool(np.all(np.diff(xs) != 0)), "y_star_moves": bool(np.all(np.diff(ys) != 0))}


def run_sweep(spec: SweepSpec) -> SweepReport:
    workers = min(worker_count(), len(spec.values))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            entries = list(pool.map(lambda v: _solve_entry(spec, v), spec.values))
    else:
        entries = [_solve_entry(spec, v) for v in spec.values]
    report = SweepReport(spec.parameter, entries, spec.probe_point())
    report.anchor_verdicts = anchor_laws(spec.parameter, [e.params for e in entries])
    direction = BOUNDARY_DIRECTION.get(spec.parameter)
    if direction is not None:
        good = [e for e in entries if not e.failed]
        report.boundary_verdicts = [ordering_verdict(a, b, direction) for a, b in zip(good, good[1:])]
    return report


@dataclass
class ValueVerdict:
    probe: tuple[float, float]
    lo: ValueEstimate
    hi: ValueEstimate
    difference: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "probe": list(self.probe),
            "lo": self.lo.as_dict(),
            "hi": self.hi.as_dict(),
            "difference": self.difference,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def value_monotonicity_check(base: ModelParams, parameter: str, lo: float, hi: float, probes,
                             settings: SolverSettings | None = None, n_se: float = 3.0) -> list[ValueVerdict]:
    """Check that the value does not fall when ``parameter`` moves from ``lo`` to ``hi``.

    Each parameter set uses its own solved boundary; estimates share a seed.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}")
    if hi < lo:
        raise ValueError("need lo <= hi")
    s = settings or SolverSettings()
    solved = {}
    for v in dict.fromkeys((lo, hi)):
        p = base.replace(**{parameter: v})
        b, _ = solve(p, s.grid_size, s.cfg, s.tol, s.max_iter, s.relaxation)
        solved[v] = (p, b)
    verdicts = []
    for x, y in probes:
        est = {v: estimate_value(p, x, y, b, s.cfg) for v, (p, b) in solved.items()}
        e_lo, e_hi = est[lo], est[hi]
        diff = e_hi.mean - e_lo.mean
        tol = n_se * math.hypot(e_lo.std_error, e_hi.std_error)
        verdicts.append(ValueVerdict((x, y), e_lo, e_hi, diff, tol, bool(diff >= -tol)))
    return verdicts
