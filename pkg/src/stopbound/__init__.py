"""Two-product irreversible investment: optimal boundary, value function and oracles."""

from .model import ModelParams, ParameterError, payoff_F, indifference_f, kill_line_h, load_config, preset
from .closed_form import OneDimSolution, positive_root, solve_one_dim, value_v1, x_star, y_star
from .sampler import SamplerConfig, StateSample, draw_batch, density_rho
from .boundary import Boundary, SolveReport, ValueEstimate, initial_parabola, initial_line, psi, iterate_once, solve

__version__ = "0.1.0"
