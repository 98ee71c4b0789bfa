"""Monte Carlo toolkit for BSDEs, g-expectations and BDG-type moment ratios."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BdgLabError,
    ConfigError,
    ContractViolation,
    DegenerateRatio,
    InvalidArgument,
    NumericalFailure,
)
from .paths import BrownianBatch, SeedSpec, TimeGrid, make_uniform_grid, simulate_brownian  # noqa: E402
from .generators import GeneratorSpec, builtin_generator, make_generator, register_generator  # noqa: E402
from .solver import BSDESolution, RegressionBasis, make_terminal, solve_backward  # noqa: E402
from .gexpect import conditional_g_expect, g_expect, is_g_martingale  # noqa: E402
from .bdg import bdg_ratio, lenglart_check, path_functionals  # noqa: E402
from .counterexample import divergence_report  # noqa: E402

__all__ = [
    "__version__",
    "BdgLabError",
    "ConfigError",
    "ContractViolation",
    "DegenerateRatio",
    "InvalidArgument",
    "NumericalFailure",
    "BrownianBatch",
    "SeedSpec",
    "TimeGrid",
    "make_uniform_grid",
    "simulate_brownian",
    "GeneratorSpec",
    "builtin_generator",
    "make_generator",
    "register_generator",
    "BSDESolution",
    "RegressionBasis",
    "make_terminal",
    "solve_backward",
    "g_expect",
    "conditional_g_expect",
    "is_g_martingale",
    "bdg_ratio",
    "lenglart_check",
    "path_functionals",
    "divergence_report",
]
