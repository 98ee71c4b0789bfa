"""g-expectations, conditional g-expectations and a numerical g-martingale test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InvalidArgument
from .generators import GeneratorSpec
from .paths import BrownianBatch
from .solver import (
    DEFAULT_PICARD,
    BSDESolution,
    RegressionBasis,
    TerminalSpec,
    backward_sweep,
    markov_screen,
    solve_backward,
)

__all__ = [
    "GExpectationResult",
    "MartingaleReport",
    "g_expect",
    "conditional_g_expect",
    "is_g_martingale",
]


@dataclass(frozen=True, eq=False)
class GExpectationResult:
    """``E_g[xi] = Y_0``.

    ``std_error`` is the Monte Carlo error of ``Y_0`` estimated from the
    pathwise representation ``Y_0 = E[xi + sum_i g(t_i, Y_i, Z_i) dt_i]``.
    """

    value: float
    per_path_Y0: np.ndarray
    std_error: float
    solution: BSDESolution


def g_expect(
    batch: BrownianBatch,
    g: GeneratorSpec,
    xi: TerminalSpec,
    basis: RegressionBasis | None = None,
    picard_iters: int = DEFAULT_PICARD,
) -> GExpectationResult:
    sol = solve_backward(batch, g, xi, basis, picard_iters)
    y0 = sol.Y[:, 0]
    t = batch.grid.nodes[None, :-1]
    drift = g.driver(t, sol.Y[:, :-1], sol.Z) * batch.grid.dt[None, :]
    pathwise = sol.Y[:, -1] + drift.sum(axis=1)
    m = batch.paths
    se = float(np.std(pathwise, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return GExpectationResult(float(y0[0]), y0.copy(), se, sol)


def conditional_g_expect(
    batch: BrownianBatch,
    g: GeneratorSpec,
    xi: TerminalSpec,
    basis: RegressionBasis | None = None,
    picard_iters: int = DEFAULT_PICARD,
    node: int = 0,
) -> np.ndarray:
    """``E_g[xi | F_{t_node}]`` per path, i.e. the solver's Y at ``node``."""
    n = batch.grid.steps
    if int(node) != node or not 0 <= node <= n:
        raise InvalidArgument(f"node {node!r} outside [0, {n}]")
    sol = solve_backward(batch, g, xi, basis, picard_iters)
    return sol.Y[:, int(node)].copy()


@dataclass(frozen=True)
class MartingaleReport:
    """Evidence for the g-martingale property between two grid nodes.

    ``deviation = E_g[X_t | F_s] - X_s`` per path; a positive mean is
    submartingale evidence, a negative one supermartingale evidence.
    """

    verdict: str
    s_idx: int
    t_idx: int
    rmse: float
    mean_deviation: float
    std_error: float
    frac_above: float
    frac_below: float
    screen_residual: float
    tol: float


def is_g_martingale(
    batch: BrownianBatch,
    g: GeneratorSpec,
    process: np.ndarray,
    s_idx: int,
    t_idx: int,
    tol: float,
    basis: RegressionBasis | None = None,
    picard_iters: int = DEFAULT_PICARD,
    screen_tol: float = 1e-2,
) -> MartingaleReport:
    """Re-solve the BSDE on ``[t_s, t_t]`` with terminal ``process[:, t_idx]``
    and compare the recovered values at ``s_idx`` with ``process[:, s_idx]``.

    Verdicts: ``martingale`` (RMSE <= tol), ``submartingale`` / ``supermartingale``
    (mean deviation >= tol / <= -tol), ``inconclusive`` otherwise, and
    ``not-checkable`` when ``process[:, t_idx]`` is not a function of
    ``B_{t_idx}`` in the regression basis (relative residual > screen_tol).
    """
    basis = basis or RegressionBasis()
    g.require_lipschitz("is_g_martingale")
    process = np.asarray(process, dtype=np.float64)
    n = batch.grid.steps
    if process.shape != (batch.paths, n + 1):
        raise InvalidArgument(f"process must have shape ({batch.paths}, {n + 1}), got {process.shape}")
    if not (0 <= s_idx < t_idx <= n):
        raise InvalidArgument(f"need 0 <= s_idx < t_idx <= {n}, got {s_idx}, {t_idx}")
    if not np.all(np.isfinite(process[:, [s_idx, t_idx]])):
        raise InvalidArgument("process values must be finite")
    if tol <= 0:
        raise InvalidArgument("tol must be positive")

    terminal = process[:, t_idx]
    resid = markov_screen(terminal, batch.levels[:, t_idx, :], float(batch.grid.nodes[t_idx]), basis)
    if not resid <= screen_tol:
        return MartingaleReport("not-checkable", s_idx, t_idx, np.nan, np.nan, np.nan, np.nan, np.nan, resid, tol)

    k = basis.size(batch.dims)
    if not k < batch.paths / 10:
        raise ContractViolation(f"{k} basis functions need more than {10 * k} paths")
    Y, _, _ = backward_sweep(batch, g, terminal, basis, int(picard_iters), s_idx, t_idx)
    dev = Y[:, 0] - process[:, s_idx]
    rmse = float(np.sqrt(np.mean(dev**2)))
    mean_dev = float(np.mean(dev))
    se = float(np.std(dev, ddof=1) / np.sqrt(dev.size)) if dev.size > 1 else 0.0
    if rmse <= tol:
        verdict = "martingale"
    elif mean_dev >= tol:
        verdict = "submartingale"
    elif mean_dev <= -tol:
        verdict = "supermartingale"
    else:
        verdict = "inconclusive"
    return MartingaleReport(
        verdict,
        s_idx,
        t_idx,
        rmse,
        mean_dev,
        se,
        float(np.mean(dev >= tol)),
        float(np.mean(dev <= -tol)),
        resid,
        tol,
    )
