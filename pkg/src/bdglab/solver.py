"""Backward Euler / least-squares Monte Carlo solver for

    Y_t = xi + int_t^T g(s, Y_s, Z_s) ds - int_t^T Z_s dB_s

plus closed-form solutions used as oracles.

One backward step from node ``i + 1`` to node ``i``::

    E_i = P_i[Y_{i+1}]
    Z_i = P_i[(Y_{i+1} - E_i) dB_i] / dt_i
    Y_i = E_i + g(t_i, Y_i, Z_i) dt_i          (Picard sweeps, Y_i <- E_i first)

where ``P_i`` is the least-squares projection onto polynomials of ``B_{t_i}``.
Centering ``Y_{i+1}`` before the Z-regression does not change the exact
conditional expectation (``E[dB_i | F_i] = 0``) but makes the projection of a
constant terminal vanish to rounding, so constants are preserved.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, InvalidArgument, NumericalFailure
from .generators import GeneratorSpec
from .paths import BrownianBatch, TimeGrid

__all__ = [
    "TerminalSpec",
    "RegressionBasis",
    "SolverDiagnostics",
    "BSDESolution",
    "make_terminal",
    "terminal_names",
    "solve_backward",
    "backward_sweep",
    "analytic_solution",
    "solution_residual",
    "markov_screen",
]

DEFAULT_PICARD = 3
DEFAULT_DEGREE = 3
# relative residual above which explicit terminal values are not treated as
# functions of B at the terminal node
DEFAULT_SCREEN_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TerminalSpec:
    """Terminal condition: ``markovian`` (a function of B_T) or ``explicit`` values."""

    kind: str
    func: Callable[[np.ndarray], np.ndarray] | None = None
    values: np.ndarray | None = None
    square_integrable: bool = True
    name: str = ""

    def __post_init__(self):
        if self.kind == "markovian":
            if self.func is None:
                raise InvalidArgument("a markovian terminal needs a function of B_T")
        elif self.kind == "explicit":
            vals = np.asarray(self.values, dtype=np.float64)
            if vals.ndim != 1 or not np.all(np.isfinite(vals)):
                raise InvalidArgument("explicit terminal values must be a finite 1-D array")
            object.__setattr__(self, "values", vals)
        else:
            raise InvalidArgument(f"unknown terminal kind {self.kind!r}")

    @classmethod
    def markovian(cls, func, name: str = "") -> "TerminalSpec":
        return cls("markovian", func=func, name=name)

    @classmethod
    def explicit(cls, values, name: str = "explicit") -> "TerminalSpec":
        return cls("explicit", values=values, name=name)

    def evaluate(self, batch: BrownianBatch) -> np.ndarray:
        if self.kind == "explicit":
            if self.values.shape[0] != batch.paths:
                raise InvalidArgument(
                    f"explicit terminal has {self.values.shape[0]} values for {batch.paths} paths"
                )
            return self.values.copy()
        xi = np.asarray(self.func(batch.terminal()), dtype=np.float64)
        if xi.shape != (batch.paths,):
            raise InvalidArgument(f"terminal function returned shape {xi.shape}, want ({batch.paths},)")
        if not np.all(np.isfinite(xi)):
            raise NumericalFailure("terminal values are not finite")
        return xi


_TERMINALS: dict[str, Callable[..., TerminalSpec]] = {
    "constant": lambda value=0.0: TerminalSpec.markovian(
        lambda b: np.full(b.shape[0], float(value)), name=f"constant({float(value)!r})"
    ),
    "brownian": lambda shift=0.0: TerminalSpec.markovian(
        lambda b: b[:, 0] + float(shift), name=f"brownian(shift={float(shift)!r})"
    ),
    "call": lambda strike=0.0: TerminalSpec.markovian(
        lambda b: np.maximum(b[:, 0] - float(strike), 0.0), name=f"call(strike={float(strike)!r})"
    ),
    "square": lambda: TerminalSpec.markovian(lambda b: np.sum(b * b, axis=1), name="square"),
}


def terminal_names() -> list[str]:
    return list(_TERMINALS)


def make_terminal(name: str, **params) -> TerminalSpec:
    """Named terminal conditions: constant(value), brownian(shift), call(strike), square."""
    try:
        factory = _TERMINALS[name]
    except KeyError:
        raise InvalidArgument(f"unknown terminal {name!r}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for terminal {name!r}: {exc}") from None


def _hermite(x: np.ndarray, degree: int) -> list[np.ndarray]:
    # probabilists' Hermite polynomials, orthogonal under N(0, 1)
    out = [np.ones_like(x)]
    if degree >= 1:
        out.append(x.copy())
    for n in range(1, degree):
        out.append(x * out[n] - n * out[n - 1])
    return out


@dataclass(frozen=True)
class RegressionBasis:
    """Polynomials of total degree <= ``degree`` in the coordinates of B_t.

    Coordinates are scaled by ``sqrt(t)`` and expanded in Hermite polynomials,
    which spans the same space as monomials but keeps the design matrix well
    conditioned.
    """

    degree: int = DEFAULT_DEGREE

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise InvalidArgument(f"basis degree must be a nonnegative integer, got {self.degree!r}")

    @property
    def rule(self) -> str:
        return f"hermite total degree <= {self.degree} in B_t / sqrt(t)"

    def multi_indices(self, dims: int) -> list[tuple[int, ...]]:
        idx = [a for a in itertools.product(range(self.degree + 1), repeat=dims) if sum(a) <= self.degree]
        return sorted(idx, key=lambda a: (sum(a), tuple(-v for v in a)))

    def size(self, dims: int) -> int:
        return len(self.multi_indices(dims))

    def features(self, b: np.ndarray, t: float) -> np.ndarray:
        """Design matrix ``(paths, size)`` for levels ``b`` of shape ``(paths, dims)``."""
        m, d = b.shape
        if t <= 0.0:
            # F_0 is trivial: only the constant is measurable
            return np.ones((m, 1))
        x = b / np.sqrt(t)
        polys = [_hermite(x[:, k], self.degree) for k in range(d)]
        cols = []
        for a in self.multi_indices(d):
            col = np.ones(m)
            for k, deg in enumerate(a):
                if deg:
                    col = col * polys[k][deg]
            cols.append(col)
        return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class SolverDiagnostics:
    """Per-step diagnostics, indexed by the step's left node ``i``.

    ``regression_rmse[i]`` is the RMS of ``Y_{i+1} - E_i``; ``martingale_rmse[i]``
    the RMS of ``Y_{i+1} - E_i - Z_i . dB_i``; ``picard_updates[i, k]`` the RMS
    change of ``Y_i`` in sweep ``k``.
    """

    regression_rmse: np.ndarray
    martingale_rmse: np.ndarray
    picard_updates: np.ndarray
    picard_iters: int
    ranks: np.ndarray


@dataclass(frozen=True, eq=False)
class BSDESolution:
    grid: TimeGrid
    Y: np.ndarray
    Z: np.ndarray
    diagnostics: SolverDiagnostics | None = None
    label: str = ""

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.float64)
        Z = np.asarray(self.Z, dtype=np.float64)
        n = self.grid.steps
        if Y.ndim != 2 or Y.shape[1] != n + 1:
            raise InvalidArgument(f"Y must have shape (paths, {n + 1}), got {Y.shape}")
        if Z.ndim != 3 or Z.shape[:2] != (Y.shape[0], n):
            raise InvalidArgument(f"Z must have shape ({Y.shape[0]}, {n}, dims), got {Z.shape}")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Z", Z)

    @property
    def paths(self) -> int:
        return self.Y.shape[0]

    @property
    def dims(self) -> int:
        return self.Z.shape[2]

    def scaled(self, factor: float) -> "BSDESolution":
        """``(factor * Y, factor * Z)`` on the same grid."""
        return BSDESolution(self.grid, factor * self.Y, factor * self.Z, None, self.label)


class _Projector:
    """Orthogonal projection onto the column space of a design matrix.

    The constant is always a basis column, so ``P(y) = mean(y) + P(y - mean(y))``;
    projecting the centered vector keeps constants exact to rounding.
    """

    def __init__(self, X: np.ndarray, step: int):
        self.trivial = X.shape[1] == 1
        if self.trivial:
            self.rank = 1
            return
        u, s, _ = np.linalg.svd(X, full_matrices=False)
        cutoff = s[0] * max(X.shape) * np.finfo(np.float64).eps if s.size else 0.0
        self.rank = int(np.sum(s > cutoff))
        if self.rank < X.shape[1]:
            raise NumericalFailure(
                f"rank-deficient regression: rank {self.rank} < {X.shape[1]} basis functions", step
            )
        self.u = u

    def __call__(self, y: np.ndarray) -> np.ndarray:
        mean = np.mean(y, axis=0)
        if self.trivial:
            return np.broadcast_to(mean, y.shape).copy()
        r = y - mean
        return mean + self.u @ (self.u.T @ r)


def markov_screen(values: np.ndarray, levels: np.ndarray, t: float, basis: RegressionBasis) -> float:
    """Relative RMS residual of projecting ``values`` onto the basis at time ``t``."""
    values = np.asarray(values, dtype=np.float64)
    proj = _Projector(basis.features(levels, t), step=-1)
    resid = values - proj(values)
    scale = np.sqrt(np.mean((values - values.mean()) ** 2))
    rms = float(np.sqrt(np.mean(resid**2)))
    if scale == 0.0:
        return 0.0 if rms == 0.0 else np.inf
    return rms / float(scale)


def backward_sweep(
    batch: BrownianBatch,
    g: GeneratorSpec,
    terminal_values: np.ndarray,
    basis: RegressionBasis,
    picard_iters: int,
    start: int,
    stop: int,
):
    """Run the backward scheme from node ``stop`` down to node ``start``.

    Returns ``(Y, Z, diagnostics)`` with ``Y`` of shape ``(paths, stop - start + 1)``
    and ``Z`` of shape ``(paths, stop - start, dims)``.
    """
    grid = batch.grid
    m, d = batch.paths, batch.dims
    span = stop - start
    levels = batch.levels
    Y = np.empty((m, span + 1))
    Z = np.empty((m, span, d))
    Y[:, span] = terminal_values
    reg_rmse = np.empty(span)
    mart_rmse = np.empty(span)
    updates = np.zeros((span, picard_iters))
    ranks = np.empty(span, dtype=np.int64)

    for i in range(stop - 1, start - 1, -1):
        j = i - start
        t_i = float(grid.nodes[i])
        dt_i = float(grid.dt[i])
        dB = batch.increments[:, i, :]
        y_next = Y[:, j + 1]

        proj = _Projector(basis.features(levels[:, i, :], t_i), step=i)
        ranks[j] = proj.rank
        e = proj(y_next)
        centered = y_next - e
        z = proj(centered[:, None] * dB) / dt_i

        y = e
        for k in range(picard_iters):
            y_new = e + g.driver(t_i, y, z) * dt_i
            updates[j, k] = np.sqrt(np.mean((y_new - y) ** 2))
            y = y_new
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise NumericalFailure("non-finite values in backward step", i)

        Y[:, j] = y
        Z[:, j, :] = z
        reg_rmse[j] = np.sqrt(np.mean(centered**2))
        mart_rmse[j] = np.sqrt(np.mean((centered - np.sum(z * dB, axis=1)) ** 2))

    diag = SolverDiagnostics(reg_rmse, mart_rmse, updates, picard_iters, ranks)
    return Y, Z, diag


def _check_inputs(batch: BrownianBatch, g: GeneratorSpec, basis: RegressionBasis, picard_iters: int):
    g.require_lipschitz("solve_backward")
    if int(picard_iters) != picard_iters or picard_iters < 1:
        raise InvalidArgument(f"picard_iters must be >= 1, got {picard_iters!r}")
    k = basis.size(batch.dims)
    if not k < batch.paths / 10:
        raise InvalidArgument(
            f"{k} basis functions need more than {10 * k} paths, batch has {batch.paths}"
        )


def solve_backward(
    batch: BrownianBatch,
    g: GeneratorSpec,
    xi: TerminalSpec,
    basis: RegressionBasis | None = None,
    picard_iters: int = DEFAULT_PICARD,
    *,
    screen_tol: float = DEFAULT_SCREEN_TOL,
) -> BSDESolution:
    """Solve the BSDE on ``batch`` by backward induction over the whole grid.

    Explicit terminal values are accepted only if they pass
    :func:`markov_screen` at ``screen_tol``, i.e. they are numerically a
    polynomial of ``B_T`` in the basis; otherwise ContractViolation.
    """
    basis = basis or RegressionBasis()
    _check_inputs(batch, g, basis, picard_iters)
    xi_vals = xi.evaluate(batch)
    n = batch.grid.steps
    if xi.kind == "explicit":
        rel = markov_screen(xi_vals, batch.levels[:, n, :], batch.grid.horizon, basis)
        if not rel <= screen_tol:
            raise ContractViolation(
                f"explicit terminal is not a function of B_T in the basis (relative residual {rel:.3g})"
            )
    Y, Z, diag = backward_sweep(batch, g, xi_vals, basis, int(picard_iters), 0, n)
    Y[:, n] = xi_vals
    return BSDESolution(batch.grid, Y, Z, diag, label=f"{g.name}/{xi.name}")


def analytic_solution(name: str, batch: BrownianBatch, **params) -> BSDESolution:
    """Closed-form solutions evaluated on the batch.

    ``constant(value)``: Y = value, Z = 0 (any driver satisfying (H2)).
    ``classical_martingale()``: g = 0, xi = B_T^1; Y = B^1, Z = e_1.
    ``linear_z_drift(coef)``: g = coef z_1, xi = B_T^1; Y_t = B_t^1 + coef (T - t), Z = e_1.
    ``quadratic_family(n)``: Y_t = n B_t - n^2 t, Z = n (dims must be 1).
    """
    grid = batch.grid
    m, d = batch.paths, batch.dims
    t = grid.nodes[None, :]
    b1 = batch.levels[:, :, 0]
    e1 = np.zeros((m, grid.steps, d))
    e1[:, :, 0] = 1.0
    try:
        if name == "constant":
            c = float(params.pop("value", 0.0))
            Y, Z = np.full((m, grid.steps + 1), c), np.zeros((m, grid.steps, d))
        elif name == "classical_martingale":
            Y, Z = b1.copy(), e1
        elif name == "linear_z_drift":
            coef = float(params.pop("coef"))
            Y, Z = b1 + coef * (grid.horizon - t), e1
        elif name == "quadratic_family":
            n = float(params.pop("n"))
            if d != 1:
                raise InvalidArgument("quadratic_family needs a one-dimensional batch")
            Y, Z = n * b1 - n * n * t, np.full((m, grid.steps, 1), n)
        else:
            raise InvalidArgument(f"unknown analytic solution {name!r}")
    except KeyError as exc:
        raise InvalidArgument(f"{name} needs parameter {exc.args[0]!r}") from None
    if params:
        raise InvalidArgument(f"unexpected parameters for {name}: {sorted(params)}")
    return BSDESolution(grid, Y, Z, None, label=name)


def solution_residual(sol: BSDESolution, batch: BrownianBatch, g: GeneratorSpec) -> np.ndarray:
    """Per-path max over steps of ``|Y_{i+1} - Y_i + g_i dt_i - Z_i . dB_i|``.

    ``g_i`` is the backward-form driver (see ``GeneratorSpec.drift_form``).
    """
    if sol.grid != batch.grid or sol.paths != batch.paths or sol.dims != batch.dims:
        raise InvalidArgument("solution and batch shapes are inconsistent")
    t = batch.grid.nodes[:-1]
    y = sol.Y[:, :-1]
    drift = g.driver(t[None, :], y, sol.Z) * batch.grid.dt[None, :]
    mart = np.sum(sol.Z * batch.increments, axis=2)
    res = np.abs(np.diff(sol.Y, axis=1) + drift - mart)
    return res.max(axis=1)
