"""Pathwise functionals, moment estimates and the two sides of the BDG-type
inequality ``c E[<Y>_T^{p/2}] <= E[(Y*)^p] <= C E[<Y>_T^{p/2}]``.

The bracket is the Z-energy ``<Y>_T = int_0^T |Z_s|^2 ds`` (a Riemann sum on
the grid) and ``Y* = max_i |Y_{t_i}|``.  The constants are never asserted;
the ratios are estimated with delta-method confidence intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateRatio, InvalidArgument, NumericalFailure
from .solver import BSDESolution

__all__ = [
    "PathFunctionals",
    "MomentEstimate",
    "RatioReport",
    "LenglartReport",
    "path_functionals",
    "moment",
    "bdg_ratio",
    "ratio_from_functionals",
    "lenglart_constant",
    "lenglart_check",
]

Z95 = 1.959963984540054
P_MAX = 8.0


@dataclass(frozen=True, eq=False)
class PathFunctionals:
    sup_abs: np.ndarray
    qv_total: np.ndarray
    qv_curve: np.ndarray


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    mean: float
    std_error: float
    ci95: tuple[float, float]
    n: int


@dataclass(frozen=True)
class RatioReport:
    """``lhs`` estimates ``E[<Y>_T^{p/2}]``, ``rhs`` estimates ``E[(Y*)^p]``."""

    p: float
    lhs: MomentEstimate
    rhs: MomentEstimate
    ratio_upper: float
    ratio_lower: float
    ci: tuple[float, float]
    ci_lower: tuple[float, float]


def path_functionals(sol: BSDESolution) -> PathFunctionals:
    if not (np.all(np.isfinite(sol.Y)) and np.all(np.isfinite(sol.Z))):
        raise NumericalFailure("solution contains non-finite values")
    sup_abs = np.max(np.abs(sol.Y), axis=1)
    energy = np.sum(sol.Z * sol.Z, axis=2) * sol.grid.dt[None, :]
    curve = np.zeros((sol.paths, sol.grid.steps + 1))
    np.cumsum(energy, axis=1, out=curve[:, 1:])
    return PathFunctionals(sup_abs, curve[:, -1].copy(), curve)


def _estimate(x: np.ndarray, p: float) -> MomentEstimate:
    n = x.size
    if np.all(x == x[0]):
        mean, se = float(x[0]), 0.0
    else:
        mean = float(np.mean(x))
        se = float(np.std(x, ddof=1) / np.sqrt(n))
    return MomentEstimate(float(p), mean, se, (mean - Z95 * se, mean + Z95 * se), n)


def moment(values, p: float) -> MomentEstimate:
    """Sample mean of ``|values|^p`` with its standard error and normal 95% CI."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise InvalidArgument("moment of an empty sample")
    if not p >= 1:
        raise InvalidArgument(f"moment exponent must be >= 1, got {p!r}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("moment values must be finite")
    return _estimate(np.abs(x) ** p, p)


def _ratio_ci(a: np.ndarray, b: np.ndarray):
    """Delta-method CI for ``mean(a) / mean(b)`` with paired samples."""
    n = a.size
    ma, mb = float(np.mean(a)), float(np.mean(b))
    r = ma / mb
    if n < 2:
        return r, (r, r)
    cov = np.cov(a, b, ddof=1)
    var = (cov[0, 0] / mb**2 - 2.0 * ma * cov[0, 1] / mb**3 + ma**2 * cov[1, 1] / mb**4) / n
    half = Z95 * float(np.sqrt(max(var, 0.0)))
    return r, (r - half, r + half)


def ratio_from_functionals(sup_abs, qv_total, p: float) -> RatioReport:
    """Ratio report from per-path ``Y*`` and ``<Y>_T`` (pooled blocks allowed)."""
    if not 1 <= p <= P_MAX:
        raise InvalidArgument(f"p must lie in [1, {P_MAX}], got {p!r}")
    sup_abs = np.asarray(sup_abs, dtype=np.float64)
    qv_total = np.asarray(qv_total, dtype=np.float64)
    if sup_abs.shape != qv_total.shape:
        raise InvalidArgument("sup_abs and qv_total must be paired per path")
    a = np.abs(sup_abs) ** p
    b = np.sqrt(qv_total) ** p
    rhs = _estimate(a, p)
    lhs = _estimate(b, p)
    if lhs.mean <= 1e-12 * rhs.mean or lhs.mean == 0.0 or rhs.mean == 0.0:
        raise DegenerateRatio(f"degenerate BDG ratio: lhs mean {lhs.mean!r}, rhs mean {rhs.mean!r}")
    upper, ci = _ratio_ci(a, b)
    lower, ci_lower = _ratio_ci(b, a)
    return RatioReport(float(p), lhs, rhs, upper, lower, ci, ci_lower)


def bdg_ratio(
    sol: BSDESolution,
    p: float,
    *,
    allow_nonzero_start: bool = False,
    start_tol: float = 1e-9,
) -> RatioReport:
    """Both sides of the BDG-type inequality for one solution.

    The inequality concerns processes vanishing at zero; unless
    ``allow_nonzero_start`` is set, ``max |Y_0| > start_tol`` is a
    ContractViolation.
    """
    if not allow_nonzero_start:
        y0 = float(np.max(np.abs(sol.Y[:, 0])))
        if y0 > start_tol:
            raise ContractViolation(
                f"bdg_ratio needs Y_0 = 0 (max |Y_0| = {y0:.3g}); pass allow_nonzero_start=True to override"
            )
    pf = path_functionals(sol)
    return ratio_from_functionals(pf.sup_abs, pf.qv_total, p)


def lenglart_constant(k: float) -> float:
    return (2.0 - k) / (1.0 - k)


@dataclass(frozen=True)
class LenglartReport:
    """``E[(sup X)^k] <= (2-k)/(1-k) E[A_T^k]`` checked on samples.

    ``holds`` is the verdict at 3 combined standard errors; ``margin_se`` is
    ``(bound - lhs) / combined_se``.  When the domination screen fails no
    verdict is given (``holds`` is None).
    """

    k: float
    constant: float
    dominated: bool
    screen_worst_z: float
    lhs: MomentEstimate
    rhs: MomentEstimate
    bound: float
    combined_se: float
    margin_se: float
    holds: bool | None


def lenglart_check(X, A, k: float) -> LenglartReport:
    """Check the Lenglart bound for ``X`` dominated by increasing ``A``.

    ``X`` and ``A`` have shape ``(paths, nodes)``.  Domination is screened at
    every node: ``mean(X_i - A_i) <= 3 * se(X_i - A_i)``.
    """
    if not 0.0 < k < 1.0:
        raise InvalidArgument(f"k must lie in (0, 1), got {k!r}")
    X = np.asarray(X, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if X.shape != A.shape or X.ndim != 2 or X.shape[0] < 2:
        raise InvalidArgument("X and A must share a (paths >= 2, nodes) shape")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(A))):
        raise InvalidArgument("X and A must be finite")
    if np.any(X < 0):
        raise InvalidArgument("X must be nonnegative")
    if np.any(np.diff(A, axis=1) < 0):
        raise InvalidArgument("A must be nondecreasing along each path")

    m = X.shape[0]
    diff = X - A
    mean = diff.mean(axis=0)
    se = diff.std(axis=0, ddof=1) / np.sqrt(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, mean / np.where(se > 0, se, 1.0), np.where(mean > 0, np.inf, -np.inf))
    worst = float(np.max(z))
    dominated = bool(worst <= 3.0)

    c = lenglart_constant(k)
    lhs = _estimate(np.max(X, axis=1) ** k, k)
    rhs = _estimate(A[:, -1] ** k, k)
    bound = c * rhs.mean
    comb = float(np.hypot(lhs.std_error, c * rhs.std_error))
    gap = bound - lhs.mean
    margin = float(gap / comb) if comb > 0 else (np.inf if gap >= 0 else -np.inf)
    holds = bool(lhs.mean <= bound + 3.0 * comb) if dominated else None
    return LenglartReport(k, c, dominated, worst, lhs, rhs, bound, comb, margin, holds)
