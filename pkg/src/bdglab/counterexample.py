"""The quadratic-driver family ``Y^n_t = n B_t - n^2 t``, ``Z = n``.

Each member solves ``dY = -Z^2 dt + Z dB`` exactly, so it is a g-martingale
for ``g(z) = -z^2`` and vanishes at zero, yet

    E[sup |Y^n|] >= |E Y^n_T| = n^2 T   while   E[<Y^n>_T^{1/2}] = n sqrt(T),

so no constant bounds the upper BDG ratio.  The generator is not
generalized-Lipschitz, which is the hypothesis that fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bdg import MomentEstimate, moment, path_functionals
from .errors import InvalidArgument
from .paths import BrownianBatch, TimeGrid
from .solver import BSDESolution, analytic_solution

__all__ = [
    "QuadraticFamily",
    "DivergenceRow",
    "DivergenceReport",
    "quadratic_solution",
    "divergence_report",
    "FAILING_HYPOTHESIS",
    "CSV_COLUMNS",
]

FAILING_HYPOTHESIS = "(H1): g(z) = -z^2 is not generalized-Lipschitz in z"
CSV_COLUMNS = (
    "n",
    "lhs_root_exact",
    "sup_mc_mean",
    "sup_mc_ci_lo",
    "sup_mc_ci_hi",
    "sup_lower_bound_analytic",
    "ratio",
    "ratio_over_n",
)


@dataclass(frozen=True)
class QuadraticFamily:
    n: float
    grid: TimeGrid

    def __post_init__(self):
        if not math.isfinite(self.n) or self.n < 0:
            raise InvalidArgument(f"n must be finite and nonnegative, got {self.n!r}")


def quadratic_solution(fam: QuadraticFamily, batch: BrownianBatch) -> BSDESolution:
    if batch.dims != 1:
        raise InvalidArgument(f"the quadratic family needs dims = 1, batch has {batch.dims}")
    if batch.grid != fam.grid:
        raise InvalidArgument("batch grid differs from the family grid")
    return analytic_solution("quadratic_family", batch, n=fam.n)


@dataclass(frozen=True)
class DivergenceRow:
    n: float
    lhs_root_exact: float
    sup_mc: MomentEstimate
    sup_lower_bound_analytic: float
    ratio: float
    ratio_over_n: float

    def csv_values(self) -> tuple[float, ...]:
        return (
            self.n,
            self.lhs_root_exact,
            self.sup_mc.mean,
            self.sup_mc.ci95[0],
            self.sup_mc.ci95[1],
            self.sup_lower_bound_analytic,
            self.ratio,
            self.ratio_over_n,
        )


@dataclass(frozen=True)
class DivergenceReport:
    p: float
    horizon: float
    rows: tuple[DivergenceRow, ...]
    slope: float
    ratio_increasing: bool
    lower_side_holds: tuple[bool, ...]
    failing_hypothesis: str = FAILING_HYPOTHESIS


def divergence_report(ns, batch: BrownianBatch, p: float = 1.0) -> DivergenceReport:
    """Per n: exact ``E[<Y^n>_T^{p/2}] = (n sqrt(T))^p``, Monte Carlo
    ``E[sup |Y^n|^p]``, the analytic lower bound
    ``max(0, n^2 T - n sqrt(2T/pi))^p`` and their ratio.

    ``slope`` is the least-squares slope of ``log ratio`` against ``log n``
    (NaN for fewer than two n).
    """
    ns = [float(n) for n in ns]
    if not ns or any(not (n > 0 and math.isfinite(n)) for n in ns):
        raise InvalidArgument("ns must be a nonempty list of positive numbers")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidArgument("ns must be strictly increasing")
    if batch.dims != 1:
        raise InvalidArgument(f"the quadratic family needs dims = 1, batch has {batch.dims}")
    T = batch.grid.horizon
    abs_bt = math.sqrt(2.0 * T / math.pi)  # E|B_T|

    rows = []
    for n in ns:
        sol = quadratic_solution(QuadraticFamily(n, batch.grid), batch)
        sup = moment(path_functionals(sol).sup_abs, p)
        lhs_root = (n * math.sqrt(T)) ** p
        lower = max(0.0, n * n * T - n * abs_bt) ** p
        ratio = sup.mean / lhs_root
        rows.append(DivergenceRow(n, lhs_root, sup, lower, ratio, ratio / n))

    ratios = np.array([r.ratio for r in rows])
    if len(rows) >= 2:
        slope = float(np.polyfit(np.log(ns), np.log(ratios), 1)[0])
    else:
        slope = float("nan")
    increasing = bool(np.all(np.diff(ratios) > 0))
    lower_ok = tuple(bool(r.lhs_root_exact <= r.sup_mc.mean) for r in rows)
    return DivergenceReport(float(p), T, tuple(rows), slope, increasing, lower_ok)
