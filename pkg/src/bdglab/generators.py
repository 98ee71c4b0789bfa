"""BSDE drivers g(t, y, z) with their Lipschitz envelopes and assumption checks.

A driver is evaluated vectorized: ``t`` and ``y`` broadcast against each other
and ``z`` carries the Brownian dimension on its last axis.  The envelope
functions ``u`` and ``v`` are declared with the driver, never inferred.

Two assumptions are tracked:

* (H1) ``|g(t,y,z) - g(t,y',z')| <= u(t)|y-y'| + v(t)|z-z'|``
* (H2) ``g(t,y,0) = 0``

Together they give ``|g(t,y,z)| <= v(t)|z|``, which :func:`check_envelope_bound`
samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolation, InvalidArgument
from .paths import TimeGrid

__all__ = [
    "GeneratorSpec",
    "GeneratorEnergy",
    "CheckReport",
    "builtin_generator",
    "register_generator",
    "generator_names",
    "make_generator",
    "unregister_generator",
    "check_H2",
    "check_envelope_bound",
    "check_lipschitz",
    "sample_points",
    "energy_mu",
]

CHECK_TOL = 1e-12
_trapezoid = getattr(np, "trapezoid", None) or np.trapz
MIN_PANELS = 1000


@dataclass(frozen=True)
class GeneratorSpec:
    """A driver with its declared envelopes.

    ``drift_form`` fixes how the driver enters the equation.  ``"backward"``
    means ``Y_t = xi + int_t^T g ds - int_t^T Z dB``; ``"forward"`` means the
    differential form ``dY = g dt + Z dB``, i.e. the backward driver is ``-g``.
    """

    name: str
    eval: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    u_env: Callable[[np.ndarray], np.ndarray] | None
    v_env: Callable[[np.ndarray], np.ndarray] | None
    claims_H1: bool
    claims_H2: bool
    v_sq_integral: Callable[[float], float] | None = None
    drift_form: str = "backward"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.drift_form not in ("backward", "forward"):
            raise InvalidArgument(f"unknown drift_form {self.drift_form!r}")

    def __call__(self, t, y, z):
        y = np.asarray(y, dtype=np.float64)
        z = _as_z(z)
        return np.asarray(self.eval(np.asarray(t, dtype=np.float64), y, z), dtype=np.float64)

    def driver(self, t, y, z):
        """The driver in backward form, whatever ``drift_form`` says."""
        out = self(t, y, z)
        return out if self.drift_form == "backward" else -out

    @property
    def lipschitz(self) -> bool:
        return self.claims_H1 and self.claims_H2

    def require_lipschitz(self, what: str) -> None:
        if not self.lipschitz:
            failing = "(H1)" if not self.claims_H1 else "(H2)"
            raise ContractViolation(
                f"{what} requires a generator satisfying (H1) and (H2); "
                f"{self.name!r} does not claim {failing}"
            )


@dataclass(frozen=True)
class GeneratorEnergy:
    """``mu = int_0^T v(s)^2 ds``."""

    mu: float
    exact: bool
    error_bound: float = 0.0
    panels: int = 0


@dataclass(frozen=True)
class CheckReport:
    generator: str
    check: str
    max_value: float
    tolerance: float
    passed: bool
    samples: int


def _as_z(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 0:
        z = z[None]
    return z


def _norm(z: np.ndarray) -> np.ndarray:
    if z.shape[-1] == 1:
        return np.abs(z[..., 0])
    return np.hypot.reduce(z, axis=-1)


def _const(c: float):
    return lambda t: np.full(np.shape(t), c, dtype=np.float64)


def _zero_generator() -> GeneratorSpec:
    return GeneratorSpec(
        name="zero",
        eval=lambda t, y, z: np.zeros(np.broadcast_shapes(np.shape(t), y.shape, z.shape[:-1])),
        u_env=_const(0.0),
        v_env=_const(0.0),
        claims_H1=True,
        claims_H2=True,
        v_sq_integral=lambda T: 0.0,
    )


def _linear_z(coef=1.0) -> GeneratorSpec:
    b = np.atleast_1d(np.asarray(coef, dtype=np.float64))
    if not np.all(np.isfinite(b)):
        raise InvalidArgument("linear_z coefficient must be finite")
    k = b.size
    vb = math.hypot(*b)  # scaled norm; a plain sum of squares underflows for tiny coefficients

    def g(t, y, z):
        if z.shape[-1] < k:
            raise InvalidArgument(f"linear_z with {k} coefficients needs dims >= {k}")
        out = z[..., :k] @ b
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(t), y.shape, out.shape)).copy()

    return GeneratorSpec(
        name="linear_z",
        eval=g,
        u_env=_const(0.0),
        v_env=_const(vb),
        claims_H1=True,
        claims_H2=True,
        v_sq_integral=lambda T: vb * vb * T,
        params={"coef": b.tolist() if k > 1 else float(b[0])},
    )


_PROFILES = {
    # name: (v(t) / scale, int_0^T (v/scale)^2)
    "constant": (lambda t: np.ones(np.shape(t)), lambda T: T),
    "linear": (lambda t: np.asarray(t, dtype=np.float64), lambda T: T**3 / 3.0),
    "sin": (lambda t: np.abs(np.sin(t)), lambda T: T / 2.0 - math.sin(2.0 * T) / 4.0),
}


def _time_scaled(profile="constant", scale=1.0) -> GeneratorSpec:
    if profile not in _PROFILES:
        raise InvalidArgument(f"unknown time_scaled profile {profile!r}; choose from {sorted(_PROFILES)}")
    scale = float(scale)
    if not math.isfinite(scale) or scale < 0:
        raise InvalidArgument("time_scaled scale must be finite and nonnegative")
    shape, integral = _PROFILES[profile]

    def v(t):
        return scale * shape(np.asarray(t, dtype=np.float64))

    return GeneratorSpec(
        name="time_scaled",
        eval=lambda t, y, z: v(t) * _norm(z) + 0.0 * y,
        u_env=_const(0.0),
        v_env=v,
        claims_H1=True,
        claims_H2=True,
        v_sq_integral=lambda T: scale * scale * integral(T),
        params={"profile": profile, "scale": scale},
    )


def _quadratic() -> GeneratorSpec:
    # differential form dY = -|Z|^2 dt + Z dB; no Lipschitz envelope exists
    return GeneratorSpec(
        name="quadratic",
        eval=lambda t, y, z: -np.sum(z * z, axis=-1) + 0.0 * y + 0.0 * np.asarray(t),
        u_env=None,
        v_env=None,
        claims_H1=False,
        claims_H2=True,
        drift_form="forward",
    )


_REGISTRY: dict[str, Callable[..., GeneratorSpec]] = {
    "zero": _zero_generator,
    "linear_z": _linear_z,
    "time_scaled": _time_scaled,
    "quadratic": _quadratic,
}
BUILTINS = ("zero", "linear_z", "time_scaled", "quadratic")


def builtin_generator(kind: str, **params) -> GeneratorSpec:
    """One of the four built-in drivers.

    ``zero``; ``linear_z(coef)`` with ``g = coef . z``; ``time_scaled(profile,
    scale)`` with ``g = v(t)|z|``; ``quadratic`` with ``g = -|z|^2``.
    """
    if kind not in BUILTINS:
        raise InvalidArgument(f"unknown builtin generator {kind!r}")
    return make_generator(kind, **params)


def register_generator(name: str, factory: Callable[..., GeneratorSpec]) -> None:
    """Make ``factory`` available to :func:`make_generator` and the CLI."""
    if name in BUILTINS:
        raise InvalidArgument(f"cannot replace builtin generator {name!r}")
    _REGISTRY[name] = factory


def unregister_generator(name: str) -> None:
    if name in BUILTINS:
        raise InvalidArgument(f"cannot remove builtin generator {name!r}")
    _REGISTRY.pop(name, None)


def generator_names() -> list[str]:
    return list(_REGISTRY)


def make_generator(name: str, **params) -> GeneratorSpec:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise InvalidArgument(f"unknown generator {name!r}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for generator {name!r}: {exc}") from None


def sample_points(rng: np.random.Generator, n: int, horizon: float, box: float = 10.0, dims: int = 1):
    """Uniform samples ``(t, y, z)`` from ``[0, T] x [-box, box] x [-box, box]^d``."""
    t = rng.uniform(0.0, horizon, n)
    y = rng.uniform(-box, box, n)
    z = rng.uniform(-box, box, (n, dims))
    return t, y, z


def check_H2(g: GeneratorSpec, y_samples, t_samples, dims: int = 1, tol: float = CHECK_TOL) -> CheckReport:
    """Max of ``|g(t, y, 0)|`` over all sampled ``(t, y)`` pairs."""
    y = np.asarray(y_samples, dtype=np.float64).ravel()
    t = np.asarray(t_samples, dtype=np.float64).ravel()
    if y.size == 0 or t.size == 0:
        raise InvalidArgument("check_H2 needs nonempty samples")
    tt, yy = np.meshgrid(t, y, indexing="ij")
    vals = g(tt.ravel(), yy.ravel(), np.zeros((tt.size, dims)))
    worst = float(np.max(np.abs(vals)))
    return CheckReport(g.name, "H2", worst, tol, bool(worst <= tol), int(tt.size))


def check_envelope_bound(g: GeneratorSpec, t, y, z, tol: float = CHECK_TOL) -> CheckReport:
    """Max of ``|g(t,y,z)| - v(t)|z|`` over the samples; must be <= tol."""
    g.require_lipschitz("check_envelope_bound")
    t = np.asarray(t, dtype=np.float64)
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    excess = np.abs(g(t, y, z)) - g.v_env(t) * _norm(z)
    worst = float(np.max(excess))
    return CheckReport(g.name, "envelope_bound", worst, tol, bool(worst <= tol), int(t.size))


def check_lipschitz(g: GeneratorSpec, t, y, z, y2, z2, tol: float = CHECK_TOL) -> CheckReport:
    """Max sampled ratio ``|g(t,y,z) - g(t,y2,z2)| / (u|y-y2| + v|z-z2|)``.

    Passes when the ratio stays below ``1 + tol``.  Pairs whose envelope
    denominator is zero must have equal values, otherwise the ratio is inf.
    """
    if not g.claims_H1:
        raise ContractViolation(f"check_lipschitz: {g.name!r} does not claim (H1)")
    t = np.asarray(t, dtype=np.float64)
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    z2 = np.atleast_2d(np.asarray(z2, dtype=np.float64))
    num = np.abs(g(t, y, z) - g(t, y2, z2))
    den = g.u_env(t) * np.abs(np.asarray(y) - np.asarray(y2)) + g.v_env(t) * _norm(z - z2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    worst = float(np.max(ratio))
    return CheckReport(g.name, "lipschitz_ratio", worst, 1.0 + tol, bool(worst <= 1.0 + tol), int(t.size))


def energy_mu(g: GeneratorSpec, grid: TimeGrid, rtol: float = 1e-12) -> GeneratorEnergy:
    """``int_0^T v(s)^2 ds`` on the grid's horizon.

    Uses the registered antiderivative when there is one.  Otherwise runs the
    composite trapezoid rule on a refinement of ``grid`` with at least 1000
    panels, doubling until the Richardson estimate of the error drops below
    ``rtol * max(1, mu)``.
    """
    if g.v_env is None or not g.claims_H1:
        raise ContractViolation(f"energy_mu: {g.name!r} has no usable v envelope")
    T = grid.horizon
    if g.v_sq_integral is not None:
        mu = float(g.v_sq_integral(T))
        if not math.isfinite(mu) or mu < 0:
            raise ContractViolation(f"energy_mu: closed form for {g.name!r} returned {mu!r}")
        return GeneratorEnergy(mu, exact=True)

    sub = max(1, math.ceil(MIN_PANELS / grid.steps))
    prev = None
    while True:
        frac = np.arange(sub) / sub
        pts = (grid.nodes[:-1, None] + frac[None, :] * grid.dt[:, None]).ravel()
        pts = np.append(pts, T)
        vals = np.asarray(g.v_env(pts), dtype=np.float64) ** 2
        mu = float(_trapezoid(vals, pts))
        if not math.isfinite(mu):
            raise ContractViolation(f"energy_mu: v^2 is not integrable on [0, {T}] for {g.name!r}")
        if prev is not None:
            err = abs(mu - prev) / 3.0
            if err <= rtol * max(1.0, mu) or sub * grid.steps >= 2**22:
                return GeneratorEnergy(mu, exact=False, error_bound=err, panels=sub * grid.steps)
        prev = mu
        sub *= 2
