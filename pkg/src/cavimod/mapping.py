"""Mappings of the punctured unit ball and their Jacobian matrices.

All rules are vectorised: a rule receives an array of points with shape
``(..., n)`` and returns an array of shape ``(..., n)`` (maps) or
``(..., n, n)`` (Jacobians).  The public :func:`evaluate` and
:func:`jacobian` accept a single point or a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DomainError, EvaluationError, ParameterError

Rule = Callable[[np.ndarray], np.ndarray]

FD_STEP_FACTOR = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class MappingSpec:
    """A map ``f`` of the punctured ball ``0 < |x| < 1`` into R^n.

    Attributes
    ----------
    dimension : int
        Ambient dimension ``n >= 2``.
    rule : callable
        Vectorised evaluation rule ``(..., n) -> (..., n)``.
    jacobian_rule : callable, optional
        Analytic Jacobian ``(..., n) -> (..., n, n)``.  When absent the
        Jacobian is taken by central finite differences.
    label : str
        Identifier used in reports.
    params : mapping
        Named real parameters the map was built with.
    scaled_jacobian_rule : callable, optional
        Returns a positive multiple of the Jacobian.  Every dilatation is
        invariant under ``J -> cJ``, so this lets maps such as ``x e^{1-1/|x|}``
        be analysed near the origin where the true Jacobian underflows.
    ring_modulus_rule : callable, optional
        ``(r, R) -> mo f(A(r, R))`` when the image of a spherical ring is
        known in closed form (radial stretchings, scalings).
    preserves_ring_insides : bool
        User assertion that ``f(S_r1)`` lies inside ``f(S_r2)`` for
        ``r1 < r2``.  Recorded, never verified.
    """

    dimension: int
    rule: Rule
    jacobian_rule: Optional[Rule] = None
    label: str = "map"
    params: Mapping[str, float] = field(default_factory=dict)
    scaled_jacobian_rule: Optional[Rule] = None
    ring_modulus_rule: Optional[Callable[[float, float], float]] = None
    preserves_ring_insides: bool = True

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise ParameterError(f"dimension must be an integer >= 2, got {self.dimension}")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def has_analytic_jacobian(self) -> bool:
        return self.jacobian_rule is not None


@dataclass(frozen=True)
class RadialProfile:
    """Strictly increasing profile ``Phi`` of a radial stretching ``Phi(|x|) x/|x|``.

    ``log_slope`` (``t Phi'(t)/Phi(t)``) and ``log_phi`` are optional
    overflow-safe forms; they default to expressions in ``phi``/``dphi``.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    log_slope: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "radial"
    params: Mapping[str, float] = field(default_factory=dict)

    def slope(self, t):
        """Return ``t Phi'(t) / Phi(t)``."""
        t = np.asarray(t, dtype=float)
        if self.log_slope is not None:
            return self.log_slope(t)
        return t * self.dphi(t) / self.phi(t)

    def logphi(self, t):
        t = np.asarray(t, dtype=float)
        if self.log_phi is not None:
            return self.log_phi(t)
        return np.log(self.phi(t))

    def check_increasing(self, lo=1e-3, hi=1.0 - 1e-3, num=257) -> bool:
        """Spot-check strict monotonicity of ``Phi`` on a log grid."""
        t = np.geomspace(lo, hi, num)
        lp = self.logphi(t)
        return bool(np.all(np.isfinite(lp)) and np.all(np.diff(lp) > 0))


# --- profiles ---------------------------------------------------------------

def identity_profile() -> RadialProfile:
    return RadialProfile(
        phi=lambda t: t,
        dphi=lambda t: np.ones_like(t),
        log_slope=lambda t: np.ones_like(t),
        log_phi=np.log,
        label="identity",
    )


def cavity_profile(alpha: float) -> RadialProfile:
    """Profile ``(1 + t^alpha)/2`` of the cavitating stretching f1."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"f1 requires 0 < alpha < 1, got alpha={alpha}")
    a = float(alpha)
    return RadialProfile(
        phi=lambda t: 0.5 * (1.0 + t**a),
        dphi=lambda t: 0.5 * a * t ** (a - 1.0),
        log_slope=lambda t: a * t**a / (1.0 + t**a),
        log_phi=lambda t: np.log1p(t**a) - math.log(2.0),
        label="f1",
        params={"alpha": a},
    )


def exp_profile() -> RadialProfile:
    """Profile ``t e^{1 - 1/t}`` of the non-cavitating stretching f2."""
    return RadialProfile(
        phi=lambda t: t * np.exp(1.0 - 1.0 / t),
        dphi=lambda t: np.exp(1.0 - 1.0 / t) * (1.0 + 1.0 / t),
        log_slope=lambda t: 1.0 + 1.0 / t,
        log_phi=lambda t: np.log(t) + 1.0 - 1.0 / t,
        label="f2",
    )


def power_profile(beta: float) -> RadialProfile:
    """Profile ``t^beta``; ``beta = 1`` is the identity."""
    if not beta > 0:
        raise ParameterError(f"power profile requires beta > 0, got {beta}")
    b = float(beta)
    return RadialProfile(
        phi=lambda t: t**b,
        dphi=lambda t: b * t ** (b - 1.0),
        log_slope=lambda t: np.full_like(t, b),
        log_phi=lambda t: b * np.log(t),
        label="power",
        params={"beta": b},
    )


# --- point helpers ----------------------------------------------------------

def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise ParameterError(f"expected points with trailing dimension {n}, got shape {x.shape}")
    return x


def _check_domain(x):
    norms = np.linalg.norm(x, axis=-1)
    if np.any(~np.isfinite(norms)) or np.any(norms <= 0.0) or np.any(norms >= 1.0):
        bad = norms[(norms <= 0.0) | (norms >= 1.0) | ~np.isfinite(norms)]
        raise DomainError(f"points must satisfy 0 < |x| < 1; got |x| = {bad.ravel()[0]!r}")
    return norms


def evaluate(f: MappingSpec, x):
    """Evaluate ``f`` at one point or a batch of points in the punctured ball."""
    x = _as_points(x, f.dimension)
    _check_domain(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        y = np.asarray(f.rule(x), dtype=float)
    if not np.all(np.isfinite(y)):
        raise EvaluationError(f"{f.label}: evaluation produced non-finite values")
    return y


def fd_jacobian(rule: Rule, x, n: int):
    """Central-difference Jacobian of a vectorised rule.

    The step for each point is ``cbrt(eps) * |x|``.
    """
    x = _as_points(x, n)
    h = FD_STEP_FACTOR * np.linalg.norm(x, axis=-1)
    jac = np.empty(x.shape + (n,))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for i in range(n):
            step = np.zeros_like(x)
            step[..., i] = h
            # Use the actually representable step to cancel rounding in x+h.
            hp = (x + step)[..., i] - x[..., i]
            hm = x[..., i] - (x - step)[..., i]
            diff = np.asarray(rule(x + step), dtype=float) - np.asarray(rule(x - step), dtype=float)
            jac[..., :, i] = diff / (hp + hm)[..., None]
    return jac


def jacobian(f: MappingSpec, x):
    """Jacobian matrix ``f'(x)``; analytic when the map carries a rule."""
    x = _as_points(x, f.dimension)
    _check_domain(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if f.jacobian_rule is not None:
            jac = np.asarray(f.jacobian_rule(x), dtype=float)
        else:
            jac = fd_jacobian(f.rule, x, f.dimension)
    if not np.all(np.isfinite(jac)):
        raise EvaluationError(f"{f.label}: Jacobian has non-finite entries")
    return jac


def scaled_jacobian(f: MappingSpec, x):
    """A positive multiple of ``f'(x)``, safe from under/overflow where possible.

    Non-finite entries are returned as is; callers mark such points irregular.
    """
    x = _as_points(x, f.dimension)
    _check_domain(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if f.scaled_jacobian_rule is not None:
            return np.asarray(f.scaled_jacobian_rule(x), dtype=float)
        if f.jacobian_rule is not None:
            return np.asarray(f.jacobian_rule(x), dtype=float)
        return fd_jacobian(f.rule, x, f.dimension)


# --- catalog ----------------------------------------------------------------

def _radial_frame(x):
    t = np.linalg.norm(x, axis=-1)
    u = x / t[..., None]
    uu = u[..., :, None] * u[..., None, :]
    return t, u, uu


def radial_map(profile: RadialProfile, n: int) -> MappingSpec:
    """Radial stretching ``x -> Phi(|x|) x / |x|``."""
    eye = np.eye(n)

    def rule(x):
        t = np.linalg.norm(x, axis=-1)
        return (profile.phi(t) / t)[..., None] * x

    def jac(x):
        t, _, uu = _radial_frame(x)
        dphi = profile.dphi(t)[..., None, None]
        phi_t = (profile.phi(t) / t)[..., None, None]
        return dphi * uu + phi_t * (eye - uu)

    def scaled(x):
        # J / (Phi(t)/t) = q u u^T + (I - u u^T) with q = t Phi'/Phi.
        t, _, uu = _radial_frame(x)
        q = profile.slope(t)[..., None, None]
        return q * uu + (eye - uu)

    def ring_modulus(r, R):
        return float(profile.logphi(R) - profile.logphi(r))

    return MappingSpec(
        dimension=n,
        rule=rule,
        jacobian_rule=jac,
        label=profile.label if profile.label != "radial" else "radial",
        params=dict(profile.params),
        scaled_jacobian_rule=scaled,
        ring_modulus_rule=ring_modulus,
    )


def identity_map(n: int) -> MappingSpec:
    eye = np.eye(n)
    return MappingSpec(
        dimension=n,
        rule=lambda x: np.array(x, dtype=float, copy=True),
        jacobian_rule=lambda x: np.broadcast_to(eye, x.shape + (n,)).copy(),
        label="identity",
        ring_modulus_rule=lambda r, R: math.log(R / r),
    )


def scaling_map(n: int, c: float) -> MappingSpec:
    if not (np.isfinite(c) and c > 0):
        raise ParameterError(f"scaling requires c > 0, got c={c}")
    c = float(c)
    eye = np.eye(n)
    return MappingSpec(
        dimension=n,
        rule=lambda x: c * np.asarray(x, dtype=float),
        jacobian_rule=lambda x: np.broadcast_to(c * eye, x.shape + (n,)).copy(),
        scaled_jacobian_rule=lambda x: np.broadcast_to(eye, x.shape + (n,)).copy(),
        label="scaling",
        params={"c": c},
        ring_modulus_rule=lambda r, R: math.log(R / r),
    )


def quick_rotation_map(n: int) -> MappingSpec:
    """``(z e^{2i log|z|}, x_3, ..., x_n)`` with ``z = x_1 + i x_2``."""

    def rule(x):
        x = np.asarray(x, dtype=float)
        rho2 = x[..., 0] ** 2 + x[..., 1] ** 2
        ang = np.log(rho2)  # 2 log|z|
        c, s = np.cos(ang), np.sin(ang)
        y = x.copy()
        y[..., 0] = x[..., 0] * c - x[..., 1] * s
        y[..., 1] = x[..., 0] * s + x[..., 1] * c
        return y

    def jac(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        rho2 = x1**2 + x2**2
        ang = np.log(rho2)
        c, s = np.cos(ang), np.sin(ang)
        w1 = x1 * c - x2 * s
        w2 = x1 * s + x2 * c
        J = np.broadcast_to(np.eye(n), x.shape + (n,)).copy()
        J[..., 0, 0] = c - 2.0 * x1 * w2 / rho2
        J[..., 0, 1] = -s - 2.0 * x2 * w2 / rho2
        J[..., 1, 0] = s + 2.0 * x1 * w1 / rho2
        J[..., 1, 1] = c + 2.0 * x2 * w1 / rho2
        return J

    return MappingSpec(dimension=n, rule=rule, jacobian_rule=jac, label="f3")


CATALOG = {
    "identity": "x -> x",
    "scaling": "x -> c x (c > 0, default 2)",
    "f1": "(1 + |x|^alpha)/(2|x|) x, 0 < alpha < 1 (default 1/2); opens a cavity of radius 1/2",
    "f2": "x e^{1 - 1/|x|}; extends continuously to 0",
    "f3": "(z e^{2i log|z|}, x_3, ..., x_n), z = x_1 + i x_2",
    "radial": "Phi(|x|) x/|x| for a RadialProfile (CLI: power profile t^beta, default beta 1)",
}


def catalog_get(name: str, n: int, params: Optional[Mapping[str, object]] = None) -> MappingSpec:
    """Build a catalog map with its analytic Jacobian attached."""
    params = dict(params or {})
    if int(n) != n or n < 2:
        raise ParameterError(f"dimension must be an integer >= 2, got {n}")
    n = int(n)

    def take(allowed):
        unknown = set(params) - set(allowed)
        if unknown:
            raise ParameterError(f"{name}: unknown parameter(s) {sorted(unknown)}")

    if name == "identity":
        take(())
        return identity_map(n)
    if name == "scaling":
        take(("c",))
        return scaling_map(n, float(params.get("c", 2.0)))
    if name == "f1":
        take(("alpha",))
        return radial_map(cavity_profile(float(params.get("alpha", 0.5))), n)
    if name == "f2":
        take(())
        return radial_map(exp_profile(), n)
    if name == "f3":
        take(())
        return quick_rotation_map(n)
    if name == "radial":
        take(("profile", "beta"))
        profile = params.get("profile")
        if profile is None:
            profile = power_profile(float(params.get("beta", 1.0)))
        elif not isinstance(profile, RadialProfile):
            raise ParameterError("radial: 'profile' must be a RadialProfile")
        if not profile.check_increasing():
            raise ParameterError("radial: profile is not strictly increasing")
        return radial_map(profile, n)
    raise ParameterError(f"unknown catalog map {name!r}; known: {sorted(CATALOG)}")


def conjugate_rotation(f: MappingSpec, A) -> MappingSpec:
    """Return ``A o f o A^{-1}`` for a rotation ``A`` in SO(n)."""
    A = np.asarray(A, dtype=float)
    n = f.dimension
    if A.shape != (n, n):
        raise ParameterError(f"rotation must be {n}x{n}, got {A.shape}")
    if np.max(np.abs(A @ A.T - np.eye(n))) > 1e-12:
        raise ParameterError("matrix is not orthogonal within 1e-12")
    if abs(np.linalg.det(A) - 1.0) > 1e-12:
        raise ParameterError("rotation must have determinant +1")
    At = A.T.copy()

    def back(y):
        return np.asarray(y, dtype=float) @ At.T  # A^{-1} y, row-wise

    def rule(y):
        return f.rule(back(y)) @ At

    def wrap(jrule):
        if jrule is None:
            return None
        return lambda y: A @ jrule(back(y)) @ At

    return replace(
        f,
        rule=rule,
        jacobian_rule=wrap(f.jacobian_rule),
        scaled_jacobian_rule=wrap(f.scaled_jacobian_rule),
        label=f"rot({f.label})",
    )
