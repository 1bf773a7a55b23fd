"""Modulus bounds for spherical rings and cavitation tests at the origin.

Notation: ``omega = omega_{n-1}`` is the area of the unit sphere, ``M(G)`` the
modulus of a curve family, and ``mo`` the modulus of a ring, related by
``mo = (omega / M)^{1/(n-1)}``.  For ``Gamma`` the family of curves joining the
boundary spheres of ``A(r, R)``:

    int_S (int_r^R Q(tu) dt/t)^{1-n} dsigma(u)
        <= M(f(Gamma)) <=
    (int_r^R (int_S D(tu) t^{n-1} dsigma(u))^{1/(1-n)} dt)^{1-n}

The cavitation integrals are the ``r -> 0`` limits of these bounds on
``A(r, 1)`` (``I_Q``, ``I_D``) and of their analogues with the classical
dilatations (``I_K`` with ``K^{1/(n-1)}``, ``I_L`` with ``L``).
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .dilatation import dilatation_fields
from .errors import IntegrationError, ParameterError
from .mapping import MappingSpec, scaled_jacobian
from .quadrature import (
    DEFAULT_K0,
    DEFAULT_KMAX,
    DEFAULT_RADIAL_M,
    DEFAULT_SPHERE_LEVEL,
    MAX_IRREGULAR_FRACTION,
    ClassifierConfig,
    LimitKind,
    LimitVerdict,
    QuadratureGrid,
    epsilon_grid,
    limit_classify,
    make_grid,
    sphere_area,
    sphere_nodes,
)

log = logging.getLogger(__name__)

POSITIVITY_THRESHOLD = 1e-6  # times omega_{n-1}
CHUNK_POINTS = 1 << 17


# --- closed forms -----------------------------------------------------------

def ring_modulus_spherical(r: float, R: float) -> float:
    """Modulus ``log(R/r)`` of the spherical ring ``r < |x| < R``."""
    if not (0.0 < r < R) or not math.isfinite(R):
        raise ParameterError(f"need 0 < r < R, got ({r}, {R})")
    return math.log(R / r)


def modulus_conversions(value: float, direction: str, n: int) -> float:
    """Convert between a ring modulus and the modulus of its curve family."""
    if not value > 0:
        raise ParameterError(f"value must be positive, got {value}")
    omega = sphere_area(n)
    if direction == "ring_to_family":
        return omega / value ** (n - 1)
    if direction == "family_to_ring":
        return (omega / value) ** (1.0 / (n - 1))
    raise ParameterError(f"unknown direction {direction!r}")


def teichmuller_constant_bound(n: int) -> Tuple[float, bool]:
    """Return ``(A_n, exact)``: ``pi`` for n = 2, otherwise the known upper bound."""
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if n == 2:
        return math.pi, True
    value = 2.0 * math.log(1.0 + math.sqrt(2.0)) + 2.0 * math.log(2.0) / (n - 1) \
        + 2.0 * n * (n - 2) / (n - 1)
    return value, False


# --- sampled dilatation fields ---------------------------------------------

def worker_count(workers: Optional[int] = None) -> int:
    """Worker count, capped by the ``CAVIMOD_THREADS`` environment variable."""
    cap = os.environ.get("CAVIMOD_THREADS")
    cap = max(1, int(cap)) if cap else 1
    return cap if workers is None else max(1, min(int(workers), cap))


@dataclass(frozen=True)
class DilatationField:
    """Dilatations ``K, L, D, Q`` on every node of a grid, shape ``(n_sphere, m)``.

    Irregular nodes hold NaN.
    """

    grid: QuadratureGrid
    K: np.ndarray
    L: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    regular: np.ndarray

    @property
    def irregular_fraction(self) -> float:
        return float(1.0 - self.regular.mean())

    def clean(self, name: str) -> np.ndarray:
        return np.nan_to_num(getattr(self, name), nan=0.0)

    def restrict(self, r: float, R: float, rtol: float = 1e-9) -> "DilatationField":
        """The same samples on the sub-annulus ``A(r, R)``.

        ``r`` and ``R`` must fall on cell boundaries of the radial grid,
        which are ``r0 * exp(i h)`` for the log-uniform rule.
        """
        g = self.grid
        h = float(g.radial_log_weights[0])
        m = len(g.radial_nodes)
        idx = []
        for b in (r, R):
            pos = math.log(b / g.r) / h
            i = int(round(pos))
            if not (0 <= i <= m) or abs(pos - i) > rtol * max(1.0, m):
                raise ParameterError(f"radius {b} is not a cell boundary of the grid on A({g.r}, {g.R})")
            idx.append(i)
        i0, i1 = idx
        if i1 <= i0:
            raise ParameterError(f"need r < R, got ({r}, {R})")
        sl = slice(i0, i1)
        sub = replace(g, radial_nodes=g.radial_nodes[sl], radial_weights=g.radial_weights[sl],
                      radial_log_weights=g.radial_log_weights[sl], r=float(r), R=float(R))
        return DilatationField(sub, self.K[:, sl], self.L[:, sl], self.D[:, sl], self.Q[:, sl],
                               self.regular[:, sl])


def sample_field(f: MappingSpec, grid: QuadratureGrid, workers: Optional[int] = None,
                 max_irregular: float = MAX_IRREGULAR_FRACTION) -> DilatationField:
    """Evaluate all dilatations of ``f`` on the grid nodes.

    Work is split into blocks of sphere directions; blocks may run on
    several threads but are reassembled in a fixed order.
    """
    if f.dimension != grid.n:
        raise ParameterError(f"map dimension {f.dimension} does not match grid dimension {grid.n}")
    S, m = len(grid.sphere_weights), len(grid.radial_nodes)
    rows = max(1, CHUNK_POINTS // m)
    blocks = [(s, min(s + rows, S)) for s in range(0, S, rows)]

    def work(block):
        lo, hi = block
        u = grid.sphere_nodes[lo:hi, None, :]
        pts = u * grid.radial_nodes[None, :, None]
        fields = dilatation_fields(scaled_jacobian(f, pts), np.broadcast_to(u, pts.shape))
        return {k: fields[k] for k in ("K", "L", "D", "Q", "regular")}

    nw = worker_count(workers)
    if nw > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    data = {k: np.concatenate([p[k] for p in parts], axis=0) for k in parts[0]}
    fld = DilatationField(grid, data["K"], data["L"], data["D"], data["Q"], data["regular"])
    frac = fld.irregular_fraction
    if frac > max_irregular:
        raise IntegrationError(f"{f.label}: {frac:.2%} of grid nodes are irregular", frac)
    if frac > 0:
        log.warning("%s: %.4f%% of grid nodes irregular and skipped", f.label, 100 * frac)
    return fld


def _dt_weights(grid: QuadratureGrid) -> np.ndarray:
    """Weights for ``int g(t) dt`` as the midpoint rule in ``s = log t``.

    Using the same rule as for ``dt/t`` keeps the two extremal bounds equal
    for radial stretchings at every resolution, not only in the limit.
    """
    return grid.radial_nodes * grid.radial_log_weights


def _resolve(f, r, R, grid, fld, level, m, seed):
    if fld is not None:
        grid = fld.grid
    elif grid is None:
        return sample_field(f, make_grid(f.dimension, r, R, level, m, seed))
    if not (math.isclose(grid.r, r) and math.isclose(grid.R, R)):
        raise ParameterError(f"grid covers A({grid.r}, {grid.R}), not A({r}, {R})")
    return fld if fld is not None else sample_field(f, grid)


def _outer_sphere(weights, inner, n):
    """``sum_u w(u) I(u)^{1-n}`` over directions with a positive inner integral."""
    ok = inner > 0
    if not np.all(ok):
        log.warning("%d direction(s) with nonpositive inner integral skipped", int((~ok).sum()))
    with np.errstate(divide="ignore"):
        vals = np.where(ok, weights * np.where(ok, inner, 1.0) ** (1 - n), 0.0)
    return float(np.sum(vals))


def lower_bound_sigma(f: MappingSpec, r: float, R: float, grid: Optional[QuadratureGrid] = None, *,
                      level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M, seed: int = 0,
                      field: Optional[DilatationField] = None) -> float:
    """Sharp lower bound ``int_S (int_r^R Q(tu) dt/t)^{1-n} dsigma`` for ``M(f(Gamma))``."""
    fld = _resolve(f, r, R, grid, field, level, m, seed)
    g = fld.grid
    inner = fld.clean("Q") @ g.radial_log_weights
    return _outer_sphere(g.sphere_weights, inner, g.n)


def _radial_outer(fld: DilatationField, name: str, power: float = 1.0) -> np.ndarray:
    """Per-node integrand ``(t^{n-1} int_S X(tu) dsigma)^{1/(1-n)} * w_lin(t)``."""
    g = fld.grid
    X = fld.clean(name)
    if power != 1.0:
        X = X**power
    sphere = np.ascontiguousarray(X.T) @ g.sphere_weights
    phi = g.radial_nodes ** (g.n - 1) * sphere
    with np.errstate(divide="ignore"):
        return np.where(phi > 0, phi ** (1.0 / (1 - g.n)), 0.0) * _dt_weights(g)


def upper_bound_extremal(f: MappingSpec, r: float, R: float, grid: Optional[QuadratureGrid] = None, *,
                         level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M, seed: int = 0,
                         field: Optional[DilatationField] = None) -> float:
    """Extremal upper bound ``(int_r^R (int_S D t^{n-1} dsigma)^{1/(1-n)} dt)^{1-n}``."""
    fld = _resolve(f, r, R, grid, field, level, m, seed)
    return float(np.sum(_radial_outer(fld, "D"))) ** (1 - fld.grid.n)


@dataclass(frozen=True)
class ModulusBounds:
    r: float
    R: float
    lower: float
    upper: float
    exact: Optional[float] = None
    curve_family_note: str = ""
    admissibility_residuals: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        return {
            "r": self.r, "R": self.R, "lower": self.lower, "upper": self.upper,
            "exact": self.exact, "curve_family_note": self.curve_family_note,
            "admissibility_residuals": (list(self.admissibility_residuals)
                                        if self.admissibility_residuals is not None else None),
        }


FAMILY_NOTE = "M(f(Gamma)) for Gamma = curves joining the boundary spheres of A(r, R)"


def exact_family_modulus(f: MappingSpec, r: float, R: float) -> Optional[float]:
    """``M(f(Gamma))`` when the image of ``A(r, R)`` is a round annulus, else None."""
    if f.ring_modulus_rule is None:
        return None
    mo = f.ring_modulus_rule(r, R)
    if not (math.isfinite(mo) and mo > 0):
        return None
    return modulus_conversions(mo, "ring_to_family", f.dimension)


def modulus_bounds(f: MappingSpec, r: float, R: float, grid: Optional[QuadratureGrid] = None, *,
                   level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M, seed: int = 0,
                   field: Optional[DilatationField] = None) -> ModulusBounds:
    """Both extremal bounds, plus the closed-form value when one exists."""
    fld = _resolve(f, r, R, grid, field, level, m, seed)
    lower = lower_bound_sigma(f, r, R, field=fld)
    upper = upper_bound_extremal(f, r, R, field=fld)
    return ModulusBounds(r, R, lower, upper, exact_family_modulus(f, r, R), FAMILY_NOTE)


# --- density pairs ----------------------------------------------------------

@dataclass(frozen=True)
class DensityPair:
    """Radial density ``rho(t)`` on ``(r, R)`` and spherical density ``p(u)``; both vectorised."""

    rho: Callable[[np.ndarray], np.ndarray]
    p: Callable[[np.ndarray], np.ndarray]


def canonical_densities(r: float, R: float, n: int) -> DensityPair:
    """``rho = 1/(t log(R/r))`` and constant ``p = omega^{1/(1-n)}``."""
    lg = math.log(R / r)
    pc = sphere_area(n) ** (1.0 / (1 - n))
    return DensityPair(rho=lambda t: 1.0 / (t * lg), p=lambda u: np.full(u.shape[:-1], pc))


def admissibility_residuals(densities: DensityPair, grid: QuadratureGrid) -> Tuple[float, float]:
    """``(|int rho dt - 1|, |int p^{n-1} dsigma - 1|)`` on the grid."""
    rho_int = float(np.sum(densities.rho(grid.radial_nodes) * _dt_weights(grid)))
    p_int = float(np.sum(densities.p(grid.sphere_nodes) ** (grid.n - 1) * grid.sphere_weights))
    return abs(rho_int - 1.0), abs(p_int - 1.0)


def admissible_normalize(raw: DensityPair, r: float, R: float, n: int,
                         grid: Optional[QuadratureGrid] = None) -> DensityPair:
    """Rescale a density pair so both normalisations hold on the grid."""
    if grid is None:
        grid = make_grid(n, r, R)
    rho_vals = np.asarray(raw.rho(grid.radial_nodes), dtype=float)
    p_vals = np.asarray(raw.p(grid.sphere_nodes), dtype=float)
    if np.any(rho_vals < 0) or np.any(p_vals < 0):
        raise ParameterError("densities must be nonnegative")
    rho_int = float(np.sum(rho_vals * _dt_weights(grid)))
    p_int = float(np.sum(p_vals ** (n - 1) * grid.sphere_weights))
    if not (rho_int > 0 and p_int > 0):
        raise ParameterError("density has zero integral")
    sp = p_int ** (1.0 / (1 - n))
    rho, p = raw.rho, raw.p
    return DensityPair(rho=lambda t: rho(t) / rho_int, p=lambda u: p(u) * sp)


def double_bound_with_densities(f: MappingSpec, r: float, R: float, densities: DensityPair,
                                grid: Optional[QuadratureGrid] = None, *, tol: float = 1e-8,
                                level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M,
                                seed: int = 0, field: Optional[DilatationField] = None) -> ModulusBounds:
    """Bounds from an admissible pair ``(rho, p)``.

    ``lower = (int_A p(x/|x|)^n Q dm/|x|^n)^{1-n}``,
    ``upper = int_A rho(|x|)^n D dm``.
    """
    fld = _resolve(f, r, R, grid, field, level, m, seed)
    g = fld.grid
    res = admissibility_residuals(densities, g)
    if max(res) > tol:
        raise ParameterError(f"densities are not admissible: residuals {res}")
    n = g.n
    p_n = densities.p(g.sphere_nodes) ** n
    inner_q = fld.clean("Q") @ g.radial_log_weights
    lower = float(np.sum(g.sphere_weights * p_n * inner_q)) ** (1 - n)
    rho_n = densities.rho(g.radial_nodes) ** n
    sphere_d = np.ascontiguousarray(fld.clean("D").T) @ g.sphere_weights
    upper = float(np.sum(rho_n * g.radial_nodes ** (n - 1) * sphere_d * _dt_weights(g)))
    return ModulusBounds(r, R, lower, upper, exact_family_modulus(f, r, R), FAMILY_NOTE, res)


# --- cavitation -------------------------------------------------------------

class CavitationVerdict(str, enum.Enum):
    CAVITATION = "Cavitation"
    NO_CAVITATION = "NoCavitation"
    UNDETERMINED = "Undetermined"


RULES = {
    "IQ": "I_Q > 0 (normal dilatation)",
    "IK": "I_K > 0 (outer dilatation)",
    "ID": "I_D = inf (angular dilatation)",
    "IL": "I_L = inf (inner dilatation)",
}


@dataclass(frozen=True)
class IntegralResult:
    verdict: LimitVerdict
    best: float

    def to_dict(self) -> dict:
        d = self.verdict.to_dict()
        d["best"] = self.best
        return d


@dataclass(frozen=True)
class CavitationReport:
    IQ: IntegralResult
    IK: IntegralResult
    ID: IntegralResult
    IL: IntegralResult
    verdict: CavitationVerdict = CavitationVerdict.UNDETERMINED
    fired_rule: str = ""
    contradiction: bool = False
    dimension: int = 3
    modulus_trend: Tuple[Tuple[float, float, float], ...] = ()
    partials: Tuple[Tuple[float, float, float, float, float], ...] = ()
    grid: dict = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()

    def integrals(self):
        return {"IQ": self.IQ, "IK": self.IK, "ID": self.ID, "IL": self.IL}

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "fired_rule": self.fired_rule,
            "contradiction": self.contradiction,
            "dimension": self.dimension,
            "integrals": {k: v.to_dict() for k, v in self.integrals().items()},
            "modulus_trend": [list(t) for t in self.modulus_trend],
            "partials": [list(p) for p in self.partials],
            "grid": dict(self.grid),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class CavitationPartials:
    """Truncated cavitation integrals over ``A(eps, 1)`` for each ``eps``."""

    eps: np.ndarray
    IQ: np.ndarray
    IK: np.ndarray
    ID: np.ndarray
    IL: np.ndarray
    n: int


def cavitation_partials(f: MappingSpec, k0: int = DEFAULT_K0, kmax: int = DEFAULT_KMAX,
                        level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M,
                        seed: int = 0, workers: Optional[int] = None):
    """Partial integrals at ``eps = 2^-k`` for ``k = k0..kmax``.

    One grid on ``A(2^-kmax, 1)`` serves every ``eps``: its cells align with
    the octave boundaries, so each partial integral is a tail sum.
    Returns ``(partials, field)``.
    """
    grid, eps, cut = epsilon_grid(f.dimension, k0, kmax, level, m, seed)
    fld = sample_field(f, grid, workers)
    n = grid.n

    def tail(a):  # tail[..., j] = sum_{i >= j} a[..., i]
        return np.cumsum(a[..., ::-1], axis=-1)[..., ::-1]

    def sphere_outer(name, power=1.0):
        X = fld.clean(name)
        if power != 1.0:
            X = X**power
        inner = tail(X * grid.radial_log_weights)[:, cut]
        with np.errstate(divide="ignore"):
            vals = np.where(inner > 0, np.where(inner > 0, inner, 1.0) ** (1 - n), 0.0)
        return np.ascontiguousarray(vals.T) @ grid.sphere_weights

    def radial_outer(name):
        return tail(_radial_outer(fld, name))[cut]

    partials = CavitationPartials(
        eps=eps,
        IQ=sphere_outer("Q"),
        IK=sphere_outer("K", 1.0 / (n - 1)),
        ID=radial_outer("D"),
        IL=radial_outer("L"),
        n=n,
    )
    return partials, fld


def _best(verdict: LimitVerdict, values) -> float:
    if verdict.kind is LimitKind.CONVERGES:
        return float(verdict.value)
    if verdict.kind is LimitKind.TENDS_TO_ZERO:
        return 0.0
    if verdict.kind is LimitKind.DIVERGES:
        return math.inf
    return float(values[-1])


def cavitation_integrals(f: MappingSpec, k0: int = DEFAULT_K0, kmax: int = DEFAULT_KMAX,
                         level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M,
                         seed: int = 0, config: ClassifierConfig = ClassifierConfig(),
                         workers: Optional[int] = None) -> CavitationReport:
    """Compute and classify ``I_Q, I_K, I_D, I_L``; the overall verdict is left undetermined.

    Also records the bracket ``[lo, hi]`` on ``mo f(A(eps, 1))`` implied by
    the two extremal bounds at every ``eps``.
    """
    parts, fld = cavitation_partials(f, k0, kmax, level, m, seed, workers)
    n = parts.n
    results = {}
    warnings = []
    for name, direction in (("IQ", "outer-value"), ("IK", "outer-value"),
                            ("ID", "inner-integral"), ("IL", "inner-integral")):
        values = getattr(parts, name)
        v = limit_classify(list(zip(parts.eps.tolist(), values.tolist())), direction, config)
        if v.kind is LimitKind.INCONCLUSIVE:
            warnings.append(f"{name}: limit inconclusive ({v.model})")
        results[name] = IntegralResult(v, _best(v, values))
    if fld.irregular_fraction > 0:
        warnings.append(f"{fld.irregular_fraction:.4%} of nodes irregular")
    trend = []
    for e, iq, i_d in zip(parts.eps, parts.IQ, parts.ID):
        hi = modulus_conversions(iq, "family_to_ring", n) if iq > 0 else math.inf
        lo = modulus_conversions(i_d ** (1 - n), "family_to_ring", n) if i_d > 0 else 0.0
        trend.append((float(e), float(lo), float(hi)))
    grid_id = {"sphere_level": level, "radial_m": len(fld.grid.radial_nodes), "k0": k0,
               "kmax": kmax, "seed": seed, "sphere_nodes": len(fld.grid.sphere_weights)}
    table = tuple(tuple(float(v) for v in row)
                  for row in zip(parts.eps, parts.IQ, parts.IK, parts.ID, parts.IL))
    return CavitationReport(dimension=n, modulus_trend=tuple(trend), partials=table, grid=grid_id,
                            warnings=tuple(warnings), **results)


def classify_cavitation(report: CavitationReport,
                        positivity_threshold: float = POSITIVITY_THRESHOLD) -> CavitationReport:
    """Apply the four sufficient conditions to a populated report.

    Cavitation if ``I_Q`` or ``I_K`` converges to a value above
    ``positivity_threshold * omega_{n-1}``; no cavitation if ``I_D`` or ``I_L``
    diverges.  Both firing at once cannot happen for exact values, so it is
    flagged as a contradiction and the verdict is left undetermined.
    """
    floor = positivity_threshold * sphere_area(report.dimension)
    cav = [k for k in ("IQ", "IK")
           if getattr(report, k).verdict.kind is LimitKind.CONVERGES
           and getattr(report, k).verdict.value > floor]
    nocav = [k for k in ("ID", "IL") if getattr(report, k).verdict.kind is LimitKind.DIVERGES]
    warnings = list(report.warnings)
    if cav and nocav:
        rule = "; ".join(RULES[k] for k in cav + nocav)
        warnings.append("contradiction: cavitation and non-cavitation tests both fired")
        return replace(report, verdict=CavitationVerdict.UNDETERMINED, fired_rule=rule,
                       contradiction=True, warnings=tuple(warnings))
    if cav:
        return replace(report, verdict=CavitationVerdict.CAVITATION,
                       fired_rule="; ".join(RULES[k] for k in cav))
    if nocav:
        return replace(report, verdict=CavitationVerdict.NO_CAVITATION,
                       fired_rule="; ".join(RULES[k] for k in nocav))
    return replace(report, verdict=CavitationVerdict.UNDETERMINED, fired_rule="")


# --- radii and the distortion inequalities ---------------------------------

def _sphere_radii(f: MappingSpec, t: float, nodes: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        y = np.asarray(f.rule(t * nodes), dtype=float)
    return np.linalg.norm(y, axis=-1)


def sphere_extrema(f: MappingSpec, t: float, grid: Optional[QuadratureGrid] = None, *,
                   level: int = DEFAULT_SPHERE_LEVEL, seed: int = 0) -> Tuple[float, float]:
    """``(max, min)`` of ``|f|`` over the sampled sphere ``|x| = t``.

    ``t = 1`` is accepted: maps are assumed to extend across the unit sphere.
    """
    if not 0.0 < t <= 1.0:
        raise ParameterError(f"radius must lie in (0, 1], got {t}")
    nodes = grid.sphere_nodes if grid is not None else sphere_nodes(f.dimension, level, seed)[0]
    rad = _sphere_radii(f, t, nodes)
    return float(np.max(rad)), float(np.min(rad))


@dataclass(frozen=True)
class RadiusBracket:
    """Bracket on the inner radius ``R0(r)`` of the image ring ``f(A(r, 1))``."""

    lower_R0: float
    upper_R0: Optional[float]
    M_interval: Tuple[float, float]
    R1: float
    R1_spread: float
    A_n: float
    note: str = ""

    def to_dict(self) -> dict:
        return {"lower_R0": self.lower_R0, "upper_R0": self.upper_R0,
                "M_interval": list(self.M_interval), "R1": self.R1,
                "R1_spread": self.R1_spread, "A_n": self.A_n, "note": self.note}


def radius_bracket(f: MappingSpec, r: float, grid: Optional[QuadratureGrid] = None, *,
                   level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M,
                   seed: int = 0, field: Optional[DilatationField] = None) -> RadiusBracket:
    """``R1 e^{-M} <= R0(r) <= R1 e^{A_n - M}`` with ``M = mo f(A(r, 1))`` bracketed.

    ``M`` is bracketed by converting the two extremal bounds; each side of
    the radius bracket uses the conservative endpoint.  The upper side needs
    ``M > A_n`` and is None otherwise.  ``R1`` is the minimum of ``|f|`` on
    the sampled unit sphere; ``R1_spread`` (max minus min) reports how far
    the image of the unit sphere is from round.
    """
    fld = _resolve(f, r, 1.0, grid, field, level, m, seed)
    n = f.dimension
    lower_fam = lower_bound_sigma(f, r, 1.0, field=fld)
    upper_fam = upper_bound_extremal(f, r, 1.0, field=fld)
    M_lo = modulus_conversions(upper_fam, "family_to_ring", n)
    M_hi = modulus_conversions(lower_fam, "family_to_ring", n) if lower_fam > 0 else math.inf
    rad = _sphere_radii(f, 1.0, fld.grid.sphere_nodes)
    R1 = float(np.min(rad))
    A_n, _ = teichmuller_constant_bound(n)
    lower = R1 * math.exp(-M_hi)
    if M_lo > A_n:
        upper, note = R1 * math.exp(A_n - M_lo), ""
    else:
        upper, note = None, f"upper bound not applicable: M lower estimate {M_lo:.6g} <= A_n = {A_n:.6g}"
    return RadiusBracket(lower, upper, (M_lo, M_hi), R1, float(np.max(rad) - R1), A_n, note)


def _l_integral(fld: DilatationField, shift: float = 0.0) -> float:
    """``(1/omega) int_A (L - shift) / |x|^n dm``."""
    g = fld.grid
    inner = (fld.clean("L") - shift * fld.regular) @ g.radial_log_weights
    return float(np.sum(g.sphere_weights * inner)) / sphere_area(g.n)


def check_bgmv(f: MappingSpec, r: float, R: float, grid: Optional[QuadratureGrid] = None, *,
               level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M, seed: int = 0,
               field: Optional[DilatationField] = None, full_output: bool = False):
    """Residual of ``log(m_f(R)/M_f(r)) - log(R/r) <= (1/omega) int_A (L-1)/|x|^n dm``.

    Returns RHS minus LHS; nonnegative confirms the inequality.
    """
    if not 0.0 < r < R <= 1.0:
        raise ParameterError(f"need 0 < r < R <= 1, got ({r}, {R})")
    fld = _resolve(f, r, R, grid, field, level, m, seed)
    Mr, _ = sphere_extrema(f, r, fld.grid)
    _, mR = sphere_extrema(f, R, fld.grid)
    lhs = math.log(mR / Mr) - math.log(R / r)
    rhs = _l_integral(fld, 1.0)
    res = rhs - lhs
    return (res, {"lhs": lhs, "rhs": rhs}) if full_output else res


def check_fundamental(f: MappingSpec, r: float, R: float, K: Optional[float] = None,
                      grid: Optional[QuadratureGrid] = None, *,
                      level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M, seed: int = 0,
                      field: Optional[DilatationField] = None, full_output: bool = False):
    """Residual of ``mo f(A) <= (1/omega) int_A L/|x|^n dm <= K log(R/r)``.

    ``K`` defaults to the largest sampled ``L`` on the grid.  Returns
    ``K log(R/r)`` minus the integral estimate.
    """
    fld = _resolve(f, r, R, grid, field, level, m, seed)
    if K is None:
        K = float(np.nanmax(fld.L))
    estimate = _l_integral(fld)
    bound = K * math.log(R / r)
    res = bound - estimate
    return (res, {"K": K, "bound": bound, "estimate": estimate}) if full_output else res
