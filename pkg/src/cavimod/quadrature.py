"""Sphere and radial quadrature, annulus integration, and eps -> 0 limit verdicts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import IntegrationError, ParameterError

DEFAULT_SPHERE_LEVEL = 3
DEFAULT_RADIAL_M = 2048
DEFAULT_K0 = 3
DEFAULT_KMAX = 16
MAX_IRREGULAR_FRACTION = 1e-3


def sphere_area(n: int) -> float:
    """Surface area ``omega_{n-1} = 2 pi^{n/2} / Gamma(n/2)`` of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def sphere_nodes(n: int, level: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights on the unit sphere S^{n-1}.

    * ``n = 2``: ``8 * 2**level`` equispaced points on the circle, offset by
      half a step; exact for trigonometric polynomials of degree below the
      node count.
    * ``n = 3``: Gauss-Legendre in ``cos(theta)`` (``4 * 2**level`` points)
      times a uniform azimuth rule (``8 * 2**level`` points).  Level 3 gives
      2048 nodes.
    * ``n >= 4``: ``1024 * 2**level`` Monte Carlo directions from normalised
      Gaussian samples drawn in antipodal pairs with ``seed``; equal weights.

    The weights always sum to ``omega_{n-1}``.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if level < 1:
        raise ParameterError(f"level must be >= 1, got {level}")
    area = sphere_area(n)
    if n == 2:
        N = 8 * 2**level
        phi = 2.0 * math.pi * (np.arange(N) + 0.5) / N
        nodes = np.column_stack([np.cos(phi), np.sin(phi)])
        return nodes, np.full(N, area / N)
    if n == 3:
        n_theta, n_phi = 4 * 2**level, 8 * 2**level
        z, wz = np.polynomial.legendre.leggauss(n_theta)
        phi = 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
        Z, P = np.meshgrid(z, phi, indexing="ij")
        S = np.sqrt(1.0 - Z**2)
        nodes = np.stack([S * np.cos(P), S * np.sin(P), Z], axis=-1).reshape(-1, 3)
        weights = np.repeat(wz * (2.0 * math.pi / n_phi), n_phi)
        return nodes, weights
    half = 512 * 2**level
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((half, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    nodes = np.concatenate([g, -g])
    return nodes, np.full(2 * half, area / (2 * half))


def quasi_uniform_sphere(n: int, level: int, seed: int = 0) -> np.ndarray:
    """Unweighted quasi-uniform point set on S^{n-1} for brute-force searches.

    Fibonacci lattice for ``n = 3`` (``500 * 4**level`` points), equispaced
    circle for ``n = 2`` (``64 * 4**level``), seeded Gaussian directions
    otherwise.
    """
    if n == 2:
        N = 64 * 4**level
        phi = 2.0 * math.pi * np.arange(N) / N
        return np.column_stack([np.cos(phi), np.sin(phi)])
    if n == 3:
        N = 500 * 4**level
        i = np.arange(N) + 0.5
        z = 1.0 - 2.0 * i / N
        phi = math.pi * (1.0 + math.sqrt(5.0)) * i
        s = np.sqrt(1.0 - z**2)
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((2000 * 4**level, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def radial_nodes(r: float, R: float, m: int):
    """Log-uniform midpoint rule on ``(r, R)``.

    Returns ``(nodes, weights_linear, weights_log)``.  The interval is split
    into ``m`` cells of equal width ``h`` in ``s = log t``; each node is the
    geometric midpoint of its cell.  ``weights_log`` is ``h`` (for integrals
    against ``dt/t``) and ``weights_linear`` is the exact cell length, so both
    rules integrate constants exactly.
    """
    if not (0.0 < r < R <= 1.0) or not math.isfinite(r):
        raise ParameterError(f"radial interval must satisfy 0 < r < R <= 1, got ({r}, {R})")
    if m < 8:
        raise ParameterError(f"need at least 8 radial nodes, got m={m}")
    lo, hi = math.log(r), math.log(R)
    h = (hi - lo) / m
    edges = np.exp(lo + h * np.arange(m + 1))
    edges[0], edges[-1] = r, R
    nodes = np.exp(lo + h * (np.arange(m) + 0.5))
    return nodes, np.diff(edges), np.full(m, h)


@dataclass(frozen=True)
class QuadratureGrid:
    """Product grid on the annulus ``A(r, R)`` in R^n."""

    n: int
    sphere_nodes: np.ndarray
    sphere_weights: np.ndarray
    radial_nodes: np.ndarray
    radial_weights: np.ndarray
    radial_log_weights: np.ndarray
    r: float
    R: float
    level: int
    seed: int = 0

    @property
    def size(self) -> int:
        return len(self.sphere_weights) * len(self.radial_weights)

    def identity(self) -> dict:
        return {"n": self.n, "sphere_level": self.level, "radial_m": len(self.radial_nodes),
                "r": self.r, "R": self.R, "seed": self.seed}

    def points(self) -> np.ndarray:
        """All nodes ``t u`` as an array of shape ``(n_sphere, m, n)``."""
        return self.sphere_nodes[:, None, :] * self.radial_nodes[None, :, None]


def make_grid(n: int, r: float, R: float, level: int = DEFAULT_SPHERE_LEVEL,
              m: int = DEFAULT_RADIAL_M, seed: int = 0) -> QuadratureGrid:
    nodes, weights = sphere_nodes(n, level, seed)
    t, w_lin, w_log = radial_nodes(r, R, m)
    return QuadratureGrid(n, nodes, weights, t, w_lin, w_log, float(r), float(R), level, seed)


def epsilon_grid(n: int, k0: int = DEFAULT_K0, kmax: int = DEFAULT_KMAX,
                 level: int = DEFAULT_SPHERE_LEVEL, m: int = DEFAULT_RADIAL_M, seed: int = 0):
    """Grid on ``A(2^-kmax, 1)`` whose cells align with every ``eps_k = 2^-k``.

    ``m`` is rounded up to a multiple of ``kmax`` so that each octave holds
    the same number of cells.  Returns ``(grid, eps, cut)`` where ``cut[j]``
    is the index of the first radial node above ``eps[j]``.
    """
    if not (1 <= k0 < kmax):
        raise ParameterError(f"need 1 <= k0 < kmax, got k0={k0}, kmax={kmax}")
    per_octave = -(-m // kmax)
    grid = make_grid(n, 2.0**-kmax, 1.0, level, per_octave * kmax, seed)
    ks = np.arange(k0, kmax + 1)
    cut = (kmax - ks) * per_octave
    return grid, 2.0 ** (-ks.astype(float)), cut


def integrate_annulus(g: Callable[[np.ndarray], np.ndarray], grid: QuadratureGrid,
                      max_irregular: float = MAX_IRREGULAR_FRACTION) -> float:
    """Integrate ``g`` over ``A(r, R)`` with respect to Lebesgue measure.

    ``g`` is vectorised over points of shape ``(..., n)``.  Non-finite values
    mark irregular nodes, which are dropped; if their fraction exceeds
    ``max_irregular`` an :class:`IntegrationError` is raised.
    """
    vals = np.asarray(g(grid.points()), dtype=float)
    vals = np.broadcast_to(vals, (len(grid.sphere_weights), len(grid.radial_nodes)))
    bad = ~np.isfinite(vals)
    frac = float(bad.mean())
    if frac > max_irregular:
        raise IntegrationError(f"{frac:.2%} of quadrature nodes are irregular", frac)
    vals = np.where(bad, 0.0, vals)
    radial = grid.radial_nodes ** (grid.n - 1) * grid.radial_weights
    contrib = (grid.sphere_weights[:, None] * vals) * radial[None, :]
    return float(np.sum(np.ascontiguousarray(contrib).ravel()))


# --- limit classification ---------------------------------------------------

class LimitKind(str, enum.Enum):
    CONVERGES = "ConvergesTo"
    DIVERGES = "DivergesToInfinity"
    TENDS_TO_ZERO = "TendsToZero"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class LimitVerdict:
    kind: LimitKind
    value: Optional[float] = None
    evidence: Tuple[Tuple[float, float], ...] = ()
    fit_exponent: Optional[float] = None
    model: str = ""

    def __post_init__(self):
        if self.kind is LimitKind.CONVERGES:
            if self.value is None or not math.isfinite(self.value):
                raise ValueError("ConvergesTo verdict needs a finite value")
        elif self.kind in (LimitKind.DIVERGES, LimitKind.TENDS_TO_ZERO) and self.value is not None:
            raise ValueError(f"{self.kind.value} verdict carries no value")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "fit_exponent": self.fit_exponent,
            "model": self.model,
            "evidence": [[e, v] for e, v in self.evidence],
        }


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds used by :func:`limit_classify`.

    contraction : geometric contraction factor for differences (and, for the
        zero verdict, for the values themselves).
    window : number of trailing points the models are fitted on.
    growth_ratio : increasing sequences whose difference ratios stay at or
        above this are called divergent.
    decay_exponent : a positive decreasing sequence fitted by ``c L^gamma``,
        ``L = log(1/eps)``, tends to zero when ``gamma <= decay_exponent``.
    log_fit_tol : RMS residual (in log space) accepted for that fit.
    """

    contraction: float = 0.75
    window: int = 6
    growth_ratio: float = 0.9
    decay_exponent: float = -0.5
    log_fit_tol: float = 0.05
    flat_tol: float = 1e-12


def _fit_offset_power(eps, v):
    """Least-squares fit of ``v = a + c eps^beta``; returns (a, c, beta, rss)."""
    def solve(beta):
        A = np.column_stack([np.ones_like(eps), eps**beta])
        coef, *_ = np.linalg.lstsq(A, v, rcond=None)
        res = v - A @ coef
        return coef, float(res @ res)

    betas = np.linspace(0.05, 6.0, 120)
    rss = [solve(b)[1] for b in betas]
    i = int(np.argmin(rss))
    lo, hi = betas[max(i - 1, 0)], betas[min(i + 1, len(betas) - 1)]
    if hi > lo:
        opt = minimize_scalar(lambda b: solve(b)[1], bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        beta = float(opt.x)
    else:
        beta = float(betas[i])
    (a, c), r = solve(beta)
    return float(a), float(c), beta, r


def _fit_loglinear(x, y):
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(coef[1]), float(math.sqrt(res @ res / len(y)))


def limit_classify(partials: Sequence[Tuple[float, float]], direction: str = "outer-value",
                   config: ClassifierConfig = ClassifierConfig()) -> LimitVerdict:
    """Classify the limit of ``value(eps)`` as ``eps -> 0``.

    ``partials`` are ``(eps, value)`` pairs with ``eps`` on a decreasing
    geometric sequence.  The last ``config.window`` points are compared with
    three models: ``a + c eps^beta`` (convergent), ``c log(1/eps)^gamma``
    (logarithmic growth or decay) and ``c eps^-beta`` (power growth or decay).

    ``direction='inner-integral'`` declares the values to be partial integrals
    of a nonnegative function, which cannot tend to zero; such a fit is then
    reported as inconclusive.
    """
    if direction not in ("outer-value", "inner-integral"):
        raise ParameterError(f"unknown direction {direction!r}")
    pts = sorted(((float(e), float(v)) for e, v in partials), key=lambda p: -p[0])
    w = config.window
    if len(pts) < w:
        raise ParameterError(f"need at least {w} points, got {len(pts)}")
    evidence = tuple(pts)
    eps = np.array([p[0] for p in pts[-w:]])
    v = np.array([p[1] for p in pts[-w:]])

    def verdict(kind, value=None, exponent=None, model=""):
        if kind is LimitKind.TENDS_TO_ZERO and direction == "inner-integral":
            kind, value = LimitKind.INCONCLUSIVE, None
        return LimitVerdict(kind, value, evidence, exponent, model)

    if np.any(np.isposinf(v)):
        return verdict(LimitKind.DIVERGES, model="overflow")
    if not np.all(np.isfinite(v)):
        return verdict(LimitKind.INCONCLUSIVE, model="non-finite")
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return verdict(LimitKind.TENDS_TO_ZERO, model="zero")
    d = np.diff(v)
    if np.max(np.abs(d)) <= config.flat_tol * scale:
        return verdict(LimitKind.CONVERGES, float(v[-1]), 0.0, "constant")

    L = np.log(1.0 / eps)
    same_sign_d = np.all(d > 0) or np.all(d < 0)
    q = d[1:] / d[:-1] if same_sign_d else None
    positive = bool(np.all(v > 0))

    if q is not None and np.all(q <= config.contraction):
        ratios = v[1:] / v[:-1]
        if positive and np.all(ratios <= config.contraction):
            _, slope, _ = _fit_loglinear(L, np.log(v))
            return verdict(LimitKind.TENDS_TO_ZERO, exponent=-slope, model="c*eps^beta")
        a, _, beta, _ = _fit_offset_power(eps, v)
        return verdict(LimitKind.CONVERGES, a, beta, "a+c*eps^beta")

    if not positive or q is None:
        return verdict(LimitKind.INCONCLUSIVE, model="non-monotone")

    logv = np.log(v)
    _, gamma, res_log = _fit_loglinear(np.log(L), logv)
    _, slope, res_pow = _fit_loglinear(L, logv)
    if np.all(d > 0) and np.all(q >= config.growth_ratio):
        if res_log <= res_pow:
            return verdict(LimitKind.DIVERGES, exponent=gamma, model="c*log(1/eps)^gamma")
        return verdict(LimitKind.DIVERGES, exponent=slope, model="c*eps^-beta")
    if np.all(d < 0) and res_log <= config.log_fit_tol and gamma <= config.decay_exponent:
        return verdict(LimitKind.TENDS_TO_ZERO, exponent=gamma, model="c*log(1/eps)^gamma")
    return verdict(LimitKind.INCONCLUSIVE, model="no model dominates")
