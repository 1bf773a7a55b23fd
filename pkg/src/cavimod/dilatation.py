"""Pointwise dilatations of a Jacobian matrix relative to a radial direction.

For a Jacobian ``J`` with ``det J > 0`` and a unit vector ``u`` (the radial
direction ``x/|x|``):

* outer ``K = |J|^n / det J`` and inner ``L = det J / l^n`` dilatations,
  with ``|J|`` and ``l`` the largest and smallest singular values;
* angular ``D = det J / ell^n`` with ``ell = min_h |Jh| / |h.u|``;
* normal ``Q = (|Ju|^n / det J)^{1/(n-1)}``;
* dual ``T = (calL^n / det J)^{1/(n-1)}`` with ``calL = max_h |Jh| |h.u|``.

``ell`` has the closed form ``1/|J^{-T} u|``: substituting ``g = Jh`` turns the
minimum into the reciprocal of the dual norm of the functional
``g -> (J^{-1} g).u``.  The brute-force oracle in this module checks it.

Every routine accepts a single matrix ``(n, n)`` or a batch ``(..., n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import IrregularPointError, ParameterError
from .mapping import MappingSpec, RadialProfile, jacobian, scaled_jacobian
from .quadrature import quasi_uniform_sphere

DET_FLOOR = 1e-300
COND_CEILING = 1e12


@dataclass(frozen=True)
class DilatationSample:
    K: float
    L: float
    D: float
    Q: float
    T: Optional[float]
    detJ: float
    regular: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("K", "L", "D", "Q", "T", "detJ", "regular")}


@dataclass(frozen=True)
class DirectionalExtremes:
    ell: float
    calL: float


def singular_values(J):
    """Singular values of ``J`` in ascending order."""
    J = np.asarray(J, dtype=float)
    if not np.all(np.isfinite(J)):
        raise ParameterError("matrix has non-finite entries")
    return np.linalg.svd(J, compute_uv=False)[..., ::-1]


def regular_mask(J):
    """True where ``J`` is finite, has ``det J > 1e-300`` and condition number below 1e12."""
    J = np.asarray(J, dtype=float)
    finite = np.all(np.isfinite(J), axis=(-2, -1))
    Jf = np.where(finite[..., None, None], J, np.eye(J.shape[-1]))
    det = np.linalg.det(Jf)
    sv = np.linalg.svd(Jf, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = sv[..., 0] / sv[..., -1]
    return finite & (det > DET_FLOOR) & (cond < COND_CEILING)


def _require_regular(J):
    if not np.all(regular_mask(J)):
        raise IrregularPointError("Jacobian is not regular (det <= 0, non-finite, or ill-conditioned)")


def _unit(u, n):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != n:
        raise ParameterError(f"direction must have {n} components")
    norm = np.linalg.norm(u, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise ParameterError("direction must be a unit vector")
    return u


def classical_dilatations(J):
    """Return ``(K, L)``; raises :class:`IrregularPointError` unless ``det J > 0``."""
    J = np.asarray(J, dtype=float)
    _require_regular(J)
    n = J.shape[-1]
    sv = np.linalg.svd(J, compute_uv=False)
    det = np.linalg.det(J)
    return sv[..., 0] ** n / det, det / sv[..., -1] ** n


def angular_dilatation(J, u):
    """Angular dilatation ``det J * |J^{-T} u|^n``."""
    J = np.asarray(J, dtype=float)
    _require_regular(J)
    n = J.shape[-1]
    u = _unit(u, n)
    w = np.linalg.solve(np.swapaxes(J, -1, -2), u[..., None])[..., 0]
    return np.linalg.det(J) * np.linalg.norm(w, axis=-1) ** n


def normal_dilatation(J, u):
    """Normal dilatation ``(|J u|^n / det J)^{1/(n-1)}``."""
    J = np.asarray(J, dtype=float)
    _require_regular(J)
    n = J.shape[-1]
    u = _unit(u, n)
    Ju = np.linalg.norm(np.einsum("...ij,...j->...i", J, u), axis=-1)
    return (Ju**n / np.linalg.det(J)) ** (1.0 / (n - 1))


def _dual_objective(M, u, h):
    Mh = np.einsum("...ij,...j->...i", M, h)
    a = np.einsum("...i,...i->...", h, Mh)
    b = np.einsum("...i,...i->...", h, u)
    return a * b * b, Mh, a, b


def max_stretch_projection(J, u, restarts: int = 8, tol: float = 1e-15, max_iter: int = 2000):
    """Maximise ``F(h) = |Jh|^2 (h.u)^2`` over unit ``h``; returns ``(calL, converged)``.

    Multi-start ascent: seeds are ``u`` plus the ``restarts`` best points of a
    coarse sphere grid.  Each seed follows the shifted fixed-point map
    ``h <- (grad F(h)/2 + c h) / |...|``.  A step that would lower ``F`` is
    rejected and its shift ``c`` quadrupled; accepted steps relax ``c``.  For
    ``c >= 4 |J|^2`` the map ascends a convex extension of ``F``, so the
    shift stays bounded and ``F`` never drops below its seed value ``|Ju|^2``.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    batch = J.shape[:-2]
    J = J.reshape((-1, n, n))
    u = np.broadcast_to(np.asarray(u, dtype=float), batch + (n,)).reshape((-1, n))
    M = np.swapaxes(J, -1, -2) @ J
    smax2 = np.linalg.norm(J, ord=2, axis=(-2, -1)) ** 2

    coarse = quasi_uniform_sphere(n, 0)
    coarse = coarse[coarse[:, -1] >= 0]  # F is even in h
    F0 = _dual_objective(M[:, None], u[:, None], coarse[None])[0]
    k = min(restarts, coarse.shape[0])
    best = np.argsort(-F0, axis=1)[:, :k]
    h = np.concatenate([u[:, None, :], coarse[best]], axis=1)

    S = h.shape[1]
    h = h.reshape(-1, n)
    Mb = np.repeat(M, S, axis=0)
    ub = np.repeat(u, S, axis=0)
    c = np.repeat(0.25 * smax2, S)
    cap = 16.0 * np.repeat(smax2, S)
    F, Mh, a, b = _dual_objective(Mb, ub, h)
    converged = np.zeros(len(F), dtype=bool)
    idx = np.arange(len(F))
    for _ in range(max_iter):
        if idx.size == 0:
            break
        hi, Mi, ui, ci = h[idx], Mb[idx], ub[idx], c[idx]
        grad = b[idx, None] ** 2 * Mh[idx] + (a[idx] * b[idx])[:, None] * ui + ci[:, None] * hi
        h_new = grad / np.linalg.norm(grad, axis=-1, keepdims=True)
        F_new, Mh_new, a_new, b_new = _dual_objective(Mi, ui, h_new)
        accept = F_new >= F[idx]
        done = accept & (F_new - F[idx] <= tol * F_new)
        c[idx] = np.where(accept, 0.5 * ci, 4.0 * ci)
        # a rejected step under the convexifying shift means h is already a maximiser
        done |= ~accept & (c[idx] > cap[idx])
        acc = idx[accept]
        h[acc], F[acc], Mh[acc] = h_new[accept], F_new[accept], Mh_new[accept]
        a[acc], b[acc] = a_new[accept], b_new[accept]
        converged[idx[done]] = True
        idx = idx[~done]
    F = F.reshape(-1, S)
    converged = converged.reshape(-1, S)
    i = np.argmax(F, axis=1)
    rows = np.arange(F.shape[0])
    calL = np.sqrt(F[rows, i]).reshape(batch)
    ok = converged[rows, i].reshape(batch)
    return calL, ok


def dual_dilatation(J, u, restarts: int = 8, full_output: bool = False):
    """Dual dilatation ``(calL^n / det J)^{1/(n-1)}``.

    ``calL`` comes from :func:`max_stretch_projection`, so the value is a
    lower estimate of the exact maximum.  With ``full_output`` the ascent's
    convergence flag is returned as well.
    """
    J = np.asarray(J, dtype=float)
    _require_regular(J)
    n = J.shape[-1]
    u = _unit(u, n)
    calL, ok = max_stretch_projection(J, u, restarts)
    T = (calL**n / np.linalg.det(J)) ** (1.0 / (n - 1))
    return (T, ok) if full_output else T


def dilatation_fields(J, u, with_T: bool = False, restarts: int = 8):
    """All dilatations for a batch, with irregular points set to NaN.

    Returns a dict with arrays ``K, L, D, Q, detJ, regular`` (and ``T``,
    ``T_converged`` when requested).
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    u = np.broadcast_to(np.asarray(u, dtype=float), J.shape[:-1])
    finite = np.all(np.isfinite(J), axis=(-2, -1))
    Jf = np.where(finite[..., None, None], J, np.eye(n))
    det = np.linalg.det(Jf)
    sv = np.linalg.svd(Jf, compute_uv=False)
    smax, smin = sv[..., 0], sv[..., -1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        regular = finite & (det > DET_FLOOR) & (smax / smin < COND_CEILING)
        Jr = np.where(regular[..., None, None], Jf, np.eye(n))
        detr = np.where(regular, det, 1.0)
        w = np.linalg.solve(np.swapaxes(Jr, -1, -2), u[..., None])[..., 0]
        Ju = np.linalg.norm(np.einsum("...ij,...j->...i", Jr, u), axis=-1)
        out = {
            "K": smax**n / detr,
            "L": detr / smin**n,
            "D": detr * np.linalg.norm(w, axis=-1) ** n,
            "Q": (Ju**n / detr) ** (1.0 / (n - 1)),
        }
        if with_T:
            calL, ok = max_stretch_projection(Jr, u, restarts)
            out["T"] = (calL**n / detr) ** (1.0 / (n - 1))
            out["T_converged"] = ok
    for key in list(out):
        if key != "T_converged":
            out[key] = np.where(regular, out[key], np.nan)
    out["detJ"] = np.where(finite, det, np.nan)
    out["regular"] = regular
    return out


def sample(f: MappingSpec, x, with_T: bool = True) -> DilatationSample:
    """All dilatations of ``f`` at a single point ``x`` (reference point 0)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("sample() takes a single point; use dilatation_fields for batches")
    u = x / np.linalg.norm(x)
    fields = dilatation_fields(scaled_jacobian(f, x), u, with_T=with_T)
    try:
        det = float(np.linalg.det(jacobian(f, x)))
    except ArithmeticError:
        det = float("nan")
    regular = bool(fields["regular"])
    get = lambda k: float(fields[k]) if regular else float("nan")  # noqa: E731
    return DilatationSample(get("K"), get("L"), get("D"), get("Q"),
                            get("T") if with_T else None, det, regular)


def chain_slack(K, L, D, Q, n, T=None, relative: bool = False):
    """Smallest gap in ``1/K <= L^{1/(1-n)} <= D^{1/(1-n)} <= Q <= T <= K^{1/(n-1)} <= L``.

    Negative values mean a violated link.  With ``relative`` each gap is
    divided by the larger of its two ends.  Arrays broadcast.
    """
    e = 1.0 / (1 - n)
    links = [1.0 / K, L**e, D**e, Q]
    if T is not None:
        links.append(T)
    links += [K ** (1.0 / (n - 1)), L]
    gaps = [b - a for a, b in zip(links, links[1:])]
    if relative:
        gaps = [g / np.maximum(np.abs(a), np.abs(b)) for g, a, b in zip(gaps, links, links[1:])]
    return np.minimum.reduce(gaps)


def radial_oracle(profile: RadialProfile, t: float, n: int) -> DilatationSample:
    """Closed-form dilatations of a radial stretching at radius ``t``.

    With ``q = t Phi'(t)/Phi(t)``: ``D = q^{1-n}``, ``Q = q``,
    ``K = max(q^{n-1}, 1/q)``, ``L = max(q^{1-n}, q)``, and
    ``T = q`` for ``q >= 1/sqrt 2``, otherwise
    ``T = (2 sqrt(1-q^2))^{n/(1-n)} q^{1/(1-n)}``.
    """
    if not 0.0 < t < 1.0:
        raise ParameterError(f"radius must lie in (0, 1), got {t}")
    if float(profile.dphi(np.asarray(t))) <= 0.0 and profile.log_slope is None:
        raise IrregularPointError("Phi'(t) <= 0")
    q = float(profile.slope(np.asarray(t)))
    if not q > 0.0:
        raise IrregularPointError(f"t Phi'/Phi = {q} is not positive")
    if q >= 2.0**-0.5:
        T = q
    else:
        T = (2.0 * np.sqrt(1.0 - q * q)) ** (n / (1.0 - n)) * q ** (1.0 / (1.0 - n))
    with np.errstate(over="ignore", under="ignore"):
        det = float(profile.dphi(np.asarray(t)) * (profile.phi(np.asarray(t)) / t) ** (n - 1))
    return DilatationSample(
        K=max(q ** (n - 1), 1.0 / q),
        L=max(q ** (1 - n), q),
        D=q ** (1 - n),
        Q=q,
        T=float(T),
        detJ=det,
        regular=True,
    )


def brute_force_directional(J, u, grid_level: int = 3) -> DirectionalExtremes:
    """Grid search for ``ell`` and ``calL`` over a quasi-uniform sphere grid.

    Grid points orthogonal to ``u`` are skipped for ``ell``.  Both extremes are
    even in ``h``, so the grid is searched as is without symmetrisation.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    u = _unit(u, n)
    if not np.linalg.det(J) > 0:
        raise IrregularPointError("det J must be positive")
    H = quasi_uniform_sphere(n, grid_level)
    ell, calL = np.inf, 0.0
    for start in range(0, H.shape[0], 1 << 18):
        h = H[start:start + (1 << 18)]
        Jh = np.linalg.norm(h @ J.T, axis=1)
        hu = np.abs(h @ u)
        keep = hu > 0
        ell = min(ell, float(np.min(Jh[keep] / hu[keep])))
        calL = max(calL, float(np.max(Jh * hu)))
    return DirectionalExtremes(ell=ell, calL=calL)
