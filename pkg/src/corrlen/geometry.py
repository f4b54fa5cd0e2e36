"""Norms on R^d, their Wulff shapes, dual vectors, surcharge functions and
local profiles of the unit sphere.

A norm is described by an immutable :class:`NormSpec`.  Every evaluator
accepts arrays of shape ``(..., d)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull

from .errors import DualVectorError, ProfileBracketError, ValidationError

FAMILIES = ("ell_p", "weighted_ell_p", "polyhedral", "composite_arc_facet")

SURCHARGE_CLAMP = 1e-12
FACET_THRESHOLD = 1e-12
FIT_FLOOR = 1e-10
ISOTROPY_TOL = 0.05


@dataclass(frozen=True)
class NormSpec:
    """A norm on R^d.

    ``scale`` multiplies the base norm, so ``ell_p`` with ``scale=c`` in
    ``d=1`` is ``|x| = c|x|``.  ``composite_arc_facet`` is the planar norm
    whose unit ball is the square ``[-1/2, 1/2]^2`` thickened by a disc of
    radius 1/2: four quarter circles joined by four flat facets.
    """

    family: str
    d: int
    p: float = 2.0
    weights: tuple | None = None
    vertices: tuple | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown norm family {self.family!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError("dimension must be an integer >= 1")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError("scale must be positive and finite")
        if self.family in ("ell_p", "weighted_ell_p"):
            p = float(self.p)
            if not (p >= 1):
                raise ValidationError("ell_p exponent must satisfy p >= 1")
            object.__setattr__(self, "p", p)
        if self.family == "weighted_ell_p":
            if self.weights is None or len(self.weights) != self.d:
                raise ValidationError("weighted_ell_p needs one weight per coordinate")
            w = tuple(float(x) for x in self.weights)
            if min(w) <= 0:
                raise ValidationError("weights must be positive")
            object.__setattr__(self, "weights", w)
        if self.family == "polyhedral":
            if self.vertices is None:
                raise ValidationError("polyhedral norm needs a vertex set")
            V = np.asarray(self.vertices, dtype=float)
            if V.ndim != 2 or V.shape[1] != self.d:
                raise ValidationError("vertices must be an (m, d) array")
            for v in V:
                if not np.any(np.all(np.isclose(V, -v), axis=1)):
                    raise ValidationError("vertex set must be symmetric under x -> -x")
            object.__setattr__(self, "vertices", tuple(tuple(map(float, v)) for v in V))
        if self.family == "composite_arc_facet" and self.d != 2:
            raise ValidationError("composite_arc_facet is defined in d = 2 only")

    # -- config round trip -------------------------------------------------
    def to_config(self) -> dict:
        cfg = {"family": self.family, "d": self.d}
        if self.family in ("ell_p", "weighted_ell_p"):
            cfg["p"] = "inf" if math.isinf(self.p) else self.p
        if self.weights is not None:
            cfg["weights"] = list(self.weights)
        if self.vertices is not None:
            cfg["vertices"] = [list(v) for v in self.vertices]
        if self.scale != 1.0:
            cfg["scale"] = self.scale
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "NormSpec":
        cfg = dict(cfg)
        unknown = set(cfg) - {"family", "d", "p", "weights", "vertices", "scale"}
        if unknown:
            raise ValidationError(f"unknown norm keys: {sorted(unknown)}")
        if "family" not in cfg or "d" not in cfg:
            raise ValidationError("norm config needs 'family' and 'd'")
        p = cfg.get("p", 2.0)
        p = math.inf if isinstance(p, str) and p.lower() in ("inf", "infinity") else float(p)
        weights = tuple(cfg["weights"]) if cfg.get("weights") is not None else None
        vertices = (tuple(tuple(v) for v in cfg["vertices"])
                    if cfg.get("vertices") is not None else None)
        return cls(cfg["family"], int(cfg["d"]), p, weights, vertices, float(cfg.get("scale", 1.0)))

    def canonical_json(self) -> str:
        return json.dumps(self.to_config(), sort_keys=True)

    # -- cached geometry -----------------------------------------------------
    @cached_property
    def wulff_vertices(self) -> np.ndarray:
        """Facet normals ``a_j`` of the unit ball, so ``|x| = max_j a_j . x``."""
        if self.family != "polyhedral":
            raise ValidationError("wulff_vertices only exists for polyhedral norms")
        V = np.asarray(self.vertices)
        if self.d == 1:
            r = np.max(np.abs(V[:, 0]))
            return np.array([[1.0 / r], [-1.0 / r]]) * self.scale
        hull = ConvexHull(V)
        eq = hull.equations
        if np.any(eq[:, -1] >= 0):
            raise ValidationError("origin must be interior to the polytope")
        A = eq[:, :-1] / (-eq[:, -1:])
        A = np.unique(np.round(A, 12), axis=0)
        return A * self.scale

    @cached_property
    def linf_sphere_extremes(self) -> tuple[float, float]:
        """(lower bound on min, exact max) of ``|x|`` over ``||x||_inf = 1``."""
        cube = np.array(np.meshgrid(*([[-1.0, 1.0]] * self.d), indexing="ij")).reshape(self.d, -1).T
        M = float(np.max(evaluate_norm(self, cube)))
        if self.d == 1:
            return float(evaluate_norm(self, np.array([1.0]))), M
        n = 2001 if self.d == 2 else max(11, int(round(4e5 ** (1.0 / (self.d - 1)))))
        grid = np.linspace(-1.0, 1.0, n)
        h = grid[1] - grid[0]
        lo = math.inf
        free = np.array(np.meshgrid(*([grid] * (self.d - 1)), indexing="ij")).reshape(self.d - 1, -1).T
        for i in range(self.d):
            for sgn in (-1.0, 1.0):
                pts = np.insert(free, i, sgn, axis=1)
                lo = min(lo, float(np.min(evaluate_norm(self, pts))))
        # |x| is M-Lipschitz in the sup distance, so this is a certified lower bound.
        return max(lo - M * h * (self.d - 1) / 2.0, 1e-300), M

    @cached_property
    def euclid_radius(self) -> float:
        """Largest Euclidean norm of a point of the unit ball (sampled, padded)."""
        S = unit_sphere_samples(self.d, 4096)
        return float(1.0 / np.min(evaluate_norm(self, S))) * 1.01

    def __call__(self, x):
        return evaluate_norm(self, x)


def ell_p(d: int, p: float = 2.0, scale: float = 1.0) -> NormSpec:
    return NormSpec("ell_p", d, p, scale=scale)


def composite_arc_facet(scale: float = 1.0) -> NormSpec:
    return NormSpec("composite_arc_facet", 2, scale=scale)


def unit_sphere_samples(d: int, n: int) -> np.ndarray:
    """Deterministic, roughly uniform points on the Euclidean unit sphere."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if d == 3:
        k = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * k / n)
        th = np.pi * (1 + 5 ** 0.5) * k
        return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
    rng = np.random.default_rng(12345)
    U = rng.normal(size=(n, d))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _as_points(spec: NormSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 and spec.d == 1:
        x = x.reshape(1)
    if x.shape[-1] != spec.d:
        raise ValidationError(f"expected trailing dimension {spec.d}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite input to norm")
    return x


def _composite_unit(a, b):
    """Composite norm for a, b >= 0 (unscaled)."""
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    arc = 2.0 * (a + b - np.sqrt(2.0 * a * b))
    return np.where(lo <= 0.5 * hi, hi, arc)


def evaluate_norm(spec: NormSpec, x) -> np.ndarray | float:
    """Evaluate ``|x|``; closed form for every family."""
    x = _as_points(spec, x)
    ax = np.abs(x)
    fam = spec.family
    if fam in ("ell_p", "weighted_ell_p"):
        p = spec.p
        if fam == "weighted_ell_p":
            w = np.asarray(spec.weights)
            ax = ax * (w if math.isinf(p) else w ** (1.0 / p))
        if math.isinf(p):
            val = np.max(ax, axis=-1)
        elif p == 1.0:
            val = np.sum(ax, axis=-1)
        else:
            m = np.max(ax, axis=-1)
            safe = np.where(m > 0, m, 1.0)
            val = m * np.sum((ax / safe[..., None]) ** p, axis=-1) ** (1.0 / p)
    elif fam == "polyhedral":
        return np.max(x @ spec.wulff_vertices.T, axis=-1)
    else:
        val = _composite_unit(ax[..., 0], ax[..., 1])
    val = spec.scale * val
    return float(val) if np.ndim(val) == 0 else val


def dual_norm(spec: NormSpec, t) -> np.ndarray | float:
    """Support function of the unit ball, ``sup_{|x| <= 1} t . x``.

    ``t`` lies in the Wulff shape iff ``dual_norm(t) <= 1``.
    """
    t = _as_points(spec, t)
    at = np.abs(t)
    fam = spec.family
    if fam in ("ell_p", "weighted_ell_p"):
        p = spec.p
        if fam == "weighted_ell_p":
            w = np.asarray(spec.weights)
            at = at / (w if math.isinf(p) else w ** (1.0 / p))
        if p == 1.0:
            val = np.max(at, axis=-1)
        elif math.isinf(p):
            val = np.sum(at, axis=-1)
        else:
            q = p / (p - 1.0)
            m = np.max(at, axis=-1)
            safe = np.where(m > 0, m, 1.0)
            val = m * np.sum((at / safe[..., None]) ** q, axis=-1) ** (1.0 / q)
    elif fam == "polyhedral":
        V = np.asarray(spec.vertices)
        val = np.max(t @ V.T, axis=-1)
    else:
        val = 0.5 * (at[..., 0] + at[..., 1]) + 0.5 * np.hypot(at[..., 0], at[..., 1])
    val = val / spec.scale
    return float(val) if np.ndim(val) == 0 else val


@dataclass(eq=False)
class DualVector:
    """A vector ``t`` on the boundary of the Wulff shape with ``t . s = |s|``."""

    t: np.ndarray
    s: np.ndarray
    admissible: bool = True
    unique: bool = True
    residual: float = 0.0


def _unit(s, d) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(d)
    n = np.linalg.norm(s)
    if not np.isfinite(n) or n == 0:
        raise ValidationError("direction must be a finite non-zero vector")
    return s / n


def _composite_gradient(s: np.ndarray) -> np.ndarray:
    a, b = abs(s[0]), abs(s[1])
    if b <= 0.5 * a:
        g = np.array([1.0, 0.0])
    elif a <= 0.5 * b:
        g = np.array([0.0, 1.0])
    else:
        g = 2.0 * np.array([1.0 - math.sqrt(b / (2.0 * a)), 1.0 - math.sqrt(a / (2.0 * b))])
    return g * np.where(s < 0, -1.0, 1.0)


def dual_vector(spec: NormSpec, s) -> DualVector:
    """Dual vector of direction ``s`` (normalized to Euclidean length 1).

    Where several duals exist the centroid of the exposed face of the Wulff
    shape is returned, which is a non-extremal element of the normal cone.
    """
    d = spec.d
    s = _unit(s, d)
    fam, c = spec.family, spec.scale
    zero_tol = 1e-12
    unique = True
    if fam in ("ell_p", "weighted_ell_p"):
        p = spec.p
        w = np.asarray(spec.weights) if fam == "weighted_ell_p" else np.ones(d)
        if p == 1.0:
            nz = np.abs(s) > zero_tol
            t = c * w * np.sign(s) * nz
            unique = bool(np.all(nz))
        elif math.isinf(p):
            ws = w * np.abs(s)
            active = ws >= ws.max() * (1 - 1e-12)
            t = np.zeros(d)
            idx = np.flatnonzero(active)
            t[idx] = c * w[idx] * np.sign(s[idx]) / len(idx)
            unique = len(idx) == 1
        else:
            ws = w ** (1.0 / p) * np.abs(s)
            m = ws.max()
            r = ws / m
            t = c * w ** (1.0 / p) * np.sign(s) * r ** (p - 1) / np.sum(r ** p) ** ((p - 1) / p)
    elif fam == "polyhedral":
        A = spec.wulff_vertices
        vals = A @ s
        active = vals >= vals.max() - 1e-12 * max(1.0, abs(vals.max()))
        t = A[active].mean(axis=0)
        unique = int(active.sum()) == 1
    else:
        t = c * _composite_gradient(s)
    res = abs(float(t @ s) - evaluate_norm(spec, s))
    if res > 1e-9:
        raise DualVectorError(f"dual vector residual {res:.3e}", residual=res)
    return DualVector(t=t, s=s, admissible=True, unique=unique, residual=res)


def _richardson_gradient(spec, x, h):
    d = spec.d
    g = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0

        def cd(hh):
            return (evaluate_norm(spec, x + hh * e) - evaluate_norm(spec, x - hh * e)) / (2 * hh)

        g[i] = (4 * cd(h / 2) - cd(h)) / 3
    return g


def _tangent_basis(n: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the hyperplane orthogonal to ``n``."""
    d = len(n)
    if d == 1:
        return np.zeros((0, 1))
    _, _, vt = np.linalg.svd(n.reshape(1, -1))
    return vt[1:]


def numeric_dual_vector(spec: NormSpec, s, h: float = 1e-3, kink_tol: float = 1e-3) -> DualVector:
    """Dual vector from finite differences of the norm, for any family.

    Used as an independent check of :func:`dual_vector`.  At kinks the
    one-sided gradients around ``s`` are collected and their centroid is
    returned.
    """
    d = spec.d
    s = _unit(s, d)
    hs = 1e-6
    kinked = False
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        f0 = evaluate_norm(spec, s)
        fwd = (evaluate_norm(spec, s + hs * e) - f0) / hs
        bwd = (f0 - evaluate_norm(spec, s - hs * e)) / hs
        if abs(fwd - bwd) > kink_tol:
            kinked = True
            break
    if not kinked:
        t = _richardson_gradient(spec, s, h)
        unique = True
    else:
        basis = _tangent_basis(s)
        dirs = [b * sg for b in basis for sg in (1.0, -1.0)]
        if d >= 3:
            for i in range(len(basis)):
                for j in range(i + 1, len(basis)):
                    for si in (1.0, -1.0):
                        for sj in (1.0, -1.0):
                            u = si * basis[i] + sj * basis[j]
                            dirs.append(u / np.linalg.norm(u))
        delta = 1e-5
        grads = [_richardson_gradient(spec, s + delta * u, delta / 50) for u in dirs]
        G = np.unique(np.round(np.array(grads), 6), axis=0)
        t = G.mean(axis=0)
        unique = len(G) == 1
    res = abs(float(t @ s) - evaluate_norm(spec, s))
    if res > 1e-6 or dual_norm(spec, t) > 1 + 1e-6:
        raise DualVectorError(f"numeric dual failed, residual {res:.3e}", residual=res)
    return DualVector(t=t, s=s, admissible=True, unique=unique, residual=res)


def wulff_violation(spec: NormSpec, t, n: int = 4096) -> float:
    """``max(t . x - |x|)`` over sampled unit directions (<= 0 inside the Wulff shape)."""
    t = t.t if isinstance(t, DualVector) else np.asarray(t, dtype=float)
    X = unit_sphere_samples(spec.d, n)
    return float(np.max(X @ t - evaluate_norm(spec, X)))


def surcharge(spec: NormSpec, t, x, return_clamped: bool = False):
    """``|x| - x . t``, with round-off below ``1e-12`` clamped to zero."""
    t = t.t if isinstance(t, DualVector) else np.asarray(t, dtype=float)
    x = _as_points(spec, x)
    val = np.asarray(evaluate_norm(spec, x) - x @ t, dtype=float)
    scale = np.maximum(1.0, np.asarray(evaluate_norm(spec, x)))
    if np.any(val < -SURCHARGE_CLAMP * scale):
        raise ValidationError("t is not in the Wulff shape: negative surcharge")
    clamped = val < 0
    val = np.where(clamped, 0.0, val)
    out = float(val) if val.ndim == 0 else val
    if return_clamped:
        return out, (bool(clamped) if clamped.ndim == 0 else clamped)
    return out


# -- local parametrization of the unit sphere -----------------------------

def _profile_point(spec, s0, that, v, tau, fmax):
    base = s0 + tau * v
    phi0 = evaluate_norm(spec, base) - 1.0
    if phi0 <= 0.0:
        return 0.0

    def phi(f):
        return evaluate_norm(spec, base - f * that) - 1.0

    res = minimize_scalar(phi, bounds=(0.0, fmax), method="bounded",
                          options={"xatol": 1e-12 * fmax})
    if res.fun >= -1e-14:
        raise ProfileBracketError(f"no boundary crossing at tau={tau:g}", tau=tau)
    lo, hi = 0.0, float(res.x)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if phi(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _frame(spec, s, t):
    s = _unit(s, spec.d)
    t = t.t if isinstance(t, DualVector) else np.asarray(t, dtype=float)
    s0 = s / evaluate_norm(spec, s)
    that = t / np.linalg.norm(t)
    return s0, that


def boundary_profile(spec: NormSpec, s, t, v, tau_grid) -> np.ndarray:
    """Solve ``|s0 + tau v - f that| = 1`` for the smallest ``f >= 0``.

    ``s0 = s/|s|`` and ``that = t/||t||``; ``v`` must be a unit vector
    orthogonal to ``that``.  Raises :class:`ProfileBracketError` when some
    ``tau`` is outside the region where the parametrization exists.
    """
    s0, that = _frame(spec, s, t)
    v = np.asarray(v, dtype=float)
    if abs(v @ that) > 1e-9 or abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ValidationError("v must be a unit vector orthogonal to t")
    fmax = 2.0 * (np.linalg.norm(s0) + 2 * spec.euclid_radius)
    return np.array([_profile_point(spec, s0, that, v, float(tau), fmax) for tau in tau_grid])


def neighborhood_radius(spec: NormSpec, s, t, v, tau0: float = 1e-3) -> float:
    """Expand ``tau`` until the profile bisection fails, then halve.

    The failure point is located by bisection between the last success
    and the first failure before halving.
    """
    s0, that = _frame(spec, s, t)
    v = np.asarray(v, dtype=float)
    fmax = 2.0 * (np.linalg.norm(s0) + 2 * spec.euclid_radius)
    cap = 4.0 * spec.euclid_radius

    def ok(tau):
        try:
            _profile_point(spec, s0, that, v, tau, fmax)
            return True
        except ProfileBracketError:
            return False

    if not ok(tau0):
        raise ProfileBracketError("profile undefined even at the smallest tau", tau=tau0)
    good, tau = tau0, 2 * tau0
    while tau <= cap and ok(tau):
        good, tau = tau, 2 * tau
    if tau > cap:
        return cap / 2
    bad = tau
    for _ in range(30):
        mid = 0.5 * (good + bad)
        if ok(mid):
            good = mid
        else:
            bad = mid
    return 0.5 * good


@dataclass(eq=False)
class SideProfile:
    """Profile along one tangent direction; ``kappa is None`` on a facet."""

    v: np.ndarray
    eps: float
    taus: np.ndarray
    f: np.ndarray
    kappa: float | None
    prefactor: float | None
    convex: bool
    max_log_residual: float = 0.0


@dataclass(eq=False)
class IsotropyProfile:
    s: np.ndarray
    t: np.ndarray
    kappas: list
    kappa: float | None
    c_minus: float | None
    c_plus: float | None
    g_form: str  # "power", "zero" or "nonpower"
    quasi_isotropic: bool
    sides: list = field(default_factory=list)
    diagnostic: str = ""

    def g_inverse(self, y):
        if self.g_form == "zero":
            return np.ones_like(np.asarray(y, dtype=float))
        if self.g_form == "power":
            return np.asarray(y, dtype=float) ** (1.0 / self.kappa)
        raise ValidationError("g is not a fitted power law")

    def to_dict(self) -> dict:
        return {
            "s": self.s.tolist(), "t": self.t.tolist(),
            "kappas": self.kappas, "kappa": self.kappa,
            "c_minus": self.c_minus, "c_plus": self.c_plus,
            "g_form": self.g_form, "quasi_isotropic": self.quasi_isotropic,
            "diagnostic": self.diagnostic,
        }


def tangent_directions(that: np.ndarray, n_dirs: int = 8) -> list[np.ndarray]:
    basis = _tangent_basis(that)
    d = len(that)
    if d == 2:
        return [basis[0], -basis[0]]
    if d == 3:
        th = 2 * np.pi * np.arange(n_dirs) / n_dirs
        return [np.cos(a) * basis[0] + np.sin(a) * basis[1] for a in th]
    dirs = [b * sg for b in basis for sg in (1.0, -1.0)]
    rng = np.random.default_rng(7)
    for _ in range(n_dirs):
        c = rng.normal(size=len(basis))
        dirs.append(c @ basis / np.linalg.norm(c))
    return dirs


def _fit_side(spec, s, t, v, n_tau):
    eps = neighborhood_radius(spec, s, t, v)
    lin = np.linspace(0.0, eps, n_tau)
    flin = boundary_profile(spec, s, t, v, lin)
    convex = bool(np.all(flin[2:] - 2 * flin[1:-1] + flin[:-2] >= -1e-9))
    # Deepest window that still has enough resolvable values; the linear
    # term absorbs the leading odd correction of asymmetric profiles.
    for depth in (1000.0, 200.0, 50.0):
        taus = np.geomspace(eps / depth, eps / (depth / 10), n_tau)
        f = boundary_profile(spec, s, t, v, taus)
        keep = f > FIT_FLOOR
        if keep.sum() >= 10:
            break
    if np.all(f < FACET_THRESHOLD):
        return SideProfile(v, eps, taus, f, None, None, convex)
    if keep.sum() < 4:
        return SideProfile(v, eps, taus, f, math.nan, None, convex, math.inf)
    X = np.log(taus[keep])
    Y = np.log(f[keep])
    A = np.column_stack([X, np.ones_like(X), taus[keep] / eps])
    coef = np.linalg.lstsq(A, Y, rcond=None)[0]
    resid = float(np.max(np.abs(Y - A @ coef)))
    return SideProfile(v, eps, taus, f, float(coef[0]), float(math.exp(coef[1])), convex, resid)


def fit_isotropy_profile(spec: NormSpec, s, n_tau: int = 16, n_dirs: int = 8,
                         tol: float = ISOTROPY_TOL, resid_tol: float = 0.1) -> IsotropyProfile:
    """Fit ``f(tau v) ~ c tau^kappa`` along each tangent direction ``v``.

    ``g(tau) = tau^kappa`` with ``kappa`` the median fitted exponent; the
    sampled ratios ``f/g`` give ``c_-`` and ``c_+``.
    """
    dv = dual_vector(spec, s)
    if spec.d == 1:
        return IsotropyProfile(dv.s, dv.t, [], None, None, None, "zero", True, [],
                               "d=1: no tangent directions")
    that = dv.t / np.linalg.norm(dv.t)
    sides = [_fit_side(spec, dv.s, dv.t, v, n_tau) for v in tangent_directions(that, n_dirs)]
    kappas = [sd.kappa for sd in sides]
    flat = [sd.kappa is None for sd in sides]
    if all(flat):
        return IsotropyProfile(dv.s, dv.t, kappas, None, None, None, "zero", True, sides,
                               "f vanishes on every sampled tangent direction (facet)")
    if any(flat):
        return IsotropyProfile(dv.s, dv.t, kappas, None, None, None, "power", False, sides,
                               "f vanishes on some tangent directions but not others "
                               "(facet on one side, curvature on the other)")
    if any(math.isnan(k) or sd.max_log_residual > resid_tol for k, sd in zip(kappas, sides)):
        return IsotropyProfile(dv.s, dv.t, kappas, None, None, None, "nonpower", False, sides,
                               "profile is not a power law on the fitted range")
    kbar = float(np.median(kappas))
    ratios = np.concatenate([sd.f / sd.taus ** kbar for sd in sides])
    quasi = (max(kappas) - min(kappas)) < tol
    diag = "" if quasi else f"fitted exponents spread {max(kappas) - min(kappas):.3f} >= {tol}"
    return IsotropyProfile(dv.s, dv.t, kappas, kbar, float(ratios.min()), float(ratios.max()),
                           "power", quasi, sides, diag)
