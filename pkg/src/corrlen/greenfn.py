"""Killed random walk and GFF two-point functions, inverse correlation
lengths and saturation thresholds.

Two independent routes are provided:

* :func:`convolution_series` sums walks by length on a finite box;
* :func:`nu_via_tilt` maximizes ``t . s`` over ``{t : lam * Jhat(t) <= 1}``
  where ``Jhat(t) = sum_y J_y e^{t . y}``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy import fft as sfft
from scipy.optimize import brentq, minimize, minimize_scalar

from .couplings import (CouplingKernel, Verdict, XiResult, box_points, classify_sides,
                        criterion_classify, d1_tail, xi_tilde)
from .errors import NumericFailure, SeriesUnderflowError, ValidationError
from .geometry import (IsotropyProfile, dual_norm, dual_vector, evaluate_norm,
                       fit_isotropy_profile, _tangent_basis)

LAMBDA_EXP = 1.0
LAMBDA_EXP_NOTE = ("lambda_exp is taken equal to lambda_c = 1 for the killed random walk "
                   "(proved in d = 1, assumed in d >= 2)")
NEAR_CRITICAL_FRACTION = 0.1
BOUNDARY_TOL = 1e-9


class TiltStatus(str, enum.Enum):
    INSIDE = "INSIDE"
    BOUNDARY = "BOUNDARY"
    OUTSIDE = "OUTSIDE"


class Method(str, enum.Enum):
    TILT = "TILT"
    SERIES = "SERIES"


class Regime(str, enum.Enum):
    SATURATED = "SATURATED"
    OZ = "OZ"
    NEAR_CRITICAL = "NEAR-CRITICAL"


# -- Green's function by length decomposition ----------------------------------

@dataclass(eq=False)
class GreenField:
    """``log G(0, x)`` on the box ``||x||_inf <= R`` (index ``R`` is the origin).

    ``tail_bound`` bounds the total mass of walks longer than ``K``.  The box
    restriction makes every stored value a lower bound on the full-lattice
    Green's function.
    """

    lam: float
    R: int
    K: int
    log_G: np.ndarray
    tail_bound: float
    kernel: CouplingKernel
    gauge: np.ndarray | None = None
    log_layers: np.ndarray | None = None
    layer_mass: np.ndarray | None = None
    log_scale: float = 0.0
    model: str = "KRW"

    @property
    def d(self) -> int:
        return self.log_G.ndim

    @property
    def G(self) -> np.ndarray:
        return np.exp(self.log_G)

    def index(self, x) -> tuple:
        x = np.rint(np.asarray(x, dtype=float)).astype(int)
        if np.any(np.abs(x) > self.R):
            raise ValidationError(f"point {x.tolist()} outside box of radius {self.R}")
        return tuple(x + self.R)

    def log_value(self, x) -> float:
        return float(self.log_G[self.index(x)])

    def layer(self, k: int) -> np.ndarray:
        if self.log_layers is None:
            raise ValidationError("layers were not kept; rerun with keep_layers=True")
        return np.exp(self.log_layers[k - 1])

    def site_tail_bound(self, x, t=None) -> float:
        """Chernoff bound on walks longer than ``K`` ending at ``x``:
        ``e^{-t.x} (lam Jhat(t))^{K+1} / (1 - lam Jhat(t))``.

        Without ``t`` the bound is minimized over ``t = r t_x`` on a grid of
        ``r``, with ``t_x`` the dual vector of ``x``.
        """
        x = np.asarray(x, dtype=float).reshape(self.d)
        if t is None:
            if not np.any(x):
                return self.site_tail_bound(x, np.zeros(self.d))
            tx = dual_vector(self.kernel.norm, x).t
            return min(self.site_tail_bound(x, r * tx) for r in np.linspace(0.0, 0.99, 34))
        t = np.asarray(t, dtype=float)
        q = self.lam * tilted_mass(self.kernel, t).value
        if not q < 1:
            return math.inf
        return float(math.exp(-(t @ x) + (self.K + 1) * math.log(q)) / (1 - q))


def lattice_point(s, n: float) -> np.ndarray:
    """Nearest lattice point to ``n s`` (ties broken upward)."""
    return np.floor(np.asarray(s, dtype=float) * n + 0.5)


def _conv_direct(A: np.ndarray, Jb: np.ndarray, R: int) -> np.ndarray:
    """``(A * Jb)`` restricted to the box; ``Jb`` has radius ``2R``."""
    if A.ndim == 1:
        full = np.convolve(A, Jb)
        return full[2 * R: 4 * R + 1]
    from scipy.signal import convolve
    full = convolve(A, Jb, method="direct")
    sl = (slice(2 * R, 4 * R + 1),) * A.ndim
    return full[sl]


class _FFTConvolver:
    def __init__(self, Jb: np.ndarray, R: int):
        d = Jb.ndim
        self.R = R
        n = 2 * R + 1
        self.shape = tuple(sfft.next_fast_len(n + Jb.shape[0] - 1, real=True) for _ in range(d))
        self.Jf = sfft.rfftn(Jb, self.shape)
        self.sl = (slice(2 * R, 4 * R + 1),) * d

    def __call__(self, A: np.ndarray) -> np.ndarray:
        out = sfft.irfftn(sfft.rfftn(A, self.shape) * self.Jf, self.shape)[self.sl]
        return np.maximum(out, 0.0)


def convolution_series(kernel: CouplingKernel, lam: float, R: int, K: int, method: str = "auto",
                       gauge=None, keep_layers: bool = False) -> GreenField:
    """Sum ``G = delta_0 + sum_{k=1}^K A_k`` with ``A_1 = lam J`` and
    ``A_{k+1} = lam (A_k * J)``, every walk confined to the box of radius ``R``.

    ``method`` is ``"direct"`` (exact positive sums, used for d = 1 and
    small boxes) or ``"fft"``.  ``gauge`` is a vector ``g`` used to
    propagate ``A_k(x) e^{g.x}`` instead of ``A_k``; this is an exact
    rewriting that keeps the far tail within FFT round-off.  ``g`` must lie
    strictly inside the Wulff shape.
    """
    if not (0 <= lam < 1):
        raise ValidationError("lambda must lie in [0, 1); lambda_c = 1 for the normalized walk")
    if int(K) != K or K < 1 or int(R) != R or R < 1:
        raise ValidationError("R and K must be positive integers")
    d = kernel.d
    g = np.zeros(d) if gauge is None else np.asarray(gauge, dtype=float)
    if gauge is not None and dual_norm(kernel.norm, g) >= 1:
        raise ValidationError("gauge must lie strictly inside the Wulff shape")
    if method == "auto":
        method = "direct" if d == 1 or (2 * R + 1) ** d * (4 * R + 1) ** d < 5e7 else "fft"
    if method not in ("direct", "fft"):
        raise ValidationError("method must be 'auto', 'direct' or 'fft'")
    big = box_points(d, 2 * R)
    logJb = kernel.log_J(big) + big @ g
    logJb[(2 * R,) * d] = -np.inf
    Jb = np.exp(logJb)
    pts = box_points(d, R)
    gx = pts @ g
    sl = (slice(R, 3 * R + 1),) * d
    A = lam * Jb[sl]
    total = np.zeros_like(A)
    total[(R,) * d] = 1.0
    total += A
    conv = _FFTConvolver(Jb, R) if method == "fft" else None
    layers = [A.copy()] if keep_layers else None
    masses = [float((A * np.exp(-gx)).sum())]
    for _ in range(K - 1):
        A = lam * (conv(A) if conv is not None else _conv_direct(A, Jb, R))
        total += A
        if keep_layers:
            layers.append(A.copy())
        masses.append(float((A * np.exp(-gx)).sum()))
        if not np.any(A > 0):
            break
    with np.errstate(divide="ignore"):
        log_G = np.log(total) - gx
        log_layers = (np.log(np.array(layers)) - gx) if keep_layers else None
    tail = lam ** (K + 1) / (1 - lam) if lam > 0 else 0.0
    return GreenField(float(lam), int(R), int(K), log_G, tail, kernel,
                      None if gauge is None else g, log_layers, np.array(masses))


def gff_green(field: GreenField, lam: float) -> GreenField:
    """GFF two-point function ``lam * G_KRW`` with mass ``m``, ``lam = 1/(1+m^2)``."""
    if not math.isclose(lam, field.lam, rel_tol=0, abs_tol=1e-15):
        raise ValidationError("field was computed at a different lambda")
    if lam <= 0:
        raise ValidationError("lambda must be positive for the GFF")
    return GreenField(field.lam, field.R, field.K, field.log_G + math.log(lam), field.tail_bound * lam,
                      field.kernel, field.gauge, None, None, math.log(lam), "GFF")


def mass_to_lambda(m: float) -> float:
    return 1.0 / (1.0 + m * m)


def lambda_to_mass(lam: float) -> float:
    return math.sqrt(1.0 / lam - 1.0)


# -- tilted mass ---------------------------------------------------------------

@dataclass
class TiltedMass:
    value: float
    status: TiltStatus
    margin: float
    tail: float = 0.0
    verdict: Verdict | None = None


D1_PREFIX = 2_000_000
_TILT_RADII = {2: (32, 64, 128, 256), 3: (12, 24, 48)}


@lru_cache(maxsize=8)
def _d1_arrays(kernel: CouplingKernel):
    n = np.arange(1, D1_PREFIX + 1, dtype=float)
    return n, kernel.log_J(n[:, None])


@lru_cache(maxsize=16)
def _tilt_arrays(kernel: CouplingKernel, R: int):
    pts = box_points(kernel.d, R).reshape(-1, kernel.d)
    shell = np.max(np.abs(pts), axis=1).astype(int)
    keep = shell > 0
    return pts[keep], kernel.log_J(pts[keep]), shell[keep]


def _tilt_radius(kernel: CouplingKernel, margin: float) -> int:
    want = 40.0 / max(margin * kernel.norm.linf_sphere_extremes[0], 1e-12)
    radii = _TILT_RADII.get(kernel.d, (8, 16))
    for r in radii:
        if r >= want:
            return max(r, kernel.R)
    return max(radii[-1], kernel.R)


def boundary_radius(kernel: CouplingKernel) -> int:
    """Box radius used for sums on the Wulff boundary."""
    return kernel.R if kernel.d == 1 else max(_TILT_RADII.get(kernel.d, (16,))[-1], kernel.R)


def _extrapolate_shells(shells: np.ndarray) -> float:
    """Sum beyond the box of ``S_k ~ A k^b e^{-c k}`` fitted to the outer half."""
    R = len(shells) - 1
    k = np.arange(max(2, R // 2), R + 1, dtype=float)
    sk = shells[k.astype(int)]
    if np.any(sk <= 0):
        return 0.0
    X = np.column_stack([np.ones_like(k), np.log(k), k])
    coef = np.linalg.lstsq(X, np.log(sk), rcond=None)[0]
    c = -coef[2]
    if c <= 0:
        return math.inf
    kk = np.arange(R + 1, R + 1 + min(1_000_000, int(800.0 / c) + 10), dtype=float)
    return float(np.exp(coef[0] + coef[1] * np.log(kk) - c * kk).sum())


def tilted_mass(kernel: CouplingKernel, t, R: int | None = None,
                profile: IsotropyProfile | None = None) -> TiltedMass:
    """``Jhat(t) = sum_{y != 0} J_y e^{t.y}`` with a tail classification.

    Strictly inside the Wulff shape the sum converges geometrically; in
    d = 1 it is summed to round-off, in d >= 2 the box sum is completed by
    extrapolating the outer shell sums.  On the boundary the value is
    ``Xi-tilde`` and the criterion decides finiteness; outside it is
    infinite.
    """
    t = np.asarray(t, dtype=float).reshape(kernel.d)
    rho = float(dual_norm(kernel.norm, t))
    if rho > 1 + BOUNDARY_TOL:
        return TiltedMass(math.inf, TiltStatus.OUTSIDE, 1 - rho, math.inf)
    margin = 1 - rho
    if abs(margin) <= BOUNDARY_TOL:
        res = xi_tilde(kernel, t, boundary_radius(kernel) if R is None else R, profile)
        return TiltedMass(res.value, TiltStatus.BOUNDARY, 0.0, res.tail_estimate, res.verdict)
    if kernel.d == 1:
        n, logJ = _d1_arrays(kernel)
        unit = float(evaluate_norm(kernel.norm, np.array([1.0])))
        tt = float(t[0])
        rate = unit - abs(tt)
        m = int(min(D1_PREFIX, math.ceil(800.0 / rate) + 10))
        value = float((np.exp(logJ[:m] + tt * n[:m]) + np.exp(logJ[:m] - tt * n[:m])).sum())
        tail = d1_tail(kernel, tt, D1_PREFIX) if m == D1_PREFIX else 0.0
        return TiltedMass(value + tail, TiltStatus.INSIDE, margin, tail)
    R = _tilt_radius(kernel, margin) if R is None else int(R)
    pts, logJ, shell = _tilt_arrays(kernel, R)
    w = np.exp(logJ + pts @ t)
    shells = np.bincount(shell, weights=w, minlength=R + 1)
    tail = _extrapolate_shells(shells)
    return TiltedMass(float(shells.sum()) + tail, TiltStatus.INSIDE, margin, tail)


# -- inverse correlation length --------------------------------------------------

@dataclass
class NuEstimate:
    s: np.ndarray
    lam: float
    nu: float
    method: Method
    t_star: np.ndarray | None = None
    band: tuple | None = None
    saturated: bool = False
    upper_bound: float | None = None
    rho: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"s": self.s.tolist(), "lambda": self.lam, "nu": self.nu, "method": self.method.value,
                "t_star": None if self.t_star is None else self.t_star.tolist(),
                "band": None if self.band is None else list(self.band),
                "saturated": self.saturated, "upper_bound": self.upper_bound, "note": self.note}


def _unit(s, d):
    s = np.asarray(s, dtype=float).reshape(d)
    n = np.linalg.norm(s)
    if n == 0 or not np.isfinite(n):
        raise ValidationError("direction must be non-zero")
    return s / n


def _ray_root(kernel, lam, u, rmax):
    """Largest ``r`` in ``[0, rmax)`` with ``lam Jhat(r u) <= 1``."""
    def f(r):
        return lam * tilted_mass(kernel, r * u).value - 1.0

    hi = rmax * (1 - 1e-12)
    fhi = f(hi)
    if fhi <= 0:
        return hi
    return brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def saturation_check(kernel: CouplingKernel, lam: float, s, profile=None):
    """``(saturated, Xi)``: the dual vector is feasible iff ``lam Xi <= 1``."""
    d = kernel.d
    dv = dual_vector(kernel.norm, s)
    if d > 1 and profile is None:
        profile = fit_isotropy_profile(kernel.norm, dv.s)
    xi = tilted_mass(kernel, dv.t, profile=profile)
    return bool(math.isfinite(xi.value) and lam * xi.value <= 1.0), xi, dv, profile


def nu_via_tilt(kernel: CouplingKernel, lam: float, s, profile: IsotropyProfile | None = None,
                polish: bool = True, fallback: dict | None = None) -> NuEstimate:
    """``nu_s(lam) = sup{t . s : lam Jhat(t) <= 1}`` with ``s`` a Euclidean unit vector.

    When the dual vector of ``s`` is feasible the supremum is ``|s|``
    exactly.  Otherwise the boundary is located along the ray through the
    dual vector and the tilt direction is then polished.  If the optimizer
    fails the estimate falls back to the series route with a warning.
    """
    if not (0 < lam < 1):
        raise ValidationError("nu_via_tilt needs 0 < lambda < 1")
    d = kernel.d
    s = _unit(s, d)
    norm_s = float(evaluate_norm(kernel.norm, s))
    sat, xi, dv, profile = saturation_check(kernel, lam, s, profile)
    if sat:
        return NuEstimate(s, lam, norm_s, Method.TILT, dv.t.copy(), saturated=True,
                          note="dual vector feasible")
    try:
        td = dv.t
        r0 = _ray_root(kernel, lam, td, 1.0)
        best_t, best = r0 * td, r0 * norm_s
        if polish and d >= 2:
            best_t, best = _polish(kernel, lam, s, td, best_t, best)
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        warnings.warn(f"tilt optimizer failed ({exc}); falling back to series", RuntimeWarning)
        return _series_fallback(kernel, lam, s, fallback)
    return NuEstimate(s, lam, min(best, norm_s), Method.TILT, best_t, saturated=False)


def _polish(kernel, lam, s, td, t0, val0):
    """Maximize ``t.s`` on the boundary of ``{lam Jhat <= 1}`` over tilt directions."""
    norm = kernel.norm
    uhat = td / np.linalg.norm(td)
    basis = _tangent_basis(uhat)

    def boundary_point(c):
        u = uhat + np.asarray(c) @ basis
        u = u / np.linalg.norm(u)
        rmax = 1.0 / float(dual_norm(norm, u))
        r = _ray_root(kernel, lam, u, rmax)
        return r * u

    def neg(c):
        return -float(boundary_point(np.atleast_1d(c)) @ s)

    if len(basis) == 1:
        res = minimize_scalar(lambda c: neg([c]), bounds=(-1.0, 1.0), method="bounded",
                              options={"xatol": 1e-10})
        c_opt = np.array([res.x])
    else:
        res = minimize(neg, np.zeros(len(basis)), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
        c_opt = res.x
    t_opt = boundary_point(c_opt)
    v = float(t_opt @ s)
    if v > val0:
        return t_opt, v
    return t0, val0


def _series_fallback(kernel, lam, s, fallback):
    cfg = {"R": 200 if kernel.d == 1 else 40, "K": 400, "n_range": None}
    cfg.update(fallback or {})
    R, K = cfg["R"], cfg["K"]
    n_range = cfg["n_range"] or (R // 4, (3 * R) // 4)
    f = convolution_series(kernel, lam, R, K)
    est = nu_via_series(f, s, n_range)
    est.note = "series fallback after tilt optimizer failure"
    return est


def nu_support(kernel: CouplingKernel, lam: float, s) -> float:
    """Support function of ``{t : lam Jhat(t) <= 1}`` evaluated at any non-zero ``s``.

    This is the homogeneous extension of ``nu`` (so ``nu_support(c s) = c nu_s``).
    """
    s = np.asarray(s, dtype=float)
    r = float(np.linalg.norm(s))
    return r * nu_via_tilt(kernel, lam, s / r).nu


def _ols(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.pinv(X.T @ X)
    return coef, np.sqrt(np.diag(cov)), resid


def nu_via_series(field: GreenField, s, n_range, log_correction: bool = False,
                  n_points: int | None = None) -> NuEstimate:
    """Regress ``-log G(0, [ns])`` on ``n`` over ``n_range``.

    With ``log_correction`` a ``log n`` column absorbs a polynomial
    prefactor, so the slope is not biased by it.  ``band`` is the slope
    plus or minus two standard errors.  ``upper_bound`` is the
    supermultiplicativity bound ``min_n (log G(0,0) - log G(0,[ns])) / n``.
    """
    d = field.d
    s = _unit(s, d)
    n0, n1 = int(n_range[0]), int(n_range[1])
    if n0 < 1 or n1 <= n0:
        raise ValidationError("n_range must be an increasing pair of positive integers")
    ns = np.arange(n0, n1 + 1) if n_points is None else np.unique(np.linspace(n0, n1, n_points).astype(int))
    pts = [lattice_point(s, n) for n in ns]
    if any(np.any(np.abs(p) > field.R) for p in pts):
        raise ValidationError("n_range leaves the box")
    logG = np.array([field.log_value(p) for p in pts])
    if not np.all(np.isfinite(logG)):
        raise SeriesUnderflowError("G underflows inside n_range; shrink the range or enlarge K")
    # distance actually travelled along s by the rounded points
    n_eff = np.array([float(p @ s) for p in pts])
    cols = [n_eff, np.ones_like(n_eff)]
    if log_correction:
        cols.append(np.log(n_eff))
    coef, se, resid = _ols(np.column_stack(cols), -logG)
    nu = float(coef[0])
    band = (nu - 2 * se[0], nu + 2 * se[0])
    log_g0 = field.log_G[(field.R,) * d]
    ub = float(np.min((log_g0 - logG) / n_eff))
    rho = -float(coef[2]) if log_correction else None
    return NuEstimate(s, field.lam, nu, Method.SERIES, band=band, upper_bound=ub, rho=rho,
                      note=f"max residual {np.max(np.abs(resid)):.2e}")


# -- saturation ------------------------------------------------------------------

def lambda_sat_d1_exact(norm, prefactor, dps: int = 30) -> float:
    """``(sum_{n>=1} psi_bar(n) (1 + e^{-2n|1|}))^{-1}`` in d = 1, by mpmath."""
    if norm.d != 1:
        raise ValidationError("closed form exists in d = 1 only")
    c = mpmath.mpf(float(evaluate_norm(norm, np.array([1.0]))))
    radius = c if prefactor.radius == "norm" else mpmath.mpf(1)
    with mpmath.workdps(dps):
        fam = prefactor.family
        C = mpmath.mpf(prefactor.C)
        if fam == "polynomial":
            a = mpmath.mpf(prefactor.alpha)
            psi = lambda n: C * (radius * n) ** (-a)  # noqa: E731
        elif fam == "stretched_exp":
            psi = lambda n: C * mpmath.exp(-prefactor.a * (radius * n) ** prefactor.gamma)  # noqa: E731
        elif fam == "constant":
            return 0.0
        else:
            psi = lambda n: mpmath.exp(prefactor.log_psi0(float(n)))  # noqa: E731
        Z = 2 * mpmath.nsum(lambda n: psi(n) * mpmath.exp(-c * n), [1, mpmath.inf])
        if fam == "polynomial" and prefactor.alpha <= 1:
            return 0.0
        if fam == "polynomial":
            xi = C * radius ** (-a) * (mpmath.zeta(a) + mpmath.polylog(a, mpmath.exp(-2 * c))) / Z
        else:
            xi = mpmath.nsum(lambda n: psi(n) * (1 + mpmath.exp(-2 * c * n)), [1, mpmath.inf]) / Z
        return float(1 / xi)


@dataclass
class SaturationReport:
    s: np.ndarray
    t: np.ndarray
    verdict: Verdict
    lam_tilde: float
    lam_sat: float
    lam_sat_exact: float | None = None
    lower_bound_only: bool = False
    xi: float = math.nan
    lambdas: list = field(default_factory=list)
    nus: list = field(default_factory=list)
    regimes: list = field(default_factory=list)
    side_case: str | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"s": self.s.tolist(), "t": self.t.tolist(), "verdict": self.verdict.value,
                "lambda_tilde": self.lam_tilde, "lambda_sat": self.lam_sat,
                "lambda_sat_exact": self.lam_sat_exact, "lower_bound_only": self.lower_bound_only,
                "xi_tilde": self.xi, "lambdas": self.lambdas, "nu": self.nus,
                "regimes": [r.value for r in self.regimes], "side_case": self.side_case,
                "notes": self.notes}


def regime_label(est: NuEstimate, norm_s: float) -> Regime:
    if est.saturated:
        return Regime.SATURATED
    if est.nu <= NEAR_CRITICAL_FRACTION * norm_s:
        return Regime.NEAR_CRITICAL
    return Regime.OZ


def lambda_sat(kernel: CouplingKernel, s, profile: IsotropyProfile | None = None,
               lam_grid=None, tol: float = 1e-12) -> SaturationReport:
    """Saturation threshold of direction ``s``.

    ``lam_tilde = min(1/Xi, 1)``; the estimate bisects on the predicate
    "the dual vector is a feasible tilt".  A divergent criterion gives
    ``lam_sat = 0``; an undecided one reports ``lam_tilde`` as a lower bound.
    """
    d = kernel.d
    dv = dual_vector(kernel.norm, s)
    norm_s = float(evaluate_norm(kernel.norm, dv.s))
    if d > 1 and profile is None:
        profile = fit_isotropy_profile(kernel.norm, dv.s)
    verdict = criterion_classify(kernel.prefactor, profile, d)
    notes = [LAMBDA_EXP_NOTE]
    side_case = None
    if d > 1 and profile is not None and not profile.quasi_isotropic:
        sa = classify_sides(kernel.prefactor, profile, d)
        side_case = sa.case
        if sa.note:
            notes.append(sa.note)
    xi = tilted_mass(kernel, dv.t, profile=profile)
    xi_val = xi.value if verdict != Verdict.DIVERGENT else math.inf
    lam_tilde = min(1.0 / xi_val, 1.0) if math.isfinite(xi_val) else 0.0
    exact = None
    if d == 1:
        exact = lambda_sat_d1_exact(kernel.norm, kernel.prefactor)
    lower_only = False
    if verdict == Verdict.DIVERGENT:
        est = 0.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid * xi_val <= 1.0:
                lo = mid
            else:
                hi = mid
        est = lo
        if verdict == Verdict.UNKNOWN:
            lower_only = True
            notes.append("criterion undecided: lambda_tilde is a lower bound only")
    rep = SaturationReport(dv.s, dv.t, verdict, lam_tilde, est, exact, lower_only, xi_val,
                           side_case=side_case, notes=notes)
    for lam in ([] if lam_grid is None else lam_grid):
        e = nu_via_tilt(kernel, float(lam), dv.s, profile)
        rep.lambdas.append(float(lam))
        rep.nus.append(e.nu)
        rep.regimes.append(regime_label(e, norm_s))
    return rep
