"""Prefactor regimes of computed Green's functions: Ornstein-Zernike decay,
condensation onto the coupling, and the giant-step statistic."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .couplings import CouplingKernel
from .errors import SeriesUnderflowError, ValidationError
from .greenfn import (GreenField, NuEstimate, _d1_arrays, _tilt_arrays, _tilt_radius,
                      convolution_series, lattice_point, tilted_mass)
from .geometry import dual_norm, evaluate_norm

OZ_TOL = 0.15
RESIDUAL_TOL = 0.1
RATIO_BOUND = 10.0
SLOPE_TOL = 0.05


class PrefactorRegime(str, enum.Enum):
    OZ = "OZ"
    CONDENSED = "CONDENSED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class StepLaw:
    total: float
    mean: np.ndarray
    drift: float
    transverse: float


@dataclass
class CondensationRatio:
    ns: np.ndarray
    log_ratio: np.ndarray
    min: float
    max: float
    slope: float
    condensed: bool

    @property
    def ratios(self) -> np.ndarray:
        return np.exp(self.log_ratio)


@dataclass
class PrefactorFit:
    s: np.ndarray
    lam: float
    rho: float
    n_range: tuple
    residual: float
    label: PrefactorRegime
    intercept: float
    step: StepLaw | None = None
    ratio: CondensationRatio | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"s": self.s.tolist(), "lambda": self.lam, "rho": self.rho,
               "n_range": list(self.n_range), "residual": self.residual,
               "label": self.label.value, "intercept": self.intercept, "notes": self.notes}
        if self.step is not None:
            out["step_sum"] = self.step.total
            out["drift"] = self.step.drift
            out["drift_transverse"] = self.step.transverse
        if self.ratio is not None:
            out["ratio_min"] = self.ratio.min
            out["ratio_max"] = self.ratio.max
            out["ratio_slope"] = self.ratio.slope
        return out


@dataclass
class CondensationStat:
    n: int
    rho_cut: float
    giant_mass: float
    log_G: float
    log_G_small: float


def _profile_points(field_: GreenField, s, n_range):
    s = np.asarray(s, dtype=float)
    s = s / np.linalg.norm(s)
    ns = np.arange(int(n_range[0]), int(n_range[1]) + 1)
    pts = np.array([lattice_point(s, n) for n in ns])
    if np.any(np.abs(pts) > field_.R):
        raise ValidationError("n_range leaves the box")
    logG = np.array([field_.log_value(p) for p in pts])
    if not np.all(np.isfinite(logG)):
        raise SeriesUnderflowError("G underflows inside n_range; shrink the range or enlarge K")
    return s, ns, pts, logG


def step_law(kernel: CouplingKernel, lam: float, t, s=None) -> StepLaw:
    """Moments of ``w(y) = lam J_y e^{t.y}``.

    At the optimal tilt of a non-saturated direction ``sum w = 1`` and the
    mean step is parallel to ``s``.
    """
    t = np.asarray(t, dtype=float).reshape(kernel.d)
    if kernel.d == 1:
        n, logJ = _d1_arrays(kernel)
        tt = float(t[0])
        wp = np.exp(logJ + tt * n)
        wm = np.exp(logJ - tt * n)
        # the prefix may be short of the slow tail just above saturation
        total = lam * tilted_mass(kernel, t).value
        mean = np.array([lam * float((n * (wp - wm)).sum())])
    else:
        margin = 1.0 - float(dual_norm(kernel.norm, t))
        pts, logJ, _ = _tilt_arrays(kernel, _tilt_radius(kernel, margin))
        w = lam * np.exp(logJ + pts @ t)
        total = float(w.sum())
        mean = w @ pts
    if s is None:
        return StepLaw(total, mean, float(np.linalg.norm(mean)), 0.0)
    s = np.asarray(s, dtype=float) / np.linalg.norm(s)
    drift = float(mean @ s)
    return StepLaw(total, mean, drift, float(np.linalg.norm(mean - drift * s)))


def prefactor_ratio(field_: GreenField, kernel: CouplingKernel, s, n_range,
                    bound: float = RATIO_BOUND, slope_tol: float = SLOPE_TOL) -> CondensationRatio:
    """``G(0,[ns]) / J_{0,[ns]}`` along ``n_range``, in the log domain.

    Condensed when ``max/min < bound`` and the fitted slope of
    ``log(G/J)`` against ``log n`` is within ``slope_tol`` of zero.
    """
    s, ns, pts, logG = _profile_points(field_, s, n_range)
    logJ = kernel.log_J(pts)
    lr = logG - field_.log_scale - logJ
    slope = float(np.polyfit(np.log(ns), lr, 1)[0])
    spread = float(lr.max() - lr.min())
    condensed = spread < math.log(bound) and abs(slope) <= slope_tol
    return CondensationRatio(ns, lr, float(np.exp(lr.min())), float(np.exp(lr.max())), slope, condensed)


def oz_exponent_fit(field_: GreenField, nu: NuEstimate, n_range, kernel: CouplingKernel | None = None,
                    tol: float = OZ_TOL, resid_tol: float = RESIDUAL_TOL) -> PrefactorFit:
    """Fit ``log G(0,[ns]) + nu n = c + rho log n``.

    The label is OZ when ``|rho + (d-1)/2| < tol`` and the ratio test does
    not report condensation, CONDENSED when it does, and INCONCLUSIVE
    otherwise or when the fit residual exceeds ``resid_tol``.
    """
    kernel = field_.kernel if kernel is None else kernel
    d = field_.d
    s, ns, pts, logG = _profile_points(field_, nu.s, n_range)
    n_eff = pts @ s
    y = logG + nu.nu * n_eff
    X = np.column_stack([np.log(n_eff), np.ones_like(n_eff)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.max(np.abs(y - X @ coef)))
    rho, icpt = float(coef[0]), float(coef[1])
    ratio = prefactor_ratio(field_, kernel, s, n_range)
    notes = []
    step = None
    if nu.saturated:
        notes.append("SATURATED: no normalized step law exists at this lambda")
    elif nu.t_star is not None:
        step = step_law(kernel, field_.lam, nu.t_star, s)
    if ratio.condensed:
        label = PrefactorRegime.CONDENSED
    elif resid > resid_tol:
        label = PrefactorRegime.INCONCLUSIVE
        notes.append(f"fit residual {resid:.3f} above {resid_tol}")
    elif abs(rho + (d - 1) / 2) < tol:
        label = PrefactorRegime.OZ
    else:
        label = PrefactorRegime.INCONCLUSIVE
    return PrefactorFit(s, field_.lam, rho, (int(n_range[0]), int(n_range[1])), resid, label, icpt,
                        step, ratio, notes)


def giant_step_mass(kernel: CouplingKernel, lam: float, s, n: int, rho_cut: float = 0.5,
                    R: int | None = None, K: int | None = None, gauge=None,
                    fields: tuple | None = None) -> CondensationStat:
    """Fraction of ``G(0,[ns])`` carried by walks with a step of norm ``>= rho_cut |[ns]|``.

    Both Green's functions are computed with the same ``R`` and ``K``;
    ``1 - G_small/G`` is evaluated as ``-expm1(log G_small - log G)``.
    """
    if not (0 < rho_cut < 1):
        raise ValidationError("rho_cut must lie in (0, 1)")
    d = kernel.d
    s = np.asarray(s, dtype=float).reshape(d)
    s = s / np.linalg.norm(s)
    x = lattice_point(s, n)
    cut = rho_cut * float(evaluate_norm(kernel.norm, x))
    R = int(R if R is not None else max(int(np.max(np.abs(x))) + 50, 2 * int(np.max(np.abs(x)))))
    K = int(K if K is not None else max(200, 4 * n))
    if fields is None:
        full = convolution_series(kernel, lam, R, K, gauge=gauge)
    else:
        full = fields[0]
    small = convolution_series(kernel.truncated(cut), lam, full.R, full.K, gauge=full.gauge)
    lg, ls = full.log_value(x), small.log_value(x)
    gm = float(np.clip(-math.expm1(min(ls - lg, 0.0)), 0.0, 1.0)) + 0.0
    return CondensationStat(int(n), float(rho_cut), gm, lg, ls)
