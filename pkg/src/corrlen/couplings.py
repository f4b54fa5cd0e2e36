"""Prefactors psi, the normalized coupling kernel ``J_x = psi(x) e^{-|x|} / Z``,
the tilted sum Xi-tilde and the explicit summability criterion."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from . import binfmt
from .errors import KernelTruncationError, ValidationError
from .geometry import DualVector, IsotropyProfile, NormSpec, evaluate_norm

PREFACTOR_FAMILIES = ("polynomial", "stretched_exp", "constant", "custom")
RADII = ("norm", "euclid", "l1")
KAPPA_SNAP = 1e-3


class Verdict(str, enum.Enum):
    CONVERGENT = "CONVERGENT"
    DIVERGENT = "DIVERGENT"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class PrefactorSpec:
    """Sub-exponential correction ``psi``.

    Families (``r`` is the radius selected by ``radius``):

    * ``polynomial``: ``C r^-alpha``
    * ``stretched_exp``: ``C exp(-a r^gamma)``, ``0 < gamma < 1``
    * ``constant``: ``C``
    * ``custom``: a table of ``psi_0`` over the l1 radius ``1, 2, ...``;
      beyond the table a power law fitted to the last ten entries is used.
    """

    family: str
    alpha: float = 0.0
    a: float = 1.0
    gamma: float = 0.5
    C: float = 1.0
    radius: str = "norm"
    table: tuple | None = None
    table_path: str | None = None

    def __post_init__(self):
        if self.family not in PREFACTOR_FAMILIES:
            raise ValidationError(f"unknown prefactor family {self.family!r}")
        if self.radius not in RADII:
            raise ValidationError(f"radius must be one of {RADII}")
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ValidationError("C must be positive")
        if self.family == "polynomial" and not math.isfinite(self.alpha):
            raise ValidationError("alpha must be finite")
        if self.family == "stretched_exp":
            if not (0 < self.gamma < 1):
                raise ValidationError("stretched_exp needs 0 < gamma < 1")
            if not self.a > 0:
                raise ValidationError("stretched_exp needs a > 0")
        if self.family == "custom":
            table = self.table
            if table is None and self.table_path is not None:
                table = tuple(float(v) for v in np.loadtxt(self.table_path, ndmin=1))
            if table is None or len(table) < 10:
                raise ValidationError("custom prefactor needs a table of at least 10 values")
            table = tuple(float(v) for v in table)
            if min(table) <= 0:
                raise ValidationError("psi must be positive")
            object.__setattr__(self, "table", table)
            object.__setattr__(self, "radius", "l1")

    def to_config(self) -> dict:
        cfg = {"family": self.family, "C": self.C, "radius": self.radius}
        if self.family == "polynomial":
            cfg["alpha"] = self.alpha
        if self.family == "stretched_exp":
            cfg.update(a=self.a, gamma=self.gamma)
        if self.family == "custom":
            cfg["table"] = list(self.table)
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "PrefactorSpec":
        cfg = dict(cfg)
        unknown = set(cfg) - {"family", "alpha", "a", "gamma", "C", "radius", "table", "table_path"}
        if unknown:
            raise ValidationError(f"unknown prefactor keys: {sorted(unknown)}")
        if "family" not in cfg:
            raise ValidationError("prefactor config needs 'family'")
        if "table" in cfg and cfg["table"] is not None:
            cfg["table"] = tuple(cfg["table"])
        try:
            return cls(**cfg)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc

    def canonical_json(self) -> str:
        return json.dumps(self.to_config(), sort_keys=True)

    # -- evaluation --------------------------------------------------------
    def _table_tail(self):
        tab = np.asarray(self.table)
        L = len(tab)
        r = np.arange(L - 9, L + 1, dtype=float)
        slope, icpt = np.polyfit(np.log(r), np.log(tab[-10:]), 1)
        return slope, icpt

    def log_psi0(self, r) -> np.ndarray:
        """``log psi_0(r)`` for ``r > 0``."""
        r = np.asarray(r, dtype=float)
        fam = self.family
        if fam == "polynomial":
            return math.log(self.C) - self.alpha * np.log(r)
        if fam == "stretched_exp":
            return math.log(self.C) - self.a * r ** self.gamma
        if fam == "constant":
            return np.full_like(r, math.log(self.C))
        tab = np.log(np.asarray(self.table))
        L = len(tab)
        slope, icpt = self._table_tail()
        idx = np.clip(np.rint(r).astype(int), 1, L) - 1
        return np.where(r <= L, tab[idx], icpt + slope * np.log(np.maximum(r, 1.0)))

    def psi0(self, r) -> np.ndarray:
        return np.exp(self.log_psi0(r))

    def radius_of(self, norm: NormSpec, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.radius == "norm":
            return np.asarray(evaluate_norm(norm, x))
        if self.radius == "euclid":
            return np.linalg.norm(x, axis=-1)
        return np.sum(np.abs(x), axis=-1)

    def log_psi(self, norm: NormSpec, x) -> np.ndarray:
        """``log psi(x)``; ``-inf`` at the origin, where ``psi`` plays no role."""
        r = self.radius_of(norm, x)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, self.log_psi0(safe), -np.inf)

    def is_monotone(self) -> bool:
        if self.family == "polynomial":
            return self.alpha >= 0
        if self.family == "custom":
            return bool(np.all(np.diff(self.table) <= 0)) and self._table_tail()[0] <= 0
        return True

    def check_subexponential(self, radii=None, tol: float = 1e-2) -> bool:
        """``|log psi_0(r)| / r`` is small and shrinking along a radius ladder."""
        radii = np.geomspace(10, 1e7, 14) if radii is None else np.asarray(radii, dtype=float)
        q = np.abs(self.log_psi0(radii)) / radii
        return bool(q[-1] < tol and q[-1] <= q[len(q) // 2] + 1e-15)

    def h0_constants(self, norm: NormSpec, R: int = 30) -> tuple[float, float]:
        """Sampled ``(C-, C+)`` with ``C- psi_0(||y||_1) <= psi(y) <= C+ psi_0(||y||_1)``."""
        pts = box_points(norm.d, R).reshape(-1, norm.d)
        pts = pts[np.any(pts != 0, axis=1)]
        ratio = self.log_psi(norm, pts) - self.log_psi0(np.sum(np.abs(pts), axis=1))
        return float(np.exp(ratio.min())), float(np.exp(ratio.max()))


def box_points(d: int, R: int) -> np.ndarray:
    """Integer points of ``[-R, R]^d`` as an array of shape ``(2R+1,)*d + (d,)``."""
    ax = np.arange(-R, R + 1, dtype=float)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)


def linf_radius(d: int, R: int) -> np.ndarray:
    ax = np.abs(np.arange(-R, R + 1))
    out = ax
    for _ in range(d - 1):
        out = np.maximum.outer(out, ax)
    return np.asarray(out)


def _shell_count(d: int, k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return (2 * k + 1) ** d - (2 * k - 1) ** d


def _shell_upper_terms(norm: NormSpec, prefactor: PrefactorSpec, k: np.ndarray) -> np.ndarray:
    """Upper bounds on the mass of ``psi(x) e^{-|x|}`` on each sup-norm shell ``k``."""
    m_lo, M = norm.linf_sphere_extremes
    d = norm.d
    if prefactor.radius == "norm":
        r_lo, r_hi = m_lo * k, M * k
    elif prefactor.radius == "euclid":
        r_lo, r_hi = k, math.sqrt(d) * k
    else:
        r_lo, r_hi = k, d * k
    if prefactor.family == "custom":
        # max over [r_lo, r_hi], checked on the integer radii it contains
        lp = np.array([prefactor.log_psi0(np.arange(int(a), int(b) + 2)).max()
                       for a, b in zip(np.atleast_1d(r_lo), np.atleast_1d(r_hi))])
    else:
        lp = np.maximum(prefactor.log_psi0(r_lo), prefactor.log_psi0(r_hi))
    return _shell_count(d, k) * np.exp(lp - m_lo * k)


@dataclass(eq=False)
class CouplingKernel:
    """Normalized couplings on the box ``||x||_inf <= R`` (index ``R`` is the origin)."""

    norm: NormSpec
    prefactor: PrefactorSpec
    R: int
    Z: float
    values: np.ndarray
    tail_bound: float
    cut: float | None = None

    @property
    def d(self) -> int:
        return self.norm.d

    @property
    def log_Z(self) -> float:
        return math.log(self.Z)

    def spec_json(self) -> str:
        return json.dumps({"norm": self.norm.to_config(), "prefactor": self.prefactor.to_config(),
                           "R": self.R, "cut": self.cut}, sort_keys=True)

    def spec_hash(self) -> bytes:
        return binfmt.sha256_bytes(self.spec_json())

    def log_J(self, x) -> np.ndarray:
        """``log J_x`` at arbitrary lattice points, in closed form."""
        x = np.asarray(x, dtype=float)
        out = self.prefactor.log_psi(self.norm, x) - np.asarray(evaluate_norm(self.norm, x)) - self.log_Z
        if self.cut is not None:
            out = np.where(np.asarray(evaluate_norm(self.norm, x)) >= self.cut, -np.inf, out)
        return out

    def J(self, x) -> np.ndarray:
        return np.exp(self.log_J(x))

    def box(self, R: int) -> np.ndarray:
        """Kernel values on the box of radius ``R`` (computed if larger than the cache)."""
        if R <= self.R:
            sl = (slice(self.R - R, self.R + R + 1),) * self.d
            return self.values[sl]
        pts = box_points(self.d, R)
        return np.exp(self.log_J(pts))

    def truncated(self, max_norm: float) -> "CouplingKernel":
        """Same normalization, with every step of norm ``>= max_norm`` removed."""
        pts = box_points(self.d, self.R)
        vals = np.where(np.asarray(evaluate_norm(self.norm, pts)) >= max_norm, 0.0, self.values)
        cut = max_norm if self.cut is None else min(self.cut, max_norm)
        return CouplingKernel(self.norm, self.prefactor, self.R, self.Z, vals, self.tail_bound, cut)

    def mass(self) -> float:
        return float(self.values.sum())

    def save(self, path) -> None:
        binfmt.write_box(path, "kernel", self.values, self.spec_hash())

    @classmethod
    def load(cls, path, norm: NormSpec, prefactor: PrefactorSpec, tail_tol: float = 1e-12):
        """Load a cached kernel; the header hash must match the given specs."""
        kind, arr, h, _ = binfmt.read_box(path)
        R = (arr.shape[0] - 1) // 2
        ref = normalize_kernel(norm, prefactor, R, tail_tol, compute_values=False)
        if kind != "kernel" or h != ref.spec_hash():
            raise ValidationError("cached kernel does not match the requested specs")
        ref.values = arr
        return ref


def _tail_terms(norm, prefactor, R):
    m_lo = norm.linf_sphere_extremes[0]
    kmax = R + int(math.ceil(800.0 / m_lo)) + 50
    k = np.arange(1, kmax + 1, dtype=float)
    return k, _shell_upper_terms(norm, prefactor, k)


def normalize_kernel(norm: NormSpec, prefactor: PrefactorSpec, R: int, tail_tol: float = 1e-12,
                     compute_values: bool = True) -> CouplingKernel:
    """Build ``J`` on the box of radius ``R`` with ``sum_{x != 0} J_x = 1``.

    ``Z = Z_box + T`` where ``T`` bounds the mass outside the box through
    ``|x| >= m ||x||_inf`` and shell counts.  In ``d = 1`` the bound is the
    exact tail, so ``Z`` is exact.  Raises :class:`KernelTruncationError`
    if ``T / Z > tail_tol``.
    """
    if int(R) != R or R < 1:
        raise ValidationError("R must be an integer >= 1")
    if not (0 < tail_tol < 1):
        raise ValidationError("tail_tol must lie in (0, 1)")
    d = norm.d
    pts = box_points(d, R)
    logw = prefactor.log_psi(norm, pts) - np.asarray(evaluate_norm(norm, pts))
    w = np.exp(logw)
    Zbox = float(w.sum())
    k, terms = _tail_terms(norm, prefactor, R)
    if d == 1:
        kk = k[k > R]
        x = np.concatenate([kk, -kk])[:, None]
        tail = float(np.exp(prefactor.log_psi(norm, x) - evaluate_norm(norm, x)).sum())
    else:
        tail = float(terms[k > R].sum())
    Z = Zbox + tail
    if tail / Z > tail_tol:
        rev = np.cumsum(terms[::-1])[::-1]
        ok = np.flatnonzero(rev <= tail_tol * Zbox)
        suggested = int(k[ok[0]]) if ok.size else None
        raise KernelTruncationError(
            f"relative tail {tail / Z:.2e} exceeds {tail_tol:.1e} at R={R}", suggested_R=suggested)
    return CouplingKernel(norm, prefactor, int(R), Z, w / Z if compute_values else np.empty(0), tail / Z)


def suggest_radius(norm: NormSpec, prefactor: PrefactorSpec, tail_tol: float = 1e-12) -> int:
    k, terms = _tail_terms(norm, prefactor, 1)
    Zlow = float(terms[0]) * 1e-3 + 1e-300
    rev = np.cumsum(terms[::-1])[::-1]
    ok = np.flatnonzero(rev <= tail_tol * Zlow)
    return int(k[ok[0]]) if ok.size else int(k[-1])


# -- criterion ----------------------------------------------------------------

def _snap(kappa: float) -> float:
    half = round(2 * kappa) / 2
    return half if abs(kappa - half) < KAPPA_SNAP else kappa


def criterion_exponent(kappa: float | None, d: int) -> float:
    """Power ``e`` in the summand ``psi_0(l) l^e``; ``kappa=None`` means a facet."""
    if d == 1:
        return 0.0
    if kappa is None:
        return float(d - 1)
    return (d - 1) * (1.0 - 1.0 / _snap(kappa))


def _condensed_verdict(prefactor: PrefactorSpec, e: float) -> Verdict:
    L = len(prefactor.table)
    kmax = int(math.floor(math.log2(L)))
    if kmax < 4:
        return Verdict.UNKNOWN
    ks = np.arange(kmax + 1)
    ell = 2.0 ** ks
    terms = np.exp(prefactor.log_psi0(ell)) * ell ** e * ell
    ratios = terms[-3:] / terms[-4:-1]
    if np.all(ratios < 0.9):
        return Verdict.CONVERGENT
    if np.all(ratios >= 1.0):
        return Verdict.DIVERGENT
    return Verdict.UNKNOWN


def summand_verdict(prefactor: PrefactorSpec, e: float) -> Verdict:
    """Is ``sum_l psi_0(l) l^e`` finite?"""
    fam = prefactor.family
    if fam == "polynomial":
        return Verdict.CONVERGENT if prefactor.alpha - e > 1.0 + 1e-12 else Verdict.DIVERGENT
    if fam == "stretched_exp":
        return Verdict.CONVERGENT
    if fam == "constant":
        return Verdict.DIVERGENT
    return _condensed_verdict(prefactor, e)


@dataclass
class SideAnalysis:
    exponents: list
    verdicts: list
    case: str
    verdict: Verdict
    note: str = ""


def classify_sides(prefactor: PrefactorSpec, profile: IsotropyProfile, d: int) -> SideAnalysis:
    """Per-side criterion sums for a profile that is not quasi-isotropic.

    Both sides summable gives CONVERGENT and both divergent gives DIVERGENT.
    In ``d = 2``, a divergent facet side next to a summable curved side also
    gives DIVERGENT: saturation along the curved arcs would force, by
    convexity of the unit ball of ``nu``, saturation inside the facet, which
    the divergent facet sum forbids.
    """
    if profile.g_form == "nonpower" or not profile.sides:
        return SideAnalysis([], [], "nonpower", Verdict.UNKNOWN, profile.diagnostic)
    exps = [criterion_exponent(sd.kappa, d) for sd in profile.sides]
    verdicts = [summand_verdict(prefactor, e) for e in exps]
    if Verdict.UNKNOWN in verdicts:
        return SideAnalysis(exps, verdicts, "unknown_side", Verdict.UNKNOWN)
    if all(v == Verdict.CONVERGENT for v in verdicts):
        return SideAnalysis(exps, verdicts, "all_sides_summable", Verdict.CONVERGENT)
    if all(v == Verdict.DIVERGENT for v in verdicts):
        return SideAnalysis(exps, verdicts, "all_sides_divergent", Verdict.DIVERGENT)
    facet_div = all(sd.kappa is None for sd, v in zip(profile.sides, verdicts) if v == Verdict.DIVERGENT)
    if d == 2 and facet_div:
        return SideAnalysis(exps, verdicts, "facet_divergent_curved_summable", Verdict.DIVERGENT,
                            "convexity of the nu unit ball forces lambda_sat = 0")
    return SideAnalysis(exps, verdicts, "mixed_undetermined", Verdict.UNKNOWN,
                        "sides disagree and no convexity argument applies")


def criterion_classify(prefactor: PrefactorSpec, profile: IsotropyProfile | None, d: int) -> Verdict:
    """Summability of ``sum_l psi_0(l) (l g^{-1}(1/l))^{d-1}`` with ``g = tau^kappa``."""
    if d == 1:
        return summand_verdict(prefactor, 0.0)
    if profile is None:
        return Verdict.UNKNOWN
    if not profile.quasi_isotropic:
        return classify_sides(prefactor, profile, d).verdict
    if profile.g_form == "zero":
        return summand_verdict(prefactor, criterion_exponent(None, d))
    if profile.g_form != "power":
        return Verdict.UNKNOWN
    return summand_verdict(prefactor, criterion_exponent(profile.kappa, d))


# -- tilted sums --------------------------------------------------------------

@dataclass
class XiResult:
    value: float
    partial: float
    tail_estimate: float
    verdict: Verdict
    R: int
    note: str = ""

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def _log_weights_box(kernel: CouplingKernel, t: np.ndarray, R: int) -> np.ndarray:
    pts = box_points(kernel.d, R)
    out = kernel.log_J(pts) + pts @ t
    idx = (R,) * kernel.d
    out[idx] = -np.inf
    return out


def shell_sums(weights: np.ndarray) -> np.ndarray:
    R = (weights.shape[0] - 1) // 2
    rad = linf_radius(weights.ndim, R)
    return np.bincount(rad.ravel(), weights=weights.ravel(), minlength=R + 1)


def _power_tail(shells: np.ndarray) -> tuple[float, str]:
    R = len(shells) - 1
    k = np.arange(max(2, R // 2), R + 1)
    sk = shells[k]
    if R < 8 or np.any(sk <= 0):
        return 0.0, "tail not estimated"
    beta, logA = np.polyfit(np.log(k), np.log(sk), 1)
    beta = -beta
    if beta <= 1.0:
        return math.inf, f"shell sums decay like k^-{beta:.3f}; tail not resolved at R={R}"
    return float(math.exp(logA) * zeta(beta, R + 1)), ""


def d1_tail(kernel: CouplingKernel, t: float, R: int) -> float:
    """``sum_{|n| > R} J_n e^{t n}`` in d = 1, exact up to round-off."""
    unit = float(evaluate_norm(kernel.norm, np.array([1.0])))
    pre = kernel.prefactor
    total = 0.0
    for sgn in (1.0, -1.0):
        rate = unit - sgn * t
        if rate > 1e-12:
            count = int(min(2_000_000, math.ceil(800.0 / rate) + 10))
            n = sgn * np.arange(R + 1, R + 1 + count, dtype=float)[:, None]
            total += float(np.exp(kernel.log_J(n) + t * n[:, 0]).sum())
            continue
        # zero surcharge along this ray: only psi decays
        if pre.family == "constant":
            return math.inf
        if pre.family == "stretched_exp":
            n = np.arange(R + 1, R + 2_000_001, dtype=float)
            total += float(np.exp(pre.log_psi0(pre_radius_1d(kernel) * n) - kernel.log_Z).sum())
            continue
        if pre.family == "polynomial":
            alpha, logc = pre.alpha, math.log(pre.C) - pre.alpha * math.log(pre_radius_1d(kernel))
        else:
            slope, logc = pre._table_tail()
            alpha = -slope
        if alpha <= 1.0:
            return math.inf
        total += math.exp(logc - kernel.log_Z) * float(zeta(alpha, R + 1))
    return total


def pre_radius_1d(kernel: CouplingKernel) -> float:
    if kernel.prefactor.radius == "norm":
        return float(evaluate_norm(kernel.norm, np.array([1.0])))
    return 1.0


def xi_tilde(kernel: CouplingKernel, t, R: int | None = None,
             profile: IsotropyProfile | None = None) -> XiResult:
    """``sum_{x != 0} psi(x) exp(-s_t(x)) / Z`` over the box, with the criterion verdict.

    Evaluated as ``sum J_x e^{t.x}`` in the log domain.  A DIVERGENT verdict
    sets the value to ``inf``; otherwise a power-law fit of the outer shell
    sums estimates the remainder.
    """
    t = t.t if isinstance(t, DualVector) else np.asarray(t, dtype=float)
    R = kernel.R if R is None else int(R)
    w = np.exp(_log_weights_box(kernel, t, R))
    shells = shell_sums(w)
    partial = float(shells.sum())
    if kernel.d > 1 and profile is None:
        return XiResult(partial, partial, math.nan, Verdict.UNKNOWN, R, "no profile supplied")
    verdict = criterion_classify(kernel.prefactor, profile, kernel.d)
    if verdict == Verdict.DIVERGENT:
        return XiResult(math.inf, partial, math.inf, verdict, R)
    tail, note = _power_tail(shells)
    if kernel.d == 1:
        tail, note = d1_tail(kernel, float(t[0]), R), ""
    value = partial + tail if verdict == Verdict.CONVERGENT else partial
    return XiResult(value, partial, tail, verdict, R, note)


@dataclass
class CondensationHypotheses:
    h1: bool
    h2: bool
    a: float
    c: float
    grid_max_ratio: float
    numeric_only: bool = False
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"H1": self.h1, "H2": self.h2, "a": self.a, "c": self.c,
                "grid_max_ratio": self.grid_max_ratio, "numeric_only": self.numeric_only,
                "notes": self.notes}


def check_condensation_hypotheses(prefactor: PrefactorSpec, nmax: int = 200) -> CondensationHypotheses:
    """Radial monotonicity and ``psi(n) psi(m) <= c psi(n+m) psi(m)^a`` for ``m <= n``.

    Returns the analytic ``(a, c)`` per family and the largest ratio
    ``LHS / RHS`` over the integer grid ``1 <= m <= n <= nmax``.
    """
    fam = prefactor.family
    notes = []
    C = prefactor.C
    if fam == "polynomial":
        a, c = 1.0, 2.0 ** prefactor.alpha
    elif fam == "stretched_exp":
        a, c = 1.0 - prefactor.gamma, C ** prefactor.gamma
    elif fam == "constant":
        a, c = 1.0, 1.0
    else:
        a, c = 1.0, math.nan
    n = np.arange(1, nmax + 1, dtype=float)
    N, M = np.meshgrid(n, n, indexing="ij")
    mask = M <= N
    lp = prefactor.log_psi0
    log_ratio = lp(N) + lp(M) - lp(N + M) - a * lp(M)
    log_ratio = np.where(mask, log_ratio, -np.inf)
    if fam == "custom":
        c = float(np.exp(log_ratio.max()))
        first = np.exp(np.where(N <= nmax // 2, log_ratio, -np.inf).max())
        h2 = bool(c <= 1.01 * first)
        notes.append("custom table: verdict from the sampled grid only")
        return CondensationHypotheses(prefactor.is_monotone(), h2, a, c, 1.0, True, notes)
    grid_max = float(np.exp(log_ratio.max() - math.log(c)))
    h2 = grid_max <= 1.0 + 1e-12
    h1 = prefactor.is_monotone()
    if prefactor.radius != "norm" and fam != "constant":
        notes.append("psi is radial in a different norm than |.|; monotonicity in |.| not guaranteed")
        h1 = False
    return CondensationHypotheses(h1, h2, a, c, grid_max, False, notes)
