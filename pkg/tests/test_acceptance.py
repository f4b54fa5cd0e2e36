"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Every test prints a single ``CRITERION n PASS|FAIL`` line; the lines are
repeated in the terminal summary by ``conftest.py``.
"""
import math
import time

import numpy as np
import pytest

import oracles
from corrlen.couplings import PrefactorSpec, Verdict, classify_sides, criterion_classify, normalize_kernel
from corrlen.diagnostics import PrefactorRegime, giant_step_mass, oz_exponent_fit, prefactor_ratio, step_law
from corrlen.errors import EnumerationBudgetError
from corrlen.geometry import (NormSpec, composite_arc_facet, dual_norm, dual_vector, ell_p,
                              fit_isotropy_profile, surcharge)
from corrlen.greenfn import (convolution_series, lambda_sat, lambda_sat_d1_exact, nu_via_series,
                             nu_via_tilt)
from corrlen.scenario import fan
from corrlen.walkenum import EnumConfig, enumerate_krw, enumerate_saw

RESULTS = []


def report(n, ok, detail):
    line = f"CRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# -- 1 -----------------------------------------------------------------------------
def test_criterion_1_direction_dependent_saturation():
    t0 = time.perf_counter()
    n4 = ell_p(2, 4)
    pre = PrefactorSpec("polynomial", alpha=1.6, radius="euclid")
    axis = fit_isotropy_profile(n4, [0, 1])
    diag = fit_isotropy_profile(n4, [1, 1])
    v_axis = criterion_classify(pre, axis, 2)
    v_diag = criterion_classify(pre, diag, 2)
    t_axis = dual_vector(n4, [0, 1]).t
    t_diag = dual_vector(n4, [1, 1]).t
    dt = time.perf_counter() - t0
    checks = {
        "axis DIVERGENT": v_axis == Verdict.DIVERGENT,
        "diagonal CONVERGENT": v_diag == Verdict.CONVERGENT,
        "kappa axis": abs(axis.kappa - 4) < 0.05,
        "kappa diagonal": abs(diag.kappa - 2) < 0.05,
        "dual axis": np.max(np.abs(t_axis - [0, 1])) < 1e-8,
        "dual diagonal": np.max(np.abs(t_diag - 2 ** -0.75)) < 1e-8,
        "runtime": dt < 10,
    }
    report(1, all(checks.values()),
           f"kappa=({axis.kappa:.5f}, {diag.kappa:.5f}); verdicts=({v_axis.value}, {v_diag.value}); "
           f"failed={[k for k, v in checks.items() if not v]}; {dt:.1f}s")


# -- 2 -----------------------------------------------------------------------------
def test_criterion_2_d1_exact_lambda_sat():
    t0 = time.perf_counter()
    k = normalize_kernel(ell_p(1, 2), PrefactorSpec("polynomial", alpha=2.0), 400)
    exact = lambda_sat_d1_exact(k.norm, k.prefactor)
    est = lambda_sat(k, [1.0]).lam_sat
    dt = time.perf_counter() - t0
    ok = (abs(exact - est) < 1e-6 and abs(exact - oracles.LAMBDA_SAT_D1_ALPHA2) < 1e-11 and dt < 5)
    report(2, ok, f"closed form {exact:.13f}; bisection {est:.13f}; frozen "
                  f"{oracles.LAMBDA_SAT_D1_ALPHA2}; {dt:.1f}s")


# -- 3 -----------------------------------------------------------------------------
def test_criterion_3_saturation_plateau():
    t0 = time.perf_counter()
    k = normalize_kernel(ell_p(1, 2), PrefactorSpec("polynomial", alpha=2.0), 400)
    ls = oracles.LAMBDA_SAT_D1_ALPHA2
    below = [ls * j / 11 for j in range(1, 11)]
    above = [ls + (0.99 - ls) * j / 11 for j in range(1, 11)]
    tilt_below = [nu_via_tilt(k, lam, [1.0]).nu for lam in below]
    slopes = []
    for lam in below:
        f = convolution_series(k, lam, 400, 800)
        slopes.append(nu_via_series(f, [1.0], (100, 380), log_correction=True).nu)
    nus_above = [nu_via_tilt(k, lam, [1.0]).nu for lam in above]
    dt = time.perf_counter() - t0
    worst = max(abs(s - 1) for s in slopes)
    checks = {
        "tilt exactly 1": all(v == 1.0 for v in tilt_below),
        "series slope": worst < 5e-3,
        "strictly decreasing": bool(np.all(np.diff(nus_above) < 0)),
        "margin": max(nus_above) < 1 - 1e-3,
        "runtime": dt < 120,
    }
    report(3, all(checks.values()),
           f"max |slope-1|={worst:.2e}; nu above in [{min(nus_above):.4f}, {max(nus_above):.4f}]; "
           f"failed={[c for c, v in checks.items() if not v]}; {dt:.1f}s")


# -- 4 -----------------------------------------------------------------------------
def test_criterion_4_enumeration_oracle():
    t0 = time.perf_counter()
    kernels = {1: normalize_kernel(ell_p(1, 2), PrefactorSpec("polynomial", alpha=2.0), 40),
               2: normalize_kernel(ell_p(2, 1), PrefactorSpec("constant"), 40)}
    lam = 0.7
    worst, n_cfg, skipped, saw_ok = 0.0, 0, [], True
    for d, k in kernels.items():
        for R in range(1, 5):
            for K in range(1, 7):
                cfg = EnumConfig(k, R, K, lam)
                f = convolution_series(k, lam, R, K, method="direct")
                ends = [np.zeros(d, int), np.eye(d, dtype=int)[0], np.full(d, R)]
                try:
                    for x in ends:
                        krw = enumerate_krw(cfg, x)
                        ref = math.exp(f.log_value(x))
                        worst = max(worst, abs(krw - ref) / ref)
                        saw_ok &= enumerate_saw(cfg, x) <= krw * (1 + 1e-15)
                    n_cfg += 1
                except EnumerationBudgetError as exc:
                    skipped.append((d, R, K, f"{exc.projected:.2e}"))
    dt = time.perf_counter() - t0
    ok = worst < 1e-12 and saw_ok and dt < 60
    report(4, ok, f"{n_cfg} configs; max rel err {worst:.1e}; SAW<=KRW {saw_ok}; "
                  f"over budget (d,R,K,walks)={skipped}; {dt:.1f}s")


# -- 5 -----------------------------------------------------------------------------
def test_criterion_5_oz_exponent():
    t0 = time.perf_counter()
    k1 = normalize_kernel(ell_p(1, 2), PrefactorSpec("polynomial", alpha=2.0), 400)
    lam1 = (oracles.LAMBDA_SAT_D1_ALPHA2 + 1) / 2
    e1 = nu_via_tilt(k1, lam1, [1.0])
    fit1 = oz_exponent_fit(convolution_series(k1, lam1, 400, 800), e1, (100, 380))
    k2 = normalize_kernel(ell_p(2, 1), PrefactorSpec("constant"), 60)
    lam2 = 0.6
    e2 = nu_via_tilt(k2, lam2, [1, 0])
    f2 = convolution_series(k2, lam2, 130, 300, gauge=0.9 * e2.t_star)
    fit2 = oz_exponent_fit(f2, e2, (30, 120))
    dt = time.perf_counter() - t0
    ok = (-0.15 <= fit1.rho <= 0.15 and -0.65 <= fit2.rho <= -0.35 and not e2.saturated and dt < 600)
    report(5, ok, f"d=1 rho={fit1.rho:.3e} ({fit1.label.value}); d=2 rho={fit2.rho:.4f} "
                  f"({fit2.label.value}); {dt:.1f}s")


# -- 6 -----------------------------------------------------------------------------
def test_criterion_6_condensation():
    k = normalize_kernel(ell_p(1, 2), PrefactorSpec("polynomial", alpha=3.0), 60)
    ls = oracles.LAMBDA_SAT_D1_ALPHA3
    low = convolution_series(k, ls / 2, 400, 800)
    # the series is first checked against the generating-function oracle
    ns = [50, 100, 200, 300]
    oracle_err = float(np.max(np.abs([low.log_value([n]) for n in ns] - oracles.d1_green(3.0, ls / 2, ns))))
    r = prefactor_ratio(low, k, [1.0], (50, 300))
    gm_low = giant_step_mass(k, ls / 2, [1.0], 300, 0.5, fields=(low,)).giant_mass
    lam_hi = (ls + 1) / 2
    high = convolution_series(k, lam_hi, 400, 800)
    gm_high = giant_step_mass(k, lam_hi, [1.0], 300, 0.5, fields=(high,)).giant_mass
    checks = {
        "oracle": oracle_err < 1e-7,
        "max/min<10": r.max / r.min < 10,
        "|log-slope|<=0.05": abs(r.slope) <= 0.05,
        "giant>0.9 below": gm_low > 0.9,
        "giant<0.1 above": gm_high < 0.1,
    }
    report(6, all(checks.values()),
           f"G/J in [{r.min:.4f}, {r.max:.4f}]; log-slope {r.slope:+.4f}; giant mass {gm_low:.5f} / "
           f"{gm_high:.2e}; oracle err {oracle_err:.1e}; failed={[c for c, v in checks.items() if not v]}")


# -- 7 -----------------------------------------------------------------------------
def test_criterion_7_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20261015)
    norms = [ell_p(2, 1), ell_p(2, 2), ell_p(2, 4), ell_p(3, 3), ell_p(2, math.inf), composite_arc_facet(),
             NormSpec("weighted_ell_p", 2, p=3, weights=(1.0, 2.5))]
    min_sur = math.inf
    for _ in range(10_000):
        nm = norms[rng.integers(len(norms))]
        u = rng.normal(size=nm.d)
        t = rng.uniform() * u / dual_norm(nm, u)
        x = rng.integers(-50, 51, size=nm.d)
        min_sur = min(min_sur, surcharge(nm, t, x))
    sur_ok = min_sur >= 0

    k2 = normalize_kernel(ell_p(2, 2), PrefactorSpec("polynomial", alpha=3.0), 40)
    lam = 0.7
    ests = [nu_via_tilt(k2, lam, s) for s in fan(2, 16)]
    q = [e.nu for e in ests]
    equiv_ok = 2 * min(q) >= max(q) >= min(q)
    circle = np.array([q[(a if a <= 90 else 180 - a) // 6] for a in ((6 * i) % 180 for i in range(60))])
    tri_worst = -math.inf
    for _ in range(1000):
        i = int(rng.integers(60))
        j = i + int(rng.integers(1, 30))
        kk = int(rng.integers(i, j + 1))
        U = [np.array([math.cos(math.pi * m / 30), math.sin(math.pi * m / 30)]) for m in (i, j, kk)]
        a, b = np.linalg.solve(np.column_stack(U[:2]), U[2])
        tri_worst = max(tri_worst, circle[kk % 60] - a * circle[i % 60] - b * circle[j % 60])
    tri_ok = tri_worst <= 1e-9

    k1 = normalize_kernel(ell_p(1, 2), PrefactorSpec("polynomial", alpha=2.0), 400)
    curves = {"d=1": [nu_via_tilt(k1, x, [1.0]) for x in np.linspace(0.05, 0.99, 25)]}
    for s in ([1, 0], [1, 1]):
        curves[f"d=2 {s}"] = [nu_via_tilt(k2, x, s) for x in (0.3, 0.5, 0.7, 0.9)]
    mono_ok = all(np.all(np.diff([e.nu for e in c]) <= 0) for c in curves.values())
    sums = [step_law(k1, e.lam, e.t_star).total for e in curves["d=1"] if not e.saturated]
    sums += [step_law(k2, e.lam, e.t_star, e.s).total for c in list(curves.values())[1:] for e in c
             if not e.saturated]
    sums += [step_law(k2, lam, e.t_star, e.s).total for e in ests if not e.saturated]
    step_worst = max(abs(x - 1) for x in sums)
    dt = time.perf_counter() - t0
    ok = sur_ok and equiv_ok and tri_ok and mono_ok and step_worst < 1e-8 and dt < 300
    report(7, ok, f"min surcharge {min_sur:.2e}; nu-/nu+ = {min(q):.5f}/{max(q):.5f}; "
                  f"triangle worst {tri_worst:.1e}; monotone {mono_ok}; "
                  f"max |sum w - 1| {step_worst:.1e} over {len(sums)} roots; {dt:.1f}s")


# -- 8 -----------------------------------------------------------------------------
def test_criterion_8_quasi_isotropy_failure():
    c = composite_arc_facet()
    s = np.array([2.0, 1.0]) / math.sqrt(5)
    prof = fit_isotropy_profile(c, s)
    pre = PrefactorSpec("polynomial", alpha=1.7)
    sides = classify_sides(pre, prof, 2)
    by_kind = {("facet" if sd.kappa is None else "curved"): (e, v.value)
               for sd, e, v in zip(prof.sides, sides.exponents, sides.verdicts)}
    k = normalize_kernel(c, pre, 60)
    rep = lambda_sat(k, s, prof)
    ok = (not prof.quasi_isotropic and by_kind.get("facet") == (1.0, "DIVERGENT")
          and by_kind.get("curved") == (0.5, "CONVERGENT")
          and sides.case == "facet_divergent_curved_summable" and rep.lam_sat == 0.0)
    report(8, ok, f"quasi-isotropic={prof.quasi_isotropic}; sides={by_kind}; case={sides.case}; "
                  f"lambda_sat={rep.lam_sat}")
