"""Scenario-driven command line front end.

Every command reads one scenario JSON file and writes CSV/JSON (and, for
``prefactor`` and ``report``, SVG and PNG) files into the output directory.
Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import matplotlib
import mpmath
import numpy as np
import scipy

from . import __version__, couplings, diagnostics, geometry, greenfn, plotting
from .couplings import check_condensation_hypotheses, classify_sides, criterion_classify, normalize_kernel
from .errors import NumericFailure, ValidationError
from .scenario import Scenario

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


class Run:
    def __init__(self, scenario: Scenario, out: Path, threads: int = 1, precision: int = 12):
        if threads < 1:
            raise ValidationError("--threads must be >= 1")
        if not (1 <= precision <= 17):
            raise ValidationError("--precision must lie in [1, 17]")
        self.sc = scenario
        self.out = out
        self.threads = threads
        self.precision = precision
        self._kernel = None
        self._profiles = {}
        self.failures = 0
        out.mkdir(parents=True, exist_ok=True)

    # -- shared state ------------------------------------------------------
    @property
    def kernel(self):
        if self._kernel is None:
            self._kernel = normalize_kernel(self.sc.norm, self.sc.prefactor, self.sc.kernel_R, self.sc.tail_tol)
        return self._kernel

    def profile(self, i):
        if i not in self._profiles:
            self._profiles[i] = geometry.fit_isotropy_profile(self.sc.norm, self.sc.directions[i])
        return self._profiles[i]

    def pmap(self, fn, items):
        items = list(items)
        if self.threads == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    def isolated(self, fn):
        """Wrap ``fn`` so a numeric failure becomes an error record."""
        def wrapped(x):
            try:
                return fn(x), None
            except NumericFailure as exc:
                return None, f"{type(exc).__name__}: {exc}"
        return wrapped

    # -- output --------------------------------------------------------------
    def tolerances(self) -> dict:
        return {
            "surcharge_clamp": geometry.SURCHARGE_CLAMP, "facet_threshold": geometry.FACET_THRESHOLD,
            "isotropy_tol": geometry.ISOTROPY_TOL, "kappa_snap": couplings.KAPPA_SNAP,
            "kernel_tail_tol": self.sc.tail_tol, "wulff_boundary_tol": greenfn.BOUNDARY_TOL,
            "near_critical_fraction": greenfn.NEAR_CRITICAL_FRACTION, "oz_tol": diagnostics.OZ_TOL,
            "oz_residual_tol": diagnostics.RESIDUAL_TOL, "ratio_bound": diagnostics.RATIO_BOUND,
            "ratio_slope_tol": diagnostics.SLOPE_TOL,
        }

    def meta(self) -> dict:
        return {"scenario_sha256": self.sc.sha256, "scenario_name": self.sc.name,
                "versions": {"corrlen": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                             "mpmath": mpmath.__version__, "matplotlib": matplotlib.__version__},
                "tolerances": self.tolerances(), "assumptions": [greenfn.LAMBDA_EXP_NOTE]}

    def fmt(self, v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            v = float(v)
            if math.isinf(v):
                return "inf" if v > 0 else "-inf"
            if math.isnan(v):
                return "nan"
            return f"{v:.{self.precision}g}"
        if v is None:
            return ""
        return str(v)

    def write_csv(self, name: str, header: list, rows: list) -> Path:
        path = self.out / name
        m = self.meta()
        with open(path, "w", newline="") as fh:
            fh.write(f"# scenario_sha256={m['scenario_sha256']}\n")
            fh.write("# versions=" + " ".join(f"{k}={v}" for k, v in m["versions"].items()) + "\n")
            fh.write("# tolerances=" + " ".join(f"{k}={v}" for k, v in m["tolerances"].items()) + "\n")
            fh.write(f"# assumption={greenfn.LAMBDA_EXP_NOTE}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([self.fmt(v) for v in r])
        return path

    def write_json(self, name: str, payload) -> Path:
        path = self.out / name
        doc = {"meta": self.meta(), "data": payload}
        path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
        return path

    def dir_cols(self, i):
        return [i] + [float(v) for v in self.sc.directions[i]]

    def dir_header(self):
        return ["direction"] + [f"s{j + 1}" for j in range(self.sc.d)]


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        o = float(o)
        return o if math.isfinite(o) else ("inf" if o > 0 else "-inf" if o < 0 else "nan")
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if hasattr(o, "value") and isinstance(getattr(o, "value"), str):
        return o.value
    return o


# -- commands -------------------------------------------------------------------

def cmd_geometry(run: Run) -> int:
    sc = run.sc
    pts = couplings.box_points(sc.d, 2).reshape(-1, sc.d)
    pts = pts[np.any(pts != 0, axis=1)]

    def one(i):
        dv = geometry.dual_vector(sc.norm, sc.directions[i])
        prof = run.profile(i)
        sur = geometry.surcharge(sc.norm, dv, pts)
        return dv, prof, sur

    res = run.pmap(run.isolated(one), range(len(sc.directions)))
    rows, docs = [], []
    for i, (r, err) in enumerate(res):
        if err:
            run.failures += 1
            rows.append(run.dir_cols(i) + [None] * (sc.d + 9) + [err])
            docs.append({"direction": i, "error": err})
            continue
        dv, prof, sur = r
        ks = [k for k in prof.kappas if k is not None]
        rows.append(run.dir_cols(i) + [float(v) for v in dv.t] + [
            dv.unique, prof.kappa, min(ks) if ks else None, max(ks) if ks else None,
            prof.c_minus, prof.c_plus, prof.g_form, prof.quasi_isotropic, float(sur.min()), ""])
        docs.append({"direction": i, "s": dv.s, "t": dv.t, "unique": dv.unique, "residual": dv.residual,
                     "profile": prof.to_dict(),
                     "surcharge_samples": [{"x": p, "value": float(v)} for p, v in zip(pts, sur)]})
    run.write_csv("geometry.csv", run.dir_header() + [f"t{j + 1}" for j in range(sc.d)] + [
        "unique", "kappa", "kappa_min", "kappa_max", "c_minus", "c_plus", "g_form", "quasi_isotropic",
        "min_surcharge", "error"], rows)
    run.write_json("geometry.json", docs)
    return EXIT_NUMERIC if run.failures else EXIT_OK


def cmd_criterion(run: Run) -> int:
    sc = run.sc
    k = run.kernel

    def one(i):
        dv = geometry.dual_vector(sc.norm, sc.directions[i])
        prof = run.profile(i) if sc.d > 1 else None
        verdict = criterion_classify(sc.prefactor, prof, sc.d)
        exps = ([couplings.criterion_exponent(prof.kappa if prof.g_form == "power" else None, sc.d)]
                if prof is not None and prof.quasi_isotropic else [0.0] if sc.d == 1 else [])
        sides = classify_sides(sc.prefactor, prof, sc.d) if prof is not None and not prof.quasi_isotropic else None
        xi = couplings.xi_tilde(k, dv.t, greenfn.boundary_radius(k), prof)
        return verdict, exps, sides, xi

    res = run.pmap(run.isolated(one), range(len(sc.directions)))
    rows, docs = [], []
    for i, (r, err) in enumerate(res):
        if err:
            run.failures += 1
            rows.append(run.dir_cols(i) + [None] * 6 + [err])
            docs.append({"direction": i, "error": err})
            continue
        verdict, exps, sides, xi = r
        exps_all = sides.exponents if sides else exps
        lam_t = min(1.0 / xi.value, 1.0) if xi.finite else 0.0
        rows.append(run.dir_cols(i) + [verdict.value, ";".join(run.fmt(e) for e in exps_all),
                                       sides.case if sides else "quasi_isotropic", xi.value, xi.partial,
                                       lam_t, ""])
        docs.append({"direction": i, "verdict": verdict, "exponents": exps_all,
                     "side_verdicts": sides.verdicts if sides else None,
                     "case": sides.case if sides else None, "note": sides.note if sides else "",
                     "xi_tilde": xi.value, "xi_partial": xi.partial, "xi_tail": xi.tail_estimate,
                     "lambda_tilde": lam_t})
    hyp = check_condensation_hypotheses(sc.prefactor).as_dict()
    run.write_csv("criterion.csv", run.dir_header() + ["verdict", "exponents", "case", "xi_tilde",
                                                       "xi_partial", "lambda_tilde", "error"], rows)
    run.write_json("criterion.json", {"directions": docs, "condensation_hypotheses": hyp,
                                      "subexponential": sc.prefactor.check_subexponential()})
    return EXIT_NUMERIC if run.failures else EXIT_OK


def _nu_rows(run: Run):
    sc = run.sc
    k = run.kernel
    tasks = [(i, lam) for i in range(len(sc.directions)) for lam in sc.lambdas]

    def one(task):
        i, lam = task
        s = sc.directions[i]
        norm_s = float(geometry.evaluate_norm(sc.norm, s))
        est = greenfn.nu_via_tilt(k, lam, s, run.profile(i) if sc.d > 1 else None)
        out = [(est, greenfn.regime_label(est, norm_s))]
        if sc.series:
            f = _series_field(run, lam, est)
            ser = greenfn.nu_via_series(f, s, sc.series["n_range"], log_correction=True)
            out.append((ser, greenfn.regime_label(est, norm_s)))
        return out

    return tasks, run.pmap(run.isolated(one), tasks)


def _series_field(run: Run, lam: float, est):
    sc = run.sc
    cfg = sc.series
    gauge = None
    if sc.d > 1 and cfg.get("gauge", True) and est is not None and est.t_star is not None:
        gauge = 0.95 * est.t_star
    return greenfn.convolution_series(run.kernel, lam, int(cfg["R"]), int(cfg["K"]), gauge=gauge)


def cmd_nu_scan(run: Run) -> int:
    if not run.sc.lambdas:
        raise ValidationError("nu-scan needs a lambda grid")
    tasks, res = _nu_rows(run)
    rows = []
    for (i, lam), (r, err) in zip(tasks, res):
        if err:
            run.failures += 1
            rows.append(run.dir_cols(i) + [lam, None, None, None, None, err])
            continue
        for est, reg in r:
            rows.append(run.dir_cols(i) + [lam, est.nu, est.method.value, reg.value,
                                           None if est.band is None else est.band[1] - est.band[0], ""])
    run.write_csv("nu_scan.csv", run.dir_header() + ["lambda", "nu", "method", "regime", "band_width",
                                                     "error"], rows)
    return EXIT_NUMERIC if run.failures else EXIT_OK


def _saturation_reports(run: Run):
    sc = run.sc
    k = run.kernel

    def one(i):
        return greenfn.lambda_sat(k, sc.directions[i], run.profile(i) if sc.d > 1 else None, sc.lambdas)

    return run.pmap(run.isolated(one), range(len(sc.directions)))


def cmd_saturation(run: Run) -> tuple[int, list]:
    res = _saturation_reports(run)
    phase, curve, docs = [], [], []
    for i, (rep, err) in enumerate(res):
        if err:
            run.failures += 1
            phase.append(run.dir_cols(i) + [None] * 6 + [err])
            docs.append({"direction": i, "error": err})
            continue
        phase.append(run.dir_cols(i) + [rep.verdict.value, rep.lam_tilde, rep.lam_sat, rep.lam_sat_exact,
                                        rep.lower_bound_only, rep.side_case or "", ""])
        for lam, nu, reg in zip(rep.lambdas, rep.nus, rep.regimes):
            curve.append(run.dir_cols(i) + [lam, nu, "TILT", reg.value])
        docs.append({"direction": i, **rep.to_dict()})
    run.write_csv("saturation_phase.csv", run.dir_header() + [
        "verdict", "lambda_tilde", "lambda_sat", "lambda_sat_exact", "lower_bound_only", "side_case", "error"],
        phase)
    run.write_csv("nu_curves.csv", run.dir_header() + ["lambda", "nu", "method", "regime"], curve)
    run.write_json("saturation.json", docs)
    return (EXIT_NUMERIC if run.failures else EXIT_OK), res


def cmd_prefactor(run: Run) -> tuple[int, list]:
    sc = run.sc
    if not sc.series:
        raise ValidationError("prefactor needs a 'series' block")
    if not sc.lambdas:
        raise ValidationError("prefactor needs a lambda grid")
    k = run.kernel
    n_range = tuple(sc.series["n_range"])
    rho_cut = float(sc.diagnostics.get("rho_cut", 0.5))
    giant_n = int(sc.diagnostics.get("giant_n", n_range[1]))
    tasks = [(i, lam) for i in range(len(sc.directions)) for lam in sc.lambdas]

    def one(task):
        i, lam = task
        s = sc.directions[i]
        est = greenfn.nu_via_tilt(k, lam, s, run.profile(i) if sc.d > 1 else None)
        f = _series_field(run, lam, est)
        fit = diagnostics.oz_exponent_fit(f, est, n_range, k)
        gm = diagnostics.giant_step_mass(k, lam, s, giant_n, rho_cut, fields=(f,))
        ns = np.arange(n_range[0], n_range[1] + 1)
        pts = np.array([greenfn.lattice_point(est.s, n) for n in ns])
        y = np.array([f.log_value(p) for p in pts]) + est.nu * (pts @ est.s)
        return est, fit, gm, (np.log(pts @ est.s), y)

    res = run.pmap(run.isolated(one), tasks)
    rows, docs, curves = [], [], {}
    for (i, lam), (r, err) in zip(tasks, res):
        if err:
            run.failures += 1
            rows.append(run.dir_cols(i) + [lam] + [None] * 10 + [err])
            continue
        est, fit, gm, curve = r
        curves.setdefault(i, []).append((f"lambda={lam:.4g}", *curve))
        rows.append(run.dir_cols(i) + [lam, est.nu, est.saturated, fit.rho, fit.label.value, fit.ratio.min,
                                       fit.ratio.max, fit.ratio.slope, gm.giant_mass,
                                       None if fit.step is None else fit.step.total,
                                       None if fit.step is None else fit.step.drift, ""])
        docs.append({"direction": i, "lambda": lam, "nu": est.to_dict(), "fit": fit.to_dict(),
                     "giant": {"n": gm.n, "rho_cut": gm.rho_cut, "giant_mass": gm.giant_mass}})
    run.write_csv("prefactor_phase.csv", run.dir_header() + [
        "lambda", "nu", "saturated", "rho", "label", "ratio_min", "ratio_max", "ratio_slope", "giant_mass",
        "step_sum", "drift", "error"], rows)
    run.write_json("prefactor.json", docs)
    for i, cs in curves.items():
        plotting.write_svg_polylines(run.out / f"prefactor_dir{i}.svg", cs, "log n", "log G + nu n",
                                     f"direction {i}", digits=run.precision)
    return (EXIT_NUMERIC if run.failures else EXIT_OK), curves


def cmd_report(run: Run) -> int:
    sc = run.sc
    codes = [cmd_geometry(run), cmd_criterion(run)]
    code, reps = cmd_saturation(run)
    codes.append(code)
    if sc.d > 1:
        plotting.plot_profiles(run.out / "profiles.png",
                               [(f"dir {i}", run.profile(i)) for i in range(len(sc.directions))
                                if i in run._profiles])
    good = [(i, r) for i, (r, err) in enumerate(reps) if r is not None]
    if sc.lambdas and good:
        curves = [(f"dir {i}", r.lambdas, r.nus) for i, r in good]
        norms = [float(geometry.evaluate_norm(sc.norm, sc.directions[i])) for i, _ in good]
        plotting.plot_nu_curves(run.out / "nu_curves.png", curves, norms)
        plotting.write_svg_polylines(run.out / "nu_curves.svg", curves, "lambda", "nu",
                                     digits=run.precision)
    if good:
        plotting.plot_saturation_phase(run.out / "saturation_phase.png",
                                       [plotting.angle_of(sc.directions[i]) for i, _ in good],
                                       [r.lam_sat for _, r in good], [r.lam_tilde for _, r in good])
    if sc.series and sc.lambdas:
        code, curves = cmd_prefactor(run)
        codes.append(code)
        for i, cs in curves.items():
            plotting.plot_prefactor(run.out / f"prefactor_dir{i}.png", cs, sc.d)
    return max(codes)


COMMANDS = {
    "geometry": cmd_geometry,
    "criterion": cmd_criterion,
    "nu-scan": cmd_nu_scan,
    "saturation": lambda run: cmd_saturation(run)[0],
    "prefactor": lambda run: cmd_prefactor(run)[0],
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrlen", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"corrlen {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", default=None, help="output directory (overrides the scenario)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--precision", type=int, default=12, help="significant digits in tables")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        sc = Scenario.load(args.scenario)
        out = Path(args.out or sc.output or "corrlen_out")
        run = Run(sc, out, args.threads, args.precision)
        code = COMMANDS[args.command](run)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericFailure as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if code:
        print(f"{run.failures} task(s) failed; see the error column", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
