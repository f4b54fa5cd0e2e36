import numpy as np
import pytest

import oracles
from corrlen.couplings import PrefactorSpec, normalize_kernel
from corrlen.diagnostics import (PrefactorRegime, giant_step_mass, oz_exponent_fit, prefactor_ratio,
                                 step_law)
from corrlen.errors import ValidationError
from corrlen.geometry import ell_p
from corrlen.greenfn import convolution_series, nu_via_tilt

LS3 = oracles.LAMBDA_SAT_D1_ALPHA3


@pytest.fixture(scope="module")
def k3():
    return normalize_kernel(ell_p(1, 2), PrefactorSpec("polynomial", alpha=3.0), 60)


@pytest.fixture(scope="module")
def low_field(k3):
    return convolution_series(k3, LS3 / 2, 200, 400)


def test_ratio_bounded_below_saturation(k3, low_field):
    r = prefactor_ratio(low_field, k3, [1.0], (20, 150))
    assert r.max / r.min < 10
    assert np.all(r.ratios > 1)


def test_gff_ratio_uses_same_scale(k3, low_field):
    from corrlen.greenfn import gff_green
    g = gff_green(low_field, LS3 / 2)
    a = prefactor_ratio(low_field, k3, [1.0], (20, 150))
    b = prefactor_ratio(g, k3, [1.0], (20, 150))
    assert np.allclose(a.log_ratio, b.log_ratio)


def test_giant_mass_monotone_in_cut(k3, low_field):
    gm = [giant_step_mass(k3, LS3 / 2, [1.0], 100, rc, fields=(low_field,)).giant_mass
          for rc in (0.2, 0.4, 0.6, 0.8)]
    assert np.all(np.diff(gm) <= 1e-12)
    assert gm[1] > 0.9


def test_giant_mass_small_above_saturation(k3):
    lam = (LS3 + 1) / 2
    assert giant_step_mass(k3, lam, [1.0], 100, 0.5, R=200, K=400).giant_mass < 0.1


def test_giant_mass_validation(k3):
    with pytest.raises(ValidationError):
        giant_step_mass(k3, 0.3, [1.0], 10, 1.5)


def test_oz_fit_d1(k3):
    lam = (LS3 + 1) / 2
    est = nu_via_tilt(k3, lam, [1.0])
    f = convolution_series(k3, lam, 300, 600)
    fit = oz_exponent_fit(f, est, (50, 250))
    assert fit.label == PrefactorRegime.OZ
    assert abs(fit.rho) < 0.15
    assert fit.step.total == pytest.approx(1.0, abs=1e-8)


def test_condensed_label_below_saturation(k3):
    est = nu_via_tilt(k3, LS3 / 4, [1.0])
    f = convolution_series(k3, LS3 / 4, 200, 400)
    fit = oz_exponent_fit(f, est, (50, 190))
    assert fit.label == PrefactorRegime.CONDENSED
    assert any("SATURATED" in n for n in fit.notes)


def test_step_law_axis_symmetry():
    k = normalize_kernel(ell_p(2, 1), PrefactorSpec("constant"), 60)
    est = nu_via_tilt(k, 0.6, [1, 0])
    law = step_law(k, 0.6, est.t_star, [1, 0])
    assert law.total == pytest.approx(1.0, abs=1e-8)
    assert law.drift > 0 and law.transverse < 1e-8
