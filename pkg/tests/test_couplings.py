import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from corrlen import binfmt
from corrlen.couplings import (CouplingKernel, PrefactorSpec, Verdict, check_condensation_hypotheses,
                               criterion_classify, criterion_exponent, normalize_kernel,
                               summand_verdict, xi_tilde)
from corrlen.errors import KernelTruncationError, ValidationError
from corrlen.geometry import composite_arc_facet, dual_vector, ell_p, fit_isotropy_profile

POLY2 = PrefactorSpec("polynomial", alpha=2.0)


def test_d1_normalizer_exact():
    k = normalize_kernel(ell_p(1, 2), POLY2, 40)
    n = np.arange(-40, 41)
    n = n[n != 0]
    assert np.allclose(k.log_J(n[:, None]), oracles.d1_log_J(2.0, n), rtol=0, atol=1e-13)
    assert k.mass() + k.tail_bound == pytest.approx(1.0, abs=1e-14)


def test_d2_l1_constant_normalizer():
    k = normalize_kernel(ell_p(2, 1), PrefactorSpec("constant"), 60)
    assert k.Z == pytest.approx(oracles.l1_constant_Z(), rel=1e-12)
    assert k.values[60, 60] == 0.0
    assert k.J([[1, 0]]) == pytest.approx(math.exp(-1) / oracles.l1_constant_Z(), rel=1e-14)


def test_truncation_error_suggests_radius():
    with pytest.raises(KernelTruncationError) as exc:
        normalize_kernel(ell_p(2, 1), PrefactorSpec("constant"), 10)
    R = exc.value.suggested_R
    assert R is not None and R > 10
    normalize_kernel(ell_p(2, 1), PrefactorSpec("constant"), R)


def test_kernel_symmetry_and_positivity():
    k = normalize_kernel(ell_p(2, 4), PrefactorSpec("polynomial", alpha=1.6, radius="euclid"), 60)
    v = k.values
    assert np.all(v >= 0)
    assert np.allclose(v, v[::-1, ::-1]) and np.allclose(v, v.T)
    assert k.mass() <= 1.0 and k.mass() + k.tail_bound >= 1.0 - 1e-15


def test_truncated_kernel_drops_long_steps():
    k = normalize_kernel(ell_p(1, 2), POLY2, 40)
    kt = k.truncated(10.0)
    assert kt.J([[9]]) == k.J([[9]])
    assert kt.J([[10]]) == 0.0 and kt.J([[-25]]) == 0.0


@pytest.mark.parametrize("cfg", [
    {"family": "polynomial", "alpha": 2.5, "radius": "l1"},
    {"family": "stretched_exp", "a": 2.0, "gamma": 0.3, "C": 0.5},
    {"family": "constant"},
    {"family": "custom", "table": [1.0 / n ** 2 for n in range(1, 41)]},
])
def test_prefactor_roundtrip(cfg):
    p = PrefactorSpec.from_config(cfg)
    assert PrefactorSpec.from_config(p.to_config()) == p


def test_prefactor_validation():
    with pytest.raises(ValidationError):
        PrefactorSpec("stretched_exp", gamma=1.5)
    with pytest.raises(ValidationError):
        PrefactorSpec("polynomial", alpha=2, radius="sup")


def test_custom_table_extrapolates_power_law():
    p = PrefactorSpec("custom", table=tuple(1.0 / n ** 3 for n in range(1, 41)))
    assert p.psi0(100.0) == pytest.approx(1e-6, rel=1e-6)
    assert p.radius == "l1"


def test_binfmt_roundtrip(tmp_path):
    k = normalize_kernel(ell_p(2, 1), PrefactorSpec("constant"), 40)
    k.save(tmp_path / "k.bin")
    k2 = CouplingKernel.load(tmp_path / "k.bin", k.norm, k.prefactor)
    assert np.array_equal(k2.values, k.values)
    with pytest.raises(ValidationError):
        CouplingKernel.load(tmp_path / "k.bin", k.norm, PrefactorSpec("constant", C=2.0))


def test_binfmt_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"XXXX" + bytes(60))
    with pytest.raises(ValidationError):
        binfmt.read_box(p)


@given(st.integers(1, 3), st.integers(1, 6), st.sampled_from(["kernel", "green", "log_green"]),
       st.floats(0, 1))
@settings(max_examples=30, deadline=None)
def test_binfmt_property(d, R, kind, lam):
    import tempfile
    arr = np.random.default_rng(R).normal(size=(2 * R + 1,) * d)
    with tempfile.TemporaryDirectory() as tmp:
        path = f"{tmp}/a.bin"
        binfmt.write_box(path, kind, arr, binfmt.sha256_bytes("x"), lam)
        k2, a2, h, l2 = binfmt.read_box(path)
    assert k2 == kind and l2 == lam and np.array_equal(a2, arr) and h == binfmt.sha256_bytes("x")


def test_criterion_exponents():
    assert criterion_exponent(4.0, 2) == 0.75
    assert criterion_exponent(2.0, 2) == 0.5
    assert criterion_exponent(2.0004, 2) == 0.5
    assert criterion_exponent(None, 2) == 1.0
    assert criterion_exponent(2.0, 3) == 1.0
    assert criterion_exponent(7.0, 1) == 0.0


def test_summand_verdicts():
    assert summand_verdict(PrefactorSpec("polynomial", alpha=1.6), 0.5) == Verdict.CONVERGENT
    assert summand_verdict(PrefactorSpec("polynomial", alpha=1.6), 0.75) == Verdict.DIVERGENT
    assert summand_verdict(PrefactorSpec("polynomial", alpha=2.0), 1.0) == Verdict.DIVERGENT
    assert summand_verdict(PrefactorSpec("stretched_exp"), 5.0) == Verdict.CONVERGENT
    assert summand_verdict(PrefactorSpec("constant"), 0.0) == Verdict.DIVERGENT
    fast = PrefactorSpec("custom", table=tuple(n ** -3.0 for n in range(1, 257)))
    slow = PrefactorSpec("custom", table=tuple(n ** -1.5 for n in range(1, 257)))
    assert summand_verdict(fast, 1.0) == Verdict.CONVERGENT
    assert summand_verdict(slow, 1.0) == Verdict.DIVERGENT


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(0.0, 4.0), st.sampled_from([0.0, 0.5, 0.75, 1.0, 2.0]))
def test_criterion_monotone_in_alpha(a1, a2, e):
    lo, hi = sorted((a1, a2))
    order = {Verdict.DIVERGENT: 0, Verdict.CONVERGENT: 1}
    v_lo = summand_verdict(PrefactorSpec("polynomial", alpha=lo), e)
    v_hi = summand_verdict(PrefactorSpec("polynomial", alpha=hi), e)
    assert order[v_lo] <= order[v_hi]


def test_composite_side_cases():
    prof = fit_isotropy_profile(composite_arc_facet(), [2, 1])
    assert criterion_classify(PrefactorSpec("polynomial", alpha=1.7), prof, 2) == Verdict.DIVERGENT
    assert criterion_classify(PrefactorSpec("polynomial", alpha=2.5), prof, 2) == Verdict.CONVERGENT
    assert criterion_classify(PrefactorSpec("polynomial", alpha=1.2), prof, 2) == Verdict.DIVERGENT


def test_xi_partial_monotone_in_R():
    n4 = ell_p(2, 4)
    k = normalize_kernel(n4, PrefactorSpec("polynomial", alpha=1.6, radius="euclid"), 60)
    prof = fit_isotropy_profile(n4, [1, 1])
    t = dual_vector(n4, [1, 1]).t
    parts = [xi_tilde(k, t, R, prof).partial for R in (10, 20, 40, 80)]
    assert np.all(np.diff(parts) > 0)


def test_xi_d1_matches_closed_form():
    k = normalize_kernel(ell_p(1, 2), POLY2, 40)
    xi = xi_tilde(k, [1.0])
    assert 1 / xi.value == pytest.approx(oracles.d1_lambda_sat(2.0), rel=1e-12)


def test_condensation_hypotheses():
    h = check_condensation_hypotheses(PrefactorSpec("polynomial", alpha=3))
    assert h.h1 and h.h2 and h.c == 8
    h = check_condensation_hypotheses(PrefactorSpec("stretched_exp", gamma=0.5))
    assert h.h2 and h.a == 0.5
    h = check_condensation_hypotheses(PrefactorSpec("polynomial", alpha=3, radius="euclid"))
    assert not h.h1


def test_subexponential_check():
    assert PrefactorSpec("polynomial", alpha=3).check_subexponential()
    assert PrefactorSpec("stretched_exp", gamma=0.5).check_subexponential()
    assert not PrefactorSpec("stretched_exp", a=1.0, gamma=0.99).check_subexponential(radii=[10, 100])
