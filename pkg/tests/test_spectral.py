import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from willmore_lab import geometry as geo
from willmore_lab import mesh as ms
from willmore_lab import spectral as sp
from willmore_lab import surface as sf
from willmore_lab.errors import EigenFailure, NonconvergentEntry, UnequalEndValues
from willmore_lab.harmonics import harmonic_indices
from willmore_lab.rational import RationalFn


# assembly -----------------------------------------------------------------------------------

def test_form_matrices_are_symmetric(small_run):
    basis, seq, form, M = small_run
    for Q in seq.matrices:
        assert np.abs(Q - Q.T).max() < 1e-10 * np.abs(Q).max()
    assert list(seq.eps) == sorted(seq.eps, reverse=True)
    assert seq.end_values.shape == (basis.size, 4)


def test_end_correction_quadruples():
    U = np.random.default_rng(0).standard_normal((5, 4))
    for e in (0.04, 0.013):
        np.testing.assert_array_equal(sp.end_correction(U, e / 2), 4 * sp.end_correction(U, e))
    assert sp.end_correction(U, 1.0)[0, 0] == pytest.approx(8 * np.pi * U[0] @ U[0])


def test_raw_integrals_follow_end_correction(small_run):
    # Q_eps + end correction is the plain integral, which grows slowly as eps shrinks
    basis, seq, form, M = small_run
    raw = [Q + sp.end_correction(seq.end_values, e) for e, Q in zip(seq.eps, seq.matrices)]
    d = np.abs(raw[-1] - raw[0]).max()
    assert d > 0
    assert np.all(np.diag(raw[-1]) >= -1e-9)


def test_translation_fields_are_in_the_kernel(small_run):
    basis, seq, form, M = small_run
    k0 = basis.n_harmonic
    diag = np.diag(form.Q)[k0:]
    assert np.abs(diag).max() < 1e-4 * form.scale
    # the diagonal of Q_eps for these fields tends to zero
    seqd = np.array([np.diag(Q)[k0:] for Q in seq.matrices])
    assert np.all(np.abs(seqd[-1]) < np.abs(seqd[0]))


def test_polarized_form_matches_direct_assembly(flower2, small_run):
    basis, seq, form, M = small_run
    rng = np.random.default_rng(3)
    c = rng.standard_normal(basis.size)
    direct = sp.assemble_form_eps(flower2, sp.CombinedField(basis.field, c), seq.eps)
    for Q, D in zip(seq.matrices, direct.matrices):
        assert D[0, 0] == pytest.approx(c @ Q @ c, abs=1e-8 * np.abs(Q).max())


# extrapolation ------------------------------------------------------------------------------

EPS = (0.04, 0.02, 0.01, 0.005)


def test_extrapolate_constant_sequence():
    Q = np.array([[2.0, 1.0], [1.0, -3.0]])
    out = sp.extrapolate_form([(e, Q) for e in EPS])
    np.testing.assert_array_equal(out.Q, Q)
    assert out.flagged == []


def test_extrapolate_linear_sequence():
    Qs = np.array([[2.0, 1.0], [1.0, -3.0]])
    C = np.array([[5.0, -1.0], [-1.0, 7.0]])
    out = sp.extrapolate_form([(e, Qs + e * C) for e in EPS])
    assert out.order == pytest.approx(1.0)
    np.testing.assert_allclose(out.Q, Qs, atol=1e-10)


def test_extrapolate_quadratic_sequence():
    Qs = np.array([[2.0, 1.0], [1.0, -3.0]])
    C = np.array([[5.0, -1.0], [-1.0, 7.0]])
    out = sp.extrapolate_form([(e, Qs + e ** 2 * C) for e in EPS])
    assert out.order == pytest.approx(2.0)
    np.testing.assert_allclose(out.Q, Qs, atol=1e-10)


def test_extrapolate_flags_nonconvergent_entries():
    Qs = np.eye(2)
    rng = np.random.default_rng(1)
    seq = []
    for e in EPS:
        noise = np.zeros((2, 2))
        noise[0, 1] = noise[1, 0] = rng.standard_normal() * 0.1
        seq.append((e, Qs + e * np.ones((2, 2)) + noise))
    with pytest.raises(NonconvergentEntry):
        sp.extrapolate_form(seq)
    out = sp.extrapolate_form(seq, strict=False)
    assert (0, 1) in out.flagged


def test_extrapolate_needs_three_values():
    with pytest.raises(ValueError):
        sp.extrapolate_form([(0.1, np.eye(2)), (0.05, np.eye(2))])


def test_flower_form_extrapolates_at_second_order(index_run):
    run = index_run(2, 10)
    assert run.form.order == pytest.approx(2.0, abs=0.15)
    assert np.abs(run.form.Q - run.form.Q.T).max() < 1e-10 * np.abs(run.form.Q).max()


# mass matrix --------------------------------------------------------------------------------

def test_mass_of_constant_is_area(flower2):
    basis = sp.GalerkinBasis(0)
    M = sp.mass_matrix(flower2, basis)
    area = M[0, 0] * 4 * np.pi  # Y_00^2 = 1 / (4 pi)
    mesh_area = ms.sample_mesh(flower2, samples=96).area()
    assert np.isfinite(area)
    assert area == pytest.approx(mesh_area, rel=2e-3)


def test_mass_for_round_inversion_of_a_plane():
    plane = sf.NullCurveData((RationalFn([1.0]), RationalFn([1j]), RationalFn([0.0])),
                             center=(0.0, 0.0, 1.0))
    M = sp.mass_matrix(plane, sp.GalerkinBasis(2), check=False)
    np.testing.assert_allclose(M, np.eye(9) / 4, atol=1e-10)


def test_mass_is_positive_definite(index_run):
    run = index_run(2, 12)
    scipy.linalg.cholesky(run.M)
    assert run.M.shape == (169, 169)


# spectra ------------------------------------------------------------------------------------

def test_morse_index_examples():
    Q = np.diag([-2.0, 0.0, 1e-9, 3.0])
    rep = sp.morse_index(Q, np.eye(4))
    assert rep.inertia == (1, 2, 1) and rep.stable and rep.verdict == "STABLE"
    assert sum(rep.inertia) == 4


def test_morse_index_reports_unstable_band():
    # an eigenvalue inside the swept decade changes n_minus
    Q = np.diag([-1.0, -5e-5, 2.0])
    rep = sp.morse_index(Q, np.eye(3))
    assert not rep.stable and rep.verdict == "UNSTABLE"


def test_eigen_failures():
    with pytest.raises(EigenFailure):
        sp.morse_index(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))
    with pytest.raises(EigenFailure):
        sp.morse_index(np.eye(2), np.diag([1.0, -1.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_inertia_is_independent_of_the_gram_matrix(seed):
    rng = np.random.default_rng(seed)
    n = 8
    A = rng.standard_normal((n, n))
    lam = np.r_[-3.0, -1.0, 0.0, 0.0, 1.0, 2.0, 4.0, 5.0]
    V, _ = np.linalg.qr(A)
    Q = V @ np.diag(lam) @ V.T
    B = rng.standard_normal((n, n))
    M = B @ B.T + 0.5 * np.eye(n)
    r1 = sp.morse_index(Q, np.eye(n))
    r2 = sp.morse_index(Q, M)
    assert r1.inertia[0] == r2.inertia[0] == 2


def test_flower_inertia_with_round_gram_matrix(index_run):
    # the round metric Gram matrix of orthonormal harmonics is the identity
    run = index_run(2, 10)
    rep = sp.morse_index(run.form.Q, np.eye(run.basis.size))
    assert rep.index == run.report.index == 1


@pytest.mark.parametrize("L", [8, 10, 12])
def test_morin_index_is_one(index_run, L):
    rep = index_run(2, L).report
    assert rep.index == 1 and rep.stable
    assert rep.inertia[1] >= 3
    assert sum(rep.inertia) == (L + 1) ** 2


def test_equivariant_index_bounded_by_full(index_run):
    for p in (2, 3):
        eq = index_run(p, 12, equivariant=True).report
        full = index_run(p, 12).report
        assert eq.equivariant
        assert eq.index <= full.index


def test_rotation_symmetry_of_the_flowers(flower2, flower3):
    for data, p in ((flower2, 2), (flower3, 3)):
        R, res = sp.rotation_symmetry(data, p)
        assert res < 1e-10
        np.testing.assert_allclose(np.linalg.matrix_power(R, p), np.eye(3), atol=1e-10)


def test_lowest_mode_symmetry_is_reported(index_run):
    frac = sp.lowest_mode_symmetry(index_run(2, 10), 2)
    assert 0.0 <= frac <= 1.0 + 1e-12


# equal end values ---------------------------------------------------------------------------

def test_constant_variation_is_nonnegative(flower2):
    fld = sp.HarmonicField(harmonic_indices(0))
    out = sp.second_variation_equal_ends(flower2, fld, check_eps=sp.DEFAULT_EPS)
    scale = max(1.0, abs(out["value"]))
    assert out["value"] >= -1e-6 * scale
    assert out["extrapolated"] == pytest.approx(out["value"], abs=1e-4 * scale)


def test_bump_variation_two_routes_agree(flower2):
    # supported away from every end, so the end value is zero
    fld = sp.BumpField(0.05 + 0.02j, 0.25)
    assert np.all(fld.end_values(flower2) == 0)
    out = sp.second_variation_equal_ends(flower2, fld, check_eps=sp.DEFAULT_EPS)
    assert out["end_value"] == 0
    assert out["extrapolated"] == pytest.approx(out["value"], abs=1e-6 * max(1.0, out["value"]))


def test_unequal_end_values_are_rejected(flower2):
    with pytest.raises(UnequalEndValues):
        sp.second_variation_equal_ends(flower2, sp.InvertedNormalField([2]))


# sign change --------------------------------------------------------------------------------

def test_sign_change_of_the_morin_mode(flower2, index_run):
    res = sp.sign_change_check(flower2, index_run(2, 10))
    assert res.v0 > 0
    np.testing.assert_allclose(res.end_values, res.v0 / 4, rtol=1e-8)
    assert res.sign_change and res.minimum < 0 < res.maximum
    assert res.general_solution_gap < 1e-10
    assert res.coefficients["c"] == pytest.approx(np.sqrt(2 / 3))
    assert res.coefficients["d"] == pytest.approx(np.sqrt(1 / 3))


def test_adding_translation_fields_keeps_the_form_value(small_run):
    basis, seq, form, M = small_run
    Q = form.Q
    k0 = basis.n_harmonic
    lam, vec = scipy.linalg.eigh(Q[:k0, :k0], M[:k0, :k0])
    c = np.zeros(basis.size)
    c[:k0] = vec[:, 0]
    base = c @ Q @ c
    for k in range(3):
        for t in (0.5, -2.0):
            d = c.copy()
            d[k0 + k] += t
            assert abs(d @ Q @ d - base) < 1e-6 * form.scale * max(1.0, t * t) * 100


# output ---------------------------------------------------------------------------------------

def test_csv_and_report(index_run):
    run = index_run(2, 10)
    csv = sp.spectrum_csv(run.report).splitlines()
    assert csv[0] == "index,eigenvalue" and len(csv) == 1 + run.basis.size
    assert float(csv[1].split(",")[1]) == run.report.eigenvalues[0]
    text = sp.report_text(run)
    assert text.rstrip().endswith("index = 1")
    assert "tau sweep" in text and "verdict: STABLE" in text
