"""Vector modes: multipoles, the single-coating verdict, admittances and divergence identities."""

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloakverify import maxwell as M
from cloakverify.geometry import CoatingSpec, DomainError

DOUBLE = CoatingSpec(kind="double-ball")
BUMP = M.NonRadiatingBump(center=(0.1, -0.2, 0.15), width=0.4, moment=(0.3, -0.5, 0.8))


def _outside_points(radius=1.5, n=12, seed=0):
    d = np.random.default_rng(seed).normal(size=(n, 3))
    return radius * d / np.linalg.norm(d, axis=1, keepdims=True)


# --- free-space fields -------------------------------------------------------------


def test_dipole_field_satisfies_maxwell():
    # curl E = i k H and curl H = -i k E away from the source (finite differences)
    k, x0, p = 1.3, np.array([0.1, 0.2, -0.1]), np.array([0.3, -0.7, 0.4])
    x = np.array([0.9, -0.4, 0.6])
    h = 1e-5

    def curl(F):
        J = np.zeros((3, 3), dtype=complex)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            J[:, j] = (F(x + e) - F(x - e)) / (2 * h)
        return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])

    E = lambda y: M.dipole_field(y, x0, p, k)[0][0]  # noqa: E731
    H = lambda y: M.dipole_field(y, x0, p, k)[1][0]  # noqa: E731
    assert np.allclose(curl(E), 1j * k * H(x), atol=1e-7)
    assert np.allclose(curl(H), -1j * k * E(x), atol=1e-7)


def test_zero_source_has_no_multipoles():
    mp = M.radiating_multipoles(None, 1.0)
    assert mp.largest() == 0.0
    assert len(mp.entries) == 2 * sum(2 * l + 1 for l in range(1, 7))


def test_centered_dipole_is_pure_l1_tm():
    mp = M.radiating_multipoles(M.PointDipole((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)), 1.0)
    big = {key for key, v in mp.entries.items() if abs(v) > 1e-12}
    assert big and all(l == 1 and pol == "TM" for l, _, pol in big)


@pytest.mark.parametrize("loc", [(0.0, 0.0, 0.0), (0.2, -0.1, 0.3)])
def test_multipole_field_reproduces_dyadic_green(loc):
    dip = M.PointDipole(loc, (0.4, 1.0, -0.3))
    k = 1.0
    x = _outside_points(2.0)
    E_ref, H_ref = dip.field(x, k)
    E, H = M.radiating_multipoles(dip, k, l_max=16).field(x)
    scale = np.max(np.abs(E_ref))
    assert np.max(np.abs(E - E_ref)) < 1e-9 * scale
    assert np.max(np.abs(H - H_ref)) < 1e-9 * scale


def test_shell_current_single_coefficient():
    src = M.ShellCurrent(0.5, 2, 1, "TE", 1.0)
    mp = M.radiating_multipoles(src, 1.5)
    nonzero = [key for key, v in mp.entries.items() if v != 0]
    assert nonzero == [(2, 1, "TE")]
    with pytest.raises(DomainError):
        M.ShellCurrent(0.5, 0, 0, "TE")
    with pytest.raises(DomainError):
        M.ShellCurrent(0.5, 1, 0, "XY")


@pytest.mark.filterwarnings("ignore::cloakverify.maxwell.TruncationWarning")
def test_bump_is_non_radiating():
    k = 1.0
    mp = M.radiating_multipoles(BUMP, k)
    assert mp.largest() < 1e-9 * k**2 * BUMP.norm_for(k)
    # direct evaluation of the exterior field by summing the quadrature dipoles
    E, H = BUMP.field(_outside_points(1.2, 8), k)
    ref = M.dipole_field(np.array([[1.2, 0, 0]]), BUMP.center, np.array(BUMP.moment) * BUMP.norm_for(k), k)[0]
    assert np.max(np.abs(E)) < 1e-9 * np.max(np.abs(ref))
    assert np.max(np.abs(H)) < 1e-9 * np.max(np.abs(ref))


def test_truncation_warning():
    with pytest.warns(M.TruncationWarning):
        M.radiating_multipoles(M.PointDipole((0.7, 0.0, 0.0), (0.0, 1.0, 0.0)), 3.0, l_max=2)


# --- single-coating verdict --------------------------------------------------------


def test_passive_object_is_cloaked():
    v = M.single_coating_verdict(None, 1.0)
    assert v.exists_finite_energy and v.offending_modes == []


def test_centered_dipole_has_no_finite_energy_solution():
    v = M.single_coating_verdict(M.PointDipole((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)), 1.0)
    assert not v.exists_finite_energy
    assert {(l, pol) for l, _, pol in v.offending_modes} == {(1, "TM")}
    assert v.norms == pytest.approx(v.trace_norms, rel=1e-6)


def test_bump_source_admits_finite_energy_solution():
    v = M.single_coating_verdict(BUMP, 1.0)
    assert v.exists_finite_energy
    assert v.norms < 1e-9 and v.trace_norms < 1e-9


def test_random_dipoles_criteria_agree():
    rng = np.random.default_rng(3)
    for dip in M.random_dipoles(5, rng):
        v = M.single_coating_verdict(dip, 1.0)
        assert not v.exists_finite_energy
        big = {key for key, a in v.trace_amplitudes.items() if abs(a) > 1e-8 * dip.norm}
        assert set(v.offending_modes) == big


def test_source_near_sigma_rejected():
    with pytest.raises(DomainError):
        M.single_coating_verdict(M.PointDipole((0.0, 0.0, 0.99), (1.0, 0.0, 0.0)), 1.0)


# --- admittances -------------------------------------------------------------------


def _psi(l, x):
    return mpmath.sqrt(mpmath.pi * x / 2) * mpmath.besselj(l + 0.5, x)


@pytest.mark.parametrize("pol", ["TE", "TM"])
def test_vacuum_admittance_riccati_bessel(pol):
    l, k, R = 1, 1.0, 2.0
    x = mpmath.mpf(k * R)
    psi, dpsi = _psi(l, x), mpmath.diff(lambda s: _psi(l, s), x)
    oracle = complex(-1j * psi / dpsi) if pol == "TM" else complex(-1j * dpsi / psi)
    assert M.vacuum_admittance(l, k, pol, R) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("pol", ["TE", "TM"])
@pytest.mark.parametrize("l, k", [(1, 1.0), (3, 2.0), (6, 0.5)])
def test_double_coating_admittance_matches_vacuum(pol, l, k):
    Y = M.double_coating_admittance(DOUBLE, l, k, pol)
    assert Y == pytest.approx(M.vacuum_admittance(l, k, pol), rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 6), st.floats(0.3, 3.0))
def test_polarization_duality(l, k):
    # eps = mu: exchanging E and H maps the TM admittance to -1 / (TE admittance)
    te = M.double_coating_admittance(DOUBLE, l, k, "TE")
    tm = M.double_coating_admittance(DOUBLE, l, k, "TM")
    assert te * tm == pytest.approx(-1.0, rel=1e-8)


def test_reciprocity():
    for pol in ("TE", "TM"):
        assert M.reciprocity_check(DOUBLE, 2, 1.0, pol) < 1e-8


def test_angular_decay_and_energy():
    # TM saturates the linear bound; the TE tangential field vanishes faster (t^2)
    assert M.angular_decay_slope(DOUBLE, 1, 1.0, "TM") == pytest.approx(1.0, abs=0.05)
    assert M.angular_decay_slope(DOUBLE, 1, 1.0, "TE") >= 0.95
    for pol in ("TE", "TM"):
        rep = M.maxwell_energy_shells(M.cloaked_exterior_mode(DOUBLE, 2, 1.0, pol))
        assert rep["verdict"] == "finite"


def test_mode_input_validation():
    with pytest.raises(DomainError):
        M.cloaked_exterior_mode(DOUBLE, 0, 1.0, "TM")
    with pytest.raises(DomainError):
        M.cloaked_exterior_mode(DOUBLE, 1, 1.0, "XX")
    with pytest.raises(DomainError):
        M.exterior_media(CoatingSpec(kind="double-cylinder"))


# --- divergence identities ---------------------------------------------------------


def _grid():
    return 1.0 + np.geomspace(1e-3, 0.9, 40)


@pytest.mark.parametrize("pol", ["TE", "TM"])
def test_source_free_divergence(pol):
    mode = M.cloaked_exterior_mode(DOUBLE, 2, 1.3, pol)
    first, second = M.divergence_check(M.ModeFields.from_mode(mode, _grid()))
    assert first < 1e-10 and second < 1e-10


def _driven():
    def j_r(r):
        return (1 - (r / 0.6) ** 2) ** 4 if r < 0.6 else 0.0

    def j_t(r):
        return 0.5 * r * (1 - (r / 0.6) ** 2) ** 4 if r < 0.6 else 0.0

    return M.driven_tm_mode(1, 1.0, j_r, j_t)


def test_driven_divergence_matches_source_term():
    mode = _driven()
    r = np.linspace(0.1, 0.5, 30)
    fields = M.ModeFields.from_mode(mode, r)
    first, _ = M.divergence_check(fields)
    assert first < 1e-8
    # the same fields without the source term violate the identity
    bare = M.ModeFields(fields.l, fields.k, fields.pol, r, fields.flux, fields.flux_derivative,
                        fields.tangential, fields.eps_t, None)
    assert M.divergence_check(bare)[0] > 1e-3


def test_perturbation_detected_proportionally():
    mode = M.cloaked_exterior_mode(DOUBLE, 2, 1.3, "TM")
    fields = M.ModeFields.from_mode(mode, _grid())
    r1 = M.divergence_check(fields.perturbed(1e-3, np.random.default_rng(1)))[0]
    r2 = M.divergence_check(fields.perturbed(2e-3, np.random.default_rng(1)))[0]
    assert 1e-5 < r1 < 1e-2
    assert r2 / r1 == pytest.approx(2.0, rel=0.05)
