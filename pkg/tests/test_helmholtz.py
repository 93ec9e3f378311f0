"""Scalar modes: coefficients, pullback identity, DtN values, energy and interior problems."""

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import spherical_jn, spherical_yn

from cloakverify import helmholtz as H
from cloakverify.geometry import CoatingSpec, DomainError
from cloakverify.media import sample_cloak_media

SINGLE = CoatingSpec(kind="single-ball")
DOUBLE = CoatingSpec(kind="double-ball")
E_R = np.array([0.36, 0.48, 0.8])
E_T = np.array([0.8, 0.0, -0.36]) / np.hypot(0.8, 0.36)


# --- coefficients ------------------------------------------------------------------


def test_homogeneous_coefficients():
    c = H.radial_coefficients(None, 2)
    r = np.linspace(0.1, 2.0, 7)
    assert np.allclose(c.p(r), r**2) and np.allclose(c.w(r), r**2) and np.allclose(c.q(r), 1.0)
    assert c.L == 6


@pytest.mark.parametrize("spec", [SINGLE, DOUBLE], ids=["single", "double"])
def test_coefficients_match_direct_media_assembly(spec):
    # p = r^2 e_r.sigma.e_r, w = r^2 |g|^(1/2), q = e_t.sigma.e_t from the Cartesian media
    c = H.radial_coefficients(spec, 3)
    for r in 1.0 + np.geomspace(1e-3, 1.0, 50):
        m = sample_cloak_media(spec, r * E_R)
        sig, g = m.material.components, m.metric.components
        assert c.p(r) == pytest.approx(r * r * E_R @ sig @ E_R, rel=1e-10)
        assert c.w(r) == pytest.approx(r * r * np.sqrt(np.linalg.det(g)), rel=1e-10)
        assert c.q(r) == pytest.approx(E_T @ sig @ E_T, rel=1e-10)


def test_single_ball_coefficients_vanish_quadratically():
    c = H.radial_coefficients(SINGLE, 1)
    t = np.array([1e-2, 1e-3, 1e-4])
    for f in (c.p, c.w):
        slope = np.polyfit(np.log(t), np.log([f(1 + x) for x in t]), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.01)
    # the angular term stays bounded, so L q / p ~ t^-2 is the Euler-type singularity
    assert np.isfinite(c.q(1 + 1e-8)) and c.q(1 + 1e-8) > 0


def test_flux_coefficient_continuous_across_sigma_double():
    ext = H.radial_coefficients(DOUBLE, 0, "exterior")
    inn = H.radial_coefficients(DOUBLE, 0, "interior")
    assert abs(ext.p(1 + 1e-7) - inn.p(1 - 1e-7)) < 1e-12


def test_cylinder_unsupported_and_bad_degree():
    with pytest.raises(H.UnsupportedSpecError):
        H.radial_coefficients(CoatingSpec(kind="single-cylinder-shs"), 0)
    with pytest.raises(DomainError):
        H.radial_coefficients(SINGLE, -1)


# --- exterior modes ----------------------------------------------------------------


def test_l0_k1_closed_form_at_outer_boundary():
    k = 1.0
    mode = H.solve_exterior_mode(SINGLE, 0, k)
    # rho = 2 (r - 1) reaches 2 at r = 2; j0(x) = sin x / x
    x = 2 * k
    j0 = np.sin(x) / x
    dj0 = (x * np.cos(x) - np.sin(x)) / x**2
    assert mode.u[-1] == pytest.approx(j0, rel=1e-8)
    p2 = mode.coefficients.p(2.0)
    assert mode.flux[-1] == pytest.approx(p2 * dj0 * k * 2.0, rel=1e-8)


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 8), st.floats(0.2, 6.0))
def test_exterior_mode_is_the_pullback(l, k):
    mode = H.solve_exterior_mode(SINGLE, l, k)
    # the stored gap t avoids the cancellation in r - 1 next to Sigma
    rho = 2.0 * mode.solution.t
    expected = spherical_jn(l, k * rho)
    assert np.max(np.abs(mode.u - expected)) <= 1e-7 * np.max(np.abs(expected))


@pytest.mark.parametrize("l, k", [(0, 1.0), (3, 2.0), (10, 5.0)])
def test_mode_residual_and_seed_independence(l, k):
    mode = H.solve_exterior_mode(SINGLE, l, k, seed="unit-dirichlet")
    assert mode.residual() < 1e-9
    rep = H.seed_independence(SINGLE, l, k)
    assert rep["spread"] < 1e-9 * max(1.0, abs(rep["values"][-1]))


def test_small_k_mode_is_constant_on_the_coating():
    mode = H.solve_exterior_mode(SINGLE, 0, 1e-4)
    assert np.max(np.abs(mode.u / mode.u[-1] - 1.0)) < 1e-7


def test_flux_vanishes_at_sigma():
    for l, k in [(0, 1.0), (2, 2.0), (5, 5.0)]:
        mode = H.solve_exterior_mode(DOUBLE, l, k)
        flux = mode.solution.at(1e-6)[1] * mode.scale
        assert abs(flux) < 1e-4 * np.max(np.abs(mode.flux))


def test_bad_inputs():
    with pytest.raises(DomainError):
        H.solve_exterior_mode(SINGLE, 0, 0.0)
    with pytest.raises(DomainError):
        H.solve_exterior_mode(SINGLE, 0, 1.0, seed="bogus")


# --- DtN values --------------------------------------------------------------------


def test_reference_dtn_closed_form():
    # k j0'(2k)/j0(2k) with j0 = sin x / x, at k = 1
    x = 2.0
    oracle = (x * np.cos(x) - np.sin(x)) / x**2 / (np.sin(x) / x)
    assert H.reference_dtn(0, 1.0) == pytest.approx(oracle, rel=1e-14)
    assert oracle == pytest.approx(-0.9576, abs=1e-4)


def test_cloaked_dtn_matches_reference():
    for spec in (SINGLE, DOUBLE):
        lam = H.dtn_eigenvalue(H.solve_exterior_mode(spec, 0, 1.0))
        assert lam == pytest.approx(H.reference_dtn(0, 1.0), rel=1e-6)


def test_homogeneous_ball_dtn():
    lam = H.dtn_eigenvalue(H.solve_exterior_mode(None, 2, 1.5))
    assert lam == pytest.approx(H.reference_dtn(2, 1.5), rel=1e-8)


def test_harmonic_limit():
    # r^l Y_lm: d/dr log(r^l) = l / R
    assert H.reference_dtn(1, 1e-5) == pytest.approx(0.5, abs=1e-8)
    lam = H.dtn_eigenvalue(H.solve_exterior_mode(SINGLE, 1, 1e-4))
    assert lam == pytest.approx(0.5, abs=1e-7)


def test_euclidean_normal_differs_by_radial_stretch():
    mode = H.solve_exterior_mode(SINGLE, 2, 1.0)
    # the radial metric component is 4 at the outer boundary
    assert H.dtn_eigenvalue(mode, "euclidean") == pytest.approx(2 * H.dtn_eigenvalue(mode), rel=1e-12)
    with pytest.raises(DomainError):
        H.dtn_eigenvalue(mode, "other")


def test_dirichlet_resonance_flagged():
    k = np.pi / 2  # j0(2k) = j0(pi) = 0
    with pytest.raises(H.DirichletResonanceError):
        H.reference_dtn(0, k)
    with pytest.raises(H.DirichletResonanceError):
        H.dtn_eigenvalue(H.solve_exterior_mode(SINGLE, 0, k))


def test_boundary_pairing_symmetric():
    u = H.solve_exterior_mode(SINGLE, 3, 1.7, seed="pullback-regular")
    v = H.solve_exterior_mode(SINGLE, 3, 1.7, seed="unit-dirichlet")
    assert H.seed_pairing(u, v) < 1e-9


# --- energy ------------------------------------------------------------------------


@pytest.mark.parametrize("l, k", [(0, 0.5), (1, 1.0), (4, 2.0), (10, 5.0)])
def test_pullback_modes_have_finite_energy(l, k):
    rep = H.energy_near_sigma(H.solve_exterior_mode(SINGLE, l, k))
    assert rep.verdict == "finite"
    vals = [v for _, v in rep.shell_integrals]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def _synthetic(u, du, l=1, t0=1e-8):
    coeffs = H.radial_coefficients(SINGLE, l)
    return H.RadialMode.from_function(coeffs, 1.0, u, du, np.geomspace(t0, 1.0, 4000))


def test_log_mode_energy_is_finite():
    # p u'^2 = (r-1)^2 (r-1)^-2 / 4-ish is bounded and q log^2 is integrable;
    # compare with the analytic integral of the density near Sigma
    mode = _synthetic(lambda r: np.log(r - 1), lambda r: 1 / (r - 1))
    rep = H.energy_near_sigma(mode)
    assert rep.verdict == "finite"
    c = mode.coefficients
    delta = 1e-1
    p2, q0 = c.p(1 + 1e-6) / 1e-12, float(c.q(1 + 1e-6))
    t = mpmath.mpf(delta)
    oracle = p2 * t + c.L * q0 * (t * mpmath.log(t) ** 2 - 2 * t * mpmath.log(t) + 2 * t)
    got = dict(rep.shell_integrals)[delta]
    assert got == pytest.approx(float(oracle), rel=2e-3)


def test_singular_branch_energy_diverges():
    # u = t^-1 is the non-pullback Frobenius branch for l = 1 (nu = 1 is the regular one)
    mode = _synthetic(lambda r: 1 / (r - 1), lambda r: -1 / (r - 1) ** 2)
    assert H.energy_near_sigma(mode).verdict == "divergent"


def test_zero_mode_energy():
    mode = _synthetic(lambda r: 0 * r, lambda r: 0 * r)
    rep = H.energy_near_sigma(mode)
    assert rep.verdict == "finite" and all(v == 0 for _, v in rep.shell_integrals)


# --- interior problems ------------------------------------------------------------


def test_interior_zero_source():
    sol = H.interior_neumann_solve(SINGLE, 2, 1.0)
    assert not sol.resonant and np.all(sol.mode.u == 0)


def test_first_l1_neumann_resonance():
    oracle = float(mpmath.findroot(lambda x: mpmath.diff(
        lambda s: mpmath.sin(s) / s**2 - mpmath.cos(s) / s, x), 2.0))
    roots = H.neumann_resonances(1, 3.0)
    assert roots[0] == pytest.approx(oracle, abs=1e-10)
    assert roots[0] == pytest.approx(2.0816, abs=1e-4)
    assert H.interior_neumann_solve(SINGLE, 1, roots[0], H.ShellSource(0.5)).resonant


def test_shell_source_variation_of_parameters():
    k, rs, a = 1.0, 0.5, 1.0
    sol = H.interior_neumann_solve(SINGLE, 0, k, H.ShellSource(rs))
    m = sol.mode
    assert abs(m.flux[-1]) < 1e-10
    # flux jump rs^2 across the shell; Wronskian j0 y0' - y0 j0' = 1/x^2
    beta = k * rs**2
    j, y = spherical_jn, spherical_yn
    alpha = -beta * (j(0, k * rs) * y(0, k * a, True) - y(0, k * rs) * j(0, k * a, True)) / j(0, k * a, True)
    r = m.r
    oracle = alpha * j(0, k * r) + np.where(r > rs, beta * (j(0, k * rs) * y(0, k * r) - y(0, k * rs) * j(0, k * r)), 0)
    assert np.max(np.abs(m.u - oracle)) < 1e-8 * np.max(np.abs(oracle))


def test_interior_source_gap_enforced():
    with pytest.raises(DomainError):
        H.BoundaryData(f_source=H.ShellSource(0.95), gap=0.1)
    with pytest.raises(H.UnsupportedSpecError):
        H.interior_neumann_solve(DOUBLE, 0, 1.0)


def test_overdetermined_generic():
    res = H.overdetermined_residual(1.0, 0, 1.0)
    oracle = abs((np.cos(1.0) - np.sin(1.0)) / np.sin(1.0))  # k j0'(k)/j0(k) at k = 1
    assert res.residual == pytest.approx(oracle, rel=1e-12)
    assert res.verdict == "no-spatial-H1"


def test_overdetermined_exceptional_and_trivial():
    k = float(mpmath.findroot(lambda x: mpmath.tan(x) - x, 4.49))  # j0'(k) = 0
    assert k == pytest.approx(4.4934, abs=1e-4)
    res = H.overdetermined_residual(k, 0, 1.0)
    assert res.residual < 1e-8 and res.verdict == "solvable"
    assert H.overdetermined_residual(1.0, 0, 0.0).residual == 0.0
    assert H.overdetermined_residual(np.pi, 0, 1.0).verdict == "dirichlet-resonance"


def test_double_interior_decoupled():
    src = H.bump_profile(0.45, 0.15)
    sol = H.solve_double_interior(DOUBLE, 1, 1.3, src)
    m = sol.mode
    t = 1.0 - m.r
    i = int(np.argmin(np.abs(t - 1e-6)))
    assert abs(m.flux[i]) < 1e-4 * np.max(np.abs(m.flux))
    k_eig = H.sphere_eigen_wavenumbers(1.0, 6.0)[0]
    assert k_eig == pytest.approx(np.pi * np.sqrt(3.0))
    assert H.solve_double_interior(DOUBLE, 1, k_eig, src).resonant


# --- reports -----------------------------------------------------------------------


def test_single_ball_report_full_grid():
    table = H.cauchy_match_report(SINGLE)
    assert len(table.rows) == 44
    assert table.max_rel_discrepancy < 1e-6


def test_exterior_unaffected_by_interior_resonance():
    k = H.neumann_resonances(1, 3.0)[0]
    table = H.cauchy_match_report(SINGLE, l_max=3, k_grid=(k,))
    assert table.max_rel_discrepancy < 1e-6


def test_variants_agree_on_small_grid():
    kw = dict(l_max=3, k_grid=(0.5, 2.0), rtol=1e-11)
    a = H.cauchy_match_report(DOUBLE, variant="virtual-surface", **kw)
    b = H.cauchy_match_report(DOUBLE, variant="physical-neumann-lining", **kw)
    for x, y in zip(a.rows, b.rows):
        assert abs(x.cloaked - y.cloaked) <= 1e-10 * abs(y.cloaked)
    assert all(c["status"] == "ok" and c["flux_at_sigma_minus"] < 1e-4 * c["flux_max"] for c in a.interior_checks)
    with pytest.raises(DomainError):
        H.cauchy_match_report(DOUBLE, variant="nope")
