"""Coating maps: closed forms, round trips, Jacobian oracles and the smooth stretch profile."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloakverify.geometry import (
    CoatingSpec,
    DomainError,
    SingularSurfaceError,
    inverse_point,
    jacobian,
    map_forward,
    map_inverse,
    stretch_appendix,
)

BALL = CoatingSpec(kind="single-ball")
ALL_SPECS = [
    CoatingSpec(kind="single-ball"),
    CoatingSpec(kind="double-ball"),
    CoatingSpec(kind="single-cylinder-shs"),
    CoatingSpec(kind="double-cylinder"),
    CoatingSpec(kind="single-ball", stretch="appendix-smooth", outer_radius=3.0),
    CoatingSpec(kind="double-ball", stretch="appendix-smooth", outer_radius=3.0),
]


# --- closed-form examples --------------------------------------------------------


@pytest.mark.parametrize("rho, r", [(2.0, 2.0), (1.0, 1.5)])
def test_map_forward_linear_values(rho, r):
    assert map_forward(BALL, rho) == pytest.approx(r, abs=1e-15)


def test_map_forward_limit_onto_sigma():
    r = map_forward(BALL, np.array([1e-3, 1e-6, 1e-9]))
    assert np.all(r > 1.0)
    assert np.allclose(r - 1.0, [5e-4, 5e-7, 5e-10], rtol=1e-6)


@pytest.mark.parametrize("r, rho", [(2.0, 2.0), (1.5, 1.0), (1.0 + 1e-9, 2e-9)])
def test_map_inverse_linear_values(r, rho):
    assert map_inverse(BALL, r) == pytest.approx(rho, rel=1e-6)


@pytest.mark.parametrize("bad", [0.0, -1.0, 2.5])
def test_map_forward_domain(bad):
    with pytest.raises(DomainError):
        map_forward(BALL, bad)


@pytest.mark.parametrize("bad", [1.0, 0.5])
def test_map_inverse_rejects_sigma_and_inside(bad):
    with pytest.raises(SingularSurfaceError):
        map_inverse(BALL, bad)


def test_blow_up_rate():
    t = np.array([1e-3, 1e-6, 1e-9])
    ratio = map_inverse(BALL, 1.0 + t) / t
    # 1 + t is not exactly representable; the oracle uses the stored gap
    gap = (1.0 + t) - 1.0
    assert np.all(np.abs(map_inverse(BALL, 1.0 + t) / gap - 2.0) < 1e-6)
    assert np.all(np.abs(ratio - 2.0) < 1e-6)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.kind}-{s.stretch}")
def test_round_trip_and_boundary_fixing(spec):
    R = spec.outer_radius
    r = spec.cloak_radius + np.geomspace(1e-9, R - spec.cloak_radius, 300)
    back = map_forward(spec, map_inverse(spec, r))
    assert np.max(np.abs(back - r) / r) < 1e-12
    assert abs(map_forward(spec, R) - R) < 1e-14


def test_spec_validation():
    with pytest.raises(DomainError):
        CoatingSpec(outer_radius=1.0, cloak_radius=1.0)
    with pytest.raises(DomainError):
        CoatingSpec(kind="single-ball", interior="round-3-sphere")
    with pytest.raises(DomainError):
        CoatingSpec(kind="double-ball", stretch="appendix-smooth")  # needs R = 3a
    with pytest.raises(DomainError):
        CoatingSpec(kind="torus")
    assert CoatingSpec(kind="double-cylinder").interior == "product-S2xR"


# --- Jacobians ------------------------------------------------------------------


def _fd_jacobian(spec, x, h=1e-6):
    J = np.zeros((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        J[:, j] = (inverse_point(spec, x + e) - inverse_point(spec, x - e)) / (2 * h)
    return J


def test_jacobian_at_outer_boundary():
    x = np.array([0.0, 0.0, 2.0]) * (1 - 1e-16)
    J, det = jacobian(BALL, np.array([0.0, 0.0, 1.9999999]))
    # radial entry 2, tangential entries rho/r -> 1 at r = 2
    assert J[2, 2] == pytest.approx(2.0, abs=1e-12)
    assert J[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert det == pytest.approx(2.0, abs=1e-6)
    assert x.shape == (3,)


def test_identity_interior_jacobian():
    J, det = jacobian(BALL, np.array([0.1, 0.2, 0.3]))
    assert np.array_equal(J, np.eye(3)) or np.allclose(J, np.eye(3), atol=1e-15)
    assert det == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(ALL_SPECS[:5]),
    st.floats(0.02, 0.95),
    st.floats(0.1, 3.0),
    st.floats(0.1, 6.2),
    st.floats(-1.0, 1.0),
)
def test_jacobian_matches_finite_differences(spec, frac, theta, phi, z):
    a, R = spec.cloak_radius, spec.outer_radius
    r = a + frac * (R - a)
    if spec.is_cylinder:
        x = np.array([r * np.cos(phi), r * np.sin(phi), z])
    else:
        x = r * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    J, det = jacobian(spec, x)
    assert np.max(np.abs(J - _fd_jacobian(spec, x))) < 1e-8
    assert det == pytest.approx(np.prod(np.linalg.eigvalsh(0.5 * (J + J.T))), rel=1e-12)


def test_jacobian_on_sigma_raises():
    with pytest.raises(SingularSurfaceError):
        jacobian(BALL, np.array([1.0, 0.0, 0.0]))


# --- smooth profile ---------------------------------------------------------------


@pytest.mark.parametrize("a", [1.0, 0.7])
def test_stretch_appendix_endpoints_and_pieces(a):
    assert stretch_appendix(0.0, a) == pytest.approx(a)
    assert stretch_appendix(3 * a, a) == pytest.approx(3 * a)
    tau = np.linspace(0, a / 2, 20)
    assert np.allclose(stretch_appendix(tau, a), tau / 2 + a, rtol=0, atol=1e-15)
    tau = np.linspace(2 * a, 3 * a, 20)
    assert np.allclose(stretch_appendix(tau, a), tau, rtol=0, atol=1e-15)


def test_stretch_appendix_monotone_and_c2():
    a = 1.0
    tau = np.linspace(0, 3 * a, 1000)
    f = stretch_appendix(tau, a)
    assert np.all(np.diff(f) > 0)
    emap = CoatingSpec(stretch="appendix-smooth", outer_radius=3.0).exterior_map
    for knot in (a / 2, 2 * a):
        for d in (emap.derivative, emap.second_derivative):
            assert float(d(knot - 1e-9)) == pytest.approx(float(d(knot + 1e-9)), abs=1e-7)


def test_stretch_appendix_domain():
    with pytest.raises(DomainError):
        stretch_appendix(-0.1, 1.0)
    with pytest.raises(DomainError):
        stretch_appendix(3.2, 1.0)


def test_inverse_from_gap_avoids_cancellation():
    for spec in (BALL, ALL_SPECS[4]):
        emap = spec.exterior_map
        t = np.array([1e-14, 1e-11, 1e-8])
        assert np.allclose(emap.inverse_from_gap(t), 2 * t, rtol=1e-14)
