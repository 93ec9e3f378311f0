"""Metrics, material tensor densities and their degeneration at the cloak surface.

Tensors are 3x3 arrays in the ambient Cartesian frame.  A material tensor is a
contravariant symmetric 2-tensor times a (+1)-density; the permittivity and
permeability of every construction here coincide (``eps = mu``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (
    CoatingSpec,
    DomainError,
    SingularSurfaceError,
    branch_of,
    jacobian,
    radial_frame,
    transverse_radius,
)

NEAR_SIGMA_FLOOR = 1e-10


class PrecisionWarning(UserWarning):
    """Sample taken closer to Sigma than double precision comfortably resolves."""


class SingularMapError(DomainError):
    pass


def _check_symmetric(a: np.ndarray, name: str):
    a = np.asarray(a)
    if a.shape != (3, 3):
        raise DomainError(f"{name} must be 3x3, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise DomainError(f"{name} is not symmetric")


def _check_spd(a: np.ndarray, name: str):
    _check_symmetric(a, name)
    try:
        np.linalg.cholesky(0.5 * (a + a.T))
    except np.linalg.LinAlgError:
        raise DomainError(f"{name} is not positive definite") from None


@dataclass(frozen=True)
class MetricTensor:
    """Covariant metric ``g_jk`` at a point."""

    components: np.ndarray

    def __post_init__(self):
        _check_symmetric(self.components, "metric")

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.components))

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.components)


@dataclass(frozen=True)
class MaterialTensor:
    """Contravariant symmetric density ``sigma^jk`` (weight +1)."""

    components: np.ndarray
    weight: int = 1

    def __post_init__(self):
        _check_symmetric(self.components, "material tensor")


@dataclass(frozen=True)
class CloakMedia:
    """Metric and the single material tensor used for both eps and mu."""

    metric: MetricTensor
    material: MaterialTensor

    @property
    def permittivity(self) -> MaterialTensor:
        return self.material

    @property
    def permeability(self) -> MaterialTensor:
        return self.material


def pushforward_tensor(sigma: MaterialTensor, DF: np.ndarray, detDF: float) -> MaterialTensor:
    """``(F_* sigma)^{jk} = DF^j_p DF^k_q sigma^{pq} / det DF`` at ``y = F(x)``."""
    if detDF == 0.0:
        raise SingularMapError("Jacobian determinant vanishes")
    DF = np.asarray(DF, dtype=float)
    out = DF @ np.asarray(sigma.components) @ DF.T / detDF
    return MaterialTensor(0.5 * (out + out.T))


def metric_to_material(g: MetricTensor) -> MaterialTensor:
    """``sigma^{jk} = |g|^{1/2} g^{jk}``."""
    _check_spd(g.components, "metric")
    ginv = np.linalg.inv(g.components)
    out = np.sqrt(np.linalg.det(g.components)) * ginv
    return MaterialTensor(0.5 * (out + out.T))


def material_to_metric(sigma: MaterialTensor, n: int = 3) -> MetricTensor:
    """Inverse correspondence ``g^{jk} = det(sigma^{..})^{-1/(n-2)} sigma^{jk}``.

    Since ``det(sigma^{..}) = |g|^{(n-2)/2}``, this is the exponent that makes
    the two directions mutually inverse.
    """
    _check_spd(sigma.components, "material tensor")
    s = np.asarray(sigma.components)
    ginv = np.linalg.det(s) ** (-1.0 / (n - 2)) * s
    g = np.linalg.inv(ginv)
    return MetricTensor(0.5 * (g + g.T))


# --- closed-form radial profiles ---------------------------------------------


@dataclass(frozen=True)
class MaterialProfile:
    """Principal values of ``eps = mu`` along the radial frame, as functions of r.

    Ball: ``(radial, tangential)``; cylinder: ``(radial, angular, axial)``.
    Also carries the matching metric principal values.
    """

    branch: str
    eps_radial: Callable
    eps_tangential: Callable
    eps_axial: Callable | None
    g_radial: Callable
    g_tangential: Callable


def _sphere_radius_factor(spec: CoatingSpec):
    a = spec.cloak_radius
    return lambda r: (a / np.pi) * np.sin(np.pi * np.asarray(r, dtype=float) / a)


def _safe_ratio(num, r):
    # value of S(r)/r at r = 0 is 1 for the round sphere in normal coordinates
    r = np.asarray(r, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, num / np.where(r > 0, r, 1.0), 1.0)
    return out


def material_profile(spec: CoatingSpec, branch: str = "exterior") -> MaterialProfile:
    """Vectorized principal values on one side of Sigma."""
    if branch == "exterior":
        emap = spec.exterior_map

        def parts(r):
            r = np.asarray(r, dtype=float)
            rho = emap.inverse(r)
            return rho, emap.derivative(rho)

        if spec.is_cylinder:
            return MaterialProfile(
                branch,
                eps_radial=lambda r: (lambda rho, fp: fp * rho / r)(*parts(r)),
                eps_tangential=lambda r: (lambda rho, fp: r / (fp * rho))(*parts(r)),
                eps_axial=lambda r: (lambda rho, fp: rho / (fp * r))(*parts(r)),
                g_radial=lambda r: (lambda rho, fp: 1.0 / fp**2)(*parts(r)),
                g_tangential=lambda r: (lambda rho, fp: (rho / r) ** 2)(*parts(r)),
            )
        return MaterialProfile(
            branch,
            eps_radial=lambda r: (lambda rho, fp: fp * rho**2 / r**2)(*parts(r)),
            eps_tangential=lambda r: (lambda rho, fp: 1.0 / fp)(*parts(r)),
            eps_axial=None,
            g_radial=lambda r: (lambda rho, fp: 1.0 / fp**2)(*parts(r)),
            g_tangential=lambda r: (lambda rho, fp: (rho / r) ** 2)(*parts(r)),
        )

    if not spec.has_interior_medium:
        raise DomainError("this construction has no interior medium (obstacle)")
    one = lambda r: np.ones_like(np.asarray(r, dtype=float))  # noqa: E731
    if spec.interior == "euclidean-ball":
        return MaterialProfile(branch, one, one, None, one, one)
    S = _sphere_radius_factor(spec)
    ratio = lambda r: _safe_ratio(S(r), r)  # noqa: E731
    if spec.interior == "round-3-sphere":
        return MaterialProfile(
            branch,
            eps_radial=lambda r: ratio(r) ** 2,
            eps_tangential=one,
            eps_axial=None,
            g_radial=one,
            g_tangential=lambda r: ratio(r) ** 2,
        )
    # product S2 x R, written in cylinder coordinates (r = distance to the south pole)
    return MaterialProfile(
        branch,
        eps_radial=ratio,
        eps_tangential=lambda r: 1.0 / ratio(r),
        eps_axial=ratio,
        g_radial=one,
        g_tangential=lambda r: ratio(r) ** 2,
    )


# --- pointwise sampling --------------------------------------------------------


def _interior_metric(spec: CoatingSpec, x: np.ndarray) -> np.ndarray:
    if spec.interior == "euclidean-ball":
        return np.eye(3)
    r = transverse_radius(spec, x)
    if r == 0.0:
        return np.eye(3)
    frame = radial_frame(spec, x)
    prof = material_profile(spec, "interior")
    gt = float(prof.g_tangential(r))
    diag = [1.0, gt, 1.0] if spec.is_cylinder else [1.0, gt, gt]
    return frame.T @ np.diag(diag) @ frame


def sample_cloak_media(spec: CoatingSpec, x) -> CloakMedia:
    """Metric ``g~`` and material ``eps~ = mu~`` at a point of ``N \\ Sigma``.

    Exterior values are computed by pushing the Euclidean structure forward
    through the coating map; interior values come from the interior manifold.
    """
    x = np.asarray(x, dtype=float)
    branch = branch_of(spec, x)
    dist = abs(transverse_radius(spec, x) - spec.cloak_radius)
    if dist < NEAR_SIGMA_FLOOR:
        warnings.warn(
            f"sample at distance {dist:.3g} from Sigma is below the {NEAR_SIGMA_FLOOR:g} floor",
            PrecisionWarning,
            stacklevel=2,
        )
    if branch == "exterior":
        Jinv, det_inv = jacobian(spec, x)
        g = Jinv.T @ Jinv
        DF = np.linalg.inv(Jinv)
        material = pushforward_tensor(MaterialTensor(np.eye(3)), DF, 1.0 / det_inv)
        return CloakMedia(MetricTensor(0.5 * (g + g.T)), material)
    if not spec.has_interior_medium:
        raise DomainError("this construction has no interior medium (obstacle)")
    g = MetricTensor(_interior_metric(spec, x))
    return CloakMedia(g, metric_to_material(g))


def fermi_material(spec: CoatingSpec, x) -> np.ndarray:
    """``|g~|^{1/2} g~^{ij}`` in Fermi coordinates ``(tau, tangential)`` at ``x``.

    ``tau`` is the g~-distance to Sigma, so ``d tau / d r = sqrt(g~(e_r, e_r))``.
    The density transforms with weight one: the ``tau tau`` entry picks up
    ``s = d tau/dr`` and tangential entries ``1/s``.  For the double coating
    this representation is Lipschitz across Sigma, whereas the Cartesian
    components jump by the ratio of the two radial scalings.
    """
    x = np.asarray(x, dtype=float)
    m = sample_cloak_media(spec, x)
    frame = radial_frame(spec, x)
    sig = frame @ m.material.components @ frame.T
    g_rr = frame[0] @ m.metric.components @ frame[0]
    J = np.diag([np.sqrt(g_rr), 1.0, 1.0])
    return J @ sig @ J.T / np.sqrt(g_rr)


@dataclass(frozen=True)
class DegeneracyReport:
    fitted_exponent_tangential: float
    fitted_constant_range: tuple[float, float]
    radial_eigenvalue: float
    radial_eigenvalue_spread: float
    det_sqrt_exponent: float
    det_sqrt_constant: float
    flux_bound: float


def _loglog_slope(t, y):
    slope, intercept = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope), float(np.exp(intercept))


def degeneracy_diagnostics(
    spec: CoatingSpec, distances=None, direction=None
) -> dict[str, DegeneracyReport]:
    """Fit the near-Sigma scaling of the metric on every side that carries a medium."""
    t = np.logspace(-6, -2, 25) if distances is None else np.asarray(distances, dtype=float)
    if direction is None:
        direction = np.array([0.6, 0.8, 0.3]) if spec.is_cylinder else np.array([1.0, 2.0, 2.0]) / 3.0
    direction = np.asarray(direction, dtype=float)
    unit = direction / transverse_radius(spec, direction)
    a = spec.cloak_radius
    sides = {"exterior": 1.0}
    if spec.is_double:
        sides["interior"] = -1.0
    reports = {}
    for side, sign in sides.items():
        tan, dets, rad, flux = [], [], [], []
        for ti in t:
            if spec.is_cylinder:
                x = np.array([unit[0] * (a + sign * ti), unit[1] * (a + sign * ti), direction[2]])
            else:
                x = unit * (a + sign * ti)
            g = sample_cloak_media(spec, x).metric.components
            frame = radial_frame(spec, x)
            er, ev = frame[0], frame[1]
            tan.append(ev @ g @ ev)
            rad.append(er @ g @ er)
            dets.append(np.sqrt(np.linalg.det(g)))
            ginv = np.linalg.inv(g)
            nu = er / np.sqrt(er @ ginv @ er)
            flux.append(np.linalg.norm(ginv @ nu))
        tan, dets, rad = map(np.asarray, (tan, dets, rad))
        p_tan, _ = _loglog_slope(t, tan)
        p_det, c_det = _loglog_slope(t, dets)
        ratio = tan / t**2
        reports[side] = DegeneracyReport(
            fitted_exponent_tangential=p_tan,
            fitted_constant_range=(float(ratio.min()), float(ratio.max())),
            radial_eigenvalue=float(np.mean(rad)),
            radial_eigenvalue_spread=float(np.ptp(rad)),
            det_sqrt_exponent=p_det,
            det_sqrt_constant=c_det,
            flux_bound=float(np.max(flux)),
        )
    return reports


# --- Hodge star -----------------------------------------------------------------


def levi_civita() -> np.ndarray:
    s = np.zeros((3, 3, 3))
    for (i, j, k), sign in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                            (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        s[i, j, k] = sign
    return s


_S = levi_civita()


def hodge_star_1form(g: MetricTensor, E) -> np.ndarray:
    """Hodge star of a 1-form; returns antisymmetric components ``w[p, q]``.

    The 2-form is ``sum_{p<q} w[p, q] dx^p ^ dx^q`` with
    ``w[p, q] = |g|^{1/2} g^{jl} E_j s_{lpq}``.
    """
    G = np.asarray(g.components, dtype=float)
    _check_spd(G, "metric")
    sigma = np.sqrt(np.linalg.det(G)) * np.linalg.inv(G)
    v = sigma.T @ np.asarray(E)
    return np.einsum("l,lpq->pq", v, _S)


def hodge_star_2form(g: MetricTensor, w) -> np.ndarray:
    """Hodge star of a 2-form given by antisymmetric components ``w[p, q]``."""
    G = np.asarray(g.components, dtype=float)
    _check_spd(G, "metric")
    ginv = np.linalg.inv(G)
    raised = ginv @ np.asarray(w) @ ginv.T
    return 0.5 * np.sqrt(np.linalg.det(G)) * np.einsum("ab,abc->c", raised, _S)
