"""Singular coating maps for ball and cylinder cloaks.

A coating map ``F`` sends a punctured nonsingular space onto ``N \\ Sigma``.
All maps here are radial: they stretch the distance to the blown-up point
(ball) or line (cylinder) and leave angles and the axial coordinate alone.
The exterior branch ``F1`` blows up the origin of ``B(0, R)`` onto the shell
``a < r <= R``.  The interior branch ``F2`` (double coatings only) is the
inverse exponential map of a round sphere of radius ``a / pi``, which in
normal coordinates acts as the identity on the radial coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import BPoly

KINDS = ("single-ball", "double-ball", "single-cylinder-shs", "double-cylinder")
STRETCHES = ("canonical-linear", "appendix-smooth")
INTERIORS = ("euclidean-ball", "round-3-sphere", "product-S2xR", "none")

_DEFAULT_INTERIOR = {
    "single-ball": "euclidean-ball",
    "double-ball": "round-3-sphere",
    "single-cylinder-shs": "none",
    "double-cylinder": "product-S2xR",
}


class DomainError(ValueError):
    """Argument outside the domain of a map or operation."""


class SingularSurfaceError(DomainError):
    """Point lies on (or, for the exterior branch, inside) the cloak surface."""


@dataclass(frozen=True)
class CoatingSpec:
    """Declarative description of a cloak construction.

    ``interior=None`` picks the natural interior for ``kind``.
    """

    kind: str = "single-ball"
    outer_radius: float = 2.0
    cloak_radius: float = 1.0
    stretch: str = "canonical-linear"
    interior: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown coating kind {self.kind!r}")
        if self.stretch not in STRETCHES:
            raise DomainError(f"unknown stretch profile {self.stretch!r}")
        if self.interior is None:
            object.__setattr__(self, "interior", _DEFAULT_INTERIOR[self.kind])
        if self.interior not in INTERIORS:
            raise DomainError(f"unknown interior {self.interior!r}")
        if not (0.0 < self.cloak_radius < self.outer_radius):
            raise DomainError("need 0 < cloak_radius < outer_radius")
        if self.kind.startswith("single") and self.interior not in ("euclidean-ball", "none"):
            raise DomainError("single coatings take a nonsingular interior")
        if self.kind == "double-ball" and self.interior != "round-3-sphere":
            raise DomainError("double-ball interior must be the round 3-sphere")
        if self.kind == "double-cylinder" and self.interior != "product-S2xR":
            raise DomainError("double-cylinder interior must be S2 x R")
        if self.kind.endswith("ball") and self.interior == "product-S2xR":
            raise DomainError("S2 x R interior only applies to cylinders")
        if self.stretch == "appendix-smooth" and not np.isclose(
            self.outer_radius, 3.0 * self.cloak_radius, rtol=1e-14
        ):
            raise DomainError("appendix-smooth profile requires outer_radius = 3 * cloak_radius")

    @property
    def is_double(self) -> bool:
        return self.kind.startswith("double")

    @property
    def is_cylinder(self) -> bool:
        return "cylinder" in self.kind

    @property
    def has_interior_medium(self) -> bool:
        return self.interior != "none"

    @cached_property
    def exterior_map(self) -> "RadialMap":
        if self.stretch == "canonical-linear":
            return linear_map(self.cloak_radius, self.outer_radius)
        return appendix_map(self.cloak_radius)


@dataclass(frozen=True)
class RadialMap:
    """Monotone radial stretch ``rho -> r`` from ``(0, R]`` onto ``(a, R]``."""

    a: float
    R: float
    forward: Callable
    inverse: Callable
    derivative: Callable
    second_derivative: Callable
    inverse_gap: Callable | None = None

    def inverse_derivative(self, r):
        """``d rho / d r`` evaluated at the physical radius ``r``."""
        return 1.0 / self.derivative(self.inverse(r))

    def inverse_from_gap(self, t):
        """``rho`` at ``r = a + t``, without the cancellation in forming ``r - a``."""
        if self.inverse_gap is not None:
            return self.inverse_gap(t)
        return self.inverse(self.a + np.asarray(t, dtype=float))


def linear_map(a: float, R: float) -> RadialMap:
    slope = (R - a) / R
    return RadialMap(
        a=a,
        R=R,
        forward=lambda rho: a + slope * np.asarray(rho, dtype=float),
        # (r - a) is formed first so that rho stays accurate next to Sigma
        inverse=lambda r: (np.asarray(r, dtype=float) - a) / slope,
        derivative=lambda rho: np.full_like(np.asarray(rho, dtype=float), slope),
        second_derivative=lambda rho: np.zeros_like(np.asarray(rho, dtype=float)),
        inverse_gap=lambda t: np.asarray(t, dtype=float) / slope,
    )


def _appendix_blend(a: float) -> BPoly:
    # quintic Hermite blend: value, slope and curvature match at both ends
    return BPoly.from_derivatives(
        [a / 2.0, 2.0 * a], [[1.25 * a, 0.5, 0.0], [2.0 * a, 1.0, 0.0]]
    )


def _piecewise(tau, a, near, blend, far):
    tau = np.asarray(tau, dtype=float)
    out = np.where(tau <= a / 2.0, near(tau), np.where(tau >= 2.0 * a, far(tau), 0.0))
    mid = (tau > a / 2.0) & (tau < 2.0 * a)
    if np.any(mid):
        out = np.where(mid, blend(np.clip(tau, a / 2.0, 2.0 * a)), out)
    return out[()] if out.ndim == 0 else out


def stretch_appendix(tau, a: float):
    """Smooth strictly increasing stretch on ``[0, 3a]``.

    Equal to ``tau/2 + a`` for ``tau <= a/2`` and to ``tau`` for ``tau >= 2a``,
    joined by a C2 quintic.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0.0) or np.any(tau_arr > 3.0 * a * (1 + 1e-14)):
        raise DomainError(f"tau outside [0, {3 * a}]")
    blend = _appendix_blend(a)
    return _piecewise(tau_arr, a, lambda t: 0.5 * t + a, blend, lambda t: t)


def appendix_map(a: float) -> RadialMap:
    blend = _appendix_blend(a)
    d1, d2 = blend.derivative(1), blend.derivative(2)
    R = 3.0 * a

    def forward(rho):
        return stretch_appendix(rho, a)

    def derivative(rho):
        return _piecewise(rho, a, lambda t: np.full_like(t, 0.5), d1, np.ones_like)

    def second_derivative(rho):
        return _piecewise(rho, a, np.zeros_like, d2, np.zeros_like)

    def inverse(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        flat = r.reshape(-1)
        res = out.reshape(-1)
        for i, ri in enumerate(flat):
            if ri <= 1.25 * a:
                res[i] = 2.0 * (ri - a)
            elif ri >= 2.0 * a:
                res[i] = ri
            else:
                res[i] = _invert_blend(blend, d1, ri, a)
        return out[()] if out.ndim == 0 else out

    def inverse_gap(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0.25 * a, 2.0 * t, inverse(a + t))[()]

    return RadialMap(a, R, forward, inverse, derivative, second_derivative, inverse_gap)


def _invert_blend(blend, d1, r, a):
    # Newton on a strictly increasing quintic, bracketed by [a/2, 2a]
    lo, hi = a / 2.0, 2.0 * a
    x = lo + (r - 1.25 * a) / (0.75 * a) * (hi - lo)
    for _ in range(60):
        fx = float(blend(x)) - r
        if fx > 0:
            hi = x
        else:
            lo = x
        step = fx / float(d1(x))
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


def map_forward(spec: CoatingSpec, rho):
    """Physical radius ``r = F1(rho)`` for ``0 < rho <= R``."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0.0) or np.any(rho_arr > spec.outer_radius * (1 + 1e-15)):
        raise DomainError(f"rho must lie in (0, {spec.outer_radius}]")
    return spec.exterior_map.forward(rho_arr)


def map_inverse(spec: CoatingSpec, r):
    """Virtual radius ``rho = F1^{-1}(r)`` for ``a < r <= R``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= spec.cloak_radius):
        raise SingularSurfaceError("r <= cloak radius: point is on or inside Sigma")
    if np.any(r_arr > spec.outer_radius * (1 + 1e-15)):
        raise DomainError(f"r must not exceed {spec.outer_radius}")
    return spec.exterior_map.inverse(r_arr)


def transverse_radius(spec: CoatingSpec, x) -> float:
    """Distance used by the radial map: |x| for balls, sqrt(x1^2 + x2^2) for cylinders."""
    x = np.asarray(x, dtype=float)
    return float(np.hypot(x[0], x[1])) if spec.is_cylinder else float(np.linalg.norm(x))


def radial_frame(spec: CoatingSpec, x) -> np.ndarray:
    """Rows: unit radial vector, then two Euclidean-orthonormal tangential vectors.

    For cylinders the tangential rows are the angular unit vector and the axis.
    """
    x = np.asarray(x, dtype=float)
    if spec.is_cylinder:
        rho = np.hypot(x[0], x[1])
        er = np.array([x[0] / rho, x[1] / rho, 0.0])
        eth = np.array([-er[1], er[0], 0.0])
        return np.array([er, eth, [0.0, 0.0, 1.0]])
    er = x / np.linalg.norm(x)
    seed = np.array([1.0, 0.0, 0.0]) if abs(er[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    v = seed - er * (seed @ er)
    v /= np.linalg.norm(v)
    return np.array([er, v, np.cross(er, v)])


def branch_of(spec: CoatingSpec, x) -> str:
    """``exterior`` (N1) or ``interior`` (N2); raises on Sigma and outside N."""
    r = transverse_radius(spec, x)
    a = spec.cloak_radius
    if r > spec.outer_radius * (1 + 1e-15):
        raise DomainError("point outside the domain N")
    if r == a:
        raise SingularSurfaceError("point lies on Sigma")
    return "exterior" if r > a else "interior"


def radial_scalings(spec: CoatingSpec, r: float, branch: str) -> tuple[float, float]:
    """``(d rho/d r, rho / r)`` for the inverse map on the given branch."""
    if branch == "exterior":
        emap = spec.exterior_map
        rho = float(emap.inverse(r))
        return float(emap.inverse_derivative(r)), rho / r
    if not spec.has_interior_medium:
        raise DomainError("this construction has no interior medium (obstacle)")
    # single coating: F2 = identity on D; double coating: normal coordinates
    return 1.0, 1.0


def jacobian(spec: CoatingSpec, x) -> tuple[np.ndarray, float]:
    """Jacobian ``D(F^{-1})`` at ``x`` in Cartesian coordinates, and its determinant."""
    x = np.asarray(x, dtype=float)
    branch = branch_of(spec, x)
    r = transverse_radius(spec, x)
    if r == 0.0:
        return np.eye(3), 1.0
    radial, tangential = radial_scalings(spec, r, branch)
    frame = radial_frame(spec, x)
    if spec.is_cylinder:
        diag = np.array([radial, tangential, 1.0])
    else:
        diag = np.array([radial, tangential, tangential])
    J = frame.T @ np.diag(diag) @ frame
    return J, float(np.prod(diag))


def inverse_point(spec: CoatingSpec, x) -> np.ndarray:
    """Cartesian ``F^{-1}(x)`` (virtual-space point)."""
    x = np.asarray(x, dtype=float)
    branch = branch_of(spec, x)
    r = transverse_radius(spec, x)
    if branch == "interior" or r == 0.0:
        if not spec.has_interior_medium:
            raise DomainError("this construction has no interior medium (obstacle)")
        return x.copy()
    rho = float(spec.exterior_map.inverse(r))
    if spec.is_cylinder:
        return np.array([x[0] * rho / r, x[1] * rho / r, x[2]])
    return x * (rho / r)
