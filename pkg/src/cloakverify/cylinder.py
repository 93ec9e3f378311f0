"""Cylindrical Maxwell modes for the cloaked infinite cylinder.

Fields carry ``exp(i n theta + i beta z)``.  In a medium ``eps = mu`` that is
diagonal in the cylindrical frame, Maxwell's equations reduce to a coupled
first-order system for the state ``(E_z, rho E_theta, H_z, rho H_theta)``
(the components tangential to circles ``rho = const``).  Those four are
covariant components along ``d theta`` and ``dz``, hence invariant under the
radial coating map — the exterior of a finite-energy cloaked field is a
pulled-back vacuum field.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import h1vp, hankel1, jv, jvp

from .geometry import CoatingSpec, DomainError, jacobian
from .radial import RadialSolution, ToleranceError, integral_residual, integrate_linear

CHANNELS = ("TM", "TE")  # TM: E_z-driven, TE: H_z-driven
DEFAULT_SEED_RADIUS = 1e-8
# the state is integrated with its t^|n| growth factored out, so it stays O(1)
# and an absolute floor below rtol is meaningful; pure relative control stalls
# on the angular components, which stay many decades below the axial ones
CYL_ATOL = 1e-14
RESIDUAL_TOL = 1e-9
# one decade tighter than the radial default keeps the integral residual a
# decade below RESIDUAL_TOL across the acceptance grid at negligible cost
CYL_RTOL = 1e-11


class BranchError(DomainError):
    """Transverse wavenumber vanishes (cutoff): cylindrical waves degenerate."""


def transverse_wavenumber(k: float, beta: float) -> complex:
    """``gamma = sqrt(k^2 - beta^2)`` on the branch with ``Im gamma >= 0``."""
    g = cmath.sqrt(complex(k * k - beta * beta))
    if abs(g) < 1e-14 * max(1.0, abs(k)):
        raise BranchError(f"gamma = 0 at k = {k}, beta = {beta}")
    if g.imag < 0 or (g.imag == 0 and g.real < 0):
        g = -g
    return g


@dataclass(frozen=True)
class CylMedia:
    """Principal values of ``eps = mu`` along (rho, theta, z) as functions of ``t = rho - center``."""

    eps_r: Callable
    eps_t: Callable
    eps_z: Callable
    center: float = 0.0


def vacuum_cyl_media() -> CylMedia:
    one = lambda t: 1.0  # noqa: E731
    return CylMedia(one, one, one, 0.0)


def coated_cyl_media(spec: CoatingSpec) -> CylMedia:
    if not spec.is_cylinder:
        raise DomainError("cylinder construction required")
    emap = spec.exterior_map
    a = spec.cloak_radius

    def parts(t):
        rho = float(emap.inverse_from_gap(t))
        return a + t, rho, float(emap.derivative(rho))

    def eps_r(t):
        r, rho, fp = parts(t)
        return fp * rho / r

    def eps_t(t):
        r, rho, fp = parts(t)
        return r / (fp * rho)

    def eps_z(t):
        r, rho, fp = parts(t)
        return rho / (fp * r)

    return CylMedia(eps_r, eps_t, eps_z, spec.cloak_radius)


def cyl_system(media: CylMedia, n: int, beta: float, k: float) -> Callable[[float], np.ndarray]:
    """Matrix of ``d/drho (E_z, P, H_z, Q) = A (E_z, P, H_z, Q)``, ``P = rho E_theta``.

    The returned callable takes the distance ``t = rho - center``.
    """

    def A(t):
        r = media.center + t
        er, et, ez = media.eps_r(t), media.eps_t(t), media.eps_z(t)
        cE = 1.0 / (k * er)  # E_rho = cE (-n/r H_z + beta/r Q)
        cH = 1.0 / (k * er)  # H_rho = cH ( n/r E_z - beta/r P), mu = eps
        ib, inn, ik = 1j * beta, 1j * n, 1j * k
        return np.array([
            [0.0, 0.0, -ib * cE * n / r, ib * cE * beta / r - ik * et / r],
            [0.0, 0.0, -inn * cE * n / r + ik * r * ez, inn * cE * beta / r],
            [ib * cH * n / r, -ib * cH * beta / r + ik * et / r, 0.0, 0.0],
            [inn * cH * n / r - ik * r * ez, -inn * cH * beta / r, 0.0, 0.0],
        ])

    return A


def vacuum_state(n: int, beta: float, k: float, rho, channel: str, kind: str = "J") -> np.ndarray:
    """Vacuum 4-state of the regular (``J``) or outgoing (``H``) wave, unit axial amplitude."""
    g = transverse_wavenumber(k, beta)
    x = g * np.asarray(rho, dtype=float)
    if kind == "J":
        Z, dZ = jv(n, x), jvp(n, x)
    elif kind == "H":
        Z, dZ = hankel1(n, x), h1vp(n, x)
    else:
        raise DomainError(f"unknown kind {kind!r}")
    dZ = g * dZ  # d/drho
    g2 = g * g
    zero = np.zeros_like(Z)
    if channel == "TM":
        return np.array([Z, -beta * n * Z / g2, zero, rho * 1j * k * dZ / g2])
    if channel == "TE":
        return np.array([zero, -rho * 1j * k * dZ / g2, Z, -beta * n * Z / g2])
    raise DomainError(f"channel must be one of {CHANNELS}")


@dataclass
class CylMode:
    """Radial profiles of one cylindrical mode (a single seed solution)."""

    n: int
    beta: float
    k: float
    gamma: complex
    media: CylMedia = field(repr=False)
    solution: RadialSolution = field(repr=False)

    @property
    def rho(self):
        return self.solution.r

    @property
    def state(self):
        return self.solution.y

    def state_at(self, rho):
        t = np.abs(np.atleast_1d(np.asarray(rho, dtype=float)) - self.solution.center)
        return np.array([self.solution.at(ti) for ti in t]).T

    def scaled(self, c: complex) -> "CylMode":
        sol = self.solution
        dense = sol.dense
        new = RadialSolution(sol.center, sol.sign, sol.t, c * sol.y, lambda s: c * dense(s), sol.gap_coords)
        return CylMode(self.n, self.beta, self.k, self.gamma, self.media, new)


@dataclass
class ScatteringEntry:
    """Reflection matrix ``R[out, in]`` over channels (TM, TE) for a unit regular incident wave."""

    n: int
    beta: float
    k: float
    reflection: np.ndarray
    lining: str
    residual: float = 0.0
    modes: list = field(default_factory=list, repr=False)
    combination: np.ndarray = field(default=None, repr=False)  # seed weights per incident channel

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.reflection)))

    def propagating(self) -> bool:
        return self.k > abs(self.beta)

    def unitarity_defect(self) -> float:
        """``|S^H S - I|`` with ``S = I + 2R``; zero for lossless scattering of propagating modes."""
        S = np.eye(2) + 2 * self.reflection
        return float(np.max(np.abs(S.conj().T @ S - np.eye(2))))


def _seed_vectors(lining: str):
    if lining == "shs":
        # angular components vanish; axial ones free
        return [np.array([1, 0, 0, 0], complex), np.array([0, 0, 1, 0], complex)]
    if lining == "pec":
        # tangential E vanishes; tangential H free
        return [np.array([0, 0, 1, 0], complex), np.array([0, 0, 0, 1], complex)]
    raise DomainError(f"unknown lining {lining!r}")


def _match(n, beta, k, R, seeds_at_R) -> tuple[np.ndarray, np.ndarray]:
    out = [vacuum_state(n, beta, k, R, c, "H") for c in CHANNELS]
    inc = [vacuum_state(n, beta, k, R, c, "J") for c in CHANNELS]
    M = np.column_stack([out[0], out[1], -seeds_at_R[0], -seeds_at_R[1]])
    refl = np.zeros((2, 2), complex)
    comb = np.zeros((2, 2), complex)
    for j in range(2):
        x = np.linalg.solve(M, -inc[j])
        refl[:, j] = x[:2]
        comb[:, j] = x[2:]
    return refl, comb


def _solve(media, n, beta, k, t0, t_end, seeds, R, rtol, n_samples=200, check_residual=True):
    gamma = transverse_wavenumber(k, beta)
    A = cyl_system(media, n, beta, k)
    grid = np.geomspace(t0, t_end, n_samples)
    modes, residual = [], 0.0
    for y0 in seeds:
        y0 = np.asarray(y0, complex)
        y0 = y0 / np.max(np.abs(y0))
        sol = integrate_linear(A, media.center, 1.0, t0, t_end, y0, t_eval=grid, rtol=rtol, atol=CYL_ATOL,
                               gap_coords=True, growth=abs(n))
        if check_residual:
            residual = max(residual, float(np.max(integral_residual(sol, A))))
            if residual > RESIDUAL_TOL:
                raise ToleranceError(f"cylinder mode n={n}, beta={beta}, k={k}: ODE residual {residual:.2e}")
        modes.append(CylMode(n, beta, k, gamma, media, sol))
    refl, comb = _match(n, beta, k, R, [m.state[:, -1] for m in modes])
    return modes, refl, comb, residual


def solve_cyl_mode(spec: CoatingSpec, n: int, beta: float, k: float, lining: str = "shs",
                   seed_radius: float = DEFAULT_SEED_RADIUS, rtol: float = CYL_RTOL,
                   check_residual: bool = True) -> ScatteringEntry:
    """Reflection of the coated cylinder with the given lining on the inner face.

    The lining condition is imposed at ``rho = a + seed_radius``; the two free
    components give two independent seeds, matched at ``rho = R`` to regular
    plus outgoing cylindrical waves.
    """
    if k <= 0:
        raise DomainError("k must be positive")
    media = coated_cyl_media(spec)
    a, R = spec.cloak_radius, spec.outer_radius
    modes, refl, comb, res = _solve(media, n, beta, k, seed_radius, R - a, _seed_vectors(lining), R, rtol,
                                    check_residual=check_residual)
    return ScatteringEntry(n, beta, k, refl, lining, res, modes, comb)


def solve_cyl_mode_shs(n: int, beta: float, k: float, spec: CoatingSpec | None = None, **kw) -> ScatteringEntry:
    """Soft-and-hard lining: ``E_theta = H_theta = 0`` on the inner face."""
    return solve_cyl_mode(spec or CoatingSpec(kind="single-cylinder-shs"), n, beta, k, "shs", **kw)


def solve_cyl_mode_pec(n: int, beta: float, k: float, spec: CoatingSpec | None = None, **kw) -> ScatteringEntry:
    """Perfect electric conductor lining: ``E_theta = E_z = 0`` on the inner face (control)."""
    return solve_cyl_mode(spec or CoatingSpec(kind="single-cylinder-shs"), n, beta, k, "pec", **kw)


def solve_cyl_mode_vacuum(n: int, beta: float, k: float, R: float = 2.0, t0: float = 1e-3,
                          rtol: float = CYL_RTOL) -> ScatteringEntry:
    """Uncoated cylinder ``rho <= R`` without obstacle, seeded with exact regular waves."""
    seeds = [vacuum_state(n, beta, k, t0, c, "J") for c in CHANNELS]
    modes, refl, comb, res = _solve(vacuum_cyl_media(), n, beta, k, t0, R, seeds, R, rtol)
    return ScatteringEntry(n, beta, k, refl, "none", res, modes, comb)


def virtual_wire_reflection(n: int, beta: float, k: float, wire_radius: float, lining: str) -> np.ndarray:
    """Closed-form reflection of a thin wire in vacuum.

    The cloaked lining at ``rho = a + t0`` is, in virtual coordinates, a wire
    of radius ``F^{-1}(a + t0)``.  PEC: ``R_TM = -J_n/H_n``, ``R_TE = -J_n'/H_n'``
    when ``beta n = 0`` (decoupled); SHS: both angular components vanish.
    """
    g = transverse_wavenumber(k, beta)
    x = g * wire_radius
    if lining == "pec" and beta * n == 0:
        return np.diag([-jv(n, x) / hankel1(n, x), -jvp(n, x) / h1vp(n, x)])
    return transfer_matrix_reflection(n, beta, k, wire_radius, 2.0, lining)


def transfer_matrix_reflection(n: int, beta: float, k: float, wire_radius: float, R: float,
                               lining: str) -> np.ndarray:
    """Reflection from an independent Bessel transfer-matrix construction in vacuum.

    The state at ``R`` is ``B(R) B(w)^{-1}`` applied to the lined state at the wire
    radius ``w``, where ``B`` is the 4x4 basis of regular and outgoing waves.
    """
    def basis(rho):
        return np.column_stack([vacuum_state(n, beta, k, rho, c, kd) for kd in ("J", "H") for c in CHANNELS])

    T = basis(R) @ np.linalg.inv(basis(wire_radius))
    seeds = [T @ s for s in _seed_vectors(lining)]
    return _match(n, beta, k, R, seeds)[0]


def scattering_grid(lining: str, n_values=range(6), beta_fracs=(0.0, 0.3, 0.9), k_grid=(0.5, 1.0, 2.0),
                    spec: CoatingSpec | None = None, check_residual: bool = False) -> list[ScatteringEntry]:
    out = []
    for k in k_grid:
        for bf in beta_fracs:
            for n in n_values:
                out.append(solve_cyl_mode(spec or CoatingSpec(kind="single-cylinder-shs"), n, bf * k, k,
                                          lining, check_residual=check_residual))
    return out


# --- boundary-layer diagnostics -----------------------------------------------------


@dataclass
class AngularTraceFit:
    slope: float
    degenerate: bool
    axial_limit: complex = 0j
    axial_gap: float = 0.0  # |E_z(a + 1e-6) - extrapolated limit|


def superposed_state(modes, weights, rho, theta: float = 0.3):
    """State of ``sum_n w_n mode_n exp(i n theta)`` at radii ``rho`` (z = 0)."""
    tot = 0
    for m, w in zip(modes, weights):
        tot = tot + w * np.exp(1j * m.n * theta) * m.state_at(rho)
    return tot


def plane_wave_modes(spec: CoatingSpec, k: float = 1.0, beta: float = 0.0, n_max: int = 6,
                     channel: str = "TE") -> tuple[list, list]:
    """Cloaked modes whose superposition is the pullback of a plane wave (Jacobi-Anger weights).

    The default TE channel carries ``E`` in the transverse plane, so the angular
    electric component is generically nonzero; for TM at ``beta = 0`` it
    vanishes identically.
    """
    modes, weights = [], []
    for n in range(-n_max, n_max + 1):
        entry = solve_cyl_mode(spec, n, beta, k, "shs", seed_radius=1e-9, check_residual=False)
        c = entry.combination[:, CHANNELS.index(channel)]
        sol0, sol1 = entry.modes[0].solution, entry.modes[1].solution
        y = c[0] * sol0.y + c[1] * sol1.y
        dense = (lambda d0, d1, c: (lambda s: c[0] * d0(s) + c[1] * d1(s)))(sol0.dense, sol1.dense, c)
        sol = RadialSolution(sol0.center, sol0.sign, sol0.t, y, dense, sol0.gap_coords)
        modes.append(CylMode(n, beta, k, entry.modes[0].gamma, entry.modes[0].media, sol))
        weights.append(1j ** abs(n))
    return modes, weights


def cyl_angular_trace_limit(modes, weights=None, a: float | None = None,
                            distances=(1e-3, 1e-4, 1e-5, 1e-6), theta: float = 0.3) -> AngularTraceFit:
    """Log-log slope of ``|eta . E|`` (``eta = d/dtheta``) against the distance to Sigma.

    Also extrapolates the axial component ``E_z`` to Sigma and reports its
    gap at the smallest distance.
    """
    if isinstance(modes, CylMode):
        modes, weights = [modes], [1.0]
    weights = weights if weights is not None else [1.0] * len(modes)
    a = modes[0].media.center if a is None else a
    d = np.asarray(distances, dtype=float)
    st = superposed_state(modes, weights, a + d, theta)
    ang = np.abs(st[1])
    ez = st[0]
    if np.all(ang == 0) or not np.all(np.isfinite(ang)):
        return AngularTraceFit(float("nan"), True)
    if np.any(ang == 0):
        return AngularTraceFit(float("nan"), True)
    slope = float(np.polyfit(np.log(d), np.log(ang), 1)[0])
    far = a + np.array([1e-3, 2e-3, 4e-3])
    ez_far = superposed_state(modes, weights, far, theta)[0]
    coef = np.polyfit(far - a, ez_far, 2)
    limit = complex(coef[-1])
    return AngularTraceFit(slope, False, limit, float(abs(ez[-1] - limit)))


def cylinder_jacobian_structure(spec: CoatingSpec, distances=(1e-2, 1e-3, 1e-4, 1e-5), theta: float = 0.7,
                                z: float = 0.4) -> dict:
    """Angular/axial blocks of ``D F^{-1}`` in the boundary layer.

    Reports ``max |eta . DF^{-1} eta| / t`` (bounded), ``max |zeta . DF^{-1} zeta - 1|``
    and the largest eta/zeta cross term (exactly zero for a radial map).
    """
    a = spec.cloak_radius
    ang_ratio, axial_dev, cross = [], [], []
    for t in distances:
        r = a + t
        x = np.array([r * np.cos(theta), r * np.sin(theta), z])
        J, _ = jacobian(spec, x)
        eta = np.array([-np.sin(theta), np.cos(theta), 0.0])
        zeta = np.array([0.0, 0.0, 1.0])
        ang_ratio.append(abs(eta @ J @ eta) / t)
        axial_dev.append(abs(zeta @ J @ zeta - 1.0))
        cross.append(max(abs(eta @ J @ zeta), abs(zeta @ J @ eta)))
    return {"angular_over_t": max(ang_ratio), "axial_deviation": max(axial_dev), "cross_terms": max(cross)}


# --- axis traces (double cylinder) ---------------------------------------------------


@dataclass
class AxisTraces:
    """Axial field values along the blown-up lines on both sides of Sigma."""

    z: np.ndarray
    be1: np.ndarray
    bh1: np.ndarray
    be2: np.ndarray
    bh2: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(v) for v in (self.z, self.be1, self.bh1, self.be2, self.bh2)}
        if len(shapes) != 1:
            raise DomainError("traces must share the z grid")

    def difference(self) -> "AxisTraces":
        zero = np.zeros_like(self.be1, dtype=complex)
        return AxisTraces(self.z, np.asarray(self.be1 - self.be2, complex), np.asarray(self.bh1 - self.bh2, complex),
                          zero, zero)


@dataclass
class TraceMatch:
    compatible: bool
    sup_e: float
    sup_h: float
    mismatch: AxisTraces | None = None


def axis_trace_match(traces: AxisTraces, tol: float = 1e-9) -> TraceMatch:
    """Finite-energy compatibility: ``b^e_1 = b^e_2`` and ``b^h_1 = b^h_2`` along the axis."""
    de = np.abs(np.asarray(traces.be1) - np.asarray(traces.be2))
    dh = np.abs(np.asarray(traces.bh1) - np.asarray(traces.bh2))
    se, sh = float(np.max(de, initial=0.0)), float(np.max(dh, initial=0.0))
    ok = se < tol and sh < tol
    return TraceMatch(ok, se, sh, None if ok else traces.difference())


def free_space_axis_traces(waves, z) -> tuple[np.ndarray, np.ndarray]:
    """``(E_z, H_z)`` on the axis of a superposition of regular cylindrical waves.

    ``waves`` is a list of ``(n, beta, k, a_TM, a_TE)``; only ``n = 0`` waves
    reach the axis since ``J_n(0) = 0`` otherwise.
    """
    z = np.asarray(z, dtype=float)
    ez = np.zeros_like(z, dtype=complex)
    hz = np.zeros_like(z, dtype=complex)
    for n, beta, k, a_tm, a_te in waves:
        phase = np.exp(1j * beta * z)
        ez += a_tm * jv(n, 0.0) * phase
        hz += a_te * jv(n, 0.0) * phase
    return ez, hz


@dataclass
class SurfaceSources:
    """Per-mode amplitudes of the induced electric/magnetic surface sources on Sigma."""

    n: int
    beta: float
    s_e: complex
    s_h: complex


def induced_surface_sources(mismatch: AxisTraces, n: int = 0, beta: float = 0.0) -> SurfaceSources:
    """Project the trace jumps ``b_1 - b_2`` on the axial mode ``exp(i beta z)``.

    The jump of the axial field across Sigma is carried by a surface source
    along the angular direction, ``nu x (zeta jump)``; its amplitude is the
    least-squares Fourier coefficient of the jump.
    """
    z = np.asarray(mismatch.z, dtype=float)
    phase = np.exp(1j * beta * z)
    norm = np.vdot(phase, phase).real
    s_e = complex(np.vdot(phase, np.asarray(mismatch.be1) - np.asarray(mismatch.be2)) / norm)
    s_h = complex(np.vdot(phase, np.asarray(mismatch.bh1) - np.asarray(mismatch.bh2)) / norm)
    return SurfaceSources(n, beta, s_e, s_h)
