"""Time-harmonic Maxwell modes on cloaked balls.

Convention: ``curl E = ik mu H`` and ``curl H = -ik eps E + J``, so the
radiated field of a current obeys ``curl curl E - k^2 E = ik J`` in vacuum.

Fields are expanded in vector spherical harmonics ``Y r^``, ``X`` and
``Z = r^ x X`` with ``X = L Y / sqrt(l(l+1))``.  In spherically symmetric
media with ``eps = mu`` the TE and TM families decouple; each reduces to a
first-order system for two radially-scaled tangential amplitudes:

* TM: ``H = h X``, ``E = e_r Y r^ + e_t Z``, state ``(psi, y) = (r h, r e_t)``;
* TE: ``E = e X``, ``H = h_r Y r^ + h_t Z``, state ``(psi, y) = (r e, r h_t)``.

Both state components are invariant under the radial coating map, which is
what makes the cloaked admittance equal to the vacuum one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import sph_harm_y, spherical_jn, spherical_yn

from .geometry import CoatingSpec, DomainError
from .radial import DEFAULT_ATOL, DEFAULT_RTOL, RadialSolution, integrate_linear

POLARIZATIONS = ("TE", "TM")


class TruncationWarning(UserWarning):
    """Multipole tail at ``l_max`` is not negligible."""


class InternalConsistencyError(RuntimeError):
    """Two independent criteria disagree."""


# --- special functions -------------------------------------------------------------


def riccati_bessel(l: int, x, kind: str = "j"):
    """``(x z_l(x), d/dx [x z_l(x)])`` for ``z = j`` (psi) or ``z = h^(1)`` (xi)."""
    x = np.asarray(x, dtype=float)
    z = spherical_jn(l, x)
    dz = spherical_jn(l, x, derivative=True)
    if kind == "h":
        z = z + 1j * spherical_yn(l, x)
        dz = dz + 1j * spherical_yn(l, x, derivative=True)
    elif kind != "j":
        raise DomainError(f"unknown kind {kind!r}")
    return x * z, z + x * dz


def spherical_hankel1(l: int, x):
    return spherical_jn(l, x) + 1j * spherical_yn(l, x)


def _clip_theta(theta):
    # the pole is a coordinate singularity of the (theta, phi) components only
    return np.clip(theta, 1e-12, np.pi - 1e-12)


def vsh(l: int, m: int, theta, phi):
    """``(Y, X, Z)`` with ``X``, ``Z`` given as (theta, phi) components, shape (..., 2)."""
    theta = _clip_theta(np.asarray(theta, dtype=float))
    phi = np.asarray(phi, dtype=float)
    Y = sph_harm_y(l, m, theta, phi)
    if m + 1 <= l:
        Yp = sph_harm_y(l, m + 1, theta, phi)
        dY = m / np.tan(theta) * Y + np.sqrt((l - m) * (l + m + 1)) * np.exp(-1j * phi) * Yp
    else:
        dY = m / np.tan(theta) * Y
    s = np.sqrt(l * (l + 1))
    mY = m * Y / np.sin(theta)
    X = np.stack([-mY, -1j * dY], axis=-1) / s
    Z = np.stack([1j * dY, -mY], axis=-1) / s
    return Y, X, Z


def spherical_basis(theta, phi):
    """Cartesian unit vectors ``(r^, theta^, phi^)``, each of shape (..., 3)."""
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    er = np.stack([st * cp, st * sp, ct], axis=-1)
    et = np.stack([ct * cp, ct * sp, -st], axis=-1)
    ep = np.stack([-sp, cp, np.zeros_like(phi)], axis=-1)
    return er, et, ep


def to_spherical(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=-1)
    theta = np.arccos(np.clip(x[:, 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
    phi = np.arctan2(x[:, 1], x[:, 0])
    return r, theta, phi


def mode_indices(l_max: int):
    return [(l, m) for l in range(1, l_max + 1) for m in range(-l, l + 1)]


def wave_functions(l: int, m: int, k: float, x, kind: str = "j"):
    """Cartesian ``M = z_l X`` and ``N = curl M / k`` at points ``x`` (shape (n, 3))."""
    r, theta, phi = to_spherical(x)
    er, et, ep = spherical_basis(_clip_theta(theta), phi)
    Y, X, Z = vsh(l, m, theta, phi)
    kr = k * r
    zr, dzr = riccati_bessel(l, kr, kind)
    z = zr / kr
    Xc = X[:, :1] * et + X[:, 1:] * ep
    Zc = Z[:, :1] * et + Z[:, 1:] * ep
    L = l * (l + 1)
    M = z[:, None] * Xc
    N = (1j * np.sqrt(L) * z / kr * Y)[:, None] * er + (dzr / kr)[:, None] * Zc
    return M, N


# --- sources ------------------------------------------------------------------------


def dipole_field(x, x0, p, k):
    """Free-space ``(E, H)`` of a point current ``J = p delta(x - x0)``."""
    d = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(x0, dtype=float)
    R = np.linalg.norm(d, axis=-1)
    n = d / R[:, None]
    p = np.asarray(p, dtype=complex)
    g = np.exp(1j * k * R) / (4 * np.pi * R)
    kR = k * R
    c1 = 1 + 1j / kR - 1 / kR**2
    c2 = -1 - 3j / kR + 3 / kR**2
    E = 1j * k * g[:, None] * (c1[:, None] * p + c2[:, None] * n * (n @ p)[:, None])
    H = (g * (1j * k - 1 / R))[:, None] * np.cross(n, p)
    return E, H


@dataclass(frozen=True)
class PointDipole:
    location: tuple
    moment: tuple

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.moment))

    def support_radius(self) -> float:
        return float(np.linalg.norm(self.location))

    def point_currents(self):
        return np.atleast_2d(self.location), np.atleast_2d(np.asarray(self.moment, dtype=complex))

    def field(self, x, k):
        return dipole_field(x, self.location, self.moment, k)


@dataclass(frozen=True)
class ShellCurrent:
    """Surface current ``amplitude * delta(r - radius) * (X_lm or Z_lm)`` (TE or TM)."""

    radius: float
    l: int
    m: int
    pol: str
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.pol not in POLARIZATIONS:
            raise DomainError(f"pol must be one of {POLARIZATIONS}")
        if self.l < 1 or abs(self.m) > self.l:
            raise DomainError("need l >= 1 and |m| <= l")

    @property
    def norm(self) -> float:
        return float(abs(self.amplitude) * self.radius**2)

    def support_radius(self) -> float:
        return self.radius

    def coefficient(self, k: float) -> complex:
        x = k * self.radius
        if self.pol == "TE":
            return -k**2 * self.amplitude * self.radius**2 * spherical_jn(self.l, x)
        return -k**2 * self.amplitude * self.radius**2 * riccati_bessel(self.l, x)[1] / x

    def field(self, x, k):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if np.any(np.linalg.norm(x, axis=-1) <= self.radius):
            raise DomainError("field of a shell current is only evaluated outside the shell")
        M, N = wave_functions(self.l, self.m, k, x, kind="h")
        c = self.coefficient(k)
        if self.pol == "TE":
            return c * M, -1j * c * N
        return c * N, -1j * c * M


@dataclass(frozen=True)
class NonRadiatingBump:
    """``J = (curl curl - k^2) A`` for ``A = (1 - s^2/w^2)^order p``, ``s = |x - center|``.

    The radiated field is ``ik A`` and vanishes outside the bump.
    Evaluated through a product Gauss rule on the bump ball.
    """

    center: tuple
    width: float
    moment: tuple
    order: int = 6
    n_radial: int = 24
    n_polar: int = 16
    n_azimuth: int = 32

    def support_radius(self) -> float:
        return float(np.linalg.norm(self.center) + self.width)

    def profile(self, s):
        w, m = self.width, self.order
        u = 1 - (s / w) ** 2
        b = u**m
        db_s = -2 * m / w**2 * u ** (m - 1)  # b'(s) / s
        d2b = db_s + 4 * m * (m - 1) / w**4 * s**2 * u ** (m - 2)
        return b, db_s, d2b

    def current(self, x, k):
        d = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(self.center, dtype=float)
        s = np.linalg.norm(d, axis=-1)
        n = d / np.where(s > 0, s, 1.0)[:, None]
        p = np.asarray(self.moment, dtype=float)
        b, db_s, d2b = self.profile(s)
        npd = n @ p
        hess_p = d2b[:, None] * n * npd[:, None] + db_s[:, None] * (p - n * npd[:, None])
        lap = d2b + 2 * db_s
        J = hess_p - lap[:, None] * p - k**2 * b[:, None] * p
        return np.where((s < self.width)[:, None], J, 0.0)

    def quadrature(self):
        xs, ws = np.polynomial.legendre.leggauss(self.n_radial)
        s = 0.5 * self.width * (xs + 1)
        ws = 0.5 * self.width * ws
        xc, wc = np.polynomial.legendre.leggauss(self.n_polar)
        ph = 2 * np.pi * np.arange(self.n_azimuth) / self.n_azimuth
        S, C, P = np.meshgrid(s, xc, ph, indexing="ij")
        W = (ws[:, None, None] * s[:, None, None] ** 2) * wc[None, :, None] * (2 * np.pi / self.n_azimuth)
        W = np.broadcast_to(W, S.shape)
        st = np.sqrt(1 - C**2)
        pts = np.stack([S * st * np.cos(P), S * st * np.sin(P), S * C], axis=-1).reshape(-1, 3)
        return pts + np.asarray(self.center, dtype=float), W.reshape(-1)

    def point_currents(self, k):
        pts, w = self.quadrature()
        return pts, self.current(pts, k) * w[:, None]

    def norm_for(self, k) -> float:
        pts, w = self.quadrature()
        return float(np.sum(np.linalg.norm(self.current(pts, k), axis=-1) * w))

    def field(self, x, k, chunk: int = 256):
        pts, moments = self.point_currents(k)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        E = np.zeros(x.shape, dtype=complex)
        H = np.zeros(x.shape, dtype=complex)
        for i in range(0, len(x), chunk):
            xo = x[i:i + chunk]
            d = xo[:, None, :] - pts[None, :, :]
            R = np.linalg.norm(d, axis=-1)
            n = d / R[..., None]
            g = np.exp(1j * k * R) / (4 * np.pi * R)
            kR = k * R
            c1 = 1 + 1j / kR - 1 / kR**2
            c2 = -1 - 3j / kR + 3 / kR**2
            np_ = np.einsum("ijk,jk->ij", n, moments)
            E[i:i + chunk] = 1j * k * np.einsum("ij,ijk->ik", g * c1, np.broadcast_to(moments, d.shape)) \
                + 1j * k * np.einsum("ij,ijk->ik", g * c2 * np_, n)
            H[i:i + chunk] = np.einsum("ij,ijk->ik", g * (1j * k - 1 / R), np.cross(n, moments[None, :, :]))
        return E, H


def source_norm(J, k: float) -> float:
    if J is None:
        return 0.0
    if isinstance(J, NonRadiatingBump):
        return J.norm_for(k)
    if isinstance(J, (list, tuple)):
        return float(sum(source_norm(j, k) for j in J))
    return J.norm


def _as_list(J):
    if J is None:
        return []
    return list(J) if isinstance(J, (list, tuple)) else [J]


# --- multipole criterion ------------------------------------------------------------


@dataclass
class MultipoleCoefficients:
    """Outgoing free-space amplitudes: ``E = sum a_TE h_l X + a_TM curl(h_l X)/k``."""

    k: float
    l_max: int
    entries: dict
    tail_bound: float = 0.0

    def largest(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def field(self, x):
        """Reconstructed outgoing field outside the source support."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        E = np.zeros(x.shape, dtype=complex)
        H = np.zeros(x.shape, dtype=complex)
        for (l, m, pol), c in self.entries.items():
            if c == 0:
                continue
            M, N = wave_functions(l, m, self.k, x, kind="h")
            if pol == "TE":
                E += c * M
                H += -1j * c * N
            else:
                E += c * N
                H += -1j * c * M
        return E, H


def _point_multipoles(pts, moments, k, l_max):
    r = np.linalg.norm(pts, axis=-1)
    # wave functions are analytic at the origin; evaluate just off it (error O(k r))
    pts = np.where((r < 1e-13)[:, None], pts + 1e-14 / np.sqrt(3), pts)
    out = {}
    for l, m in mode_indices(l_max):
        M, N = wave_functions(l, m, k, pts, kind="j")
        out[(l, m, "TE")] = complex(-k**2 * np.sum(np.conj(M) * moments))
        out[(l, m, "TM")] = complex(-k**2 * np.sum(np.conj(N) * moments))
    return out


def radiating_multipoles(J, k: float, l_max: int = 6, tail_tol: float = 1e-10) -> MultipoleCoefficients:
    """Project the outgoing field of ``J`` on vector spherical harmonics.

    Amplitudes are the integrals of ``J`` against the conjugated regular wave
    functions, ``a_TE = -k^2 int conj(M^reg) . J`` and likewise for TM.
    """
    if k <= 0:
        raise DomainError("k must be positive")
    entries = {(l, m, pol): 0j for l, m in mode_indices(l_max) for pol in POLARIZATIONS}
    for src in _as_list(J):
        if isinstance(src, ShellCurrent):
            key = (src.l, src.m, src.pol)
            if src.l <= l_max:
                entries[key] += src.coefficient(k)
            continue
        if isinstance(src, NonRadiatingBump):
            pts, moments = src.point_currents(k)
        else:
            pts, moments = src.point_currents()
        for key, v in _point_multipoles(pts, moments, k, l_max).items():
            entries[key] += v
    lead = max((abs(v) for v in entries.values()), default=0.0)
    tail = max((abs(v) for (l, _, _), v in entries.items() if l == l_max), default=0.0)
    tail_rel = tail / lead if lead > 0 else 0.0
    if tail_rel > tail_tol:
        warnings.warn(f"multipole tail at l_max={l_max} is {tail_rel:.2e} of the leading term",
                      TruncationWarning, stacklevel=2)
    return MultipoleCoefficients(k, l_max, entries, tail_rel)


# --- Cauchy-trace criterion ---------------------------------------------------------


@dataclass
class CauchyTrace:
    """Per-mode projections of ``nu x E`` and ``nu x H`` on ``r = radius`` (inside side)."""

    radius: float
    k: float
    tangential_E: dict  # (l, m) -> (E.X, E.Z)
    tangential_H: dict  # (l, m) -> (H.X, H.Z)

    def outgoing_amplitudes(self) -> dict:
        """Split each trace into outgoing + regular parts and return the outgoing amplitude."""
        ka = self.k * self.radius
        out = {}
        for (l, m), (eX, eZ) in self.tangential_E.items():
            hX, hZ = self.tangential_H[(l, m)]
            jl, hl = spherical_jn(l, ka), spherical_hankel1(l, ka)
            dpsi = riccati_bessel(l, ka, "j")[1] / ka
            dxi = riccati_bessel(l, ka, "h")[1] / ka
            te = np.linalg.solve(np.array([[hl, jl], [-1j * dxi, -1j * dpsi]]), np.array([eX, hZ]))
            tm = np.linalg.solve(np.array([[dxi, dpsi], [-1j * hl, -1j * jl]]), np.array([eZ, hX]))
            out[(l, m, "TE")] = complex(te[0])
            out[(l, m, "TM")] = complex(tm[0])
        return out


def sphere_quadrature(n_theta: int, n_phi: int):
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.broadcast_to(w[:, None] * (2 * np.pi / n_phi), T.shape)
    return T.reshape(-1), P.reshape(-1), W.reshape(-1)


def _free_field(J, x, k):
    E = np.zeros(x.shape, dtype=complex)
    H = np.zeros(x.shape, dtype=complex)
    for src in _as_list(J):
        e, h = src.field(x, k)
        E += e
        H += h
    return E, H


def cauchy_traces(J, k: float, radius: float = 1.0, l_max: int = 6,
                  n_theta: int = 64, n_phi: int = 128) -> CauchyTrace:
    """Tangential traces of the source field on ``Sigma^-``, projected on ``X`` and ``Z``."""
    theta, phi, w = sphere_quadrature(n_theta, n_phi)
    er, et, ep = spherical_basis(theta, phi)
    x = radius * er
    E, H = _free_field(J, x, k)
    Et = np.stack([np.sum(E * et, axis=-1), np.sum(E * ep, axis=-1)], axis=-1)
    Ht = np.stack([np.sum(H * et, axis=-1), np.sum(H * ep, axis=-1)], axis=-1)
    tE, tH = {}, {}
    for l, m in mode_indices(l_max):
        _, X, Z = vsh(l, m, theta, phi)
        proj = lambda F, V: complex(np.sum(w * np.sum(F * np.conj(V), axis=-1)))  # noqa: E731
        tE[(l, m)] = (proj(Et, X), proj(Et, Z))
        tH[(l, m)] = (proj(Ht, X), proj(Ht, Z))
    return CauchyTrace(radius, k, tE, tH)


@dataclass
class Verdict:
    exists_finite_energy: bool
    offending_modes: list
    norms: float  # largest amplitude relative to k^2 * source norm (absolute if J = 0)
    trace_norms: float = 0.0
    multipoles: MultipoleCoefficients = field(default=None, repr=False)
    trace_amplitudes: dict = field(default=None, repr=False)


def single_coating_verdict(J, k: float, tol: float = 1e-8, l_max: int = 6, radius: float = 1.0,
                           gap: float = 0.05, n_theta: int | None = None, n_phi: int | None = None) -> Verdict:
    """Finite-energy existence for an internal current under the single coating.

    A solution exists iff the current radiates nothing; equivalently its
    tangential Cauchy data on the inner face of the cloak can be cancelled by a
    regular interior field.  Both criteria are evaluated and must agree.
    """
    srcs = _as_list(J)
    for s in srcs:
        if s.support_radius() > radius - gap:
            raise DomainError("source support must stay a positive gap inside Sigma")
    if n_theta is None:
        # volumetric sources are summed point by point; a coarser sphere rule keeps that cheap
        n_theta = 24 if any(isinstance(s, NonRadiatingBump) for s in srcs) else 64
    n_phi = n_phi or 2 * n_theta
    norm = source_norm(J, k)
    scale = k**2 * norm if norm > 0 else 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        mp = radiating_multipoles(J, k, l_max)
    if srcs:
        tr = cauchy_traces(J, k, radius, l_max, n_theta, n_phi).outgoing_amplitudes()
    else:
        tr = {key: 0j for key in mp.entries}
    off_mp = sorted(key for key, v in mp.entries.items() if abs(v) > tol * scale)
    off_tr = sorted(key for key, v in tr.items() if abs(v) > tol * scale)
    if off_mp != off_tr:
        raise InternalConsistencyError(
            f"multipole and trace criteria disagree: {set(off_mp) ^ set(off_tr)}")
    mp_norm = mp.largest() / scale
    tr_norm = max((abs(v) for v in tr.values()), default=0.0) / scale
    return Verdict(not off_mp, off_mp, mp_norm, tr_norm, mp, tr)


def random_dipoles(n: int, rng: np.random.Generator, max_radius: float = 0.8):
    """``n`` dipoles uniformly distributed in a ball, Gaussian moments."""
    out = []
    for _ in range(n):
        d = rng.normal(size=3)
        d *= max_radius * rng.uniform() ** (1 / 3) / np.linalg.norm(d)
        out.append(PointDipole(tuple(d), tuple(rng.normal(size=3))))
    return out


# --- radial Maxwell modes in coated media -------------------------------------------


@dataclass(frozen=True)
class MaxwellMedia:
    """Radial/tangential principal values of ``eps = mu``; ``t`` is the distance to ``center``."""

    eps_r: Callable
    eps_t: Callable
    center: float = 0.0

    @property
    def mu_r(self):
        return self.eps_r

    @property
    def mu_t(self):
        return self.eps_t


def vacuum_media() -> MaxwellMedia:
    return MaxwellMedia(lambda r: 1.0, lambda r: 1.0, 0.0)


def exterior_media(spec: CoatingSpec) -> MaxwellMedia:
    if spec.is_cylinder:
        raise DomainError("ball construction required")
    emap = spec.exterior_map

    def parts(r):
        rho = float(emap.inverse(r))
        return rho, float(emap.derivative(rho))

    def eps_r(r):
        rho, fp = parts(r)
        return fp * rho * rho / (r * r)

    def eps_t(r):
        return 1.0 / parts(r)[1]

    return MaxwellMedia(eps_r, eps_t, spec.cloak_radius)


def _system(media: MaxwellMedia, l: int, k: float, pol: str):
    L = l * (l + 1)
    if pol == "TM":
        def A(r):
            er, et = media.eps_r(r), media.eps_t(r)
            return np.array([[0.0, -1j * k * et], [1j * L / (k * er * r * r) - 1j * k * et, 0.0]])
    elif pol == "TE":
        def A(r):
            er, et = media.eps_r(r), media.eps_t(r)
            return np.array([[0.0, 1j * k * et], [-1j * L / (k * er * r * r) + 1j * k * et, 0.0]])
    else:
        raise DomainError(f"pol must be one of {POLARIZATIONS}")
    return A


def _source_vector(media, l, k, pol, j_r, j_t):
    sL = np.sqrt(l * (l + 1))
    if pol != "TM":
        raise DomainError("driven modes are implemented for TM currents")

    def b(r):
        return np.array([r * j_t(r), -sL * j_r(r) / (k * media.eps_r(r))], dtype=complex)

    return b


def vacuum_state(l: int, k: float, r, pol: str, kind: str = "j"):
    """Vacuum ``(psi, y)`` of the regular (``j``) or outgoing (``h``) multipole."""
    zr, dzr = riccati_bessel(l, k * np.asarray(r, dtype=float), kind)
    if pol == "TM":
        return -1j * zr / k, dzr / k
    return zr / k, -1j * dzr / k


def vacuum_admittance(l: int, k: float, pol: str, R: float = 2.0) -> complex:
    """Tangential-H over tangential-E amplitude of the regular vacuum multipole at ``R``."""
    psi, y = vacuum_state(l, k, R, pol)
    return complex(psi / y) if pol == "TM" else complex(y / psi)


@dataclass
class MaxwellMode:
    l: int
    k: float
    pol: str
    media: MaxwellMedia
    solution: RadialSolution
    source: tuple = None  # (j_r, j_t) profiles for driven TM modes

    @property
    def r(self):
        return self.solution.r

    @property
    def state(self):
        return self.solution.y

    def state_at(self, r):
        t = np.abs(np.asarray(r, dtype=float) - self.solution.center)
        return np.array([self.solution.at(ti) for ti in np.atleast_1d(t)]).T

    def components(self, r):
        """Physical amplitudes ``(e_r, e_t, h_r, h_t)`` in the ``(Y r^, Z, X)`` representation."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        psi, y = self.state_at(r)
        sL = np.sqrt(self.l * (self.l + 1))
        k = self.k
        er_ = np.array([self.media.eps_r(ri) for ri in r])
        j_r = np.array([self.source[0](ri) for ri in r]) if self.source else 0.0
        if self.pol == "TM":
            e_r = (1j * sL * psi / r**2 - j_r) / (-1j * k * er_)
            return {"e_r": e_r, "e_t": y / r, "h_r": np.zeros_like(psi), "h_x": psi / r}
        h_r = (1j * sL * psi / r**2) / (1j * k * er_)
        return {"e_x": psi / r, "h_r": h_r, "h_t": y / r, "e_r": np.zeros_like(psi)}

    def admittance(self, index: int = -1) -> complex:
        psi, y = self.state[:, index]
        return complex(psi / y) if self.pol == "TM" else complex(y / psi)


def solve_maxwell_mode(media: MaxwellMedia, l: int, k: float, pol: str, t_start: float, t_end: float,
                       y0, sign: float = 1.0, t_eval=None, source=None,
                       rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> MaxwellMode:
    """Integrate the first-order TE/TM system in ``t = |r - center|``."""
    if l < 1:
        raise DomainError("Maxwell multipoles start at l = 1")
    if k <= 0:
        raise DomainError("k must be positive")
    A = _system(media, l, k, pol)
    b = _source_vector(media, l, k, pol, *source) if source else None
    sol = integrate_linear(A, media.center, sign, t_start, t_end, np.asarray(y0, dtype=complex),
                           t_eval=t_eval, source=b, rtol=rtol, atol=atol)
    return MaxwellMode(l, k, pol, media, sol, source)


def cloaked_exterior_mode(spec: CoatingSpec, l: int, k: float, pol: str,
                          seed_radius: float = 1e-8, n_samples: int = 300, rtol: float = DEFAULT_RTOL) -> MaxwellMode:
    """Exterior mode seeded next to Sigma by the pulled-back regular vacuum multipole."""
    media = exterior_media(spec)
    a = spec.cloak_radius
    rho0 = float(spec.exterior_map.inverse_from_gap(seed_radius))
    psi0, y0 = vacuum_state(l, k, rho0, pol)
    # both state components are invariant under the radial map; normalize to O(1)
    s = max(abs(psi0), abs(y0))
    t_grid = np.geomspace(seed_radius, spec.outer_radius - a, n_samples)
    return solve_maxwell_mode(media, l, k, pol, seed_radius, spec.outer_radius - a,
                              [psi0 / s, y0 / s], t_eval=t_grid, rtol=rtol)


def double_coating_admittance(spec: CoatingSpec, l: int, k: float, pol: str, **kw) -> complex:
    """Admittance of the cloaked exterior mode at ``r = R``."""
    return cloaked_exterior_mode(spec, l, k, pol, **kw).admittance()


def admittance_table(spec: CoatingSpec, l_values=range(1, 7), k_grid=(0.5, 1.0, 2.0)) -> list:
    rows = []
    for pol in POLARIZATIONS:
        for l in l_values:
            for k in k_grid:
                Y = double_coating_admittance(spec, l, k, pol)
                Y0 = vacuum_admittance(l, k, pol, spec.outer_radius)
                rows.append({"l": l, "k": k, "pol": pol, "cloaked": Y, "vacuum": Y0,
                             "rel_discrepancy": abs(Y - Y0) / abs(Y0)})
    return rows


def reciprocity_check(spec: CoatingSpec, l: int, k: float, pol: str, r_mid: float = 1.5) -> float:
    """Relative gap between admittances at ``r_mid`` from outward and inward integration."""
    out = cloaked_exterior_mode(spec, l, k, pol)
    a, R = spec.cloak_radius, spec.outer_radius
    psi, y = out.state_at(r_mid)
    Y_out = complex(psi[0] / y[0]) if pol == "TM" else complex(y[0] / psi[0])
    psiR, yR = vacuum_state(l, k, R, pol)
    s = max(abs(psiR), abs(yR))
    inward = solve_maxwell_mode(exterior_media(spec), l, k, pol, R - a, r_mid - a, [psiR / s, yR / s],
                                t_eval=np.array([R - a, r_mid - a]))
    Y_in = inward.admittance(-1)
    return abs(Y_out - Y_in) / abs(Y_out)


def angular_decay_slope(spec: CoatingSpec, l: int = 1, k: float = 1.0, pol: str = "TM",
                        distances=(1e-2, 1e-3, 1e-4)) -> float:
    """Log-log slope of ``|nu x E|`` against the distance to Sigma."""
    mode = cloaked_exterior_mode(spec, l, k, pol, seed_radius=min(distances) / 10)
    r = spec.cloak_radius + np.asarray(distances)
    c = mode.components(r)
    tang = np.abs(c["e_t"]) if pol == "TM" else np.abs(c["e_x"])
    return float(np.polyfit(np.log(distances), np.log(tang), 1)[0])


def maxwell_energy_shells(mode: MaxwellMode, shells=(1e-1, 1e-2, 1e-3, 1e-4), rel_tol: float = 1e-4):
    """Weighted ``L^2`` mass ``int eps E.E + mu H.H`` on shrinking shells; Cauchy test on the cutoff."""
    a = mode.media.center
    t = mode.solution.t
    r = a + t
    c = mode.components(r)
    er_ = np.array([mode.media.eps_r(ri) for ri in r])
    et_ = np.array([mode.media.eps_t(ri) for ri in r])
    if mode.pol == "TM":
        dens = er_ * np.abs(c["e_r"]) ** 2 + et_ * (np.abs(c["e_t"]) ** 2 + np.abs(c["h_x"]) ** 2)
    else:
        dens = et_ * (np.abs(c["e_x"]) ** 2 + np.abs(c["h_t"]) ** 2) + er_ * np.abs(c["h_r"]) ** 2
    dens = dens * r**2

    def integral(lo, hi):
        m = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
        return float(np.trapezoid(dens[m] * t[m], np.log(t[m]))) if m.sum() > 1 else 0.0

    t0 = t[0]
    total = integral(t0, t[-1])
    tail = integral(t0, 10 * t0)
    shell_vals = [(d, integral(t0, d)) for d in sorted(shells, reverse=True)]
    finite = total == 0 or tail <= rel_tol * total
    return {"shells": shell_vals, "total": total, "cutoff_tail": tail / total if total else 0.0,
            "verdict": "finite" if finite else "divergent"}


# --- divergence identities -----------------------------------------------------------


@dataclass
class ModeFields:
    """Sampled radial amplitudes of one TE/TM mode on a grid ``r``.

    ``flux`` is ``r^2 eps_r f`` for the radial amplitude ``f`` of ``eps E``
    (TM) or ``mu H`` (TE), ``flux_derivative`` its ``r``-derivative, and
    ``tangential`` the ``Z`` amplitude of the same field.  ``source_terms``
    holds ``(r^2 j_r)'`` and ``j_t`` for a TM current.
    """

    l: int
    k: float
    pol: str
    r: np.ndarray
    flux: np.ndarray
    flux_derivative: np.ndarray
    tangential: np.ndarray
    eps_t: np.ndarray
    source_terms: tuple | None = None

    @classmethod
    def from_mode(cls, mode: MaxwellMode, r_grid, h: float = 1e-4) -> "ModeFields":
        """Assemble amplitudes from the first-order state (derivatives from the radial system)."""
        r = np.asarray(r_grid, dtype=float)
        psi, y = mode.state_at(r)
        k, l, pol = mode.k, mode.l, mode.pol
        sL = np.sqrt(l * (l + 1))
        et = np.array([mode.media.eps_t(ri) for ri in r])
        A = _system(mode.media, l, k, pol)
        dpsi = np.array([(A(ri) @ np.array([p_, y_]))[0] for ri, p_, y_ in zip(r, psi, y)])
        src = None
        if pol == "TM":
            # r^2 eps_r e_r = -(sqrt(L)/k) psi - (i/k) r^2 j_r
            flux = -sL / k * psi
            dflux = -sL / k * dpsi
            if mode.source:
                j_r, j_t = (np.vectorize(f, otypes=[complex]) for f in mode.source)
                r2jr = lambda s: s**2 * j_r(s)  # noqa: E731
                d_r2jr = _deriv(r2jr, r, h)
                jt = j_t(r)
                dpsi_src = r * jt  # source contribution to psi'
                flux = flux - 1j / k * r2jr(r)
                dflux = -sL / k * (dpsi + dpsi_src) - 1j / k * d_r2jr
                src = (d_r2jr, jt)
        else:
            # r^2 mu_r h_r = (sqrt(L)/k) psi
            flux = sL / k * psi
            dflux = sL / k * dpsi
        return cls(l, k, pol, r, flux, dflux, y / r, et, src)

    def perturbed(self, amplitude: float, rng: np.random.Generator) -> "ModeFields":
        """Copy with the tangential amplitude multiplied by ``1 + amplitude * noise``."""
        noise = rng.normal(size=self.r.shape)
        return ModeFields(self.l, self.k, self.pol, self.r, self.flux, self.flux_derivative,
                          self.tangential * (1 + amplitude * noise), self.eps_t, self.source_terms)


def _deriv(f, r, h):
    # sixth-order central difference
    return (f(r + 3 * h) - 9 * f(r + 2 * h) + 45 * f(r + h)
            - 45 * f(r - h) + 9 * f(r - 2 * h) - f(r - 3 * h)) / (60 * h)


def divergence_check(fields: ModeFields) -> tuple[float, float]:
    """Relative residuals of ``div(eps E) - div(J)/(ik)`` and ``div(mu H)``.

    For ``f Y r^ + g Z`` the divergence is ``[(r^2 f)'/r^2 - i sqrt(L) g / r] Y``;
    ``X`` fields are divergence free, so the residual of the other field
    vanishes identically.  Residuals are scaled by the sum of the magnitudes
    of the terms that must cancel.
    """
    r = fields.r
    sL = np.sqrt(fields.l * (fields.l + 1))
    t1 = fields.flux_derivative / r**2
    t2 = -1j * sL * fields.eps_t * fields.tangential / r
    if fields.source_terms is not None:
        d_r2jr, jt = fields.source_terms
        t3 = -(d_r2jr / r**2 - 1j * sL * jt / r) / (1j * fields.k)
    else:
        t3 = np.zeros_like(t1)
    res = np.abs(t1 + t2 + t3)
    scale = np.max(np.abs(t1) + np.abs(t2) + np.abs(t3))
    first = float(np.max(res) / scale) if scale > 0 else float(np.max(res))
    return first, 0.0


def driven_tm_mode(l: int, k: float, j_r: Callable, j_t: Callable, r_max: float = 0.9,
                   n_samples: int = 200, rtol: float = DEFAULT_RTOL) -> MaxwellMode:
    """TM field of a smooth current profile in the vacuum ball, regular at the center.

    The source-free part is fixed by zero data at the center; any regular
    homogeneous solution may be added without affecting the divergence identity.
    """
    t0 = 1e-6
    grid = np.geomspace(t0, r_max, n_samples)
    return solve_maxwell_mode(vacuum_media(), l, k, "TM", t0, r_max, [0.0, 0.0], t_eval=grid,
                              source=(j_r, j_t), rtol=rtol)
