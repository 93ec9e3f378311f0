"""Linear radial ODE shooting in log-distance coordinates.

Near a regular singular point ``r = c`` the mode equations behave like Euler
equations, so the independent variable ``s = log|r - c|`` turns a stiff
problem with coefficients spanning many decades into a benign one.  Writing
``r = c + sign * exp(s)``::

    dy/ds = sign * t * A(r) y + sign * t * b(r),   t = exp(s)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

DEFAULT_RTOL = 1e-10
# solutions are normalized to O(1) at the seed; absolute control would swamp
# components that are legitimately tiny next to the singular point
DEFAULT_ATOL = 1e-30
RESIDUAL_SCALE_FLOOR = 1e-6


class ToleranceError(RuntimeError):
    """Integrator failed to reach the requested accuracy."""


@dataclass
class RadialSolution:
    center: float
    sign: float
    t: np.ndarray
    y: np.ndarray  # shape (dim, len(t))
    dense: Callable = None
    gap_coords: bool = False  # coefficient callables take t = |r - c| instead of r

    @property
    def r(self) -> np.ndarray:
        return self.center + self.sign * self.t

    def at(self, t) -> np.ndarray:
        return self.dense(np.log(t))


def integrate_linear(
    matrix: Callable[[float], np.ndarray],
    center: float,
    sign: float,
    t_start: float,
    t_end: float,
    y0,
    t_eval=None,
    source: Callable[[float], np.ndarray] | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = "DOP853",
    gap_coords: bool = False,
    growth: float = 0.0,
) -> RadialSolution:
    """Integrate ``y' = A(r) y + b(r)`` from ``|r - c| = t_start`` to ``t_end``.

    With ``gap_coords=True`` the callables receive the distance ``t`` rather
    than ``r``; coefficients that depend on ``r - c`` then keep full relative
    accuracy next to the singular point.  ``growth = nu`` integrates the
    rescaled state ``y (t / t_start)^(-nu)`` so that a solution growing like
    ``t^nu`` stays O(1) and ``atol`` acts on a meaningful scale; outputs are
    always returned unscaled.
    """
    y0 = np.asarray(y0)
    complex_mode = np.iscomplexobj(y0)

    def rhs(s, y):
        t = np.exp(s)
        r = t if gap_coords else center + sign * t
        out = matrix(r) @ y
        if source is not None:
            out = out + source(r) * np.exp(-growth * (s - s0))
        return sign * t * out - growth * y

    s0, s1 = np.log(t_start), np.log(t_end)
    if t_eval is None:
        t_eval = np.geomspace(t_start, t_end, 200)
    t_eval = np.asarray(t_eval, dtype=float)
    s_eval = np.clip(np.log(t_eval), min(s0, s1), max(s0, s1))
    sol = solve_ivp(
        rhs,
        (s0, s1),
        y0.astype(complex) if complex_mode else y0.astype(float),
        method=method,
        t_eval=s_eval,
        rtol=rtol,
        atol=atol,
        dense_output=True,
    )
    if not sol.success:
        raise ToleranceError(
            f"radial integration failed ({sol.message}); t in [{t_start:g}, {t_end:g}], rtol={rtol:g}"
        )
    if growth == 0.0:
        return RadialSolution(center, sign, t_eval, sol.y, sol.sol, gap_coords)
    zdense = sol.sol
    y = sol.y * np.exp(growth * (s_eval - s0))
    return RadialSolution(center, sign, t_eval, y, lambda s: zdense(s) * np.exp(growth * (s - s0)), gap_coords)


def integral_residual(
    sol: RadialSolution,
    matrix: Callable[[float], np.ndarray],
    source: Callable[[float], np.ndarray] | None = None,
    n_gauss: int = 8,
) -> np.ndarray:
    """Per-component sup of ``|y(t_i+1) - y(t_i) - integral of the RHS|``, scaled by sup|y|.

    Each component is scaled by its own sup, floored at ``RESIDUAL_SCALE_FLOOR``
    times the largest component sup.

    The integral is Gauss-Legendre in ``s`` on the dense interpolant, so the
    check is independent of how the integrator placed its steps.
    """
    x, wq = np.polynomial.legendre.leggauss(n_gauss)
    s = np.log(sol.t)
    worst = np.zeros(sol.y.shape[0])
    for i in range(len(s) - 1):
        a, b = s[i], s[i + 1]
        nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
        acc = 0.0
        for sn, wn in zip(nodes, wq):
            t = np.exp(sn)
            r = t if sol.gap_coords else sol.center + sol.sign * t
            f = matrix(r) @ sol.dense(sn)
            if source is not None:
                f = f + source(r)
            acc = acc + wn * sol.sign * t * f
        acc = acc * 0.5 * (b - a)
        worst = np.maximum(worst, np.abs(sol.y[:, i + 1] - sol.y[:, i] - acc))
    # components that vanish identically carry only round-off; measure them
    # against the whole state instead of their own noise floor
    scale = np.max(np.abs(sol.y), axis=1)
    scale = np.maximum(scale, RESIDUAL_SCALE_FLOOR * np.max(scale))
    scale[scale == 0] = 1.0
    return worst / scale
