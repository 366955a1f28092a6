"""Model cusp: the surface of revolution of ``y = x**r`` about the x-axis.

The chart is ``(x, tau) -> (x, x**r cos tau, x**r sin tau)`` with metric
``ds**2 = E(x) dx**2 + G(x) dtau**2`` where ``E = 1 + r**2 x**(2r-2)`` and
``G = x**(2r)``.  The cusp sits at ``x = 0`` where the metric is incomplete.

Geodesics are advanced in the orthonormal frame ``(a, b)`` made of the
radial component ``a = sqrt(E) x_dot`` and the rotational component
``b = x**r tau_dot``, with the Sundman time ``ds = dt / x``.  In these
variables the right-hand side stays bounded as ``x -> 0`` and a step of
``0.1`` in ``s`` is a step of ``0.1 x`` in physical time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, SingularityError, StepFailureError

TWO_PI = 2.0 * math.pi

# Sundman-time step cap; a step of SUNDMAN_MAX_STEP in s is at most that
# fraction of x in physical time.
SUNDMAN_MAX_STEP = 0.1
FLOOR_FRACTION = 1e-9
SPEED_TOLERANCE = 1e-6

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ProfileSurface:
    """Surface of revolution of ``y = x**r``, truncated at ``x_max``."""

    r: float
    x_max: float = 1.0
    quadrature_tol: float = 1e-10

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 2):
            raise DomainError(f"profile exponent must satisfy r > 2, got r={self.r!r}")
        if not (math.isfinite(self.x_max) and self.x_max > 0):
            raise DomainError(f"chart cutoff x_max must be positive, got {self.x_max!r}")
        if not (0 < self.quadrature_tol <= 1e-6):
            raise DomainError(f"quadrature_tol must lie in (0, 1e-6], got {self.quadrature_tol!r}")

    @property
    def delta_max(self) -> float:
        """Cusp distance of the chart boundary."""
        return float(cusp_distance(self, self.x_max))

    @property
    def delta0(self) -> float:
        """Centre of the collar where excursions start."""
        return 0.5 * self.delta_max

    @property
    def collar_halfwidth(self) -> float:
        return 0.1 * self.delta0

    @property
    def x_floor(self) -> float:
        return FLOOR_FRACTION * self.x_max


@dataclass(frozen=True)
class PhaseState:
    """A tangent vector in chart coordinates.

    ``tau_lift`` is the unwrapped angle; ``tau`` reduces it to ``[0, 2pi)``.
    """

    x: float
    tau_lift: float
    x_dot: float
    tau_dot: float

    @property
    def tau(self) -> float:
        return self.tau_lift % TWO_PI

    @classmethod
    def from_angles(cls, surface: ProfileSurface, x: float, a: float, b: float,
                    tau_lift: float = 0.0) -> "PhaseState":
        """Build the state with radial component ``a`` and rotational component ``b``."""
        _check_x(surface, x)
        sqrt_e = math.sqrt(1.0 + surface.r ** 2 * x ** (2 * surface.r - 2))
        return cls(x=x, tau_lift=tau_lift, x_dot=a / sqrt_e, tau_dot=b / x ** surface.r)

    def speed(self, surface: ProfileSurface) -> float:
        e, g = metric_coefficients(surface, self.x)
        return math.sqrt(e * self.x_dot ** 2 + g * self.tau_dot ** 2)


@dataclass(frozen=True)
class AngularData:
    a: float
    b: float
    clairaut: float


def _check_x(surface: ProfileSurface, x, allow_zero=False):
    x = np.asarray(x, dtype=float)
    low_ok = (x >= 0) if allow_zero else (x > 0)
    if not np.all(low_ok & (x <= surface.x_max)):
        bound = "[0, x_max]" if allow_zero else "(0, x_max]"
        raise DomainError(f"x must lie in {bound} = {bound.replace('x_max', repr(surface.x_max))}")
    return x


def _scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def metric_coefficients(surface: ProfileSurface, x):
    """Return ``(E, G)`` of ``ds**2 = E dx**2 + G dtau**2`` at ``x``."""
    x = _check_x(surface, x)
    r = surface.r
    e = 1.0 + r * r * x ** (2 * r - 2)
    g = x ** (2 * r)
    return _scalar_or_array(e), _scalar_or_array(g)


def _sqrt_e(r, x):
    return np.sqrt(1.0 + r * r * x ** (2 * r - 2))


def _delta_closed_form(r, x):
    # int_0^x sqrt(1 + k u^m) du = x 2F1(-1/2, 1/m; 1 + 1/m; -k x^m)
    m = 2.0 * r - 2.0
    return x * special.hyp2f1(-0.5, 1.0 / m, 1.0 + 1.0 / m, -(r * r) * x ** m)


def cusp_distance(surface: ProfileSurface, x):
    """Riemannian distance from the cusp to the circle at ``x``.

    Evaluated in closed form through a Gauss hypergeometric function;
    ``tests/test_geometry.py`` checks it against adaptive quadrature.
    """
    x = _check_x(surface, x, allow_zero=True)
    return _scalar_or_array(_delta_closed_form(surface.r, x))


def inverse_cusp_distance(surface: ProfileSurface, delta):
    """Profile coordinate ``x`` whose cusp distance is ``delta``."""
    delta_arr = np.asarray(delta, dtype=float)
    d_max = surface.delta_max
    if not np.all((delta_arr >= 0) & (delta_arr <= d_max)):
        raise DomainError(f"delta must lie in [0, {d_max!r}]")

    def solve(d):
        if d == 0.0:
            return 0.0
        if d == d_max:
            return surface.x_max
        # delta(x) >= x, so the root lies in [0, d]
        hi = min(d, surface.x_max)
        return optimize.brentq(lambda u: _delta_closed_form(surface.r, u) - d, 0.0, hi,
                               xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    if delta_arr.ndim == 0:
        return solve(float(delta_arr))
    return np.array([solve(float(d)) for d in delta_arr.ravel()]).reshape(delta_arr.shape)


def gaussian_curvature(surface: ProfileSurface, x):
    """Gaussian curvature ``-r(r-1) / (x**2 (1 + r**2 x**(2r-2))**2)``."""
    x = _check_x(surface, x)
    r = surface.r
    return _scalar_or_array(-r * (r - 1) / (x * x * (1.0 + r * r * x ** (2 * r - 2)) ** 2))


def level_length(surface: ProfileSurface, B):
    """Length of the level circle ``delta = B``."""
    if np.any(np.asarray(B) <= 0):
        raise DomainError("level_length needs B > 0")
    x = inverse_cusp_distance(surface, B)
    return _scalar_or_array(TWO_PI * np.asarray(x) ** surface.r)


def cusp_volume(surface: ProfileSurface, B):
    """Area of the cusp region ``delta <= B``."""
    r = surface.r

    def area(b):
        x_b = inverse_cusp_distance(surface, b)
        if x_b == 0.0:
            return 0.0
        value, _ = integrate.quad(lambda u: u ** r * _sqrt_e(r, u), 0.0, x_b,
                                  epsabs=0.0, epsrel=surface.quadrature_tol, limit=200)
        return TWO_PI * value

    B_arr = np.asarray(B, dtype=float)
    if B_arr.ndim == 0:
        return area(float(B_arr))
    return np.array([area(float(b)) for b in B_arr.ravel()]).reshape(B_arr.shape)


def angular_data(surface: ProfileSurface, state: PhaseState) -> AngularData:
    """Radial/rotational decomposition of a unit tangent vector.

    Orientation convention: ``b >= 0``; a state turning the other way is
    reported through its mirror image ``tau -> -tau``.
    """
    speed = state.speed(surface)
    if abs(speed - 1.0) > SPEED_TOLERANCE:
        raise DomainError(f"state is not unit speed (|v| = {speed!r})")
    e, _ = metric_coefficients(surface, state.x)
    a = math.sqrt(e) * state.x_dot / speed
    b = abs(state.x ** surface.r * state.tau_dot) / speed
    return AngularData(a=a, b=b, clairaut=state.x ** surface.r * b)


def geodesic_rhs(surface: ProfileSurface, state: PhaseState):
    """Time derivative ``(x_dot, tau_dot, x_ddot, tau_ddot)`` of a geodesic.

    Euler-Lagrange equations of ``E dx**2 + G dtau**2``.
    """
    if state.x <= 0:
        raise DomainError("the metric is singular at x <= 0")
    r, x = surface.r, state.x
    e = 1.0 + r * r * x ** (2 * r - 2)
    de = 2.0 * r * r * (r - 1) * x ** (2 * r - 3)
    dg = 2.0 * r * x ** (2 * r - 1)
    g = x ** (2 * r)
    x_ddot = -(de / (2 * e)) * state.x_dot ** 2 + (dg / (2 * e)) * state.tau_dot ** 2
    tau_ddot = -(dg / g) * state.x_dot * state.tau_dot
    return state.x_dot, state.tau_dot, x_ddot, tau_ddot


def frame_rhs(r: float, y):
    """Sundman-time vector field on ``y = (t, x, tau_lift, a, b)``."""
    t, x, tau, a, b = y
    inv_sqrt_e = 1.0 / math.sqrt(1.0 + r * r * x ** (2 * r - 2))
    return [x, x * a * inv_sqrt_e, b / x ** (r - 1), r * b * b * inv_sqrt_e, -r * a * b * inv_sqrt_e]


def solve_frame(surface: ProfileSurface, y0, tol: float, s_max: float, events=()):
    """Integrate the frame system from ``y0`` with DOP853 and dense output."""
    r = surface.r
    # x and b are kept to relative accuracy all the way down the cusp
    atol = np.array([tol, 1e-300, tol, tol, 1e-300])
    sol = integrate.solve_ivp(lambda s, y: frame_rhs(r, y), (0.0, s_max), np.asarray(y0, float),
                              method="DOP853", rtol=tol, atol=atol, max_step=SUNDMAN_MAX_STEP,
                              events=list(events), dense_output=True)
    if sol.status == -1:
        raise StepFailureError(sol.message)
    return sol


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-sampled geodesic with conservation diagnostics.

    Samples are the accepted integrator steps.  ``s`` and ``dense`` (the
    Sundman time grid and its continuous extension) are present when the
    trajectory came out of the integrator and drive the quadratures.
    """

    r: float
    t: np.ndarray
    x: np.ndarray
    tau_lift: np.ndarray
    a: np.ndarray
    b: np.ndarray
    status: str = "completed"
    tol: float = float("nan")
    s: Optional[np.ndarray] = field(default=None, repr=False)
    dense: Optional[Callable] = field(default=None, repr=False)

    @classmethod
    def from_states(cls, surface: ProfileSurface, t, states, status="completed"):
        """Wrap externally produced samples; no dense output."""
        states = list(states)
        x = np.array([st.x for st in states])
        sqrt_e = _sqrt_e(surface.r, x)
        return cls(r=surface.r, t=np.asarray(t, float), x=x,
                   tau_lift=np.array([st.tau_lift for st in states]),
                   a=sqrt_e * np.array([st.x_dot for st in states]),
                   b=x ** surface.r * np.array([st.tau_dot for st in states]), status=status)

    def __len__(self):
        return self.t.size

    @property
    def x_dot(self):
        return self.a / _sqrt_e(self.r, self.x)

    @property
    def tau_dot(self):
        return self.b / self.x ** self.r

    @property
    def clairaut(self):
        return self.x ** self.r * np.abs(self.b)

    @property
    def delta(self):
        return _delta_closed_form(self.r, self.x)

    @property
    def samples(self) -> Iterator[tuple]:
        for i in range(self.t.size):
            yield float(self.t[i]), PhaseState(float(self.x[i]), float(self.tau_lift[i]),
                                               float(self.x_dot[i]), float(self.tau_dot[i]))

    @property
    def clairaut_drift(self) -> float:
        c = self.clairaut
        if c[0] == 0.0:
            return float(np.max(c))
        return float(np.max(np.abs(c - c[0])) / c[0])

    @property
    def speed_drift(self) -> float:
        return float(np.max(np.abs(np.hypot(self.a, self.b) - 1.0)))

    def clairaut_spread(self) -> float:
        """``max c / min c`` over samples: the smallest quasi-Clairaut constant."""
        c = self.clairaut
        if np.all(c == 0.0):
            return 1.0
        return float(np.max(c) / np.min(c))

    def integrate(self, integrand: Callable) -> float:
        """``int integrand(x, a, b) dt`` along the trajectory.

        Uses eight-point Gauss-Legendre on every integrator step of the
        dense output when it is available, composite Simpson otherwise.
        """
        if self.dense is None or self.s is None:
            return float(integrate.simpson(integrand(self.x, self.a, self.b), x=self.t))
        lo, hi = self.s[:-1], self.s[1:]
        half = 0.5 * (hi - lo)
        nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * _GAUSS_NODES[None, :]
        y = self.dense(nodes.ravel())
        x, a, b = y[1], y[3], y[4]
        # dt = x ds
        vals = (integrand(x, a, b) * x).reshape(nodes.shape)
        return float(np.sum(half * (vals @ _GAUSS_WEIGHTS)))

    def to_csv(self, path) -> None:
        cols = np.column_stack([self.t, self.x, self.tau_lift, self.x_dot, self.tau_dot,
                                self.a, np.abs(self.b), self.clairaut, self.delta])
        np.savetxt(path, cols, delimiter=",", fmt="%.17g",
                   header="t,x,tau_lift,x_dot,tau_dot,a,b,clairaut,delta", comments="")


def trajectory_from_solution(surface: ProfileSurface, sol, tol: float, status: str) -> Trajectory:
    y = sol.y
    return Trajectory(r=surface.r, t=y[0].copy(), x=y[1].copy(), tau_lift=y[2].copy(),
                      a=y[3].copy(), b=y[4].copy(), status=status, tol=tol,
                      s=sol.t.copy(), dense=sol.sol)


def initial_frame(surface: ProfileSurface, start: PhaseState, t0: float = 0.0):
    if start.x <= surface.x_floor:
        raise SingularityError(f"start x={start.x!r} is at or below the floor {surface.x_floor!r}")
    _check_x(surface, start.x)
    speed = start.speed(surface)
    if abs(speed - 1.0) > SPEED_TOLERANCE:
        raise DomainError(f"start is not unit speed (|v| = {speed!r})")
    e, _ = metric_coefficients(surface, start.x)
    a = math.sqrt(e) * start.x_dot / speed
    b = start.x ** surface.r * start.tau_dot / speed
    return [t0, start.x, start.tau_lift, a, b]


def integrate_geodesic(surface: ProfileSurface, start: PhaseState, t_end: float,
                       tol: float = 1e-10, x_floor: Optional[float] = None) -> Trajectory:
    """Follow the geodesic through ``start`` for time ``t_end``.

    The run stops early with ``status="singular"`` if ``x`` drops to the
    floor, or ``status="left_chart"`` if it climbs past ``x_max``.
    """
    if not (1e-13 <= tol <= 1e-6):
        raise DomainError(f"tol must lie in [1e-13, 1e-6], got {tol!r}")
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    floor = surface.x_floor if x_floor is None else x_floor
    y0 = initial_frame(surface, start)

    def reach_end(s, y):
        return y[0] - t_end
    reach_end.terminal = True

    def hit_floor(s, y):
        return y[1] - floor
    hit_floor.terminal = True
    hit_floor.direction = -1

    def leave_chart(s, y):
        return y[1] - surface.x_max
    leave_chart.terminal = True
    leave_chart.direction = 1

    # t = int x ds, so s cannot exceed t_end / floor before t reaches t_end
    sol = solve_frame(surface, y0, tol, t_end / floor, events=(reach_end, hit_floor, leave_chart))
    status = "completed"
    if sol.t_events[1].size:
        status = "singular"
    elif sol.t_events[2].size:
        status = "left_chart"
    return trajectory_from_solution(surface, sol, tol, status)
