"""Single cusp excursions and the scaling fits built on top of them."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, stats

from .errors import DomainError, InsufficientDataError, NonReturnError, NotApplicableError
from .geometry import (
    TWO_PI,
    ProfileSurface,
    Trajectory,
    cusp_distance,
    inverse_cusp_distance,
    solve_frame,
    trajectory_from_solution,
    _delta_closed_form,
)

# An excursion must come back within this multiple of its entry level.
RETURN_TIME_FACTOR = 4.0


@dataclass(frozen=True)
class ExcursionRecord:
    r: float
    b_entry: float
    delta_entry: float
    delta_min: float
    D: float
    duration: float
    t_min: float
    winding: float
    tau_change: float
    inv_delta_integral: float
    flags: tuple = ()
    trajectory: Optional[Trajectory] = field(default=None, repr=False, compare=False)

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in ENSEMBLE_COLUMNS}


ENSEMBLE_COLUMNS = ("r", "delta_entry", "b_entry", "delta_min", "D", "duration",
                    "winding", "inv_delta_integral")


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    slope_ci_halfwidth: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _entry_x(surface: ProfileSurface, delta_entry: float) -> float:
    if not (0 < delta_entry <= surface.delta0 * (1 + 1e-12)):
        raise DomainError(f"delta_entry must lie in (0, delta0={surface.delta0!r}], got {delta_entry!r}")
    return float(inverse_cusp_distance(surface, delta_entry))


def predict_delta_min(surface: ProfileSurface, delta_entry: float, b_entry):
    """Depth of the excursion from the conserved Clairaut quantity.

    ``x_min**r = x_entry**r * b_entry``, reported as a cusp distance.
    """
    b = np.asarray(b_entry, dtype=float)
    if not np.all((b > 0) & (b <= 1)):
        raise DomainError("b_entry must lie in (0, 1]")
    x_entry = _entry_x(surface, delta_entry)
    x_min = x_entry * b ** (1.0 / surface.r)
    value = _delta_closed_form(surface.r, x_min)
    return float(value) if np.ndim(value) == 0 else value


def simulate_excursion(surface: ProfileSurface, delta_entry: float, b_entry: float,
                       tol: float = 1e-10, orientation: int = 1,
                       keep_trajectory: bool = False) -> ExcursionRecord:
    """Integrate one excursion from the level ``delta_entry`` back to it.

    The start vector points into the cusp with rotational component
    ``b_entry``; ``orientation=-1`` mirrors it (``tau_dot < 0``).
    """
    if not 0 < b_entry < 1:
        raise DomainError(f"b_entry must lie in (0, 1), got {b_entry!r}")
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    if not (1e-13 <= tol <= 1e-6):
        raise DomainError(f"tol must lie in [1e-13, 1e-6], got {tol!r}")
    x_entry = _entry_x(surface, delta_entry)
    a0 = -math.sqrt((1.0 - b_entry) * (1.0 + b_entry))
    y0 = [0.0, x_entry, 0.0, a0, orientation * b_entry]
    t_limit = RETURN_TIME_FACTOR * delta_entry
    floor = surface.x_floor

    def back_at_entry(s, y):
        return y[1] - x_entry
    back_at_entry.terminal = True
    back_at_entry.direction = 1

    def turning(s, y):
        return y[3]
    turning.direction = 1

    def hit_floor(s, y):
        return y[1] - floor
    hit_floor.terminal = True
    hit_floor.direction = -1

    def too_long(s, y):
        return y[0] - t_limit
    too_long.terminal = True

    sol = solve_frame(surface, y0, tol, t_limit / floor,
                      events=(back_at_entry, turning, hit_floor, too_long))
    flags = []
    if sol.t_events[2].size:
        flags.append("singular")
    elif sol.t_events[3].size:
        raise NonReturnError(f"no return to delta={delta_entry!r} within t={t_limit!r}")
    traj = trajectory_from_solution(surface, sol, tol, "singular" if flags else "completed")

    if sol.t_events[1].size:
        turn = sol.y_events[1][0]
        t_min, x_min = float(turn[0]), float(turn[1])
    else:
        i = int(np.argmin(traj.x))
        t_min, x_min = float(traj.t[i]), float(traj.x[i])
    delta_min = float(cusp_distance(surface, x_min))
    tau_change = float(traj.tau_lift[-1] - traj.tau_lift[0])
    r = surface.r
    inv_delta = traj.integrate(lambda x, a, b: 1.0 / _delta_closed_form(r, x))
    return ExcursionRecord(
        r=r, b_entry=b_entry, delta_entry=delta_entry, delta_min=delta_min, D=1.0 / delta_min,
        duration=float(traj.t[-1]), t_min=t_min, winding=abs(tau_change) / TWO_PI,
        tau_change=tau_change, inv_delta_integral=inv_delta, flags=tuple(flags),
        trajectory=traj if keep_trajectory else None,
    )


def b_entry_for_depth(surface: ProfileSurface, delta_entry: float, D: float) -> float:
    """Entry angle whose excursion bottoms out at ``delta_min = 1/D``."""
    x_entry = _entry_x(surface, delta_entry)
    x_min = float(inverse_cusp_distance(surface, 1.0 / D))
    return (x_min / x_entry) ** surface.r


def _slope_increments(traj: Trajectory) -> np.ndarray:
    """Successive increments of ``d delta / dt = a`` between samples.

    Where ``a`` is close to -1 or +1 the increment is taken through
    ``a**2 + b**2 = 1`` as ``(b_i**2 - b_j**2) / (a_i + a_j)``, which keeps
    its sign when ``b`` is so small that ``a`` itself rounds to +-1.
    """
    a, b = traj.a, np.abs(traj.b)
    a0, a1, b0, b1 = a[:-1], a[1:], b[:-1], b[1:]
    direct = a1 - a0
    same_side = (a0 * a1 > 0) & (np.abs(a0 + a1) >= 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        via_b = (b0 - b1) * (b0 + b1) / (a0 + a1)
    return np.where(same_side, via_b, direct)


def check_convexity(traj: Trajectory) -> bool:
    """True iff every interior second difference of ``t -> delta`` is positive.

    Radial geodesics (``|a| = 1``) are outside the hypothesis and raise
    :class:`NotApplicableError`.
    """
    if len(traj) < 5:
        raise InsufficientDataError("convexity check needs at least 5 samples")
    if np.all(traj.b == 0.0):
        raise NotApplicableError("radial geodesic (|a| = 1): delta is linear in t")
    return bool(np.all(_slope_increments(traj) > 0.0))


class WindingIdentity(NamedTuple):
    lhs: float
    rhs: float


def winding_identity_check(traj: Trajectory) -> WindingIdentity:
    """Angle swept by the geodesic against ``int b / x**r dt``.

    The left side is read off the integrated angle; the right side is a
    quadrature of the rotational component over the trajectory.
    """
    r = traj.r
    lhs = float(traj.tau_lift[-1] - traj.tau_lift[0])
    rhs = traj.integrate(lambda x, a, b: b / x ** r)
    return WindingIdentity(lhs, rhs)


def winding_integral_delta(traj: Trajectory) -> float:
    """``int b / delta**r dt``: the winding integral written with the cusp distance."""
    r = traj.r
    return traj.integrate(lambda x, a, b: b / _delta_closed_form(r, x) ** r)


def _linear_fit(u, v) -> ScalingFit:
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    if u.size < 3:
        raise InsufficientDataError("a fit needs at least 3 points")
    res = stats.linregress(u, v)
    r2 = float(np.clip(res.rvalue ** 2, 0.0, 1.0))
    return ScalingFit(slope=float(res.slope), intercept=float(res.intercept), r_squared=r2,
                      n_points=int(u.size), slope_ci_halfwidth=float(1.96 * res.stderr))


def fit_power_law(points: Iterable[Sequence[float]]) -> ScalingFit:
    """Least squares line through ``(log u, log v)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("points must be (u, v) pairs")
    if pts.shape[0] < 3:
        raise InsufficientDataError("a power-law fit needs at least 3 points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("power-law fit needs strictly positive finite coordinates")
    return _linear_fit(np.log(pts[:, 0]), np.log(pts[:, 1]))


def inverse_delta_functional(records: Sequence[ExcursionRecord]) -> ScalingFit:
    """Fit ``int dt / delta`` against ``log D`` across an ensemble."""
    D = np.array([rec.D for rec in records])
    if D.size < 3 or np.log10(D.max() / D.min()) < 2.0:
        raise InsufficientDataError("ensemble must span at least two decades of D")
    return _linear_fit(np.log(D), [rec.inv_delta_integral for rec in records])


def write_ensemble_csv(records: Sequence[ExcursionRecord], path) -> None:
    rows = np.array([[getattr(rec, c) for c in ENSEMBLE_COLUMNS] for rec in records], float)
    np.savetxt(path, rows, delimiter=",", fmt="%.17g", header=",".join(ENSEMBLE_COLUMNS),
               comments="")


@dataclass(frozen=True, eq=False)
class ExcursionTable:
    """Excursion response as a function of the entry angle, for fixed entry level.

    Built from ODE excursions on a logarithmic grid of ``b``, refined toward
    the grazing end ``b = 1`` where the response vanishes like
    ``sqrt(1 - b)``; below the grid, the depth comes from the Clairaut relation and winding and
    ``int dt/delta`` from fits to the deepest grid points.
    """

    surface: ProfileSurface
    delta_entry: float
    b_grid: np.ndarray
    duration: np.ndarray
    winding: np.ndarray
    inv_delta: np.ndarray
    winding_fit: ScalingFit
    inv_delta_fit: ScalingFit

    @property
    def b_min(self) -> float:
        return float(self.b_grid[0])

    @classmethod
    def build(cls, surface: ProfileSurface, delta_entry: Optional[float] = None,
              b_min: float = 1e-6, n_grid: int = 97, tol: float = 1e-10,
              n_tail_fit: int = 17, n_edge: int = 25) -> "ExcursionTable":
        delta_entry = surface.delta0 if delta_entry is None else delta_entry
        grid = np.logspace(math.log10(b_min), 0.0, n_grid)
        edge = 1.0 - np.logspace(-1.0, -7.0, n_edge)
        grid = np.unique(np.concatenate([grid, edge[edge > grid[-2]]]))
        records = [simulate_excursion(surface, delta_entry, float(b), tol=tol) for b in grid[:-1]]
        # b = 1 is the tangent start: no excursion at all
        duration = np.array([rec.duration for rec in records] + [0.0])
        winding = np.array([rec.winding for rec in records] + [0.0])
        inv_delta = np.array([rec.inv_delta_integral for rec in records] + [0.0])
        deep = records[:n_tail_fit]
        w_fit = fit_power_law([(rec.D, rec.winding) for rec in deep])
        h_fit = _linear_fit(np.log([rec.D for rec in deep]), [rec.inv_delta_integral for rec in deep])
        return cls(surface, delta_entry, grid, duration, winding, inv_delta, w_fit, h_fit)

    def evaluate(self, b):
        """Return ``(delta_min, duration, winding, inv_delta, shortcut)`` arrays for entry angles ``b``."""
        b = np.asarray(b, dtype=float)
        delta_min = np.atleast_1d(predict_delta_min(self.surface, self.delta_entry, b))
        log_b = np.log(b)
        log_grid = np.log(self.b_grid)
        shortcut = b < self.b_grid[0]
        lb = np.clip(log_b, log_grid[0], 0.0)
        duration = interpolate.pchip_interpolate(log_grid, self.duration, lb)
        winding = interpolate.pchip_interpolate(log_grid, self.winding, lb)
        inv_delta = interpolate.pchip_interpolate(log_grid, self.inv_delta, lb)
        if np.any(shortcut):
            log_D = -np.log(delta_min[shortcut])
            winding[shortcut] = np.exp(self.winding_fit.intercept + self.winding_fit.slope * log_D)
            inv_delta[shortcut] = self.inv_delta_fit.intercept + self.inv_delta_fit.slope * log_D
        return delta_min, duration, winding, inv_delta, shortcut

    def mean_duration(self) -> float:
        """``E[duration]`` for uniform ``b`` on ``(0, 1]``, by quadrature over the table."""
        u = np.linspace(0.0, 1.0, 20001)[1:]
        _, duration, _, _, _ = self.evaluate(u)
        return float(integrate.simpson(np.concatenate([[duration[0]], duration]),
                                       x=np.concatenate([[0.0], u])))
