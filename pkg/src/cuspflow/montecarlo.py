"""Long surrogate geodesics: a renewal return process composed with exact excursions.

Returns into the collar arrive after independent gaps; each return starts an
excursion whose entry angle ``b`` has ``P(b <= 1/R) = 1/R``.  Per-excursion
depth, duration, winding and ``int dt/delta`` come from an
:class:`~cuspflow.excursion.ExcursionTable`.  Every excursion is attributed to
the time it enters the cusp.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, NotApplicableError
from .excursion import ExcursionTable, ScalingFit, fit_power_law
from .geometry import ProfileSurface

GAP_LAWS = ("exponential", "pareto", "catmap")
PARETO_SHAPE = 3.0
CHECKPOINTS_PER_DECADE = 20
SUMMARY_COLUMNS = ("seed", "T", "n_excursions", "delta_min_running", "W", "dist_hyp")


class ReturnProcess:
    """Renewal process of collar returns.

    Parameters
    ----------
    gap_law : {"exponential", "pareto", "catmap"}
        ``pareto`` is a Lomax law with shape 3 and the requested mean;
        ``catmap`` drives gaps and angles from one cat-map orbit, with
        exponential and uniform marginals.
    mu_gap : float
        Mean gap between returns.
    seed : int
        Gaps and angles use separate streams spawned from it, so batch
        sizes do not change the event sequence.
    """

    def __init__(self, gap_law: str = "exponential", mu_gap: float = 1.0, seed: int = 0):
        if gap_law not in GAP_LAWS:
            raise DomainError(f"gap_law must be one of {GAP_LAWS}")
        if not mu_gap > 0:
            raise DomainError("mu_gap must be positive")
        self.gap_law = gap_law
        self.mu_gap = float(mu_gap)
        self.seed = seed
        ss = np.random.SeedSequence(seed)
        gap_ss, b_ss = ss.spawn(2)
        self._gap_rng = np.random.default_rng(gap_ss)
        self._b_rng = np.random.default_rng(b_ss)
        self._cat = (float(self._gap_rng.random()), float(self._b_rng.random()))
        self.n_drawn = 0

    @staticmethod
    def b_cdf(p):
        """``P(b <= p)`` of the implemented angle law."""
        return np.clip(np.asarray(p, float), 0.0, 1.0)

    def sample(self, n: int):
        """Next ``n`` events as arrays ``(gap, b)``."""
        if self.gap_law == "catmap":
            u, v = self._cat_orbit(n)
            gap = -self.mu_gap * np.log1p(-u)
            b = 1.0 - v
        else:
            if self.gap_law == "exponential":
                gap = self.mu_gap * self._gap_rng.standard_exponential(n)
            else:
                scale = self.mu_gap * (PARETO_SHAPE - 1.0)
                gap = scale * self._gap_rng.pareto(PARETO_SHAPE, n)
            b = 1.0 - self._b_rng.random(n)
        # zero-probability ties still need strictly positive gaps
        gap = np.maximum(gap, np.finfo(float).tiny)
        self.n_drawn += n
        return gap, b

    def _cat_orbit(self, n: int):
        u, v = self._cat
        out = np.empty((n, 2))
        for i in range(n):
            u, v = (2.0 * u + v) % 1.0, (u + v) % 1.0
            out[i] = u, v
        self._cat = (u, v)
        return out[:, 0], out[:, 1]


def sample_return_event(process: ReturnProcess):
    """Next ``(gap, b)`` of the process."""
    gap, b = process.sample(1)
    return float(gap[0]), float(b[0])


@dataclass(frozen=True)
class AcceptanceWindow:
    epsilon: float = 0.1
    c: float = 10.0

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise DomainError("window epsilon must lie in (0, 1/2)")
        if not self.c >= 1:
            raise DomainError("window constant c must be >= 1")

    def depth_bounds(self, T, r: float):
        T = np.asarray(T, float)
        lower = T ** (-(1.0 + self.epsilon) / r) / self.c
        upper = self.c * T ** (-(1.0 - self.epsilon) / (2.0 * r))
        return lower, upper

    def height_bounds(self, T):
        T = np.asarray(T, float)
        return T ** ((1.0 - self.epsilon) / 3.0) / self.c, self.c * T ** ((2.0 + self.epsilon) / 3.0)


@dataclass(frozen=True, eq=False)
class GeodesicSummary:
    """Running statistics of one surrogate geodesic at checkpoint times ``T``."""

    seed: int
    T: np.ndarray
    n_excursions: np.ndarray
    delta_min_running: np.ndarray
    W: np.ndarray
    dist_hyp: np.ndarray
    n_shortcut: int = 0
    per_excursion: Optional[dict] = field(default=None, repr=False)

    def rows(self):
        for i in range(self.T.size):
            yield (self.seed, float(self.T[i]), int(self.n_excursions[i]),
                   float(self.delta_min_running[i]), float(self.W[i]), float(self.dist_hyp[i]))


@dataclass(frozen=True)
class SimulationOptions:
    checkpoints: Optional[Sequence[float]] = None
    batch: int = 65536
    keep_records: bool = False


def log_checkpoints(T: float, t_min: float = 10.0, per_decade: int = CHECKPOINTS_PER_DECADE):
    """Log-spaced times from ``t_min`` up to and including ``T``."""
    if T <= t_min:
        return np.array([float(T)])
    n = int(math.floor(per_decade * math.log10(T / t_min) + 1e-9))
    pts = t_min * 10.0 ** (np.arange(n + 1) / per_decade)
    if pts[-1] < T * (1 - 1e-12):
        pts = np.append(pts, T)
    return pts


@functools.lru_cache(maxsize=16)
def excursion_table(r: float, x_max: float = 1.0, tol: float = 1e-10) -> ExcursionTable:
    """Tabulated excursion response at the default entry level, cached per surface."""
    return ExcursionTable.build(ProfileSurface(r, x_max), tol=tol)


def simulate_long_geodesic(surface: ProfileSurface, process: ReturnProcess, T: float,
                           options: Optional[SimulationOptions] = None,
                           table: Optional[ExcursionTable] = None) -> GeodesicSummary:
    """Run the surrogate geodesic up to time ``T`` and record checkpoint statistics."""
    if not T > 0:
        raise DomainError("T must be positive")
    options = options or SimulationOptions()
    if table is None:
        table = excursion_table(surface.r, surface.x_max)
    cps = np.asarray(options.checkpoints if options.checkpoints is not None else log_checkpoints(T), float)
    if np.any(np.diff(cps) <= 0) or cps[-1] > T:
        raise DomainError("checkpoints must increase and end no later than T")

    entries, bs, gaps = [], [], []
    clock = 0.0
    while clock < T:
        gap, b = process.sample(options.batch)
        _, dur, _, _, _ = table.evaluate(b)
        cycle = np.cumsum(gap + dur)
        start = clock + np.concatenate([[0.0], cycle[:-1]]) + gap
        keep = start <= T
        entries.append(start[keep])
        bs.append(b[keep])
        gaps.append(gap[keep])
        clock += cycle[-1]
        if not keep.all():
            break
    entry = np.concatenate(entries)
    b = np.concatenate(bs)
    dmin, dur, wind, invd, shortcut = table.evaluate(b)
    W = np.cumsum(wind)
    H = np.cumsum(invd)
    running = np.minimum.accumulate(np.minimum(dmin, table.delta_entry)) if b.size else dmin
    idx = np.searchsorted(entry, cps, side="right")
    have = idx > 0
    last = np.maximum(idx - 1, 0)
    n_exc = idx.astype(np.int64)
    dm = np.where(have, running[last] if b.size else 0.0, table.delta_entry)
    Wc = np.where(have, W[last] if b.size else 0.0, 0.0)
    Hc = np.where(have, H[last] if b.size else 0.0, 0.0)
    records = None
    if options.keep_records:
        records = dict(entry_time=entry, gap=np.concatenate(gaps), b=b, delta_min=dmin, duration=dur, winding=wind,
                       inv_delta=invd, shortcut=shortcut)
    return GeodesicSummary(process.seed, cps, n_exc, dm, Wc, Hc, int(shortcut.sum()), records)


def trajectory_summary(r: float, x_max: float, T: float, mu_gap: float, gap_law: str,
                       seed: int, index: int, table: Optional[ExcursionTable] = None) -> GeodesicSummary:
    """One trajectory of an ensemble; its stream depends only on ``(seed, index)``."""
    surface = ProfileSurface(r, x_max)
    child = int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(2, np.uint64)[0])
    process = ReturnProcess(gap_law, mu_gap, child)
    return simulate_long_geodesic(surface, process, T, table=table)


def ensemble(r: float, T: float, n_trajectories: int, seed: int, mu_gap: float = 1.0,
             gap_law: str = "exponential", x_max: float = 1.0, mapper: Callable = map):
    table = excursion_table(r, x_max)
    work = functools.partial(trajectory_summary, r, x_max, T, mu_gap, gap_law, seed, table=table)
    return list(mapper(work, range(n_trajectories)))


def write_summary_csv(summaries: Sequence[GeodesicSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            for row in s.rows():
                w.writerow([row[0], repr(row[1]), row[2], repr(row[3]), repr(row[4]), repr(row[5])])


# ensemble checks

def _window_mask(summaries, t_min):
    T = summaries[0].T
    for s in summaries[1:]:
        if s.T.shape != T.shape or np.any(s.T != T):
            raise DomainError("summaries must share checkpoints")
    mask = T >= t_min
    if mask.sum() < 3 or np.log10(T[mask][-1] / T[mask][0]) < 3.0 - 1e-9:
        raise InsufficientDataError("checkpoints must span at least three decades")
    return T[mask], mask


def _geo_mean(summaries, attr, mask):
    vals = np.vstack([getattr(s, attr)[mask] for s in summaries])
    return np.exp(np.mean(np.log(vals), axis=0))


@dataclass(frozen=True)
class WindowReport:
    containment: float
    per_trajectory: tuple
    exponent_fit: ScalingFit
    exponent: float
    epsilon: float
    c: float
    r: float
    t_min: float


def max_excursion_window_check(summaries: Sequence[GeodesicSummary], window: AcceptanceWindow,
                               r: float, t_min: float = 1e3) -> WindowReport:
    """Containment of the running minimum depth in the window, and its decay exponent."""
    T, mask = _window_mask(summaries, t_min)
    lo, hi = window.depth_bounds(T, r)
    per = []
    for s in summaries:
        d = s.delta_min_running[mask]
        per.append(float(np.mean((d >= lo) & (d <= hi))))
    fit = fit_power_law(zip(T, _geo_mean(summaries, "delta_min_running", mask)))
    return WindowReport(float(np.mean(per)), tuple(per), fit, -fit.slope, window.epsilon,
                        window.c, r, t_min)


@dataclass(frozen=True)
class LinearityReport:
    fit_W: ScalingFit
    fit_H: ScalingFit
    band: tuple
    rate_W: float
    rate_H: float


def _band(summaries, attr, T, mask):
    vals = np.vstack([getattr(s, attr)[mask] for s in summaries])
    rate = float(np.mean(vals[:, -1]) / T[-1])
    ratio = vals / (rate * T)
    return float(np.max(np.maximum(ratio, 1.0 / ratio))), rate


def winding_and_distance_linearity(summaries: Sequence[GeodesicSummary], t_min: float = 1e3):
    """Log-log slopes of total winding and hyperbolic distance against time.

    The band is the largest factor by which any trajectory strays from the
    ensemble mean rate at any checkpoint.
    """
    T, mask = _window_mask(summaries, t_min)
    fit_W = fit_power_law(zip(T, _geo_mean(summaries, "W", mask)))
    fit_H = fit_power_law(zip(T, _geo_mean(summaries, "dist_hyp", mask)))
    pW, rW = _band(summaries, "W", T, mask)
    pH, rH = _band(summaries, "dist_hyp", T, mask)
    return LinearityReport(fit_W, fit_H, (pW, pH), rW, rH)


@dataclass(frozen=True)
class SullivanReport:
    containment: float
    exponent_fit: ScalingFit
    exponent: float
    epsilon: float
    c1: float


def sullivan_comparison(summaries: Sequence[GeodesicSummary], r: float = 3.0,
                        window: AcceptanceWindow = AcceptanceWindow(), t_min: float = 1e3):
    """Largest upper-half-plane height ``delta_min**-2`` against its window."""
    if r != 3:
        raise NotApplicableError("the height comparison is defined for r = 3 only")
    T, mask = _window_mask(summaries, t_min)
    lo, hi = window.height_bounds(T)
    inside = []
    for s in summaries:
        y = s.delta_min_running[mask] ** -2.0
        inside.append(np.mean((y > lo) & (y < hi)))
    fit = fit_power_law(zip(T, _geo_mean(summaries, "delta_min_running", mask) ** -2.0))
    return SullivanReport(float(np.mean(inside)), fit, fit.slope, window.epsilon, window.c)


def tail_law_check(process: ReturnProcess, R_values=None, n_draws: int = 0):
    """``R * P(b <= 1/R)`` over ``R``; exact from the law, or empirical when ``n_draws > 0``."""
    R = np.logspace(math.log10(2.0), 6.0, 25) if R_values is None else np.asarray(R_values, float)
    if n_draws:
        _, b = process.sample(n_draws)
        b = np.sort(b)
        return R * np.searchsorted(b, 1.0 / R, side="right") / n_draws
    return R * process.b_cdf(1.0 / R)
