"""Synthetic mixing systems as unit-roof suspension flows.

A flow point is a base point of a map together with a fiber offset
``s`` in ``[0, 1)``.  The base point ``x_j`` of the orbit is occupied on the
time interval ``[j - s, j + 1 - s)``, so observables are constant on fibers
and flow time equals a step count plus a fractional piece.

Observables are vectorized callables.  One-dimensional maps pass an array of
shape ``(n,)``; the cat map passes shape ``(n, 2)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from . import _kernels as kern
from .errors import ConfigError, DomainError, InsufficientDataError
from .excursion import ScalingFit, _linear_fit

KINDS = ("doubling", "catmap", "intermittent")
BURN_IN = 10_000
_KIND_CODE = {"doubling": kern.DOUBLING, "catmap": kern.CATMAP, "intermittent": kern.INTERMITTENT}
_NO_WORDS = np.zeros(1, dtype=np.uint64)


@dataclass(frozen=True)
class RateModel:
    """Correlation decay ``K exp(-C t)`` or ``K (1 + t)**(-C)``; ``K`` is fitted, never assumed."""

    style: str
    C: float
    K: Optional[float] = None

    def __post_init__(self):
        if self.style not in ("exponential", "polynomial"):
            raise DomainError(f"unknown rate style {self.style!r}")
        if not self.C > 0:
            raise DomainError("rate C must be positive")

    def bound(self, t):
        if self.K is None:
            raise DomainError("amplitude K has not been fitted")
        t = np.asarray(t, float)
        if self.style == "exponential":
            return self.K * np.exp(-self.C * t)
        return self.K * (1.0 + t) ** (-self.C)

    @property
    def variance_exponent(self) -> float:
        if self.style == "exponential" or self.C >= 1:
            return 1.0
        return 2.0 - self.C

    @property
    def regime(self) -> str:
        if self.style == "exponential" or self.C > 1:
            return "linear"
        if self.C == 1:
            return "t_log_t"
        return "superlinear"

    def variance_shape(self, T):
        """Growth profile of ``Var(int_0^T f)`` implied by the decay rate."""
        T = np.asarray(T, float)
        if self.regime == "linear":
            return T
        if self.regime == "t_log_t":
            return T * np.log(1.0 + T)
        return T ** (2.0 - self.C)


@dataclass(frozen=True)
class FlowPoint:
    """Base point ``x``, fiber offset ``s`` and, for the doubling map, its digit stream."""

    x: tuple
    s: float = 0.0
    tail_seed: Optional[int] = None
    tail_offset: int = 0


class MixingFlowModel:
    """Suspension flow over one of the synthetic maps.

    Parameters
    ----------
    kind : {"doubling", "catmap", "intermittent"}
    alpha : float, optional
        Intermittency exponent of the intermittent map, in ``(0, 1)``.
    seed : int, optional
        Seed of the default generator used by :meth:`sample_initial`.
    burn_in : int
        Iterates discarded when sampling the intermittent invariant measure.
    """

    def __init__(self, kind: str, alpha: Optional[float] = None, seed: Optional[int] = None,
                 burn_in: int = BURN_IN):
        if kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {kind!r}")
        if kind == "intermittent":
            if alpha is None or not 0 < alpha < 1:
                raise DomainError(f"intermittent map needs alpha in (0, 1), got {alpha!r}")
            rate = RateModel("polynomial", 1.0 / alpha - 1.0)
        else:
            alpha = None
            lyap = math.log(2.0) if kind == "doubling" else math.log((3.0 + math.sqrt(5.0)) / 2.0)
            rate = RateModel("exponential", lyap)
        self.kind = kind
        self.alpha = alpha
        self.rate_model = rate
        self.state_dim = 2 if kind == "catmap" else 1
        self.burn_in = int(burn_in)
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def __repr__(self):
        return f"MixingFlowModel(kind={self.kind!r}, alpha={self.alpha!r}, rate_model={self.rate_model!r})"

    @property
    def _code(self) -> int:
        return _KIND_CODE[self.kind]

    @property
    def _alpha(self) -> float:
        return 0.0 if self.alpha is None else float(self.alpha)

    # sampling

    def sample_initial(self, rng: Optional[np.random.Generator] = None) -> FlowPoint:
        """Draw a flow point from the invariant measure."""
        rng = self._rng if rng is None else rng
        s = float(rng.random())
        if self.kind == "doubling":
            return FlowPoint((float(rng.random()),), s, int(rng.integers(2 ** 63)), 0)
        if self.kind == "catmap":
            return FlowPoint((float(rng.random()), float(rng.random())), s)
        x, _ = kern.advance(self._code, float(rng.random()), 0.0, self._alpha, _NO_WORDS, 0,
                            self.burn_in)
        return FlowPoint((float(x),), s)

    def sample_ensemble(self, n: int, rng: np.random.Generator):
        """Base points of shape ``(n, 2)`` and fiber offsets, drawn independently from the invariant measure."""
        X = np.zeros((n, 2))
        X[:, 0] = rng.random(n)
        if self.kind == "catmap":
            X[:, 1] = rng.random(n)
        if self.kind == "intermittent":
            X = kern.advance_ensemble(self._code, X, self._alpha, np.full(n, self.burn_in, np.int64),
                                      np.zeros((n, 1), np.uint64))
        s = rng.random(n)
        return X, s

    def advance_ensemble(self, X, steps, rng: np.random.Generator):
        """Advance each row of ``X`` by its own number of map steps."""
        steps = np.asarray(steps, np.int64)
        if self.kind == "doubling":
            n_words = int(steps.max()) // 64 + 1 if steps.size else 1
            words = rng.integers(0, 2 ** 64, size=(X.shape[0], n_words), dtype=np.uint64,
                                 endpoint=False)
        else:
            words = np.zeros((X.shape[0], 1), np.uint64)
        return kern.advance_ensemble(self._code, np.ascontiguousarray(X, float), self._alpha,
                                     steps, words)

    # single orbits

    def _words(self, y: FlowPoint, n: int):
        if self.kind != "doubling":
            return _NO_WORDS, 0
        bg = np.random.PCG64(y.tail_seed)
        bg.advance(y.tail_offset // 64)
        bit0 = y.tail_offset % 64
        return bg.random_raw((bit0 + n) // 64 + 1), bit0

    def _start(self, y: FlowPoint):
        return float(y.x[0]), (float(y.x[1]) if self.state_dim == 2 else 0.0)

    def orbit(self, y: FlowPoint, n: int) -> np.ndarray:
        """Base points ``x_0 .. x_{n-1}``, shape ``(n, 2)``."""
        words, bit0 = self._words(y, n)
        x, v = self._start(y)
        return kern.orbit(self._code, x, v, self._alpha, words, bit0, int(n))

    def evolve(self, y: FlowPoint, t: float) -> FlowPoint:
        """Flow ``y`` forward by time ``t >= 0``."""
        if t < 0:
            raise DomainError("evolve needs t >= 0")
        total = y.s + t
        n = int(math.floor(total))
        words, bit0 = self._words(y, n)
        x, v = self._start(y)
        x, v = kern.advance(self._code, x, v, self._alpha, words, bit0, n)
        coords = (float(x), float(v)) if self.state_dim == 2 else (float(x),)
        offset = y.tail_offset + n if self.kind == "doubling" else 0
        return FlowPoint(coords, total - n, y.tail_seed, offset)

    def coords(self, pts: np.ndarray) -> np.ndarray:
        """Observable argument for base points of shape ``(n, 2)``."""
        return pts if self.state_dim == 2 else pts[:, 0]

    def eval(self, f: Callable, y: FlowPoint) -> float:
        pts = np.array([[y.x[0], y.x[1] if self.state_dim == 2 else 0.0]])
        return float(np.asarray(f(self.coords(pts)))[0])


def create_flow(kind: str, params: Optional[dict] = None, seed: Optional[int] = None) -> MixingFlowModel:
    """Build a suspension flow; ``params`` may carry ``alpha`` and ``burn_in``."""
    params = dict(params or {})
    unknown = set(params) - {"alpha", "burn_in"}
    if unknown:
        raise DomainError(f"unknown flow parameters {sorted(unknown)}")
    return MixingFlowModel(kind, alpha=params.get("alpha"), seed=seed,
                           burn_in=params.get("burn_in", BURN_IN))


def orbit_rng(seed: int, index: int, *key: int) -> np.random.Generator:
    """Generator for orbit ``index``, independent of how orbits are split across workers."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(*key, index)))


# time integrals

def _fiber_weights(s: float, T: float):
    n = int(math.ceil(T + s)) if T > 0 else 0
    j = np.arange(n, dtype=float)
    lo = np.maximum(j - s, 0.0)
    hi = np.minimum(j + 1.0 - s, T)
    return np.clip(hi - lo, 0.0, None)


def birkhoff_integral(flow: MixingFlowModel, f: Callable, y: FlowPoint, T: float) -> float:
    """``int_0^T f(g_t y) dt`` along the suspension orbit of ``y``."""
    if T < 0:
        raise DomainError("T must be non-negative")
    w = _fiber_weights(y.s, T)
    if w.size == 0:
        return 0.0
    vals = np.asarray(f(flow.coords(flow.orbit(y, w.size))), float)
    return float(np.dot(w, vals))


def correlation_estimate(flow: MixingFlowModel, f1: Callable, f2: Callable, t: float,
                         n_samples: int, seed: int, return_error: bool = False):
    """Monte Carlo estimate of ``int f1 * f2 o g_t dmu - int f1 dmu * int f2 dmu``.

    With ``return_error`` the standard error of the estimate is returned too.
    """
    if n_samples < 1000:
        raise DomainError("correlation estimates need n_samples >= 1000")
    if t < 0:
        raise DomainError("t must be non-negative")
    rng = np.random.default_rng(seed)
    X0, s = flow.sample_ensemble(n_samples, rng)
    steps = np.floor(s + t).astype(np.int64)
    Xt = flow.advance_ensemble(X0, steps, rng)
    a = np.asarray(f1(flow.coords(X0)), float)
    b = np.asarray(f2(flow.coords(Xt)), float)
    prod = (a - a.mean()) * (b - b.mean())
    value = float(prod.sum() / (n_samples - 1))
    if not return_error:
        return value
    return value, float(prod.std(ddof=1) / math.sqrt(n_samples))


def fit_correlation_decay(flow: MixingFlowModel, f1: Callable, f2: Callable, t_values,
                          n_samples: int, seed: int, n_sigma: float = 3.0):
    """Fit the decay of ``|corr(t)|`` with the flow's rate style.

    Only lags whose estimate exceeds ``n_sigma`` standard errors are used.
    Returns the fitted :class:`RateModel` and the underlying line fit.
    """
    t_values = np.asarray(t_values, float)
    est = [correlation_estimate(flow, f1, f2, t, n_samples, seed + i, return_error=True)
           for i, t in enumerate(t_values)]
    c = np.array([e[0] for e in est])
    se = np.array([e[1] for e in est])
    keep = np.abs(c) > n_sigma * se
    if keep.sum() < 3:
        raise InsufficientDataError("fewer than 3 lags carry a resolved correlation")
    style = flow.rate_model.style
    u = t_values[keep] if style == "exponential" else np.log1p(t_values[keep])
    fit = _linear_fit(u, np.log(np.abs(c[keep])))
    return RateModel(style, max(-fit.slope, 1e-12), float(math.exp(fit.intercept))), fit


# variance growth

def closed_form_double_integral(C: float, T: float) -> float:
    """``int_0^T int_0^T (1 + |t - s|)**(-C) dt ds`` in closed form."""
    if not (C > 0 and T > 0):
        raise DomainError("need C > 0 and T > 0")
    L = math.log1p(T)
    if C == 1:
        return 2.0 * ((1.0 + T) * L - T)
    if C == 2:
        return 2.0 * (T - L)
    return 2.0 / (1.0 - C) * (math.expm1((2.0 - C) * L) / (2.0 - C) - T)


@dataclass(frozen=True)
class VarianceGrowthResult:
    fit: ScalingFit
    T: tuple
    variance: tuple
    bound: tuple
    Q: float
    regime: str
    expected_exponent: float

    @property
    def slope(self) -> float:
        return self.fit.slope

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["T", "empirical_variance", "bound_value", "regime"])
            for T, v, b in zip(self.T, self.variance, self.bound):
                w.writerow([repr(float(T)), repr(float(v)), repr(float(b)), self.regime])


class _Shifted:
    def __init__(self, f, c):
        self.f, self.c = f, c

    def __call__(self, u):
        return np.asarray(self.f(u), float) - self.c


def _orbit_integrals(flow: MixingFlowModel, f: Callable, T_grid: np.ndarray, seed: int,
                     index: int) -> np.ndarray:
    rng = orbit_rng(seed, index)
    y = flow.sample_initial(rng)
    T_max = int(T_grid[-1])
    F = np.asarray(f(flow.coords(flow.orbit(y, T_max + 1))), float)
    cs = np.concatenate([[0.0], np.cumsum(F)])
    Ti = T_grid.astype(np.int64)
    return cs[Ti] - y.s * F[0] + y.s * F[Ti]


def variance_growth_experiment(flow: MixingFlowModel, f: Callable, T_grid: Sequence[float],
                               n_orbits: int, seed: int, mapper: Callable = map) -> VarianceGrowthResult:
    """Sample variance of ``int_0^T f`` across orbits, fitted against ``T`` on log scales.

    ``T_grid`` holds integer times spanning at least two decades.  The
    centring constant does not change the variance; it is removed anyway to
    keep the sums well conditioned.
    """
    T_grid = np.unique(np.asarray(T_grid, float))
    if T_grid.size < 3 or T_grid[0] < 1 or np.log10(T_grid[-1] / T_grid[0]) < 2.0:
        raise InsufficientDataError("T_grid must hold at least 3 times spanning two decades")
    if np.any(T_grid != np.round(T_grid)):
        raise DomainError("T_grid must hold integer times")
    if n_orbits < 10:
        raise InsufficientDataError("need at least 10 orbits")
    rng = orbit_rng(seed, 0, 1)
    X, _ = flow.sample_ensemble(4096, rng)
    mean_f = float(np.mean(f(flow.coords(X))))
    g = _Shifted(f, mean_f)
    rows = list(mapper(partial(_orbit_integrals, flow, g, T_grid, seed), range(n_orbits)))
    S = np.vstack(rows)
    var = S.var(axis=0, ddof=1)
    if np.any(var <= 0):
        raise InsufficientDataError("degenerate variance; observable is a coboundary at this scale")
    fit = _linear_fit(np.log(T_grid), np.log(var))
    shape = flow.rate_model.variance_shape(T_grid)
    Q = float(np.max(var / shape))
    return VarianceGrowthResult(fit, tuple(T_grid.tolist()), tuple(var.tolist()),
                                tuple((Q * shape).tolist()), Q, flow.rate_model.regime,
                                flow.rate_model.variance_exponent)


def write_variance_csv(result: VarianceGrowthResult, path) -> None:
    result.to_csv(path)


# effective sandwich

@dataclass(frozen=True)
class BumpFamily:
    """Trapezoid bumps anchored at 0 on the circle (first coordinate on the torus).

    Member ``R`` has support ``[0, 1/R]``, linear ramps of width ``1/(4R)``
    and height 1 on the inner half of its support.  ``constant=True`` gives
    the family ``f_R = 1``.
    """

    holder_exponent: float = 0.5
    constant: bool = False

    def __post_init__(self):
        if not 0 < self.holder_exponent <= 1:
            raise DomainError("holder exponent must lie in (0, 1]")

    @property
    def h(self) -> float:
        return 1.0 + 4.0 ** self.holder_exponent

    def width(self, R):
        return 1.0 / np.asarray(R, float)

    def member(self, R: float) -> Callable:
        def f(u):
            u = np.asarray(u, float)
            x = u[:, 0] if u.ndim == 2 else u
            if self.constant:
                return np.ones_like(x)
            w = 0.25 / R
            return np.clip(np.minimum(x / w, (4.0 * w - x) / w), 0.0, 1.0)
        return f

    def lebesgue_l1(self, R):
        R = np.asarray(R, float)
        return np.ones_like(R) if self.constant else 0.75 / R

    def holder_norm(self, R):
        R = np.asarray(R, float)
        if self.constant:
            return np.ones_like(R)
        return 1.0 + (4.0 * R) ** self.holder_exponent


@dataclass(frozen=True)
class EffectiveAverageConfig:
    alpha: float = 0.6
    m: float = 2.0
    xi: float = 0.2
    k_max: int = 21
    k0: int = 20

    def __post_init__(self):
        if not 0.5 < self.alpha < 1:
            raise ConfigError("alpha must lie in (1/2, 1)")
        if not self.m > 1:
            raise ConfigError("slack factor m must exceed 1")
        if not self.xi > 0:
            raise ConfigError("xi must be positive")
        if self.k_max < 1 or not 1 <= self.k0 <= self.k_max:
            raise ConfigError("need 1 <= k0 <= k_max")

    @property
    def schedule_exponent(self) -> float:
        return 2.0 * self.alpha / (2.0 * self.alpha - 1.0)

    def schedule(self, k):
        return np.asarray(k, float) ** self.schedule_exponent

    def n_of_T(self, T_k):
        return np.ceil(np.asarray(T_k, float) ** self.xi)

    def validate_for(self, rate_model: RateModel, holder_exponent: float) -> None:
        if rate_model.style == "polynomial":
            need = max(0.5, 1.0 - rate_model.C / 2.0)
            if not self.alpha > need:
                raise ConfigError(f"alpha={self.alpha} must exceed {need} for polynomial rate C={rate_model.C}")
        cap = (1.0 - self.alpha) / (1.0 + holder_exponent)
        if not self.xi < cap:
            raise ConfigError(f"xi={self.xi} must be below (1 - alpha)/(1 + theta) = {cap}")


@dataclass(frozen=True)
class SandwichReport:
    k: tuple
    T: tuple
    R: tuple
    l1: tuple
    norm: tuple
    last_failure: tuple
    failure_count: tuple
    k0: int
    fraction_clean: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def _sandwich_orbit(flow: MixingFlowModel, constant: bool, inv_r: np.ndarray, cp_time: np.ndarray,
                    cp_block: np.ndarray, seed: int, index: int) -> np.ndarray:
    y = flow.sample_initial(orbit_rng(seed, index))
    n = int(math.ceil(cp_time[-1] + y.s)) + 1
    words, bit0 = flow._words(y, n)
    x, v = flow._start(y)
    return kern.sandwich_integrals(flow._code, x, v, flow._alpha, words, y.s, inv_r, constant,
                                   cp_time, cp_block)


def invariant_mean(flow: MixingFlowModel, f: Callable, seed: int, n_steps: int = 10_000_000) -> float:
    """Time average of ``f`` over one long orbit; Lebesgue-invariant maps should use exact means."""
    y = flow.sample_initial(orbit_rng(seed, 0, 2))
    total, done, chunk = 0.0, 0, 1_000_000
    while done < n_steps:
        k = min(chunk, n_steps - done)
        pts = flow.orbit(y, k + 1)
        total += float(np.sum(f(flow.coords(pts[:k]))))
        y = FlowPoint(tuple(pts[k, : flow.state_dim]), 0.0, y.tail_seed, y.tail_offset + k)
        done += k
    return total / n_steps


def effective_sandwich_experiment(flow: MixingFlowModel, family: BumpFamily,
                                  config: EffectiveAverageConfig, n_orbits: int, seed: int,
                                  mapper: Callable = map) -> SandwichReport:
    """Check the two-sided effective average bound along the schedule ``T_k``.

    Block ``k`` integrates bump ``R_k = ceil(T_k**xi)`` and is checked at
    both ends of ``[T_k, T_{k+1}]``.  An orbit fails at ``k`` if either end
    leaves the sandwich.
    """
    config.validate_for(flow.rate_model, family.holder_exponent)
    ks = np.arange(1, config.k_max + 1)
    T = config.schedule(np.arange(1, config.k_max + 2))
    R = config.n_of_T(T[:-1])
    if family.constant or flow.kind != "intermittent":
        l1 = family.lebesgue_l1(R)
    else:
        l1 = np.array([invariant_mean(flow, family.member(float(r)), seed) for r in R])
    norm = family.holder_norm(R)
    times = np.concatenate([T[:-1], T[1:]])
    blocks = np.concatenate([ks - 1, ks - 1])
    order = np.argsort(times, kind="stable")
    cp_time, cp_block = times[order], blocks[order].astype(np.int64)
    work = partial(_sandwich_orbit, flow, family.constant, 1.0 / R, cp_time, cp_block, seed)
    last, count = [], []
    for vals in mapper(work, range(n_orbits)):
        Tb = cp_time
        L, H = l1[cp_block], norm[cp_block]
        lower = Tb * L / config.m - 2.0 * Tb ** config.alpha * H
        upper = config.m * Tb * L + 2.0 * Tb ** config.alpha * H
        bad = (vals < lower) | (vals > upper)
        failed = np.unique(cp_block[bad]) + 1
        last.append(int(failed.max()) if failed.size else 0)
        count.append(int(failed.size))
    clean = float(np.mean([lf < config.k0 for lf in last])) if last else float("nan")
    cfg = asdict(config)
    cfg.update(kind=flow.kind, holder_exponent=family.holder_exponent, constant=family.constant,
               n_orbits=n_orbits)
    return SandwichReport(tuple(ks.tolist()), tuple(T[:-1].tolist()), tuple(R.tolist()),
                          tuple(np.asarray(l1, float).tolist()), tuple(norm.tolist()),
                          tuple(last), tuple(count), config.k0, clean, cfg)


# measure preservation

def fourier_observables(flow: MixingFlowModel):
    """Five characters of the invariant Lebesgue measure, each with zero mean."""
    if flow.kind == "catmap":
        pairs = [(1, 0), (0, 1), (1, 1), (2, -1), (1, 3)]
        return [lambda u, p=p: np.cos(2 * np.pi * (p[0] * u[:, 0] + p[1] * u[:, 1])) for p in pairs]
    return [lambda u, k=k: np.cos(2 * np.pi * k * u) for k in (1, 2, 3)] + \
           [lambda u, k=k: np.sin(2 * np.pi * k * u) for k in (1, 5)]


def double_integral_quadrature(C: float, T: float) -> float:
    """Brute-force 2-D quadrature of the kernel ``(1 + |t - s|)**(-C)`` on ``[0, T]**2``."""
    kernel = lambda t, s: (1.0 + abs(t - s)) ** (-C)
    lower, _ = integrate.dblquad(kernel, 0, T, 0, lambda s: s, epsabs=0, epsrel=1e-11)
    upper, _ = integrate.dblquad(kernel, 0, T, lambda s: s, T, epsabs=0, epsrel=1e-11)
    return lower + upper
