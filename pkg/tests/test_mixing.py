import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cuspflow import ConfigError, DomainError, InsufficientDataError
from cuspflow import mixing as mx


def first_cosine(u):
    return np.cos(2 * np.pi * (u[:, 0] if u.ndim == 2 else u))


def tent(u):
    return np.maximum(0.0, 1.0 - np.abs(u - 0.3) / 0.2)


def constant(u):
    return np.ones(u.shape[0])


@pytest.fixture
def doubling():
    return mx.create_flow("doubling", seed=1)


def test_create_flow_rate_models():
    assert mx.create_flow("doubling").rate_model.style == "exponential"
    assert mx.create_flow("catmap").rate_model.style == "exponential"
    flow = mx.create_flow("intermittent", {"alpha": 0.4})
    assert flow.rate_model.style == "polynomial"
    assert flow.rate_model.C == pytest.approx(1.5)
    assert flow.state_dim == 1
    assert mx.create_flow("catmap").state_dim == 2


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5, None])
def test_intermittent_rejects_bad_alpha(alpha):
    with pytest.raises(DomainError):
        mx.create_flow("intermittent", {"alpha": alpha})


def test_unknown_kind_and_params():
    with pytest.raises(DomainError):
        mx.create_flow("baker")
    with pytest.raises(DomainError):
        mx.create_flow("doubling", {"beta": 1})


def test_doubling_stays_on_53_bit_grid(doubling):
    y = doubling.sample_initial()
    pts = doubling.orbit(y, 10_000)[:, 0]
    scaled = pts * 2.0 ** 53
    assert np.all(scaled == np.round(scaled))
    # each step shifts the revealed digits left by one
    nxt = (2 * pts[:-1]) % 1.0
    diff = pts[1:] - nxt
    assert np.all((diff == 0) | (diff == 2.0 ** -53))


def test_doubling_birkhoff_average(doubling):
    y = doubling.sample_initial()
    avg = mx.birkhoff_integral(doubling, lambda u: u, y, 1e6) / 1e6
    assert avg == pytest.approx(0.5, abs=0.002)


def test_digit_stream_matches_advanced_generator():
    words = np.random.PCG64(99).random_raw(10)
    bg = np.random.PCG64(99)
    bg.advance(7)
    assert np.array_equal(bg.random_raw(3), words[7:])


@given(st.integers(min_value=0, max_value=500), st.integers(min_value=0, max_value=500))
def test_evolve_composes_in_chunks(a, b):
    flow = mx.create_flow("doubling")
    y = flow.sample_initial(np.random.default_rng(a * 1000 + b))
    one = flow.evolve(y, a + b + 0.25)
    two = flow.evolve(flow.evolve(y, a), b + 0.25)
    assert one.x == two.x
    assert one.tail_offset == two.tail_offset
    assert one.s == pytest.approx(two.s, abs=1e-12)


@given(st.integers(min_value=1, max_value=300))
def test_orbit_agrees_with_evolve(n):
    flow = mx.create_flow("doubling")
    y = flow.sample_initial(np.random.default_rng(n))
    y = mx.FlowPoint(y.x, 0.0, y.tail_seed, y.tail_offset)
    pts = flow.orbit(y, n + 1)
    assert flow.evolve(y, n).x[0] == pts[n, 0]


def test_catmap_is_area_preserving():
    flow = mx.create_flow("catmap")
    h = 1e-7
    base = mx.FlowPoint((0.31, 0.47))
    f0 = np.array(flow.evolve(base, 1).x)
    fu = np.array(flow.evolve(mx.FlowPoint((0.31 + h, 0.47)), 1).x)
    fv = np.array(flow.evolve(mx.FlowPoint((0.31, 0.47 + h)), 1).x)
    jac = np.column_stack([(fu - f0) / h, (fv - f0) / h])
    assert np.linalg.det(jac) == pytest.approx(1.0, abs=1e-6)


def test_intermittent_density_near_neutral_point():
    flow = mx.create_flow("intermittent", {"alpha": 0.5})
    edges = 2.0 ** -np.arange(10, 2, -1.0)
    rng = np.random.default_rng(3)
    # oracle: time averages along long orbits
    xs = np.concatenate([flow.orbit(flow.sample_initial(rng), 200_000)[:, 0] for _ in range(50)])
    oracle = np.histogram(xs, bins=edges)[0] / xs.size
    X, _ = flow.sample_ensemble(60_000, np.random.default_rng(4))
    n = X.shape[0]
    sampled = np.histogram(X[:, 0], bins=edges)[0] / n
    # binomial standard error per bin
    assert np.all(np.abs(sampled - oracle) <= 4 * np.sqrt(oracle * (1 - oracle) / n))
    # density ~ x**-0.5 at the neutral fixed point
    density = oracle / np.diff(edges)
    mids = np.sqrt(edges[:-1] * edges[1:])
    slope = np.polyfit(np.log(mids[:4]), np.log(density[:4]), 1)[0]
    assert slope == pytest.approx(-0.5, rel=0.10)


@pytest.mark.parametrize("kind", ["doubling", "catmap"])
def test_measure_preservation_fourier(kind):
    flow = mx.create_flow(kind, seed=11)
    T = 1e6
    y = flow.sample_initial()
    for f in mx.fourier_observables(flow):
        avg = mx.birkhoff_integral(flow, f, y, T) / T
        assert abs(avg) <= 3 * T ** -0.5 * math.sqrt(0.5)


def test_measure_preservation_intermittent():
    flow = mx.create_flow("intermittent", {"alpha": 0.4})
    rng = np.random.default_rng(8)
    T = 1e6
    avgs = [mx.birkhoff_integral(flow, lambda u: u, flow.sample_initial(rng), T) / T for _ in range(4)]
    # C = 1.5 gives diffusive fluctuations; the burn-in sampler and the time average agree
    X, _ = flow.sample_ensemble(20_000, np.random.default_rng(9))
    assert np.ptp(avgs) <= 0.01
    assert np.mean(avgs) == pytest.approx(X[:, 0].mean(), abs=0.01)


def test_birkhoff_trivial_cases(doubling):
    y = doubling.sample_initial()
    assert mx.birkhoff_integral(doubling, constant, y, 0.0) == 0.0
    assert mx.birkhoff_integral(doubling, constant, y, 123.4) == pytest.approx(123.4, rel=1e-14)
    with pytest.raises(DomainError):
        mx.birkhoff_integral(doubling, constant, y, -1.0)


@given(st.floats(min_value=0.0, max_value=200.0), st.floats(min_value=0.0, max_value=200.0),
       st.integers(min_value=0, max_value=2))
def test_birkhoff_is_additive(a, b, k):
    flow = mx.create_flow(("doubling", "catmap", "intermittent")[k], {"alpha": 0.5} if k == 2 else None)
    y = flow.sample_initial(np.random.default_rng(17))
    f = first_cosine
    whole = mx.birkhoff_integral(flow, f, y, a + b)
    parts = mx.birkhoff_integral(flow, f, y, a) + mx.birkhoff_integral(flow, f, flow.evolve(y, a), b)
    assert whole == pytest.approx(parts, abs=1e-9)


def test_birkhoff_convergence_rate():
    flow = mx.create_flow("doubling")
    mean_tent = 0.2
    ok = 0
    n_seeds = 40
    for seed in range(n_seeds):
        y = flow.sample_initial(np.random.default_rng(seed))
        good = all(abs(mx.birkhoff_integral(flow, tent, y, T) / T - mean_tent) <= 5 * T ** -0.45
                   for T in (1e3, 1e4, 1e5, 1e6))
        ok += good
    assert ok / n_seeds >= 0.95


def test_correlation_of_constant_is_zero(doubling):
    c, se = mx.correlation_estimate(doubling, constant, tent, 2.0, 10_000, 4, return_error=True)
    assert abs(c) <= 3 * se + 1e-15


@pytest.mark.parametrize("t", [1, 2, 5])
def test_correlation_of_fourier_modes_vanishes(doubling, t):
    c, se = mx.correlation_estimate(doubling, first_cosine, first_cosine, t, 100_000, t, return_error=True)
    assert abs(c) <= 3 * se


def test_correlation_requires_enough_samples(doubling):
    with pytest.raises(DomainError):
        mx.correlation_estimate(doubling, tent, tent, 1.0, 500, 0)


def test_correlation_is_deterministic(doubling):
    a = mx.correlation_estimate(doubling, tent, tent, 3.5, 5000, 42)
    b = mx.correlation_estimate(doubling, tent, tent, 3.5, 5000, 42)
    assert a == b


def test_lipschitz_correlations_decay_exponentially(doubling):
    rate, fit = mx.fit_correlation_decay(doubling, tent, tent, np.arange(1, 21), 400_000, 0)
    assert rate.style == "exponential"
    assert rate.C > 0
    assert fit.slope < 0


def test_closed_form_reference_values():
    # C = 1, T = 10: twice 11 ln 11 - 10
    assert mx.closed_form_double_integral(1.0, 10.0) == pytest.approx(2 * (11 * math.log(11) - 10), rel=1e-15)
    assert mx.closed_form_double_integral(1.0, 10.0) == pytest.approx(32.7536960, abs=1e-6)
    assert mx.closed_form_double_integral(2.0, 10.0) <= 20.0
    with pytest.raises(DomainError):
        mx.closed_form_double_integral(0.0, 1.0)


@pytest.mark.parametrize("C", [0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("T", [1.0, 10.0, 100.0])
def test_closed_form_matches_quadrature(C, T):
    assert mx.closed_form_double_integral(C, T) == pytest.approx(mx.double_integral_quadrature(C, T), rel=1e-6)


@given(st.floats(min_value=0.05, max_value=3.0), st.floats(min_value=0.01, max_value=1e4))
def test_closed_form_bounds(C, T):
    v = mx.closed_form_double_integral(C, T)
    # kernel lies in (0, 1]
    assert 0 < v <= T * T * (1 + 1e-12)
    assert v >= T * T * (1 + T) ** -C * (1 - 1e-9)


def test_variance_growth_doubling(tmp_path):
    flow = mx.create_flow("doubling")
    T_grid = np.unique(np.round(np.logspace(2, 4, 9)))
    res = mx.variance_growth_experiment(flow, first_cosine, T_grid, 200, 5)
    assert res.slope <= 1.1
    assert res.regime == "linear"
    assert all(v <= b * (1 + 1e-12) for v, b in zip(res.variance, res.bound))
    path = tmp_path / "var.csv"
    res.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "T,empirical_variance,bound_value,regime"
    assert len(lines) == len(T_grid) + 1


def test_variance_growth_is_worker_independent():
    from cuspflow.parallel import mapper
    flow = mx.create_flow("catmap")
    T_grid = [10, 100, 1000]
    a = mx.variance_growth_experiment(flow, first_cosine, T_grid, 12, 5)
    b = mx.variance_growth_experiment(flow, first_cosine, T_grid, 12, 5, mapper=mapper(2))
    assert a == b


def test_variance_grid_must_span_two_decades(doubling):
    with pytest.raises(InsufficientDataError):
        mx.variance_growth_experiment(doubling, first_cosine, [10, 20, 50], 20, 0)


def test_rate_model_regimes():
    assert mx.RateModel("polynomial", 1.5).variance_exponent == 1.0
    assert mx.RateModel("polynomial", 1.0).regime == "t_log_t"
    assert mx.RateModel("polynomial", 0.5).variance_exponent == pytest.approx(1.5)
    with pytest.raises(DomainError):
        mx.RateModel("polynomial", 0.5).bound(1.0)


def test_bump_family_norm_bounds():
    fam = mx.BumpFamily(0.5)
    h = fam.h
    for R in (1, 3, 37, 1000):
        assert 1 / (h * R) <= fam.lebesgue_l1(R) <= h / R
        assert fam.holder_norm(R) <= h * R ** 0.5 * (1 + 1e-12)
        x = np.linspace(0, 1, 400_001)
        assert np.trapezoid(fam.member(R)(x), x) == pytest.approx(fam.lebesgue_l1(R), rel=1e-4)


def test_schedule_ratio_tends_to_one():
    cfg = mx.EffectiveAverageConfig(alpha=0.6)
    assert cfg.schedule_exponent == pytest.approx(6.0)
    T = cfg.schedule(np.arange(1, 2001))
    assert np.all(np.diff(T) > 0)
    ratio = T[1:] / T[:-1]
    assert ratio[99] == pytest.approx((101 / 100) ** 6, rel=1e-12)
    assert ratio[99] > 1.06
    assert ratio[-1] < 1.01
    assert np.all(np.diff(ratio) < 0)


def test_config_invariants():
    with pytest.raises(ConfigError):
        mx.EffectiveAverageConfig(alpha=0.5)
    with pytest.raises(ConfigError):
        mx.EffectiveAverageConfig(m=1.0)
    with pytest.raises(ConfigError):
        mx.EffectiveAverageConfig(alpha=0.6, xi=0.3).validate_for(mx.RateModel("exponential", 1.0), 0.5)
    # C = 0.5 needs alpha > 0.75
    slow = mx.RateModel("polynomial", 0.5)
    with pytest.raises(ConfigError):
        mx.EffectiveAverageConfig(alpha=0.7, xi=0.1).validate_for(slow, 0.5)
    mx.EffectiveAverageConfig(alpha=0.8, xi=0.1).validate_for(slow, 0.5)


def test_sandwich_constant_family_never_fails(doubling):
    cfg = mx.EffectiveAverageConfig(alpha=0.6, m=1.01, k_max=10, k0=1)
    rep = mx.effective_sandwich_experiment(doubling, mx.BumpFamily(constant=True), cfg, 5, 3)
    assert rep.last_failure == (0,) * 5
    assert rep.fraction_clean == 1.0


def test_sandwich_monotone_in_slack(doubling):
    fam = mx.BumpFamily(0.5)
    counts = []
    for m in (1.0001, 1.5, 4.0):
        cfg = mx.EffectiveAverageConfig(alpha=0.6, m=m, xi=0.26, k_max=12, k0=1)
        counts.append(mx.effective_sandwich_experiment(doubling, fam, cfg, 6, 2).failure_count)
    for tight, loose in zip(counts, counts[1:]):
        assert all(a >= b for a, b in zip(tight, loose))


def test_sandwich_report_json(tmp_path, doubling):
    cfg = mx.EffectiveAverageConfig(alpha=0.6, k_max=8, k0=4)
    rep = mx.effective_sandwich_experiment(doubling, mx.BumpFamily(0.5), cfg, 3, 1)
    text = rep.to_json(tmp_path / "s.json")
    assert (tmp_path / "s.json").read_text() == text + "\n"
    assert '"last_failure"' in text and '"fraction_clean"' in text


def test_sandwich_polynomial_gate():
    flow = mx.create_flow("intermittent", {"alpha": 2 / 3})
    with pytest.raises(ConfigError):
        mx.effective_sandwich_experiment(flow, mx.BumpFamily(0.5),
                                         mx.EffectiveAverageConfig(alpha=0.7, xi=0.1), 2, 0)


def test_sandwich_intermittent_runs():
    flow = mx.create_flow("intermittent", {"alpha": 0.4})
    cfg = mx.EffectiveAverageConfig(alpha=0.8, m=2.0, xi=0.05, k_max=4, k0=2)
    rep = mx.effective_sandwich_experiment(flow, mx.BumpFamily(0.5), cfg, 3, 0)
    assert len(rep.last_failure) == 3
    assert all(0 < v < 1 for v in rep.l1)
