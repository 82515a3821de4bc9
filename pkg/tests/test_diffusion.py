import numpy as np
import pytest

from radialcap.diffusion import (
    DiffusionConfig, HittingStats, _HAVE_NUMBA, _mix_np, _norm_icdf,
    _norm_icdf_np, exact_hitting_prob, simulate_radial,
)
from radialcap.constellation import Constellation
from radialcap.dirichlet import solve_dirichlet_closed
from radialcap.errors import ConfigError
from radialcap.model import ModelSpace


def test_config_validation():
    with pytest.raises(ConfigError):
        DiffusionConfig(dt=0.0)
    with pytest.raises(ConfigError):
        DiffusionConfig(paths=0)
    with pytest.raises(ConfigError):
        DiffusionConfig(r_inner=2.0, r_outer=1.0)
    with pytest.raises(ConfigError):
        simulate_radial(ModelSpace.euclidean(2), 9.0, DiffusionConfig())


def test_exact_hitting_prob_m3():
    p = exact_hitting_prob(ModelSpace.euclidean(3), 1.0, 0.5, 8.0)
    assert p == pytest.approx(7.0 / 15.0, rel=1e-10)


def test_exact_hitting_prob_m2_log_formula():
    p = exact_hitting_prob(ModelSpace.euclidean(2), 1.0, 0.5, 8.0)
    assert p == pytest.approx(np.log(8.0) / np.log(16.0), rel=1e-10)


def test_exact_hitting_prob_boundaries():
    ms = ModelSpace.euclidean(3)
    assert exact_hitting_prob(ms, 0.5, 0.5, 8.0) == 1.0
    assert exact_hitting_prob(ms, 8.0, 0.5, 8.0) == 0.0


def test_exact_hitting_prob_links_to_dirichlet_profile():
    for m, w in [(3, "r"), (2, "r"), (2, "sinh(r)")]:
        ms = ModelSpace(m, w)
        c = Constellation.self_model(ms)
        sol = solve_dirichlet_closed(c, 2.0, 0.5, 8.0)
        for r0 in (0.8, 1.0, 3.0):
            assert exact_hitting_prob(ms, r0, 0.5, 8.0) == pytest.approx(
                1.0 - sol.profile(r0), abs=1e-8)


def test_icdf_matches_vectorized_and_is_accurate():
    from math import erf, sqrt
    ps = np.array([1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 1 - 1e-6])
    vec = _norm_icdf_np(ps)
    for p, x in zip(ps, vec):
        assert _norm_icdf(float(p)) == pytest.approx(float(x), rel=1e-14)
        # round trip through the normal CDF
        assert 0.5 * (1.0 + erf(x / sqrt(2.0))) == pytest.approx(p, abs=2e-9)


def test_mix_is_deterministic_and_spreads():
    z = _mix_np(np.arange(1, 10, dtype=np.uint64))
    assert len(np.unique(z)) == 9
    assert np.array_equal(z, _mix_np(np.arange(1, 10, dtype=np.uint64)))


def test_determinism_same_seed():
    ms = ModelSpace.euclidean(3)
    cfg = DiffusionConfig(dt=1e-3, paths=500, seed=7)
    a = simulate_radial(ms, 1.0, cfg)
    b = simulate_radial(ms, 1.0, cfg)
    assert a == b


def test_single_path_reproducible():
    ms = ModelSpace.euclidean(2)
    cfg = DiffusionConfig(dt=1e-3, paths=1, seed=123)
    a = simulate_radial(ms, 1.0, cfg)
    b = simulate_radial(ms, 1.0, cfg)
    assert a == b
    assert a.p_inner in (0.0, 1.0)


@pytest.mark.skipif(not _HAVE_NUMBA, reason="numba unavailable")
def test_backends_statistically_consistent():
    ms = ModelSpace.euclidean(3)
    cfg = DiffusionConfig(dt=1e-3, paths=2000, seed=11)
    jit = simulate_radial(ms, 1.0, cfg, backend="numba")
    ref = simulate_radial(ms, 1.0, cfg, backend="numpy")
    spread = np.hypot(jit.stderr, ref.stderr)
    assert abs(jit.p_inner - ref.p_inner) <= 4.0 * spread + 1e-12


def test_simulation_matches_exact_m3():
    ms = ModelSpace.euclidean(3)
    cfg = DiffusionConfig(dt=1e-3, paths=4000, seed=3)
    stats = simulate_radial(ms, 1.0, cfg)
    exact = exact_hitting_prob(ms, 1.0, cfg.r_inner, cfg.r_outer)
    # 3 sigma plus an O(dt) bias allowance at this coarser step
    assert abs(stats.p_inner - exact) <= 3.0 * stats.stderr + 0.01
    assert stats.censored <= cfg.paths // 100


def test_recurrence_vs_transience_trend():
    m2, m3 = ModelSpace.euclidean(2), ModelSpace.euclidean(3)
    exact2 = [exact_hitting_prob(m2, 1.0, 0.5, R) for R in (10.0, 100.0, 1000.0)]
    assert exact2[0] < exact2[1] < exact2[2]          # recurrent: climbs to 1
    assert exact2[2] > 0.9
    exact3 = [exact_hitting_prob(m3, 1.0, 0.5, R) for R in (10.0, 100.0, 1000.0)]
    assert all(p < 0.51 for p in exact3)              # transient: capped at rho/r0
    sim2 = [simulate_radial(m2, 1.0, DiffusionConfig(dt=1e-3, paths=1500, seed=5,
                                                     r_inner=0.5, r_outer=R,
                                                     max_time=400.0)).p_inner
            for R in (10.0, 100.0)]
    assert sim2[1] > sim2[0]


def test_hitting_stats_fields():
    s = HittingStats(p_inner=0.25, stderr=0.01, censored=3, paths=100)
    d = s.to_dict()
    assert d["p_inner"] == 0.25 and d["censored"] == 3
