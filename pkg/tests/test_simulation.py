import math

import numpy as np
import pytest
from scipy.spatial import Voronoi, cKDTree, ConvexHull

from noma_coverage.coverage import CoverageEstimate
from noma_coverage.simulation import (
    BLOCK_SIZE,
    N_SECTORS,
    SimConfig,
    decode_events,
    default_window,
    estimate_coverage,
    estimate_ordering_probability,
    evaluate_events,
    fading_oracle,
    sample_block,
    sample_network,
    sector_radii,
    simulate,
    typical_cell_area,
)
from noma_coverage.spatial import (
    ConfigError,
    ModelConfig,
    OrderedDistancePair,
    distance_cdf,
)

MCP = ModelConfig.mcp(0.001, 10.0)
PPP = ModelConfig.ppp(0.001)
T_GRID = (0.1, 0.5, 1.0, 3.0, 10.0)


def ks(x, cdf):
    x = np.sort(x)
    n = x.size
    f = cdf(x)
    i = np.arange(1, n + 1)
    return max(np.max(i / n - f), np.max(f - (i - 1) / n))


def pairs(cfg, n):
    blocks = [sample_block(cfg, k, interferers=False) for k in range(-(-n // BLOCK_SIZE))]
    r1 = np.concatenate([b.r1 for b in blocks])[:n]
    r2 = np.concatenate([b.r2 for b in blocks])[:n]
    return r1, r2


class TestSimConfig:
    def test_window_default_and_guard(self):
        cfg = SimConfig(MCP)
        assert cfg.window_radius == pytest.approx(10 / math.sqrt(math.pi * 0.001))
        with pytest.raises(ConfigError, match="window"):
            SimConfig(MCP, window_radius=0.5 * default_window(0.001))

    def test_grid_and_trials(self):
        with pytest.raises(ConfigError):
            SimConfig(MCP, t_grid=(1.0, 0.5))
        with pytest.raises(ConfigError):
            SimConfig(MCP, t_grid=())
        with pytest.raises(ConfigError):
            SimConfig(MCP, trials=0)


class TestTypicalPair:
    def test_mcp_ordered_pair_law(self):
        r1, r2 = pairs(SimConfig(MCP), 100_000)
        F = lambda x: distance_cdf(MCP, x)
        assert np.all(r1 <= r2)
        assert ks(r1, lambda x: 1 - (1 - F(x)) ** 2) < 0.005
        assert ks(r2, lambda x: F(x) ** 2) < 0.005

    @pytest.mark.xfail(strict=True, reason="the exact typical-cell distance law differs from "
                                           "the c = 5/4 Rayleigh form by ~0.014 in KS distance")
    def test_ppp_marginal_law(self):
        r1, r2 = pairs(SimConfig(PPP), 100_000)
        assert ks(np.concatenate([r1, r2]), lambda x: distance_cdf(PPP, x)) < 0.01

    def test_ppp_pair_matches_area_weighted_points(self):
        # uniform points in the plane land in cells with probability ~ area; weighting the
        # nearest-BS distance by 1/area gives the typical-cell law
        rng = np.random.default_rng(5)
        lam, L = 1 / math.pi, 30.0
        d, w = [], []
        for _ in range(120):
            bs = rng.uniform(-L, L, (rng.poisson(lam * 4 * L * L), 2))
            tree = cKDTree(bs)
            dist, idx = tree.query(rng.uniform(-5, 5, (100, 2)))
            for dd, ii in zip(dist, idx):
                rel = bs - bs[ii]
                near = rel[(np.hypot(*rel.T) < 15) & np.any(rel != 0, axis=1)]
                d.append(dd)
                w.append(1 / typical_cell_area(near[:, 0], near[:, 1]))
        d, w = np.array(d), np.array(w)
        r1, r2 = pairs(SimConfig(ModelConfig.ppp(lam)), 60_000)
        sim = np.concatenate([r1, r2])
        for x in (0.4, 0.8, 1.2):
            assert np.mean(sim < x) == pytest.approx(np.sum(w * (d < x)) / w.sum(), abs=0.012)

    def test_force_equal_hook(self):
        est = estimate_ordering_probability(SimConfig(MCP, trials=100_000), force_equal=True)
        assert est.value == pytest.approx(0.5, abs=3 * est.ci_halfwidth / 1.96)

    def test_mcp_ordering(self):
        est = estimate_ordering_probability(SimConfig(MCP, trials=200_000))
        assert est.value == pytest.approx(math.pi / 4, abs=3 * est.ci_halfwidth / 1.96)


class TestGeometry:
    def test_cell_area_against_voronoi(self):
        rng = np.random.default_rng(2)
        pts = np.vstack([[0.0, 0.0], rng.uniform(-8, 8, (400, 2))])
        vor = Voronoi(pts)
        region = vor.regions[vor.point_region[0]]
        assert -1 not in region
        area = ConvexHull(vor.vertices[region]).volume
        assert typical_cell_area(pts[1:, 0], pts[1:, 1]) == pytest.approx(area, rel=1e-10)

    def test_sector_bounds_contain_cell(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            b = rng.uniform(-6, 6, (300, 2))
            rho, phi = np.hypot(*b.T), np.arctan2(b[:, 1], b[:, 0]) % (2 * np.pi)
            radii = sector_radii(rho, phi, np.ones(rho.size, bool))
            z = rng.uniform(-3, 3, (20000, 2))
            inside = np.all(2 * z @ b.T <= (b * b).sum(1), axis=1)
            z = z[inside]
            sec = (np.arctan2(z[:, 1], z[:, 0]) % (2 * np.pi)) // (2 * np.pi / N_SECTORS)
            assert np.all(np.hypot(*z.T) <= radii[sec.astype(int)] + 1e-12)


class TestNetwork:
    def test_mcp_interferer_count(self):
        cfg = SimConfig(MCP, trials=4 * BLOCK_SIZE)
        counts = np.concatenate([np.diff(sample_block(cfg, k).offsets) for k in range(4)])
        mean = 2 * 0.001 * math.pi * cfg.window_radius**2
        se = counts.std() / math.sqrt(counts.size)
        assert counts.mean() == pytest.approx(mean, abs=3 * se)

    def test_mcp_offspring_within_clusters(self):
        real = sample_network(SimConfig(MCP), 17)
        pts = real.interferer_points
        assert pts.shape[0] == 2 * real.bs_points.shape[0]
        parents = np.repeat(real.bs_points, 2, axis=0)
        assert np.all(np.hypot(*(pts - parents).T) <= 10.0 + 1e-9)
        assert real.typical_pair.r2 <= 10.0

    def test_ppp_rejection_rate(self):
        cfg = SimConfig(PPP, trials=1024)
        b = sample_block(cfg, 0)
        assert b.rejections.sum() / BLOCK_SIZE < 0.01

    def test_ppp_interferers_are_served_elsewhere(self):
        real = sample_network(SimConfig(PPP), 3)
        bs = np.vstack([[0.0, 0.0], real.bs_points])
        owner = cKDTree(bs).query(real.interferer_points)[1]
        assert np.all(owner != 0)
        assert np.all(np.bincount(owner, minlength=bs.shape[0]) <= 2)
        # at lambda_u = 100 lambda_b nearly every cell contributes a pair
        assert np.mean(np.bincount(owner, minlength=bs.shape[0])[1:] == 2) > 0.9

    def test_reproducible_by_index(self):
        cfg = SimConfig(PPP, master_seed=99)
        a, b = sample_network(cfg, 5), sample_network(cfg, 5)
        assert a.typical_pair == b.typical_pair
        assert np.array_equal(a.interferer_points, b.interferer_points)
        assert sample_network(cfg, 6).typical_pair != a.typical_pair


class TestEvents:
    def test_zero_interference(self):
        s1 = np.array([1.0, 0.1, 3.0])
        s2 = np.array([0.2, 0.9, 2.9])  # exact ties have probability zero
        ev = decode_events(s1, s2, 0.0, [0.5, 0.99])
        assert np.all(ev[0, 0])

    def test_realization_api(self):
        real = sample_network(SimConfig(MCP), 0)
        ev = evaluate_events(real, 4.0, T_GRID)
        assert ev.shape == (3, 2, len(T_GRID))
        assert ev.dtype == bool

    def test_nesting(self):
        rng = np.random.default_rng(0)
        s1, s2, i = rng.exponential(size=(3, 50_000))
        ev = decode_events(s1, s2, i, np.geomspace(0.05, 20, 25))
        assert not np.any(ev[..., 1:, :] & ~ev[..., :-1, :])  # nested in T
        assert not np.any(ev[2] & ~ev[1])  # MSP-AD within MSP
        assert not np.any(ev[1, 0] & ~ev[0, 0])  # MSP near within ISP near

    def test_oracle_examples(self):
        p, se = fading_oracle(OrderedDistancePair(1.0, 1.0), 4.0, 0.5, 0.0, 1_000_000, seed=3)
        assert p[0, 0] == 1.0
        assert p[2, 0] == pytest.approx(0.5, abs=3 * se[2, 0])
        with pytest.raises(ValueError):
            fading_oracle(OrderedDistancePair(1.0, 1.0), 4.0, 0.5, 0.0, 0)


class TestEstimates:
    def test_ci_bound(self):
        est = estimate_coverage(SimConfig(MCP, trials=100_000, t_grid=(1.0,)), "ISP", "far")[0]
        assert isinstance(est, CoverageEstimate)
        assert 0 <= est.value <= 1
        assert est.ci_halfwidth <= 1.96 * 0.5 / math.sqrt(1e5)
        assert est.trials == 100_000

    def test_workers_do_not_change_counts(self):
        base = dict(trials=3 * BLOCK_SIZE + 100, master_seed=11, t_grid=T_GRID)
        one = simulate(SimConfig(MCP, workers=1, **base))
        many = simulate(SimConfig(MCP, workers=3, **base))
        assert np.array_equal(one.counts, many.counts)

    def test_partial_block_is_prefix(self):
        a = simulate(SimConfig(MCP, trials=1000, master_seed=4, t_grid=T_GRID))
        b = simulate(SimConfig(MCP, trials=BLOCK_SIZE, master_seed=4, t_grid=T_GRID))
        assert np.all(a.counts <= b.counts)

    def test_mc_bound_chain_and_monotone(self):
        res = simulate(SimConfig(MCP, trials=20_000, t_grid=T_GRID))
        c = res.counts
        assert np.all(c[2] <= c[1])
        assert np.all(np.diff(c, axis=-1) <= 0)
