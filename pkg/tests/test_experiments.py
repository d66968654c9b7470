import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import binomtest

from gkpdec.core import ConfigurationError, NoiseParams
from gkpdec.gkp_single import dp_batch
from gkpdec.experiments import (
    CSV_HEADER,
    ExperimentConfig,
    estimate_crossing,
    crossing_from_rows,
    dp_parities,
    read_csv,
    run_block,
    run_sweep,
    sigma_grid,
    wilson_interval,
)


def small(experiment, **kw):
    base = dict(sigma0_min=0.3, sigma0_max=0.5, sigma0_step=0.1, trials=300, seed=11)
    if experiment != "gkp-single":
        base["distances"] = (3, 5)
    base.update(kw)
    return ExperimentConfig(experiment=experiment, **base)


class TestWilson:
    @given(st.integers(1, 10_000), st.data())
    def test_contains_estimate(self, n, data):
        f = data.draw(st.integers(0, n))
        lo, hi = wilson_interval(f, n)
        assert 0.0 <= lo <= f / n <= hi <= 1.0

    def test_against_scipy(self):
        for f, n in [(0, 10), (3, 40), (50, 100), (999, 1000)]:
            ci = binomtest(f, n).proportion_ci(0.95, method="wilson")
            assert wilson_interval(f, n) == pytest.approx((ci.low, ci.high), abs=1e-9)

    def test_rejects_bad_counts(self):
        with pytest.raises(ConfigurationError):
            wilson_interval(0, 0)
        with pytest.raises(ConfigurationError):
            wilson_interval(5, 3)

    def test_width_shrinks_with_trials(self):
        widths = []
        for trials in (4000, 8000):
            res = run_sweep(small("gkp-single", decoder="memoryless", sigma0_min=0.4, sigma0_max=0.4,
                                  rounds=(5,), trials=trials, block_size=1000))
            lo, hi = res.points[0].ci
            widths.append(hi - lo)
        assert widths[1] / widths[0] == pytest.approx(1 / math.sqrt(2), rel=0.2)


class TestConfig:
    def test_grid(self):
        assert sigma_grid(0.1, 0.9, 0.05) == tuple(round(0.1 + 0.05 * i, 10) for i in range(17))
        with pytest.raises(ConfigurationError):
            sigma_grid(0.1, 0.9, 0.0)

    @pytest.mark.parametrize("kw", [
        dict(trials=0),
        dict(workers=0),
        dict(sigma_m_ratio=-1.0),
        dict(decoder="alg1"),
        dict(sigma0_min=0.5, sigma0_max=0.2),
        dict(distances=()),
    ])
    def test_rejected(self, kw):
        with pytest.raises(ConfigurationError):
            small("toric-channel", **kw)

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(experiment="nothing")

    def test_perfect_gkp_coupling(self):
        with pytest.raises(ConfigurationError):
            small("toric-3d", decoder="perfect-gkp")
        with pytest.raises(ConfigurationError):
            small("toric-3d", decoder="alg1", sigma_m_ratio=0.0)
        small("toric-3d", decoder="perfect-gkp", sigma_m_ratio=0.0)

    def test_points(self):
        cfg = small("toric-3d")
        assert cfg.points()[:2] == [(0.3, 3, 3), (0.3, 5, 5)]
        g = small("gkp-single")
        assert len(g.points()) == 3 * 9

    def test_json_round_trip(self):
        cfg = small("toric-channel")
        assert ExperimentConfig(**cfg.to_json()) == cfg


class TestSweep:
    @pytest.mark.parametrize("experiment,kw", [
        ("gkp-single", dict(decoder="forward", rounds=(3, 4))),
        ("toric-channel", dict()),
        ("toric-3d", dict(decoder="alg1", trials=40, block_size=20)),
    ])
    def test_row_count_and_header(self, experiment, kw, tmp_path):
        out = tmp_path / "r.csv"
        cfg = small(experiment, out=str(out), **kw)
        res = run_sweep(cfg)
        rows = read_csv(out)
        per_grid = len(cfg.rounds) if experiment == "gkp-single" else len(cfg.distances)
        assert len(rows) == len(cfg.sigma0_values) * per_grid
        assert out.read_text().splitlines()[0] == ",".join(CSV_HEADER)
        for r in rows:
            assert 0 <= r["failures"] <= r["trials"]
            assert r["ci_low"] <= r["p_fail"] <= r["ci_high"]
        side = json.loads((tmp_path / "r.csv.json").read_text())
        assert side["complete"] and side["config"]["seed"] == 11
        assert res.to_csv() == out.read_text()

    def test_blocks_sum_to_point(self):
        cfg = small("toric-channel", trials=250, block_size=100)
        res = run_sweep(cfg)
        assert res.points[1].failures == sum(run_block(cfg, 1, b) for b in range(3))

    def test_worker_count_irrelevant(self):
        a = run_sweep(small("toric-channel", trials=200, block_size=50, workers=1)).to_csv()
        b = run_sweep(small("toric-channel", trials=200, block_size=50, workers=3)).to_csv()
        assert a == b

    def test_seed_changes_output(self):
        a = run_sweep(small("toric-channel", sigma0_min=0.6, sigma0_max=0.6)).to_csv()
        b = run_sweep(small("toric-channel", sigma0_min=0.6, sigma0_max=0.6, seed=12)).to_csv()
        assert a != b


class TestCrossing:
    def test_synthetic_power_laws(self):
        s = np.round(np.arange(0.3, 0.71, 0.05), 10)
        curves = {d: (s, (s / 0.5) ** d) for d in (3, 5, 7)}
        est = estimate_crossing(curves)
        assert est.value == pytest.approx(0.5, abs=1e-12)
        assert all(c == pytest.approx(0.5, abs=1e-12) for _, c in est.pairwise)

    def test_no_crossing(self):
        s = np.array([0.1, 0.2, 0.3])
        est = estimate_crossing({3: (s, s), 5: (s, s / 2)})
        assert not est.found and est.message == "no crossing in range"

    def test_counts_and_bootstrap(self):
        s = np.round(np.arange(0.3, 0.71, 0.05), 10)
        n = 20_000
        rng = np.random.default_rng(3)
        curves = {d: (s, rng.binomial(n, np.minimum((s / 0.5) ** d / 4, 0.5)), np.full(s.size, n))
                  for d in (3, 5, 7)}
        est = estimate_crossing(curves, n_boot=200)
        assert est.ci_low <= est.value <= est.ci_high
        assert abs(est.value - 0.5) < 0.03

    def test_needs_two_distances(self):
        with pytest.raises(ConfigurationError):
            estimate_crossing({3: (np.array([0.1, 0.2]), np.array([0.1, 0.2]))})

    def test_from_rows(self, tmp_path):
        cfg = small("toric-channel", sigma0_min=0.4, sigma0_max=0.8, trials=400, out=str(tmp_path / "c.csv"))
        run_sweep(cfg)
        est = crossing_from_rows(read_csv(tmp_path / "c.csv"), n_boot=20)
        assert list(est) == [("toric-channel", "mwpm-gkp-info", 1.0, 1.0)]


def test_dp_window_widened_for_edge_records():
    params = NoiseParams.from_sigma0(0.4)
    edge = np.array([[-1.884, -3.058, -2.259, -2.597, 1.565, 1.467, -0.113, -1.184, -2.917, 2.353, 3.138]])
    assert dp_batch(edge, params.sigma, params.sigmaM, 10, 200, 4, True)[0] == -1
    fine = dp_batch(edge, params.sigma, params.sigmaM, 10, 1000, 8, True)[0]
    q = np.vstack([np.zeros((1, 11)), edge])
    np.testing.assert_array_equal(dp_parities(q, params, 10), [0, fine])
