import hashlib
import json
import math
import random
import time

import numpy as np
import pytest

from fbmclt.errors import ConfigError, PlanningError
from fbmclt.experiments import (
    ExperimentConfig,
    emit_report,
    functional_table,
    map_replicas,
    render_csv,
    run_clt_moments,
    run_distribution_test,
    run_lln,
    run_simulate,
    run_tightness_scan,
)
from fbmclt.moments import MomentSpec
from fbmclt.stats import MomentEstimate, ks_two_sample, pool
from fbmclt.testfunc import TestFunction


def small(**kw):
    base = dict(hurst=0.4, n_schedule=(128, 256, 512), replicas=120, seed=3, oracle_samples=20_000)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(hurst=0.4)
        assert cfg.n_schedule == (4096, 8192, 16384, 32768, 65536)
        assert cfg.lln_function.kind == "gaussian"
        assert cfg.model.clt_regime

    def test_json_roundtrip(self):
        cfg = small(dim=2, hurst=0.3, function=TestFunction(sigma1=0.5, sigma2=1.5, d=2),
                    moments=(MomentSpec(((0, 0.5), (0.5, 1)), (2, 2)),))
        back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back == cfg

    @pytest.mark.parametrize("data", [
        {"hurst": 0.4, "replicas": 50},
        {"hurst": 0.4, "n_schedule": [512, 256]},
        {"hurst": 0.4, "n_schedule": []},
        {"hurst": 0.4, "colour": "red"},
        {"dim": 1},
        {"hurst": 1.2},
        {"hurst": 0.4, "threads": 0},
        {"hurst": 0.4, "bandwidth": -1.0},
        {"hurst": 0.4, "moments": [{"intervals": [[0, 1]], "multi_index": [0]}]},
        {"hurst": 0.4, "function": {"kind": "box", "sigma1": 1}},
        {"hurst": 0.4, "dim": 2, "function": {"sigma1": 1, "sigma2": 2, "dim": 1}},
    ])
    def test_rejected(self, data):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "nope.json")

    def test_outside_regime_rejected_by_runner(self):
        with pytest.raises(ConfigError):
            run_clt_moments(small(hurst=0.3))

    def test_function_must_be_admissible(self):
        with pytest.raises(ConfigError):
            run_clt_moments(small(function=TestFunction.gaussian()))

    def test_planning_limit(self):
        with pytest.raises(PlanningError):
            run_lln(small(n_schedule=(1 << 23,)))


class TestReplicaEngine:
    def test_order_independent(self):
        def work(r):
            time.sleep(random.random() * 1e-3)
            return [r, r * r]

        a = map_replicas(work, 64, threads=1)
        b = map_replicas(work, 64, threads=6)
        assert np.array_equal(a, b)
        assert a[10].tolist() == [10, 100]

    def test_table_thread_invariant(self):
        cfg = small()
        a = functional_table(cfg, cfg.function, [0.5, 1.0], -0.3)
        b = functional_table(cfg.replace(threads=4), cfg.function, [0.5, 1.0], -0.3)
        assert a.shape == (120, 3, 2)
        assert np.array_equal(a, b)

    def test_prefix_consistency(self):
        # n * t is read off one long path, so (n=256, t=1) equals (n=512, t=0.5) up to the scaling
        cfg = small()
        tab = functional_table(cfg, cfg.function, [0.5, 1.0], 0.0)
        np.testing.assert_allclose(tab[:, 1, 1], tab[:, 2, 0], rtol=1e-12)


class TestCltMoments:
    def test_table(self):
        cfg = small(moments=(MomentSpec.single(0, 1, 2), MomentSpec.single(0, 1, 3)))
        rep = run_clt_moments(cfg)
        header, rows = rep.tables["moments"]
        assert header == ["n", "m_spec", "empirical", "stderr", "target", "target_stderr", "z"]
        assert len(rows) == 6
        odd = [r for r in rows if r[1] == "(0,1]^3"]
        assert all(r[4] == 0.0 and r[5] == 0.0 for r in odd)
        assert set(rep.checks) == {
            "(0,1]^2 final relative error <= 0.15",
            "(0,1]^2 |error| trend decreasing",
            "(0,1]^3 |z| <= 4.0 at final n",
        }
        assert rep.summary["gamma_bound"] == pytest.approx(0.1)

    def test_thread_and_rerun_determinism(self, tmp_path):
        cfg = small()
        m1 = emit_report(run_clt_moments(cfg), cfg, tmp_path / "a")
        m2 = emit_report(run_clt_moments(cfg.replace(threads=3)), cfg, tmp_path / "b")
        assert m1["checksums"] == m2["checksums"]
        assert (tmp_path / "a" / "moments.csv").read_bytes() == (tmp_path / "b" / "moments.csv").read_bytes()

    def test_seed_changes_output(self):
        a = run_clt_moments(small()).tables["moments"][1]
        b = run_clt_moments(small(seed=4)).tables["moments"][1]
        assert a != b

    def test_joint_moment_shows_dependence(self):
        # increments over adjacent intervals are dependent in the limit; the
        # empirical joint moment tracks the joint target, not the product of marginals
        n = 2048
        joint = MomentSpec(((0, 0.5), (0.5, 1)), (2, 2))
        left, right = MomentSpec.single(0, 0.5, 2), MomentSpec.single(0.5, 1, 2)
        cfg = small(n_schedule=(n,), replicas=2000, moments=(joint, left, right), oracle_samples=200_000)
        rep = run_clt_moments(cfg)
        rows = {r[1]: r for r in rep.tables["moments"][1]}
        emp = rows[joint.label][2]
        target = rows[joint.label][4]
        product = rows[left.label][4] * rows[right.label][4]
        print(f"joint empirical {emp:.4f}, joint target {target:.4f}, product of marginals {product:.4f}")
        assert abs(target - product) > 0.1 * target
        assert abs(emp - target) < abs(emp - product)


class TestLln:
    def test_zero_time_and_linearity(self):
        cfg = small(t_points=(0.0, 0.5, 1.0))
        rep = run_lln(cfg)
        header, rows = rep.tables["lln"]
        assert header == ["n", "t", "empirical", "stderr", "limit", "rel_err"]
        assert all(r[2] == 0.0 for r in rows if r[1] == 0.0)
        doubled = run_lln(cfg.replace(lln_function=TestFunction.gaussian(1.0, 2.0)))
        for a, b in zip(rows, doubled.tables["lln"][1]):
            assert b[4] == pytest.approx(2 * a[4], rel=1e-14)
            assert b[2] == pytest.approx(2 * a[2], rel=1e-12, abs=0)

    def test_limit_column(self):
        rep = run_lln(small())
        assert rep.tables["lln"][1][0][4] == pytest.approx(0.664904, abs=5e-7)


class TestTightness:
    def test_needs_four_lengths(self):
        with pytest.raises(ConfigError):
            run_tightness_scan(small(lengths=(0.25, 0.5, 1.0)))

    def test_amplitude_shifts_intercept_only(self):
        cfg = small(lengths=(0.125, 0.25, 0.5, 1.0))
        a = run_tightness_scan(cfg)
        b = run_tightness_scan(cfg.replace(function=TestFunction(amplitude=2.0)))
        assert b.summary["slope"] == pytest.approx(a.summary["slope"], abs=1e-10)
        assert b.summary["intercept"] - a.summary["intercept"] == pytest.approx(math.log(4.0), abs=1e-10)
        header, rows = a.tables["tightness"]
        assert header == ["n", "ell", "empirical", "stderr", "log_ell", "log_moment", "fitted_log_moment"]
        assert a.summary["exponent_band"] == pytest.approx([0.5, 0.6])

    def test_slope_near_theory(self):
        cfg = small(n_schedule=(8192,), replicas=600, lengths=(0.0625, 0.125, 0.25, 0.5, 1.0))
        slopes = [run_tightness_scan(cfg.replace(seed=s)).summary["slope"] for s in (1, 2)]
        print("slopes", slopes)
        assert abs(slopes[0] - slopes[1]) < 0.1
        assert all(abs(s - 0.6) < 0.15 for s in slopes)


class TestDistribution:
    def test_needs_replicas(self):
        with pytest.raises(ConfigError):
            run_distribution_test(small(replicas=1000))

    def test_zero_function_gives_zero_statistic(self):
        cfg = small(replicas=2000, n_schedule=(64,), function=TestFunction(sigma1=1.0, sigma2=1.0),
                    bandwidth=1e-3, limit_steps=64)
        rep = run_distribution_test(cfg)
        assert rep.summary["statistic"] == 0.0
        assert rep.tables["ks"][0] == ["x", "ecdf_functional", "ecdf_limit"]

    def test_disjoint_seeds_agree(self):
        cfg = small(n_schedule=(1024,), replicas=1000)
        a = functional_table(cfg, cfg.function, [1.0], -0.3, stage="first")[:, 0, 0]
        b = functional_table(cfg, cfg.function, [1.0], -0.3, stage="second")[:, 0, 0]
        res = ks_two_sample(a, b)
        print(f"D={res.statistic:.4f} p={res.pvalue:.3f}")
        assert res.pvalue > 0.01


class TestOutput:
    def test_render_csv(self):
        text = render_csv(["a", "b", "c"], [[1, 0.1, "x,y"], [np.int64(2), np.float64(1 / 3), True]])
        assert text.splitlines() == ["a,b,c", '1,0.10000000000000001,"x,y"', "2,0.33333333333333331,true"]

    def test_manifest(self, tmp_path):
        cfg = small()
        rep = run_lln(cfg)
        man = emit_report(rep, cfg, tmp_path)
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk["config"] == cfg.to_dict()
        assert on_disk["kind"] == "lln"
        data = (tmp_path / "lln.csv").read_bytes()
        assert man["checksums"]["lln.csv"] == hashlib.sha256(data).hexdigest()
        assert set(on_disk) >= {"version", "timestamp", "stages", "summary", "checks"}

    def test_simulate(self, tmp_path):
        cfg = small(paths=2, n_steps=16, dt=0.5, dim=2, function=TestFunction(d=2), hurst=0.3)
        rep = run_simulate(cfg)
        emit_report(rep, cfg, tmp_path)
        rows = np.loadtxt(tmp_path / "path_0001.csv", delimiter=",", skiprows=1)
        assert rows.shape == (17, 3)
        assert np.all(rows[0] == 0.0)
        assert rows[-1, 0] == 8.0
        assert (tmp_path / "path_0000.csv").read_text().startswith("t,coord_1,coord_2\n")

    def test_estimates_pool_like_tables(self):
        cfg = small()
        tab = functional_table(cfg, cfg.function, [1.0], -0.3)[:, -1, 0]
        whole = MomentEstimate.from_samples(tab**2)
        halves = [MomentEstimate.from_samples(tab[:60] ** 2), MomentEstimate.from_samples(tab[60:] ** 2)]
        assert pool(halves).value == pytest.approx(whole.value, rel=1e-14)
