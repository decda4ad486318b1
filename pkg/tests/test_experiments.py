import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from dkrr.data import Dataset, SyntheticTask, generate, partition_even, target_value
from dkrr.distributed import run_dkrr
from dkrr.errors import ConfigurationError, InvalidInputError
from dkrr.experiments import (
    CSV_HEADER,
    ComplexityModel,
    Estimator,
    ExperimentConfig,
    complexity,
    default_config,
    emit_csv,
    grid_search_lambda,
    load_config,
    m_star,
    m_star_hat,
    read_csv,
    run_experiment,
    write_metadata,
)
from dkrr.kernel import MinKernel
from dkrr.metrics import CRITERIA, MetricsRecord


def _tiny(simulation="single", **kw):
    base = dict(N=[120], m=[1, 3], ell=[0, 1, 2], trials=2, n_test=80, lambdas=[1e-4, 1e-2, 1.0], tau=1.0)
    base.update(kw)
    return default_config(simulation, "g1", **base)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.kernel == "min" and cfg.epsilon == 0.05 and cfg.n_validation == cfg.n_test

    def test_ell_sorted_unique(self):
        assert ExperimentConfig(ell=[2, 0, 2]).ell == [0, 2]

    @pytest.mark.parametrize(
        "kw",
        [
            {"simulation": "sim9"},
            {"task": "g3"},
            {"trials": 0},
            {"epsilon": 0.0},
            {"m": []},
            {"lambdas": [0.0]},
            {"task": "g2", "kernel": "min"},
            {"kernel": "rbf"},
            {"tau": "fast"},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(**kw)

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("task: g2\nN: [300]\nm: [2, 4]\ntrials: 3\n")
        cfg = load_config(path, "sim1", trials=5)
        assert (cfg.task, cfg.kernel, cfg.N, cfg.m, cfg.trials) == ("g2", "wendland", [300], [2, 4], 5)

    def test_load_rejects_unknown_key(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("N: [300]\nbogus: 1\n")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_load_rejects_non_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError):
            load_config(path)


class TestGridSearch:
    @pytest.fixture
    def split(self, rng):
        task = SyntheticTask("g1")
        return generate(task, 50, True, rng), generate(task, 50, True, rng)

    def test_single_value(self, split):
        train, val = split
        assert grid_search_lambda(train, val, MinKernel(), [0.3]) == 0.3

    def test_tie_goes_to_larger(self, rng):
        X = rng.random((10, 1))
        train = Dataset(X, np.zeros(10))
        val = Dataset(rng.random((10, 1)), np.zeros(10))
        assert grid_search_lambda(train, val, MinKernel(), [1e-3, 1e-1, 1e-2]) == 1e-1

    def test_noiseless_picks_grid_minimum(self, rng):
        task = SyntheticTask("g1", noise_variance=0.0)
        train = generate(task, 50, False, rng)
        val = generate(task, 50, False, rng)
        grid = [1e-8, 1e-6, 1e-4, 1e-2, 1.0]
        assert grid_search_lambda(train, val, MinKernel(), grid) == 1e-8

    def test_empty_grid(self, split):
        with pytest.raises(ConfigurationError):
            grid_search_lambda(*split, MinKernel(), [])

    def test_dkrr_estimator(self, split, rng):
        train, val = split
        est = Estimator("dkrr", partition_even(50, 2, rng), rounds=2)
        assert grid_search_lambda(train, val, MinKernel(), [1e-3, 1e-2, 1e-1], est) in (1e-3, 1e-2, 1e-1)

    def test_all_diverged(self, rng):
        task = SyntheticTask("g1")
        train, val = generate(task, 50, True, rng), generate(task, 20, True, rng)
        part = partition_even(50, 10, rng)
        assert run_dkrr(train, part, MinKernel(), 1e-8, 30).diverged
        with pytest.raises(ConfigurationError):
            grid_search_lambda(train, val, MinKernel(), [1e-8], Estimator("dkrr", part, 30))

    def test_estimator_validation(self):
        with pytest.raises(InvalidInputError):
            Estimator("dkrr")
        with pytest.raises(InvalidInputError):
            Estimator("svm")


class TestComplexity:
    def test_example(self):
        om, om_l = complexity(ComplexityModel(1.0, 1000, 10, 2))
        assert om == pytest.approx(1.1e6, rel=1e-15)
        assert om_l == pytest.approx(1.32e6, rel=1e-15)

    def test_zero_rounds_collapse(self):
        om, om_l = complexity(ComplexityModel(3.0, 500, 7, 0))
        assert om == om_l

    def test_rejects(self):
        with pytest.raises(InvalidInputError):
            ComplexityModel(0.0, 100, 2, 1)

    @given(st.floats(0.1, 100), st.integers(10, 10**6))
    def test_dkrr_strictly_decreasing(self, tau, N):
        ms = np.unique(np.geomspace(1, N, 30).astype(int))
        om = [complexity(ComplexityModel(tau, N, m))[0] for m in ms]
        assert all(b < a for a, b in zip(om, om[1:]))

    @given(st.floats(0.1, 100), st.integers(10, 10**6), st.integers(1, 20))
    def test_unimodal(self, tau, N, ell):
        ms = np.geomspace(1, N, 60)
        om = np.array([complexity(ComplexityModel(tau, N, m, ell))[1] for m in ms])
        signs = np.sign(np.diff(om))
        signs = signs[signs != 0]
        assert np.count_nonzero(signs[1:] != signs[:-1]) <= 1


class TestMStar:
    def test_example(self):
        assert m_star(10_000, 1.0, 1) == pytest.approx(math.sqrt(3) * 100, rel=1e-12)

    def test_large_ell_limit(self):
        assert m_star(10_000, 1.0, 1e9) == pytest.approx(100, rel=1e-4)

    def test_rejects_zero_rounds(self):
        with pytest.raises(InvalidInputError):
            m_star(100, 1.0, 0)

    @settings(max_examples=50)
    @given(st.integers(100, 10**6), st.floats(0.1, 50), st.integers(1, 20))
    def test_numerical_argmin(self, N, tau, ell):
        ms = m_star(N, tau, ell)
        f = lambda lm: complexity(ComplexityModel(tau, N, math.exp(lm), ell))[1]
        res = minimize_scalar(f, bounds=(0.0, math.log(N)), method="bounded", options={"xatol": 1e-10})
        assert abs(math.exp(res.x) - ms) / ms <= 1e-6

    def test_hat_rounds_down_on_grid(self):
        assert m_star_hat(173.2, 450, list(range(20, 481, 20))) == 160
        assert m_star_hat(173.2, 450) == 173

    def test_hat_otherwise_branch(self):
        assert m_star_hat(173.2, 50, list(range(10, 481, 10))) == 50

    def test_hat_none(self):
        with pytest.raises(ConfigurationError):
            m_star_hat(173.2, None)


def _record(value=0.1, **kw):
    base = dict(simulation="sim1", task="g1", kernel="min", N=100, m=4, ell=1, lam=0.01, trial=0, seed=0,
                criterion="AEC", value=value)
    base.update(kw)
    return MetricsRecord(**base)


class TestCsv:
    def test_empty(self, tmp_path):
        emit_csv([], tmp_path / "o.csv")
        assert (tmp_path / "o.csv").read_bytes() == (",".join(CSV_HEADER) + "\n").encode()

    def test_one_record(self, tmp_path):
        emit_csv([_record()], tmp_path / "o.csv")
        raw = (tmp_path / "o.csv").read_bytes()
        assert raw.count(b"\n") == 2 and b"\r" not in raw

    def test_bad_header(self, tmp_path):
        (tmp_path / "o.csv").write_text("a,b\n")
        with pytest.raises(InvalidInputError):
            read_csv(tmp_path / "o.csv")

    @settings(max_examples=100)
    @given(
        st.lists(
            st.builds(
                _record,
                value=st.floats(0, 1e300),
                lam=st.floats(1e-300, 1e300),
                wall_time_s=st.floats(0, 1e6),
                criterion=st.sampled_from(CRITERIA),
                m=st.integers(0, 10**6),
                trial=st.integers(-1, 100),
                diverged=st.booleans(),
                comm_floats=st.integers(0, 10**15),
            ),
            max_size=8,
        )
    )
    def test_round_trip(self, tmp_path_factory, records):
        path = tmp_path_factory.mktemp("csv") / "o.csv"
        emit_csv(records, path)
        assert read_csv(path) == records

    def test_infinite_value_round_trips(self, tmp_path):
        rec = _record(value=math.inf, diverged=True)
        emit_csv([rec], tmp_path / "o.csv")
        assert read_csv(tmp_path / "o.csv") == [rec]


def _without_wall_time(path):
    col = CSV_HEADER.index("wall_time_s")
    rows = [line.split(",") for line in path.read_text().splitlines()]
    return [r[:col] + r[col + 1 :] for r in rows]


@pytest.fixture(scope="module")
def single():
    return run_experiment(_tiny())


class TestRuns:
    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(run_experiment(_tiny()), a)
        emit_csv(run_experiment(_tiny()), b)
        assert _without_wall_time(a) == _without_wall_time(b)

    def test_aec_zero_equals_ae(self, single):
        ae = {(r.N, r.m, r.trial): r.value for r in single if r.criterion == "AE"}
        aec = {(r.N, r.m, r.trial): r.value for r in single if r.criterion == "AEC" and r.ell == 0}
        assert ae and ae == aec

    def test_single_machine_ae_is_gmse(self, single):
        gmse = {r.trial: r.value for r in single if r.criterion == "GMSE"}
        for r in single:
            if r.criterion == "AE" and r.m == 1:
                assert r.value == pytest.approx(gmse[r.trial], rel=1e-9)

    def test_aggregate_rows(self, single):
        agg = [r for r in single if r.trial == -1]
        crits = {r.criterion for r in agg}
        assert {"GMSE", "AE", "AEC", "RE", "REC"} <= crits
        gm = [r.value for r in single if r.criterion == "GMSE" and r.trial >= 0]
        (mean,) = [r.value for r in agg if r.criterion == "GMSE"]
        assert mean == pytest.approx(np.mean(gm), rel=1e-14)

    def test_comm_column(self, single):
        for r in single:
            if r.criterion == "AEC" and r.trial >= 0 and not r.diverged:
                assert r.comm_floats == r.m * r.N + r.ell * (3 * r.m * r.N + r.N)

    def test_motivation_local_curve(self):
        recs = run_experiment(_tiny("motivation", m=[1, 4]))
        local = {(r.m, r.trial): r.value for r in recs if r.criterion == "LOCAL"}
        assert set(local) >= {(1, 0), (4, 0), (1, -1), (4, -1)}
        gmse = {r.trial: r.value for r in recs if r.criterion == "GMSE"}
        for r in recs:
            if r.criterion == "AE" and r.m == 1:
                assert r.value == pytest.approx(gmse[r.trial], rel=1e-9)

    def test_simulation3_rows(self, tmp_path):
        cfg = _tiny("sim3", m=[2, 4, 6], ell=[1, 2], trials=1)
        recs = run_experiment(cfg)
        crits = {r.criterion for r in recs}
        assert {"mbar_B", "mhat_B", "m_star", "omega_dkrr", "omega_dkrr_ell"} <= crits
        (ms,) = [r.value for r in recs if r.criterion == "m_star" and r.ell == 1]
        assert ms == pytest.approx(m_star(120, 1.0, 1))
        write_metadata(cfg, tmp_path / "meta.json")
        text = (tmp_path / "meta.json").read_text()
        assert '"tau": 1.0' in text and "max over machines" in text

    def test_m_larger_than_n(self):
        with pytest.raises(ConfigurationError):
            run_experiment(_tiny(m=[200]))


def test_simulation2_learning_curve_direction():
    cfg = default_config("sim2", "g1", N=[200, 800], m=[4], ell=[0, 2], trials=3, n_test=200, tau=1.0)
    recs = run_experiment(cfg)
    gm = {r.N: r.value for r in recs if r.criterion == "GMSE" and r.trial == -1}
    assert gm[800] < gm[200]


def test_step1_factor_time_is_cubic():
    rng = np.random.default_rng(3)
    data = generate(SyntheticTask("g1"), 4000, True, rng)
    sizes, times = [], []
    for m in (2, 3, 4, 8):
        best = math.inf
        for _ in range(3):
            model = run_dkrr(data, partition_even(4000, m, rng), MinKernel(), 1e-3, 0)
            best = min(best, model.phase_times("step1_factor").max())
        sizes.append(4000 / m)
        times.append(best)
    slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    assert 2.3 <= slope <= 3.5
