from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from gmtraj.evaluation import (
    MetricReport,
    SampleError,
    build_report,
    dynamic_map_experiment,
    linear_baseline,
    predict_variants,
    preliminary,
    refine_scene,
    run_benchmark,
)
from gmtraj.evaluation import ade, fde
from gmtraj.model import BGMNetwork, NetworkConfig
from gmtraj.pipeline import prepare_scene
from gmtraj.recwin import WindowConfig
from gmtraj.social import SocialParams
from conftest import linear_scene

# (prediction, truth, ade, fde); every distance is an exact Pythagorean value so the
# expected results are exact binary fractions
CASES = [
    ([[0, 0]], [[3, 4]], 5.0, 5.0),
    ([[0, 0], [0, 0]], [[3, 4], [6, 8]], 7.5, 10.0),
    ([[1, 1], [2, 2]], [[1, 1], [2, 2]], 0.0, 0.0),
    ([[0, 0], [0, 0], [0, 0], [0, 0]], [[1, 0], [0, 1], [-1, 0], [0, -1]], 1.0, 1.0),
    ([[0.5, 0.5], [1, 1]], [[0.5, 0.5], [1.75, 2]], 0.625, 1.25),
    ([[0, 0], [0, 0], [0, 0]], [[5, 12], [8, 15], [7, 24]], (13 + 17 + 25) / 3, 25.0),
    ([[-3, -4], [0, 0]], [[0, 0], [0, 0]], 2.5, 0.0),
    ([[0.25, 0], [0, 0]], [[0, 0], [0, 0.5]], 0.375, 0.5),
    ([[10, 10]] * 4, [[10, 10], [10, 11], [10, 12], [10, 13]], 1.5, 3.0),
    ([[1, 2], [3, 4]], [[4, 6], [3, 4]], 2.5, 0.0),
]


@pytest.mark.parametrize("pred, truth, a, f", CASES)
def test_metric_examples_exact(pred, truth, a, f):
    assert ade(pred, truth) == a
    assert fde(pred, truth) == f


def test_metric_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        ade(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        fde(np.zeros((0, 2)), np.zeros((0, 2)))


@given(hnp.arrays(np.float64, (12, 2), elements=st.floats(-50, 50)), hnp.arrays(np.float64, (12, 2), elements=st.floats(-50, 50)))
def test_metric_properties(p, t):
    assert ade(p, t) >= 0 and ade(p, t) == ade(t, p)
    assert ade(p, p) == 0.0 and fde(p, p) == 0.0
    assert fde(p, t) <= 12 * ade(p, t) + 1e-9


# -- linear baseline -----------------------------------------------------------------


def normal_equation_fit(obs, t_pred):
    """Exact rational slope/intercept per coordinate, evaluated at later steps."""
    t = [Fraction(k) for k in range(len(obs))]
    tm = sum(t) / len(t)
    out = []
    for dim in range(2):
        y = [Fraction(float(v)) for v in obs[:, dim]]
        ym = sum(y) / len(y)
        slope = sum((a - tm) * (b - ym) for a, b in zip(t, y)) / sum((a - tm) ** 2 for a in t)
        icpt = ym - slope * tm
        out.append([float(icpt + slope * k) for k in range(len(obs), len(obs) + t_pred)])
    return np.array(out).T


@pytest.mark.parametrize("seed", range(5))
def test_linear_baseline_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    tt = np.arange(8)[:, None]
    obs = rng.normal(size=2) + rng.normal(size=2) * tt + 0.3 * rng.normal(size=2) * tt**2  # parabola
    np.testing.assert_allclose(linear_baseline(obs), normal_equation_fit(obs, 12), rtol=1e-10, atol=1e-10)


def test_linear_baseline_extends_straight_tracks():
    obs = np.array([[1.0 + 0.5 * k, -2.0 + 0.25 * k] for k in range(8)])
    want = np.array([[1.0 + 0.5 * k, -2.0 + 0.25 * k] for k in range(8, 20)])
    np.testing.assert_allclose(linear_baseline(obs), want, atol=1e-12)
    batch = linear_baseline(np.stack([obs, obs + 1.0]))
    assert batch.shape == (2, 12, 2)
    np.testing.assert_allclose(batch[1], want + 1.0, atol=1e-12)


def test_linear_baseline_stationary():
    obs = np.tile([[2.0, 3.0]], (8, 1))
    np.testing.assert_allclose(linear_baseline(obs, 5), np.tile([[2.0, 3.0]], (5, 1)), atol=1e-12)


# -- reports ---------------------------------------------------------------------------


def _rows():
    return [
        SampleError("a", 1, 0, 1.0, 2.0),
        SampleError("b", 1, 0, 3.0, 4.0),
        SampleError("b", 2, 0, 3.0, 6.0),
        SampleError("b", 3, 10, 3.0, 8.0),
    ]


def test_report_average_is_per_scene_mean_and_weighted_is_per_sample():
    rep = build_report("full", _rows(), "f" * 64, ["a", "b"])
    assert rep.per_scene == {"a": {"ade": 1.0, "fde": 2.0, "n": 1}, "b": {"ade": 3.0, "fde": 6.0, "n": 3}}
    assert rep.average == {"ade": 2.0, "fde": 4.0}
    assert rep.weighted == {"ade": 2.5, "fde": 5.0}


def test_report_files_round_trip(tmp_path):
    rep = build_report("full", _rows(), "ab" * 32)
    jp, cp = rep.write(tmp_path)
    assert cp.read_text().startswith("# fingerprint=" + "ab" * 32)
    back = MetricReport.read_samples(cp)
    assert back == _rows()
    again = build_report("full", back, rep.fingerprint)
    assert again.to_dict() == rep.to_dict()
    assert "(config abababababab)" in (tmp_path / "report_full.txt").read_text()


def test_scene_without_samples_is_left_out():
    rep = build_report("x", _rows()[:1], "0" * 64, ["a", "zz"])
    assert list(rep.per_scene) == ["a"]


# -- pipeline-level structure -----------------------------------------------------------

SMALL = NetworkConfig(embed=8, hidden=8, feature=16, patch=32, conv_channels=(2, 2), decoder_width=4)


@pytest.fixture(scope="module")
def toy_data():
    return prepare_scene(linear_scene(n_agents=12, length=24, seed=4), window_config=WindowConfig(20, 5, 200))


def test_no_social_equals_preliminary(toy_data):
    net = BGMNetwork(SMALL, seed=1)
    out = predict_variants(net, toy_data, SocialParams())
    assert np.array_equal(out["no_social"], preliminary(net, toy_data))
    assert np.array_equal(out["full"], refine_scene(toy_data, out["no_social"], SocialParams()))
    assert not np.array_equal(out["full"], out["no_social"])


def test_no_context_differs_only_through_context_branch(toy_data):
    net = BGMNetwork(SMALL, seed=2)
    out = predict_variants(net, toy_data, SocialParams())
    assert not np.array_equal(out["full"], out["no_context"])
    # silence the context projection: its output is then the zero vector used by the ablation
    net.ctx_proj.weight.data[:] = 0.0
    net.ctx_proj.bias.data[:] = 0.0
    out = predict_variants(net, toy_data, SocialParams())
    assert np.array_equal(out["full"], out["no_context"])


def test_benchmark_reuses_networks_and_reports_every_scene():
    scenes = {n: [prepare_scene(linear_scene(n_agents=6, length=21, seed=k, name=n))] for k, n in enumerate("abc")}
    nets = {n: BGMNetwork(SMALL, seed=3) for n in scenes}
    res = run_benchmark(scenes, SMALL, None, SocialParams(), "f" * 64, networks=nets, train_missing=False)
    assert set(res.reports) == {"full", "no_social", "no_context"}
    for rep in list(res.reports.values()) + [res.linear]:
        assert list(rep.per_scene) == ["a", "b", "c"]
        assert sum(m["n"] for m in rep.per_scene.values()) == len(rep.samples)
    assert res.linear.weighted["ade"] < 1e-9  # straight tracks
    with pytest.raises(ValueError):
        run_benchmark(scenes, SMALL, None, SocialParams(), "f" * 64, networks={}, train_missing=False)


def test_dynamic_map_matrix_shape(toy_data):
    net = BGMNetwork(SMALL, seed=0)
    scene = prepare_scene(linear_scene(n_agents=60, length=22, seed=9), window_config=WindowConfig(3, 2, 20))
    res = dynamic_map_experiment(net, [scene], None, min_samples=2)
    assert res.ade.shape == res.fde.shape == (3, 3)
    assert len(res.diagonal_best) == 3 and len(res.periods) == 3
    assert all(n >= 2 for n in res.test_sizes)
    assert res.periods == sorted(res.periods)
    d = res.to_dict()
    assert set(d) >= {"ade", "fde", "diagonal_best_per_column", "periods"}
    with pytest.raises(ValueError, match="insufficient"):
        dynamic_map_experiment(net, [toy_data], None, min_samples=10_000)
