"""Material space: sampling, oracles, and the scored-sample file format."""

import numpy as np
import pytest
from scipy import stats

from gmsynth.errors import DimensionMismatch, GmsError
from gmsynth.materials import (
    MaterialParams,
    PreferenceSample,
    SyntheticUser,
    default_glassy_user,
    format_samples,
    oracle_score,
    parse_samples,
    sample_uniform,
)


@pytest.fixture(scope="module")
def uniform_draws():
    return np.stack([sample_uniform(19, seed=s).values for s in range(10_000)])


def test_sample_uniform_deterministic():
    a = sample_uniform(19, seed=42)
    b = sample_uniform(19, seed=42)
    assert np.array_equal(a.values, b.values)


def test_sample_uniform_range():
    for seed in (0, 7, 123):
        x = sample_uniform(19, seed=seed)
        assert x.m == 19
        assert np.all(x.values >= 0.0) and np.all(x.values <= 1.0)


def test_sample_uniform_rejects_zero_dim():
    with pytest.raises(GmsError):
        sample_uniform(0, seed=1)


def test_uniform_mean_near_half(uniform_draws):
    # law of large numbers on coordinate 0 over 10,000 draws
    assert abs(uniform_draws[:, 0].mean() - 0.5) < 0.02


def test_uniform_passes_ks_per_coordinate(uniform_draws):
    for d in range(uniform_draws.shape[1]):
        result = stats.kstest(uniform_draws[:, d], "uniform")
        assert result.pvalue > 0.01, f"coordinate {d} failed KS: p={result.pvalue}"


def _single_bump(center, width, weight=1.0, floor=0.0):
    return SyntheticUser(
        centers=(MaterialParams(center),),
        widths=(width,),
        weights=(weight,),
        floor=floor,
    )


class TestOracleScore:
    def test_peak_at_center(self):
        center = np.full(4, 0.5)
        user = _single_bump(center, width=0.3, floor=2.0)
        assert oracle_score(user, MaterialParams(center)) == 10.0

    def test_floor_cutoff(self):
        user = _single_bump(np.zeros(4), width=0.05, floor=2.0)
        far = MaterialParams(np.ones(4))
        assert oracle_score(user, far) == 0.0

    def test_bump_formula_value(self):
        # distance 0.5 at width 0.5: 10 * exp(-0.5)
        center = np.full(4, 0.4)
        x = center.copy()
        x[0] += 0.5
        user = _single_bump(center, width=0.5)
        expected = 10.0 * np.exp(-0.5)
        assert oracle_score(user, MaterialParams(x)) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        user = _single_bump(np.zeros(4), width=0.5)
        with pytest.raises(DimensionMismatch):
            oracle_score(user, MaterialParams(np.zeros(5)))

    def test_deterministic_and_bounded(self):
        rng = np.random.default_rng(3)
        user = SyntheticUser(
            centers=tuple(MaterialParams(rng.random(6)) for _ in range(3)),
            widths=(0.2, 0.4, 0.9),
            weights=(2.0, 0.5, 1.5),
            floor=1.0,
        )
        for _ in range(200):
            x = MaterialParams(rng.random(6))
            s1 = oracle_score(user, x)
            s2 = oracle_score(user, x)
            assert s1 == s2
            assert 0.0 <= s1 <= 10.0


def test_default_glassy_zero_rate():
    user = default_glassy_user(19, seed=0)
    rng = np.random.default_rng(99)
    scores = oracle_score(user, rng.random((10_000, 19)))
    zero_rate = float(np.mean(scores == 0.0))
    assert 0.70 <= zero_rate <= 0.90


def test_material_params_validation():
    with pytest.raises(GmsError):
        MaterialParams(np.array([0.5, 1.2]))
    with pytest.raises(GmsError):
        MaterialParams(np.array([-0.1, 0.2]))


def test_preference_sample_score_range():
    x = MaterialParams(np.full(3, 0.5))
    PreferenceSample(x, 10.0)
    with pytest.raises(GmsError):
        PreferenceSample(x, 10.5)


class TestSampleFiles:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        samples = [
            PreferenceSample(MaterialParams(rng.random(5)), float(i))
            for i in range(4)
        ]
        text = format_samples(samples)
        assert text.splitlines()[0] == "gms-samples v1 m=5"
        back = parse_samples(text)
        assert len(back) == 4
        for a, b in zip(samples, back):
            assert np.array_equal(a.params.values, b.params.values)
            assert a.score == b.score

    def test_rejects_missing_header(self):
        with pytest.raises(GmsError):
            parse_samples("0.5,0.5;1.0\n")

    def test_rejects_wrong_width(self):
        text = "gms-samples v1 m=3\n0.5,0.5;1.0\n"
        with pytest.raises(DimensionMismatch):
            parse_samples(text)
