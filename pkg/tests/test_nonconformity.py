import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from knncp import ConfigurationError, MeasureConfig, MeasureKind
from knncp.knn import AccuracyStats
from knncp.nonconformity import ALL_KINDS, TCP_KINDS, half_width_multiplier, multiplier_from, score


def stats(lam=0.0, xi=0.0):
    return AccuracyStats(d_k=lam, lambda_k=lam, s_k=xi, xi_k=xi)


def test_score_examples():
    assert score(MeasureConfig("standard"), 2.0, stats()) == 2.0
    assert score(MeasureConfig("dist_add", gamma=0.5), 3.0, stats(lam=1.0)) == 2.0
    assert score(MeasureConfig("combo_exp", gamma=0.0, rho=0.0), 5.0, stats(3.0, 7.0)) == 2.5
    assert math.isclose(score(MeasureConfig("dist_exp", gamma=0.5), math.e, stats(lam=2.0)), 1.0)


@pytest.mark.parametrize(
    "kind, expected",
    [
        ("standard", 1.0),
        ("dist_add", 1.5),
        ("dist_exp", math.exp(0.5)),
        ("std_add", 1.0),
        ("std_exp", math.exp(0.25)),
        ("combo_add", 2.0),
        ("combo_exp", math.exp(0.5) + math.exp(0.25)),
    ],
)
def test_multiplier_table(kind, expected):
    cfg = MeasureConfig(kind, gamma=0.5, rho=0.5)
    assert math.isclose(half_width_multiplier(cfg, stats(1.0, 0.5)), expected)


def test_rho_only_affects_combo_exp():
    for kind in ALL_KINDS:
        a = half_width_multiplier(MeasureConfig(kind, rho=0.1), stats(1.0, 2.0))
        b = half_width_multiplier(MeasureConfig(kind, rho=0.9), stats(1.0, 2.0))
        assert (a != b) == (kind is MeasureKind.COMBO_EXP)


@given(st.sampled_from(ALL_KINDS), st.floats(0, 50), st.floats(0, 50), st.floats(0.01, 3))
def test_multiplier_monotone_in_difficulty(kind, lam, xi, gamma):
    cfg = MeasureConfig(kind, gamma=gamma, rho=gamma)
    base = half_width_multiplier(cfg, stats(lam, xi))
    assert half_width_multiplier(cfg, stats(lam + 1, xi)) >= base
    assert half_width_multiplier(cfg, stats(lam, xi + 1)) >= base


@given(st.sampled_from(ALL_KINDS), st.floats(0, 20), st.floats(0, 20), st.floats(0, 1e4))
def test_score_round_trip(kind, lam, xi, residual):
    cfg = MeasureConfig(kind, gamma=0.5)
    s = stats(lam, xi)
    assert math.isclose(score(cfg, residual, s) * half_width_multiplier(cfg, s), residual, rel_tol=1e-12)


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(0)
    lam, xi = rng.exponential(size=(2, 50))
    for kind in ALL_KINDS:
        cfg = MeasureConfig(kind)
        vec = multiplier_from(cfg, lam, xi)
        assert vec.shape == (50,)
        scalar = [half_width_multiplier(cfg, stats(a, b)) for a, b in zip(lam, xi)]
        np.testing.assert_array_equal(vec, scalar)


def test_zero_denominator_rejected():
    with pytest.raises(ConfigurationError, match="gamma"):
        half_width_multiplier(MeasureConfig("dist_add", gamma=0.0), stats(0.0))


def test_config_validation():
    with pytest.raises(ConfigurationError, match="unknown measure"):
        MeasureConfig("cosine")
    with pytest.raises(ConfigurationError):
        MeasureConfig(k=0)
    with pytest.raises(ConfigurationError):
        MeasureConfig(gamma=-1.0)
    with pytest.raises(ConfigurationError):
        MeasureConfig(weighting="gaussian")
    assert MeasureConfig("combo_exp").kind is MeasureKind.COMBO_EXP


def test_tcp_compatibility():
    assert [k.value for k in TCP_KINDS] == ["standard", "dist_add", "dist_exp"]
    assert not MeasureConfig("std_add").tcp_compatible
