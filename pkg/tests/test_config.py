import pytest
from hypothesis import given
from hypothesis import strategies as st

from knncp import ConfigurationError, SyntheticSpec
from knncp.config import RunConfig, load_config, parse_config, serialize_config
from knncp.nonconformity import ALL_KINDS

measure_lists = st.lists(st.sampled_from([k.value for k in ALL_KINDS]), min_size=1, max_size=7, unique=True)


@given(
    measures=measure_lists,
    k=st.one_of(st.none(), st.integers(1, 50)),
    q=st.one_of(st.none(), st.integers(1, 999)),
    gamma=st.floats(0, 5),
    deltas=st.lists(st.floats(0.001, 0.999), min_size=1, max_size=4),
    seed=st.integers(0, 2**63 - 1),
)
def test_round_trip(measures, k, q, gamma, deltas, seed):
    cfg = RunConfig(dataset="data/x.csv", measures=tuple(measures), k=k, q=q, gamma=gamma,
                    deltas=tuple(deltas), seed=seed, normalize=False)
    assert parse_config(serialize_config(cfg)) == cfg


def test_round_trip_with_synthetic():
    spec = SyntheticSpec(300, 4, mean_fn="linear", std_fn="exp", mean_params={"slope": 2.0},
                         std_params={"base": 0.3, "rate": 0.05}, input_low=-1.0, input_high=2.0, seed=4)
    cfg = RunConfig(dataset="synthetic", synthetic=spec, methods=("icp",))
    assert parse_config(serialize_config(cfg)) == cfg


def test_comments_auto_and_defaults():
    cfg = parse_config("# experiment\ndataset = b.csv\n\nk = auto\nq = auto\nmethod = ICP\n")
    assert cfg.dataset == "b.csv"
    assert cfg.k is None and cfg.q is None
    assert cfg.methods == ("icp",)
    assert cfg.folds == 10 and cfg.runs == 10


@pytest.mark.parametrize(
    "text, key",
    [
        ("dataset = a.csv\ncolour = red", "colour"),
        ("dataset = a.csv\nk = four", "k"),
        ("dataset = a.csv\nnormalize = maybe", "normalize"),
        ("dataset = a.csv\nsynthetic.shape = 3", "synthetic.shape"),
        ("just some words", "line 1"),
    ],
)
def test_parse_errors_name_the_key(text, key):
    with pytest.raises(ConfigurationError, match=key):
        parse_config(text)


@pytest.mark.parametrize(
    "kw, key",
    [
        ({"dataset": ""}, "dataset"),
        ({"methods": ("tcp",), "measures": ("std_add",)}, "measures"),
        ({"measures": ("cosine",)}, "measures"),
        ({"methods": ("bayes",)}, "method"),
        ({"deltas": (1.5,)}, "deltas"),
        ({"folds": 1}, "folds"),
        ({"weighting": "gauss"}, "weighting"),
        ({"dataset": "synthetic"}, "synthetic"),
    ],
)
def test_validation_names_the_key(kw, key):
    cfg = RunConfig(**{"dataset": "a.csv", **kw})
    with pytest.raises(ConfigurationError, match=key):
        cfg.validate()


def test_tcp_std_add_error_message():
    with pytest.raises(ConfigurationError, match="TCP cannot use std_add"):
        RunConfig(dataset="a.csv", methods=("tcp",), measures=("standard", "std_add")).validate()


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="nope.cfg"):
        load_config(tmp_path / "nope.cfg")
