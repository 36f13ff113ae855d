import pytest
from hypothesis import given
from hypothesis import strategies as st

from machopt.config import ConfigError, RunConfig, dump_config, embedded_header, extract_embedded, parse_config
from machopt.nsga2 import VariationConfig
from machopt.repair import RepairConfig

configs = st.builds(
    lambda mode, seed, ese, n_doe, k, pm, eta, w: RunConfig(
        mode=mode, seed=seed, ese_max=ese, n_doe=min(n_doe, ese), k=k,
        variation=VariationConfig(p_m=pm, eta_c=eta), repair=RepairConfig(penalty_weights=w),
    ),  # fmt: skip
    st.sampled_from(["plain", "wr", "wr-sa"]),
    st.integers(0, 2**31),
    st.integers(1, 5000),
    st.integers(1, 200),
    st.integers(0, 60),
    st.one_of(st.none(), st.floats(0, 1)),
    st.floats(0.1, 100),
    st.just((1e3, 1e5, 1e7)) | st.just((2.5, 3.5e4)),
)


@given(configs)
def test_round_trip(cfg):
    assert parse_config(dump_config(cfg)) == cfg


def test_defaults():
    cfg = parse_config("")
    assert (cfg.n_doe, cfg.n_infill, cfg.k, cfg.pop_size, cfg.n_offspring) == (60, 10, 35, 100, 20)
    assert cfg.variation.mutation_prob(10) == pytest.approx(0.1)


def test_partial_override():
    cfg = parse_config("[run]\nseed = 9\n[surrogate]\nk = 25\n")
    assert cfg.seed == 9 and cfg.k == 25 and cfg.n_infill == 10


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r"line 4: unknown key 'nope'"):
        parse_config("[run]\nseed = 1\n\nnope = 3\n")
    with pytest.raises(ConfigError, match=r"line 1: unknown section \[extra\]"):
        parse_config("[extra]\na = 1\n")


def test_bad_values():
    with pytest.raises(ConfigError, match="line 2: bad value"):
        parse_config("[run]\nseed = one\n")
    with pytest.raises(ConfigError, match="mode"):
        parse_config("[run]\nmode = fast\n")
    with pytest.raises(ConfigError, match="even"):
        parse_config("[population]\noffspring = 7\n")
    with pytest.raises(ConfigError, match="n_doe"):
        parse_config("[run]\nese_max = 50\n")
    with pytest.raises(ConfigError):
        parse_config("[run\nseed = 1\n")


def test_embedded_round_trip(tmp_path):
    cfg = RunConfig(seed=42, mode="wr")
    path = tmp_path / "a.csv"
    path.write_text("".join(f"# {line}\n" for line in embedded_header(cfg)) + "gen,x1\n0,1.00\n")
    assert extract_embedded(path) == cfg
    plain = tmp_path / "b.csv"
    plain.write_text("gen,x1\n")
    with pytest.raises(ConfigError):
        extract_embedded(plain)
