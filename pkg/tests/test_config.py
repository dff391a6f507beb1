import pytest
from hypothesis import given, strategies as st

from cortexnav.config import FIELD_NAMES, ConfigError, CortexConfig, dump_config, load_config


def test_empty_document_gives_defaults():
    cfg = load_config("")
    assert cfg == CortexConfig()
    assert (cfg.n_candidates, cfg.imagination_horizon, cfg.srm_window, cfg.lpm_horizon) == (3, 4, 5, 6)
    assert (cfg.lpm_threshold, cfg.sim_threshold, cfg.confidence_floor) == (0.8, 0.85, 0.7)
    assert (cfg.min_support, cfg.max_episodes_per_goal, cfg.max_steps, cfg.world_model_noise) == (2, 3, 100, 0.0)


def test_out_of_range_threshold_names_the_field():
    with pytest.raises(ConfigError, match="lpm_threshold out of \\[0,1\\]"):
        load_config("lpm_threshold: 1.5")


def test_values_accepted_verbatim():
    cfg = load_config("srm_window: 5\nmax_steps: 100\n")
    assert cfg.srm_window == 5 and cfg.max_steps == 100


@pytest.mark.parametrize(
    "doc",
    [
        "bogus: 1",
        "n_candidates: 0",
        "srm_window: 0",
        "srm_window: 200",
        "max_steps: 2.5",
        "seed: -1",
        "world_model_noise: -0.1",
        "confidence_floor: yes",
        "[1, 2]",
        "a: [",
    ],
)
def test_invalid_documents_rejected(doc):
    with pytest.raises(ConfigError):
        load_config(doc)


def test_no_silent_clamping():
    with pytest.raises(ConfigError, match="sim_threshold"):
        CortexConfig(sim_threshold=1.0000001)


def test_mapping_source_and_replace():
    cfg = load_config({"n_candidates": 5})
    assert cfg.n_candidates == 5
    assert cfg.replace(seed=9).seed == 9
    with pytest.raises(ConfigError):
        cfg.replace(max_steps=0)


unit = st.floats(0.0, 1.0, allow_nan=False)
configs = st.builds(
    CortexConfig,
    n_candidates=st.integers(1, 8),
    imagination_horizon=st.integers(1, 10),
    srm_window=st.integers(1, 20),
    lpm_horizon=st.integers(1, 10),
    lpm_threshold=unit,
    sim_threshold=unit,
    confidence_floor=unit,
    min_support=st.integers(1, 5),
    max_episodes_per_goal=st.integers(1, 5),
    max_steps=st.integers(20, 500),
    world_model_noise=unit,
    seed=st.integers(0, 2**64 - 1),
)


@given(configs)
def test_load_dump_load_identity(cfg):
    again = load_config(dump_config(cfg))
    assert again == cfg
    assert load_config(dump_config(again)) == again


def test_field_names_cover_every_knob():
    assert set(FIELD_NAMES) == set(CortexConfig().to_dict())
