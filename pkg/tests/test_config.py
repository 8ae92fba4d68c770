import pytest

from searchmesh.config import CASE_STUDY_TOML, ConfigError, MissionConfig


def test_case_study_toml_matches_defaults(tmp_path):
    path = tmp_path / "mission.toml"
    path.write_text(CASE_STUDY_TOML)
    assert MissionConfig.from_toml(path) == MissionConfig.case_study()


def test_case_study_dimensions():
    cfg = MissionConfig.case_study()
    assert (cfg.k, cfg.q, cfg.z) == (3, 8, 2)
    assert cfg.uav_state_count == 124_416
    assert cfg.fleet_state_count == 559_872
    assert cfg.uav_action_count == 6


def test_reduced_dimensions():
    cfg = MissionConfig.reduced()
    assert (cfg.k, cfg.q, cfg.z) == (1, 2, 1)
    assert cfg.uav_state_count == 432
    assert cfg.fleet_state_count == 216


@pytest.mark.parametrize(
    "overrides",
    [
        {"gamma": 1.0},
        {"gamma": 0.0},
        {"p_recur": 1.5},
        {"goal_regions": [2, 5]},
        {"goal_regions": [2, 5, 99]},
        {"fault_range_cost": [50.0, 200.0]},
        {"reach_keep": [[1, 2, 3], [2, 9], [1, 2, 3]]},
    ],
)
def test_validation_rejects_bad_values(overrides):
    with pytest.raises(ConfigError):
        MissionConfig(**overrides)


def test_unknown_toml_key_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[mission]\nk = 3\nnot_a_key = 1\n")
    with pytest.raises(ConfigError, match="not_a_key"):
        MissionConfig.from_toml(path)


def test_centroid_indexing_is_one_based():
    cfg = MissionConfig.case_study()
    assert cfg.centroid(1) == (500.0, 500.0)
    assert cfg.centroid(8) == (3500.0, 1500.0)
