import pytest

from nbiotsim.core import (
    GroupConfig,
    InvalidActionError,
    SimParams,
    TtiConfig,
    TtiObservation,
    data_resource_budget,
    multi_group_params,
    rach_resource_cost,
    single_group_params,
)


def test_rach_cost_single_group():
    # hand evaluation: 4 * (1 * 4 * 12) = 192
    cfg = TtiConfig.single(1, 4, 12)
    assert rach_resource_cost(cfg, single_group_params()) == 192


def test_rach_cost_minimal_three_groups():
    cfg = TtiConfig((GroupConfig(1, 1, 12),) * 3)
    assert rach_resource_cost(cfg, multi_group_params()) == 4 * 3 * 12


def test_zero_groups_is_illegal():
    with pytest.raises(InvalidActionError):
        TtiConfig(())


def test_illegal_set_members_rejected():
    with pytest.raises(InvalidActionError):
        TtiConfig.single(3, 4, 12)
    with pytest.raises(InvalidActionError):
        TtiConfig.single(1, 3, 12)
    with pytest.raises(InvalidActionError):
        TtiConfig.single(1, 4, 13)


def test_data_budget_single_group_default():
    p = single_group_params()
    assert p.r_uplink == 1536
    cfg = TtiConfig.single(1, 4, 12)
    assert data_resource_budget(cfg, p) == 1536 - 192 == 1344


def test_data_budget_boundary_and_overrun():
    # 4 * (4 * 8 * 12) = 1536 exactly consumes the single-group budget
    p = single_group_params()
    cfg = TtiConfig.single(4, 8, 12)
    assert rach_resource_cost(cfg, p) == 1536
    assert data_resource_budget(cfg, p) == 0
    over = TtiConfig.single(4, 8, 24)
    with pytest.raises(InvalidActionError):
        data_resource_budget(over, p)


def test_budget_conservation():
    p = multi_group_params()
    cfg = TtiConfig((GroupConfig(2, 4, 24), GroupConfig(1, 8, 12), GroupConfig(4, 2, 48)))
    assert rach_resource_cost(cfg, p) + data_resource_budget(cfg, p) == p.r_uplink


def test_observation_partition_check():
    cfg = TtiConfig.single(1, 4, 12)
    good = TtiObservation((2,), (3,), (7,), (0,), (0,))
    good.check_partition(cfg)
    bad = TtiObservation((2,), (3,), (8,), (0,), (0,))
    with pytest.raises(Exception):
        bad.check_partition(cfg)


def test_observation_rejects_negative_counts():
    with pytest.raises(Exception):
        TtiObservation((-1,), (0,), (13,), (0,), (0,))


def test_default_c_su_from_budget():
    assert single_group_params().c_su == 1536 // 32
    assert multi_group_params().c_su == 15360 // 32


def test_rsrp_threshold_ordering_enforced():
    with pytest.raises(ValueError):
        SimParams(rsrp_thr1_mw=1e-16, rsrp_thr2_mw=1e-15)
