"""Surface partitioning."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starnoma import fixtures
from starnoma.errors import ConfigError, InfeasibleScenarioError, PartitionError
from starnoma.model import Scenario, UserSpec, preset
from starnoma.partition import (PartitionRequest, algorithm1_nthr, algorithm2_alloc, floor_at,
                                plan_partition, two_stage_partition, two_user_partition,
                                uniform_partition)


def exhaustive_nthr(scenario, epsilon):
    ok = [n for n in range(1, scenario.n_total // scenario.K + 1)
          if floor_at(scenario, n).max() <= epsilon]
    return min(ok) if ok else None


@settings(max_examples=30, deadline=None)
@given(case=st.sampled_from([2, 3]), n=st.integers(30, 300), eps=st.floats(1e-4, 0.9))
def test_nthr_is_minimal(case, n, eps):
    s = preset(case, n)
    ref = exhaustive_nthr(s, eps)
    if ref is None:
        with pytest.raises(PartitionError):
            algorithm1_nthr(s, eps)
    else:
        assert algorithm1_nthr(s, eps) == ref


def test_floor_decreases_with_nthr():
    f = floor_at(preset(2, 150), np.arange(1, 51)).max(axis=-1)
    assert np.all(np.diff(f) < 0)


@pytest.mark.parametrize("case", [1, 2, 3])
@pytest.mark.parametrize("n", [60, 90, 120, 150, 180])
def test_default_partition_invariants(case, n):
    s = preset(case, n)
    plan = plan_partition(s, PartitionRequest())
    part = plan.partition
    assert part.total == n
    assert list(part.counts) == sorted(part.counts)
    assert part.n_t == sum(part.counts[k] for k in s.users_on("t"))
    assert part.n_r == sum(part.counts[k] for k in s.users_on("r"))
    if not s.is_two_user:
        assert min(part.counts) >= plan.n_thr
        assert plan.n_t_tmp == s.k_t * plan.n_thr


@pytest.mark.parametrize("case,n", sorted(fixtures.REFERENCE_COUNTS))
def test_calibrated_fixtures_reproduce_reference_rows(case, n):
    row = fixtures.fixture(case, n)
    plan = plan_partition(preset(case, n), fixtures.fixture_request(row))
    assert plan.partition.counts == tuple(row["counts"])
    assert (plan.partition.n_t, plan.partition.n_r) == (row["n_t"], row["n_r"])


def test_shipped_fixtures_match_regeneration():
    shipped = fixtures.load_fixtures()
    fresh = fixtures.build_fixtures()["rows"]
    assert [r["counts"] for r in shipped] == [r["counts"] for r in fresh]
    for a, b in zip(shipped, fresh):
        assert a["request"]["epsilon"] == pytest.approx(b["request"]["epsilon"])
        np.testing.assert_allclose(a["request"]["r_min"], b["request"]["r_min"])


def test_rates_meet_targets():
    s = preset(3, 120)
    req = PartitionRequest(r_min=(0.4, 0.6, 0.8), p_ref_dbm=30.0)
    plan = plan_partition(s, req)
    assert all(r >= t for r, t in zip(plan.rates, req.r_min))


def test_budget_exhaustion_lists_users():
    s = preset(2, 120)
    with pytest.raises(PartitionError) as info:
        two_stage_partition(s, PartitionRequest(r_min=(0.5, 50.0, 1.0)))
    assert info.value.unmet_users == [1, 2]
    assert info.value.exit_code == 4


def test_unreachable_epsilon():
    with pytest.raises(PartitionError) as info:
        algorithm1_nthr(preset(2, 30), 1e-9)
    assert info.value.best_op > 1e-9


def test_infeasible_scenario():
    s = Scenario(users=[UserSpec("t", 50, 2.0, 0.6), UserSpec("t", 40, 1.0, 0.3),
                        UserSpec("r", 30, 1.0, 0.1)], n_total=60, d_bs=20.0)
    with pytest.raises(InfeasibleScenarioError):
        algorithm1_nthr(s, 0.5)


def test_two_user_special_case():
    s = preset(1, 64)
    part = two_user_partition(s, PartitionRequest(r_min=(0.5, 1.0), p_ref_dbm=10.0))
    assert part.total == 64 and part.counts[0] <= part.counts[1]
    with pytest.raises(ConfigError):
        two_user_partition(preset(2), PartitionRequest())
    with pytest.raises(PartitionError) as info:
        two_user_partition(s, PartitionRequest(r_min=(0.5, 40.0), p_ref_dbm=10.0))
    assert info.value.unmet_users == [1]


def test_algorithm2_prefix():
    s = preset(2, 120)
    counts = algorithm2_alloc(s, 10, PartitionRequest(r_min=(0.5, 0.5, 1.0)), users=[0, 1])
    assert len(counts) == 2 and 10 <= counts[0] <= counts[1]


def test_uniform():
    assert uniform_partition(preset(2, 100)).counts == (33, 33, 34)
    assert uniform_partition(preset(1, 64)).counts == (32, 32)


def test_request_validation():
    with pytest.raises(ConfigError):
        PartitionRequest(epsilon=0.0)
    with pytest.raises(ConfigError):
        PartitionRequest(r_min=(-1.0, 1.0))
    with pytest.raises(ConfigError):
        PartitionRequest(realizations=10)
    with pytest.raises(ConfigError):
        PartitionRequest(r_min=(1.0,)).targets(preset(2))
