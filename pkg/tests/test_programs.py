import math

import numpy as np
import pytest

from shadowsim import programs as P
from shadowsim.channels import (VirtualChannel, amplitude_damping_choi, dephasing_choi, depolarizing_choi,
                                identity_choi, is_no_signaling, random_cptp, tensor_power)

GAP = 1e-7


@pytest.fixture(scope="module")
def channels():
    return {"ad": amplitude_damping_choi(0.9), "depo": depolarizing_choi(0.9), "deph": dephasing_choi(0.9)}


def test_task_request_validation():
    with pytest.raises(ValueError):
        P.TaskRequest("teleport")
    with pytest.raises(ValueError):
        P.TaskRequest("min-error", gamma=1.0, eps=0.1)
    assert P.TaskRequest("min-cost", eps=0.0).eps == 0.0


def test_task_result_to_dict_handles_infinity():
    res = P.comm_zero_error_cost(depolarizing_choi(0.0), 2)
    d = res.to_dict()
    assert res.status == "infeasible" and d["value"] == "inf"


# --- general programs (small 16x16 code Choi operators) ---------------------


def test_min_error_self_simulation_is_zero(rng):
    n = random_cptp(2, 2, rng)
    res = P.min_error_ns(n, n, 1.0)
    assert res.details["route"] == "general"
    assert abs(res.value) < 1e-7
    assert abs(P.min_cost_ns(n, n, 0.0).value - 1) < 1e-6
    assert abs(P.min_error_quantum(n, n).value) < 1e-7


def test_min_error_noiseless_source():
    assert abs(P.min_error_ns(depolarizing_choi(1.0), identity_choi(2), 1.0).value) < 1e-7
    assert abs(P.min_error_quantum(identity_choi(2), identity_choi(2)).value) < 1e-7


def test_min_cost_depolarizing_closed_form():
    res = P.min_cost_ns(depolarizing_choi(0.9), identity_choi(2), 0.0, method="general")
    assert abs(res.value - 7 / 6) < 1e-6
    assert is_no_signaling(res.realized_code, 1e-6)


def test_min_cost_below_floor_is_infeasible():
    res = P.min_cost_ns(depolarizing_choi(0.0), identity_choi(2), 0.0, method="general")
    assert res.status == "infeasible" and res.value == math.inf


@pytest.mark.parametrize("name", ["ad", "depo", "deph"])
def test_communication_reduction_matches_general(channels, name):
    n = channels[name]
    for gamma in (1.0, 1.1):
        general = P.min_error_ns(n, identity_choi(2), gamma, method="general")
        reduced = P.comm_min_error(n, 2, gamma)
        assert abs(general.value - reduced.value) < 1e-6


def test_shadow_beats_quantum_ad_communication(channels):
    n = channels["ad"]
    ns = P.min_error_ns(n, identity_choi(2), 1.0).value
    q = P.min_error_quantum(n, identity_choi(2)).value
    assert ns < q - 1e-4


def test_min_error_rejects_bad_inputs(channels):
    with pytest.raises(ValueError):
        P.min_error_ns(channels["ad"], identity_choi(2), -1.0)
    with pytest.raises(ValueError):
        P.min_cost_ns(channels["ad"], identity_choi(2), -0.1)
    with pytest.raises(ValueError):
        P.min_error_ns(channels["ad"], identity_choi(2), 1.0, method="fast")


def test_realized_code_audit(channels):
    for name, n in channels.items():
        res = P.min_error_ns(n, identity_choi(2), 1.05, method="general")
        assert is_no_signaling(res.realized_code, 1e-6)
        assert abs(P.realized_error(res, n, identity_choi(2)) - res.value) < 2 * GAP


def test_min_cost_non_increasing_in_eps(channels):
    n = channels["deph"]
    values = [P.min_cost_ns(n, identity_choi(2), e).value for e in np.linspace(0, 0.1, 6)]
    assert all(b <= a + 1e-7 for a, b in zip(values, values[1:]))


# --- diamond distance ------------------------------------------------------


def test_diamond_examples(rng):
    n = random_cptp(2, 2, rng)
    assert abs(P.diamond_distance(n, n)) < 1e-7
    assert abs(P.diamond_distance(VirtualChannel(2 * identity_choi(2), 2.0), identity_choi(2)) - 0.5) < 1e-7
    d = P.diamond_distance(identity_choi(2), depolarizing_choi(0.0))
    assert d >= 0.75 - 1e-6
    assert abs(d - 0.75) < 1e-6


def test_diamond_dimension_mismatch():
    with pytest.raises(ValueError):
        P.diamond_distance(identity_choi(2), identity_choi(3))


def test_diamond_is_symmetric_and_bounded(rng):
    a, b = random_cptp(2, 2, rng), random_cptp(2, 2, rng)
    dab, dba = P.diamond_distance(a, b), P.diamond_distance(b, a)
    assert abs(dab - dba) < 1e-6
    assert 0 <= dab <= 1 + 1e-7


# --- communication programs -------------------------------------------------


def test_comm_examples():
    assert abs(P.comm_min_error(identity_choi(2), 2, 1.0).value) < 1e-7
    assert abs(P.comm_min_error(depolarizing_choi(0.9), 2, 7 / 6).value) < 1e-6
    assert abs(P.comm_zero_error_cost(identity_choi(2), 4).value - 7) < 1e-5
    assert abs(P.comm_zero_error_cost(identity_choi(3), 3).value - 1) < 1e-5
    assert abs(P.comm_zero_error_cost(depolarizing_choi(0.9), 3).value - 7.1 / 1.8) < 1e-5


def test_comm_zero_error_infeasible_for_useless_channel():
    res = P.comm_zero_error_cost(depolarizing_choi(0.0), 2)
    assert res.status == "infeasible"


def test_comm_zero_error_code_is_exact():
    n = depolarizing_choi(0.9)
    res = P.comm_zero_error_cost(n, 2)
    assert is_no_signaling(res.realized_code, 1e-6)
    assert P.realized_error(res, n, identity_choi(2)) < 1e-6


def test_capacity_examples():
    assert P.shadow_capacity(depolarizing_choi(0.9), 1.0).value == 0
    assert abs(P.shadow_capacity(depolarizing_choi(0.9), 5.0).value - math.log2(3)) < 1e-12
    for gamma in (1.0, 3.0, 10.0):
        res = P.shadow_capacity(depolarizing_choi(0.0), gamma)
        assert res.value == 0 and abs(res.details["trace_v"] - 1) < 1e-6
    with pytest.raises(ValueError):
        P.shadow_capacity(depolarizing_choi(0.9), 0.5)


def test_capacity_flags_exact_squares():
    # tr V = 4 exactly for the noiseless qubit: √ lands on an integer
    res = P.shadow_capacity(identity_choi(2), 1.0)
    assert res.value == 1 and "near_integer" in res.flags


# --- formation programs ----------------------------------------------------


def test_formation_examples():
    assert abs(P.formation_min_error(2, identity_choi(2), 1.0).value) < 1e-7
    assert abs(P.formation_min_error(2, identity_choi(4), 7.0).value) < 1e-6
    assert abs(P.formation_zero_error_cost(3, identity_choi(3)).value - 1) < 1e-5
    assert abs(P.formation_zero_error_cost(2, identity_choi(4)).value - 7) < 1e-5
    assert abs(P.formation_zero_error_cost(2, identity_choi(3)).value - 3.5) < 1e-5


def test_formation_zero_error_code_is_exact():
    m = identity_choi(3)
    res = P.formation_zero_error_cost(2, m)
    assert is_no_signaling(res.realized_code, 1e-6)
    assert P.realized_error(res, identity_choi(2), m) < 1e-6


def test_formation_reduction_matches_general():
    m = tensor_power(depolarizing_choi(0.9), 2)
    general = P.min_error_ns(identity_choi(2), m, 1.0, method="general")
    reduced = P.formation_min_error(2, m, 1.0)
    assert abs(general.value - reduced.value) < 1e-6


def test_min_cost_identity_to_identity_general_route():
    res = P.min_cost_ns(identity_choi(2), identity_choi(4), 0.0, method="general")
    assert abs(res.value - 7) < 1e-5


def test_auto_route_dispatch(channels):
    assert P.min_cost_ns(identity_choi(2), identity_choi(4), 0.0).details["route"] == "formation"
    assert P.min_error_ns(channels["ad"], identity_choi(2), 1.0).details["route"] == "communication"


def test_sim_cost_examples():
    assert P.shadow_sim_cost(identity_choi(4), 1.0).value == 2
    assert P.shadow_sim_cost(identity_choi(4), 7.0).value == 1
    assert P.shadow_sim_cost(identity_choi(2), 1.0).value == 1
    with pytest.raises(ValueError):
        P.shadow_sim_cost(identity_choi(2), 0.9)
