import math

import numpy as np
import pytest

from shadowsim import programs as P
from shadowsim import sdp
from shadowsim.channels import depolarizing_choi, identity_choi, random_cptp
from shadowsim.oracles import (CERTIFICATES, brute_force_diamond, certificate, depo_capacity_formula,
                               depo_zero_error_cost_formula, helstrom_values, identity_sim_cost_formula)

P_GRID = [round(0.1 * k, 1) for k in range(1, 11)]
D_GRID = [2, 3, 4]
ID_PAIRS = [(d, dp) for d in D_GRID for dp in D_GRID if dp >= d]


def test_capacity_formula_examples():
    assert depo_capacity_formula(0.9, 1) == 0
    assert depo_capacity_formula(0.9, 5) == math.log2(3)
    assert depo_capacity_formula(1, 1) == 1
    # radicand exactly 4 must not drop to dimension 1 through rounding
    assert depo_capacity_formula(0.6, 2) == 1
    with pytest.raises(ValueError):
        depo_capacity_formula(1.1, 1)
    with pytest.raises(ValueError):
        depo_capacity_formula(0.5, 0.5)


def test_identity_cost_formula_examples():
    assert identity_sim_cost_formula(2, 4) == 7
    assert identity_sim_cost_formula(3, 3) == 1
    assert identity_sim_cost_formula(2, 3) == 3.5
    with pytest.raises(ValueError):
        identity_sim_cost_formula(3, 2)


def test_depo_cost_formula_examples():
    assert abs(depo_zero_error_cost_formula(0.9, 2) - 7 / 6) < 1e-15
    assert depo_zero_error_cost_formula(1, 2) == 1
    assert abs(depo_zero_error_cost_formula(0.9, 3) - 3.94444444444) < 1e-10
    with pytest.raises(ValueError):
        depo_zero_error_cost_formula(0.0, 2)


def test_certificate_objectives():
    assert abs(certificate("depo_zero_error_cost_dual", p=0.9, d=2).evaluated_objective() - 7 / 6) < 1e-12
    assert abs(certificate("identity_formation_dual", d=2, d_prime=4).evaluated_objective() - 7) < 1e-12
    primal = certificate("depo_zero_error_cost_primal", p=0.9, d=2)
    assert primal.check()[0]
    assert abs(primal.evaluated_objective() - 7 / 6) < 1e-12


def test_unknown_certificate():
    with pytest.raises(ValueError):
        certificate("depo_zero_error_cost_guess", p=0.5, d=2)
    with pytest.raises(ValueError):
        certificate("capacity_dual", p=0.5, d=2)


@pytest.mark.parametrize("kind", ["dual", "primal"])
def test_depo_certificates_over_grid(kind):
    for p in P_GRID:
        for d in D_GRID:
            cert = certificate(f"depo_zero_error_cost_{kind}", p=p, d=d)
            ok, worst = cert.check(1e-9)
            assert ok, (p, d, worst)
            assert abs(cert.evaluated_objective() - depo_zero_error_cost_formula(p, d)) < 1e-9


@pytest.mark.parametrize("kind", ["dual", "primal"])
def test_identity_certificates_over_grid(kind):
    for d, dp in ID_PAIRS:
        cert = certificate(f"identity_formation_{kind}", d=d, d_prime=dp)
        ok, worst = cert.check(1e-9)
        assert ok, (d, dp, worst)
        assert abs(cert.evaluated_objective() - identity_sim_cost_formula(d, dp)) < 1e-9


def test_certificate_list_is_complete():
    assert len(CERTIFICATES) == 4
    for cid in CERTIFICATES:
        params = {"p": 0.5, "d": 2} if cid.startswith("depo") else {"d": 2, "d_prime": 3}
        assert certificate(cid, **params).program_id == cid


@pytest.mark.parametrize("p", [0.3, 0.9])
@pytest.mark.parametrize("d", [2, 3, 4])
def test_sdp_matches_depo_formula(p, d):
    assert abs(P.comm_zero_error_cost(depolarizing_choi(p), d).value - depo_zero_error_cost_formula(p, d)) < 1e-5


@pytest.mark.parametrize("d,dp", ID_PAIRS)
def test_sdp_matches_identity_formula(d, dp):
    assert abs(P.formation_zero_error_cost(d, identity_choi(dp)).value - identity_sim_cost_formula(d, dp)) < 1e-5


def test_dual_program_optimum_equals_primal():
    sol = sdp.solve(P.comm_zero_error_dual_program(depolarizing_choi(0.9), 2))
    assert abs(sol.primal_value - 7 / 6) < 1e-6
    sol = sdp.solve(P.formation_zero_error_dual_program(2, identity_choi(4)))
    assert abs(sol.primal_value - 7) < 1e-5


def test_helstrom_at_maximally_entangled_input():
    psi = np.eye(2).reshape(-1) / np.sqrt(2)
    v = helstrom_values(identity_choi(2), depolarizing_choi(0.0), psi[None])
    assert abs(v[0] - 0.75) < 1e-12


def test_brute_force_never_exceeds_sdp(rng):
    for _ in range(3):
        a, b = random_cptp(2, 2, rng), random_cptp(2, 2, rng)
        lower = brute_force_diamond(a, b, samples=2000, rng=rng)
        assert lower <= P.diamond_distance(a, b) + 1e-9


def test_brute_force_identity_vs_depolarizing(rng):
    lower = brute_force_diamond(identity_choi(2), depolarizing_choi(0.0), rng=rng)
    assert abs(lower - 0.75) < 1e-3
