"""Acceptance suite: one test per criterion, tolerances pinned."""
import math

import numpy as np

from shadowsim import programs as P
from shadowsim.channels import (VirtualChannel, amplitude_damping_choi, branch_decomposition, decompose_hpts,
                                dephasing_choi, depolarizing_choi, identity_choi, is_cptp, random_cptp,
                                tensor_power)
from shadowsim.oracles import brute_force_diamond, certificate, depo_capacity_formula, identity_sim_cost_formula
from shadowsim.sampling import SamplingPlan, hoeffding_rounds, run

CONSTRUCTORS = {"depolarizing": depolarizing_choi, "dephasing": dephasing_choi,
                "amplitude_damping": amplitude_damping_choi}


def test_criterion_01_capacity_closed_form():
    failures = []
    for p in (0.3, 0.6, 0.9, 1.0):
        n = depolarizing_choi(p)
        for gamma in (1, 1.5, 2, 3, 5, 8, 10):
            res = P.shadow_capacity(n, float(gamma))
            expected = depo_capacity_formula(p, gamma)
            k = int(round(2 ** expected))
            trace_v = res.details["trace_v"]
            if res.value != expected or res.details["dimension"] != k:
                failures.append((p, gamma, "value", res.value, expected))
            # tr V* must admit the k-level construction but not the (k+1)-level one
            if not (k * k - 1e-5 <= trace_v < (k + 1) ** 2 - 1e-5):
                failures.append((p, gamma, "trace", trace_v, k))
            # the k-level identity is reachable within the budget, k+1 levels are not
            if k >= 2 and P.comm_zero_error_cost(n, k).value > gamma + 1e-5:
                failures.append((p, gamma, "construction", k))
            above = P.comm_zero_error_cost(n, k + 1).value
            if above <= gamma - 1e-5:
                failures.append((p, gamma, "next level", above))
    assert not failures, failures


def test_criterion_02_identity_to_identity_cost():
    for d, dp in [(2, 2), (2, 3), (2, 4), (3, 3), (3, 4)]:
        value = P.comm_zero_error_cost(identity_choi(d), dp).value
        assert abs(value - (2 * (dp / d) ** 2 - 1)) <= 1e-5, (d, dp, value)


def test_criterion_03_depolarizing_zero_error_cost():
    for p in (0.5, 0.9, 1.0):
        for d in (2, 3):
            value = P.comm_zero_error_cost(depolarizing_choi(p), d).value
            assert abs(value - (d * d - 1 - p) / (2 * p)) <= 1e-5, (p, d, value)


def test_criterion_04_dual_certificates():
    for p in [round(0.1 * k, 1) for k in range(1, 11)]:
        for d in (2, 3, 4):
            cert = certificate("depo_zero_error_cost_dual", p=p, d=d)
            ok, worst = cert.check(1e-9)
            assert ok, ("depo", p, d, worst)
            primal = P.comm_zero_error_cost(depolarizing_choi(p), d).value
            assert abs(cert.evaluated_objective() - primal) <= 1e-5, ("depo", p, d)
    for d in (2, 3, 4):
        for dp in range(d, 5):
            cert = certificate("identity_formation_dual", d=d, d_prime=dp)
            ok, worst = cert.check(1e-9)
            assert ok, ("identity", d, dp, worst)
            primal = P.formation_zero_error_cost(d, identity_choi(dp)).value
            assert abs(cert.evaluated_objective() - primal) <= 1e-5, ("identity", d, dp)


def test_criterion_05_gamma_one_reduction():
    for name, make in CONSTRUCTORS.items():
        for p in (0.0, 0.25, 0.5, 0.75, 1.0):
            n = make(p)
            full = P.shadow_capacity(n, 1.0)
            reduced = P.shadow_capacity_gamma_one(n)
            assert abs(full.details["trace_v"] - reduced.details["trace_v"]) <= 1e-6, (name, p)
            assert full.value == reduced.value, (name, p)
    for d in (2, 3):
        n = identity_choi(d)
        assert abs(P.shadow_capacity(n, 1.0).details["trace_v"]
                   - P.shadow_capacity_gamma_one(n).details["trace_v"]) <= 1e-6


def test_criterion_06_approximate_simulation_curves():
    grid = np.linspace(0.9, 1.2, 31)
    source_id = identity_choi(2)
    at_one = {}
    for name, make in CONSTRUCTORS.items():
        n = make(0.9)
        panels = {"communication": (n, identity_choi(2)), "formation": (source_id, tensor_power(n, 2))}
        for panel, (src, tgt) in panels.items():
            results = [P.min_error_ns(src, tgt, float(g)) for g in grid]
            values = [r.value for r in results]
            # (a) non-increasing in the budget
            assert all(b <= a + 1e-7 for a, b in zip(values, values[1:])), (name, panel)
            assert max(r.gap for r in results) <= 1e-7
            ns = P.min_error_ns(src, tgt, 1.0)
            quantum = P.min_error_quantum(src, tgt)
            assert ns.gap <= 1e-7 and quantum.gap <= 1e-7
            # (b) shadow codes never do worse than a single quantum code at γ = 1
            assert ns.value <= quantum.value + 1e-7, (name, panel, ns.value, quantum.value)
            at_one[(name, panel)] = (ns.value, quantum.value)
    # (c) the quantum error is far above the shadow error for two depolarizing uses
    ns, quantum = at_one[("depolarizing", "formation")]
    assert quantum >= 1.5 * ns, (ns, quantum)


def test_criterion_07_simulation_cost_staircase():
    m = identity_choi(4)
    mismatches = []
    for gamma in (1.0, 1.5, 2.0, 2.5, 3.0, 3.4):
        value = P.shadow_sim_cost(m, gamma).value
        if value != 2:
            mismatches.append((gamma, value, 2))
    for gamma in (7.0, 8.0, 10.0):
        value = P.shadow_sim_cost(m, gamma).value
        if value != 1:
            mismatches.append((gamma, value, 1))
    anchor = P.formation_zero_error_cost(2, identity_choi(3)).value
    assert abs(anchor - identity_sim_cost_formula(2, 3)) <= 1e-5
    # where a 3-level source suffices, the staircase sits at log2 3
    three_level = P.formation_zero_error_cost(3, m).value
    for gamma in (4.0, 5.0, 6.0):
        value = P.shadow_sim_cost(m, gamma).value
        if three_level <= gamma and value != math.log2(3):
            mismatches.append((gamma, value, math.log2(3)))
    assert not mismatches, mismatches


def test_criterion_08_diamond_distance_oracle():
    rng = np.random.default_rng(8)
    for _ in range(20):
        a, b = random_cptp(2, 2, rng), random_cptp(2, 2, rng)
        value = P.diamond_distance(a, b)
        lower = brute_force_diamond(a, b, samples=10_000, rng=rng)
        assert lower <= value + 1e-9, (value, lower)
        assert value - lower <= 1e-3, (value, lower)


def test_criterion_09_sampler_statistics():
    n = depolarizing_choi(0.9)
    code = P.comm_zero_error_cost(n, 2).realized_code
    dec = branch_decomposition(code, n)
    assert abs(dec.cost - 7 / 6) <= 1e-6
    rounds = hoeffding_rounds(7 / 6, 0.05, 0.01)
    z, zero = np.diag([1.0, -1.0]), np.diag([1.0, 0.0])
    hits = sum(abs(run(SamplingPlan(dec, z, zero, rounds, seed=s)).xi - 1) < 0.05 for s in range(200))
    assert hits / 200 >= 0.96, hits


def test_criterion_10_hpts_decomposition_round_trip():
    rng = np.random.default_rng(10)
    for _ in range(100):
        din, dout = rng.integers(1, 4, size=2)
        a, b = random_cptp(din, dout, rng), random_cptp(din, dout, rng)
        wa, wb = rng.uniform(0, 3, size=2)
        v = VirtualChannel(wa * a - wb * b, wa - wb)
        dec = decompose_hpts(v)
        err = np.linalg.norm(dec.p_plus * dec.choi_plus.matrix - dec.p_minus * dec.choi_minus.matrix
                             - v.choi.matrix)
        assert err <= 1e-8
        assert is_cptp(dec.choi_plus) and is_cptp(dec.choi_minus)
        assert abs(dec.scaling - v.scaling) <= 1e-8
