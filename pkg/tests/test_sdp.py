import numpy as np
import pytest

from shadowsim import sdp
from shadowsim.linalg import phi_matrix


def two_by_two_program():
    # min x  s.t.  [[x, 1], [1, x]] ⪰ 0
    prog = sdp.SdpProgram(real=True)
    prog.add_block("x", 1, cone="free")
    prog.add_psd_constraint({"x": lambda v: v[..., :1, :1] * np.eye(2)}, offset=np.array([[0.0, 1.0], [1.0, 0.0]]))
    prog.set_objective({"x": 1.0}, sense="min")
    return prog


def density_program(c, real=False):
    # min tr[C X]  s.t.  X ⪰ 0, tr X = 1   (value: smallest eigenvalue of C)
    prog = sdp.SdpProgram(real=real)
    prog.add_block("X", c.shape[0])
    prog.add_equality({"X": 1.0}, 1.0)
    prog.set_objective({"X": c}, sense="min")
    return prog


@pytest.mark.parametrize("backend", ["clarabel", "cvxopt"])
def test_determinant_example(backend):
    sol = sdp.solve(two_by_two_program(), backend=backend)
    assert sol.status == "optimal"
    assert abs(sol.primal_value - 1) < 1e-7
    assert abs(sol.dual_value - 1) < 1e-7


@pytest.mark.parametrize("backend", ["clarabel", "cvxopt"])
def test_unit_trace_maximum(backend):
    prog = sdp.SdpProgram()
    prog.add_block("X", 3)
    prog.add_equality({"X": 1.0}, 1.0)
    prog.set_objective({"X": 1.0}, sense="max")
    sol = sdp.solve(prog, backend=backend)
    assert sol.status == "optimal" and abs(sol.primal_value - 1) < 1e-7


def test_rank_one_optimum_with_dual_multiplier():
    phi = phi_matrix(2)
    prog = sdp.SdpProgram()
    prog.add_block("X", 4)
    prog.add_equality({"X": phi}, 1.0)
    prog.set_objective({"X": 1.0}, sense="min")
    sol = sdp.solve(prog)
    assert abs(sol.primal_value - 1) < 1e-7
    assert np.abs(sol["X"] - phi).max() < 1e-5
    # the multiplier y = 1 on tr[Φ X] certifies optimality: I - yΦ ⪰ 0 and b·y = 1
    assert abs(sol.multipliers[0][0] - 1) < 1e-6


def test_infeasible_status():
    prog = sdp.SdpProgram()
    prog.add_block("X", 2)
    prog.add_equality({"X": 1.0}, -1.0)
    prog.set_objective({"X": 1.0})
    assert sdp.solve(prog).status == "infeasible"


def test_inconsistent_equalities_report_infeasible():
    prog = sdp.SdpProgram()
    prog.add_block("t", 1, cone="free")
    prog.add_equality({"t": 1.0}, 1.0)
    prog.add_equality({"t": 2.0}, 3.0)
    prog.set_objective({"t": 1.0})
    assert sdp.solve(prog).status == "infeasible"


def test_unbounded_status():
    prog = sdp.SdpProgram()
    prog.add_block("t", 1, cone="free")
    prog.add_block("X", 2)
    prog.add_equality({"X": 1.0, "t": -1.0}, 0.0)
    prog.set_objective({"t": 1.0}, sense="max")
    assert sdp.solve(prog).status == "unbounded"


def test_redundant_equalities_are_presolved():
    prog = sdp.SdpProgram()
    prog.add_block("X", 2)
    for _ in range(3):
        prog.add_equality({"X": 1.0}, 1.0)
    prog.add_equality({"X": 2.0}, 2.0)
    prog.set_objective({"X": np.diag([1.0, 2.0])})
    sol = sdp.solve(prog)
    assert sol.status == "optimal" and abs(sol.primal_value - 1) < 1e-7


def test_complex_program_matches_eigenvalue(rng):
    # the real embedding has to reproduce a Hermitian optimum exactly
    for _ in range(20):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        c = g + g.conj().T
        sol = sdp.solve(density_program(c))
        exact = np.linalg.eigvalsh(c).min()
        assert sol.status == "optimal"
        assert abs(sol.primal_value - exact) < 1e-6
        x = sol["X"]
        assert abs(np.trace(c @ x).real - sol.primal_value) < 1e-9
        assert np.linalg.eigvalsh(x).min() > -1e-8


def test_real_flag_agrees_with_complex_solve(rng):
    g = rng.normal(size=(4, 4))
    c = g + g.T
    a = sdp.solve(density_program(c, real=True)).primal_value
    b = sdp.solve(density_program(c.astype(complex), real=False)).primal_value
    assert abs(a - b) < 1e-7


def test_backends_agree(rng):
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    c = g + g.conj().T
    a = sdp.solve(density_program(c), backend="clarabel").primal_value
    b = sdp.solve(density_program(c), backend="cvxopt").primal_value
    assert abs(a - b) < 1e-6


def test_weak_duality_and_reproducibility(rng):
    for _ in range(5):
        g = rng.normal(size=(3, 3))
        prog = density_program(g + g.T, real=True)
        s1, s2 = sdp.solve(prog), sdp.solve(prog)
        assert s1.dual_value <= s1.primal_value + 1e-7
        assert abs(s1.primal_value - s2.primal_value) < 1e-9


def test_check_feasible_examples():
    prog = sdp.SdpProgram()
    prog.add_block("X", 2)
    prog.add_block("Y", 2)
    prog.add_equality({"X": 1.0, "Y": -1.0}, np.zeros((2, 2)))
    ok, worst = sdp.check_feasible(prog, {"X": np.zeros((2, 2)), "Y": np.zeros((2, 2))})
    assert ok and worst == 0
    ok, worst = sdp.check_feasible(prog, {"X": np.diag([1.0, -0.5]), "Y": np.diag([1.0, -0.5])})
    assert not ok and abs(worst - 0.5) < 1e-12
    with pytest.raises(ValueError):
        sdp.check_feasible(prog, {"X": np.zeros((3, 3)), "Y": np.zeros((2, 2))})
    with pytest.raises(ValueError):
        sdp.check_feasible(prog, {"X": np.zeros((2, 2))})


def test_fill_slacks_completes_psd_constraints():
    prog = two_by_two_program()
    vals = prog.fill_slacks({"x": np.array([[1.5]])})
    ok, _ = sdp.check_feasible(prog, vals)
    assert ok
    ok, _ = sdp.check_feasible(prog, prog.fill_slacks({"x": np.array([[0.5]])}))
    assert not ok


def test_tight_tolerances_can_downgrade_status():
    sol = sdp.solve(two_by_two_program(), gap_tol=1e-30, res_tol=1e-30)
    assert sol.status == "numerical_failure"


def test_environment_tolerances(monkeypatch):
    monkeypatch.setenv("SHADOWSIM_GAP_TOL", "1e-3")
    monkeypatch.setenv("SHADOWSIM_RES_TOL", "2e-4")
    assert sdp.default_tolerances() == (1e-3, 2e-4)


def test_program_validation():
    prog = sdp.SdpProgram()
    prog.add_block("X", 2)
    with pytest.raises(ValueError):
        prog.add_block("X", 2)
    with pytest.raises(ValueError):
        prog.add_block("Y", 2, cone="soc")
    with pytest.raises(KeyError):
        prog.add_equality({"Z": 1.0}, 0.0)
    with pytest.raises(ValueError):
        prog.set_objective({"X": 1.0}, sense="up")


def test_dump_format():
    text = sdp.dump(two_by_two_program())
    lines = text.splitlines()
    assert lines[0].startswith("sdp min real nvars")
    assert any(line.startswith("block x 1 free") for line in lines)
    assert any(line.startswith("b ") for line in lines)


class _Failing:
    name = "failing"

    def solve(self, data, gap_tol, res_tol, max_iter):
        return sdp.RawResult(sdp.NUMERICAL_FAILURE, None, None, raw_status="gave up")


def test_fallback_backend_rescues_failure():
    sol = sdp.solve(two_by_two_program(), backend=_Failing())
    assert sol.status == "optimal" and sol.backend == "cvxopt"
    sol = sdp.solve(two_by_two_program(), backend=_Failing(), fallback=None)
    assert sol.status == "numerical_failure" and sol.raw_status == "gave up"
