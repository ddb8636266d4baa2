"""Semidefinite programs for shadow simulation under no-signaling codes.

Every task builds an :class:`~shadowsim.sdp.SdpProgram`, solves it and turns the
optimum into the reported quantity.  Variable names follow the operators they
represent:

* ``S+``/``S-`` code Choi operators on (A', B, A, B') with weights ``p+``/``p-``;
* ``Z`` the witness block of the diamond-distance bound;
* ``T±``, ``V±`` (communication) and ``Y±``, ``V±`` (formation) are the blocks left
  after averaging the code over ``U ⊗ Ū`` on the noiseless side.

The reduced programs also return a reconstructed code on (A', B, A, B'), so a
result can always be audited by composing the code with the source channel.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import sdp
from .channels import ChoiOperator, SuperchannelChoi, VirtualChannel, apply_code, compose_superchannel
from .linalg import embed, gamma_matrix, hermitian_part, partial_trace, permute_systems, phi_matrix

log = logging.getLogger(__name__)

#: Added to / subtracted from ``tr V`` before taking floor / ceil of its square root.
BOUNDARY_TOL = 1e-6
#: Results whose ``√tr V`` lies this close to an integer carry the ``near_integer`` flag.
NEAR_INTEGER_TOL = 1e-4


@dataclass(frozen=True)
class TaskRequest:
    """Inputs of one computation: a source and target plus either a budget or a tolerance."""

    task: str
    source: ChoiOperator | int | None = None
    target: ChoiOperator | int | None = None
    gamma: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.gamma is not None and self.eps is not None:
            raise ValueError("set either gamma or eps, not both")


@dataclass
class TaskResult:
    value: float
    status: str
    solution: sdp.SdpSolution | None = None
    realized_code: SuperchannelChoi | None = None
    flags: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.solution.duality_gap if self.solution is not None else float("nan")

    def to_dict(self) -> dict:
        out = {"value": _json_float(self.value), "status": self.status, "gap": _json_float(self.gap),
               "flags": list(self.flags),
               "details": {k: _json_float(v) if isinstance(v, float) else v for k, v in self.details.items()}}
        if self.solution is not None:
            out["primal"] = _json_float(self.solution.primal_value)
            out["dual"] = _json_float(self.solution.dual_value)
            out["residual"] = _json_float(self.solution.max_residual)
        return out


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


# ---------------------------------------------------------------------------
# small helpers for building terms


def _is_real(*mats: np.ndarray) -> bool:
    return all(np.abs(np.asarray(m).imag).max(initial=0.0) == 0.0 for m in mats)


def _ptrace(dims, keep) -> Callable:
    return lambda x: partial_trace(x, dims, keep)


def _scalar_to_identity(k: int, coef: float = 1.0) -> Callable:
    """Term sending a 1x1 block ``p`` to ``coef * p * I_k``."""
    eye = np.eye(k)
    return lambda x: coef * x[..., :1, :1] * eye


def _trace_to_identity(k: int, coef: float) -> Callable:
    """Term sending a block ``X`` to ``coef * tr[X] * I_k``."""
    eye = np.eye(k)
    return lambda x: coef * np.trace(x, axis1=-2, axis2=-1)[..., None, None] * eye


def _functional_times(c: np.ndarray, k_mat: np.ndarray) -> Callable:
    """Term sending ``X`` to ``tr[c X] * k_mat``."""
    return lambda x: np.einsum("ij,...ji->...", c, x)[..., None, None] * k_mat


def _trace_times(k_mat: np.ndarray) -> Callable:
    """Term sending ``X`` to ``tr[X] * k_mat``."""
    return lambda x: np.trace(x, axis1=-2, axis2=-1)[..., None, None] * k_mat


def _scale(c: float) -> Callable:
    return lambda x: c * x


def _solve(prog: sdp.SdpProgram, what: str, allow_infeasible: bool = False) -> sdp.SdpSolution:
    sol = sdp.solve(prog)
    if sol.status == sdp.OPTIMAL:
        return sol
    if allow_infeasible and sol.status == sdp.INFEASIBLE:
        return sol
    if sol.status == sdp.INFEASIBLE:
        raise sdp.SdpError(f"{what}: program reported infeasible, which should not happen", sol)
    raise sdp.SdpError(f"{what}: solver ended with status {sol.status} ({sol.raw_status}), "
                       f"gap={sol.duality_gap:.2e} residual={sol.max_residual:.2e}", sol)


def _scalar(sol: sdp.SdpSolution, name: str) -> float:
    return float(np.real(sol[name][0, 0]))


# ---------------------------------------------------------------------------
# general no-signaling programs


def _ns_difference_terms(dims) -> tuple[Callable, Callable]:
    """Linear maps whose kernels are the two no-signaling conditions."""
    da1, db, da, db1 = dims
    dl = [da1, db, da, db1]

    def b_to_a(x):
        lhs = partial_trace(x, dl, [0, 1, 2])
        rhs = embed(partial_trace(x, dl, [0, 2]), [da1, db, da], [0, 2]) / db
        return lhs - rhs

    def a_to_b(x):
        lhs = partial_trace(x, dl, [0, 1, 3])
        rhs = embed(partial_trace(x, dl, [1, 3]), [da1, db, db1], [1, 2]) / da1
        return lhs - rhs

    return b_to_a, a_to_b


def _general_program(n: ChoiOperator, m: ChoiOperator, *, gamma: float | None = None,
                     eps: float | None = None, quantum: bool = False) -> sdp.SdpProgram:
    """Build the general program.

    With ``eps`` set the error is fixed and the objective is ``p+ + p-`` (minimum
    cost); otherwise the objective is the error, bounded by ``gamma`` if given.
    ``quantum`` fixes ``p+ = 1, p- = 0`` (a single CPTP no-signaling code).
    """
    da, db = n.dims
    da1, db1 = m.dims
    dims = (da1, db, da, db1)
    side = da1 * db * da * db1
    prog = sdp.SdpProgram(real=_is_real(n.matrix, m.matrix))
    parts = ["S+"] if quantum else ["S+", "S-"]
    for s in parts:
        prog.add_block(s, side)
    if not quantum:
        prog.add_block("p+", 1)
        prog.add_block("p-", 1)
    prog.add_block("Z", da1 * db1)
    if eps is None:
        prog.add_block("eps", 1, cone="free")
    jn = n.matrix if prog.real is False else n.matrix.real
    jm = m.matrix if prog.real is False else m.matrix.real

    # Z ⪰ J^M - J^M̃
    terms: dict[str, Any] = {"Z": _scale(1.0)}
    terms["S+"] = lambda x: apply_code(x, jn, dims)
    if not quantum:
        terms["S-"] = lambda x: -apply_code(x, jn, dims)
    prog.add_psd_constraint(terms, offset=-jm, name="_witness")

    # tr_B' Z ⪯ (2ε + 1 - p+ + p-)/2 · I
    red = _ptrace([da1, db1], [0])
    terms = {"Z": lambda x: -red(x)}
    const = 0.5
    if eps is None:
        terms["eps"] = _scalar_to_identity(da1)
    else:
        const += float(eps)
    if quantum:
        const -= 0.5  # p+ - p- = 1
    else:
        terms["p+"] = _scalar_to_identity(da1, -0.5)
        terms["p-"] = _scalar_to_identity(da1, 0.5)
    prog.add_psd_constraint(terms, offset=const * np.eye(da1), name="_error_bound")

    b_to_a, a_to_b = _ns_difference_terms(dims)
    for s, p in zip(parts, ["p+", "p-"]):
        t = {s: _ptrace([da1, db, da, db1], [0, 1])}
        if quantum:
            prog.add_equality(t, np.eye(da1 * db), label=f"trace:{s}")
        else:
            t[p] = _scalar_to_identity(da1 * db, -1.0)
            prog.add_equality(t, np.zeros((da1 * db, da1 * db)), label=f"trace:{s}")
        prog.add_equality({s: b_to_a}, np.zeros((da1 * db * da,) * 2), label=f"ns_b_to_a:{s}")
        prog.add_equality({s: a_to_b}, np.zeros((da1 * db * db1,) * 2), label=f"ns_a_to_b:{s}")

    if eps is None:
        if gamma is not None and not quantum:
            prog.add_psd_constraint({"p+": -1.0, "p-": -1.0}, offset=np.array([[float(gamma)]]), name="_budget")
        prog.set_objective({"eps": 1.0}, sense="min")
    else:
        prog.set_objective({"p+": 1.0, "p-": 1.0}, sense="min")
    return prog


def _general_code(sol: sdp.SdpSolution, dims, quantum: bool) -> SuperchannelChoi:
    plus = sol["S+"]
    if quantum:
        return SuperchannelChoi(plus, np.zeros_like(plus), dims, 1.0, 0.0)
    return SuperchannelChoi(plus, sol["S-"], dims, _scalar(sol, "p+"), _scalar(sol, "p-"))


def is_identity_channel(choi: ChoiOperator) -> bool:
    return (choi.in_dim == choi.out_dim and choi.in_dim >= 2
            and bool(np.abs(choi.matrix - gamma_matrix(choi.in_dim)).max() <= 1e-12))


def _route(n: ChoiOperator, m: ChoiOperator, method: str) -> str:
    if method not in ("auto", "general"):
        raise ValueError(f"unknown method {method!r}")
    if method == "general":
        return "general"
    if is_identity_channel(n):
        return "formation"
    if is_identity_channel(m):
        return "communication"
    return "general"


def min_error_ns(n: ChoiOperator, m: ChoiOperator, gamma: float, method: str = "auto") -> TaskResult:
    """Smallest diamond-distance error reachable from ``n`` to ``m`` with sampling cost ≤ ``gamma``.

    With ``method="auto"`` an identity source or target switches to the equivalent
    program reduced by ``U ⊗ Ū`` averaging (same optimum, far fewer variables);
    ``method="general"`` always solves the full program over code Choi operators.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    route = _route(n, m, method)
    if route == "formation":
        res = formation_min_error(n.in_dim, m, gamma)
    elif route == "communication":
        res = comm_min_error(n, m.in_dim, gamma)
    else:
        sol = _solve(_general_program(n, m, gamma=gamma), "min_error_ns")
        dims = (m.in_dim, n.out_dim, n.in_dim, m.out_dim)
        code = _general_code(sol, dims, quantum=False)
        res = TaskResult(sol.primal_value, sol.status, sol, code,
                         details={"p_plus": code.p_plus, "p_minus": code.p_minus})
    res.details["route"] = route
    return res


def min_cost_ns(n: ChoiOperator, m: ChoiOperator, eps: float, method: str = "auto") -> TaskResult:
    """Smallest sampling cost reaching error ≤ ``eps``; ``status == "infeasible"`` below the error floor.

    ``method`` works as in :func:`min_error_ns`.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    route = _route(n, m, method)
    if route == "formation":
        res = formation_min_cost(n.in_dim, m, eps)
    elif route == "communication":
        res = comm_min_cost(n, m.in_dim, eps)
    else:
        sol = _solve(_general_program(n, m, eps=eps), "min_cost_ns", allow_infeasible=True)
        if sol.status == sdp.INFEASIBLE:
            res = TaskResult(math.inf, sdp.INFEASIBLE, sol)
        else:
            dims = (m.in_dim, n.out_dim, n.in_dim, m.out_dim)
            code = _general_code(sol, dims, quantum=False)
            res = TaskResult(sol.primal_value, sol.status, sol, code,
                             details={"p_plus": code.p_plus, "p_minus": code.p_minus})
    res.details["route"] = route
    return res


def min_error_quantum(n: ChoiOperator, m: ChoiOperator) -> TaskResult:
    """Smallest error of a single CPTP no-signaling code (the conventional simulation baseline)."""
    prog = _general_program(n, m, quantum=True)
    sol = _solve(prog, "min_error_quantum")
    dims = (m.in_dim, n.out_dim, n.in_dim, m.out_dim)
    return TaskResult(sol.primal_value, sol.status, sol, _general_code(sol, dims, quantum=True))


# ---------------------------------------------------------------------------
# diamond distance between trace-scaling maps


def _as_virtual(v: VirtualChannel | ChoiOperator) -> VirtualChannel:
    return v if isinstance(v, VirtualChannel) else VirtualChannel.from_choi(v)


def diamond_program(v1: VirtualChannel, v2: VirtualChannel) -> sdp.SdpProgram:
    din, dout = v1.choi.dims
    diff = v1.choi.matrix - v2.choi.matrix
    prog = sdp.SdpProgram(real=_is_real(diff))
    prog.add_block("Z", din * dout)
    prog.add_block("mu", 1, cone="free")
    prog.add_psd_constraint({"Z": _scale(1.0)}, offset=-(diff.real if prog.real else diff), name="_witness")
    red = _ptrace([din, dout], [0])
    prog.add_psd_constraint({"mu": _scalar_to_identity(din), "Z": lambda x: -red(x)}, name="_bound")
    prog.set_objective({"mu": 1.0}, sense="min", constant=-0.5 * (v1.scaling - v2.scaling))
    return prog


def diamond_distance(v1: VirtualChannel | ChoiOperator, v2: VirtualChannel | ChoiOperator) -> float:
    """Half the diamond norm of ``v1 - v2`` for trace-scaling maps.

    The solver's witness is repaired into an exactly feasible point (shifted by a
    multiple of the identity, ``μ`` recomputed from the largest eigenvalue), so the
    returned number is a certified upper bound that exceeds the optimum by at most
    the solver's accuracy.
    """
    return diamond_result(v1, v2).value


def diamond_result(v1: VirtualChannel | ChoiOperator, v2: VirtualChannel | ChoiOperator) -> TaskResult:
    v1, v2 = _as_virtual(v1), _as_virtual(v2)
    if v1.choi.dims != v2.choi.dims:
        raise ValueError(f"dimension mismatch: {v1.choi.dims} vs {v2.choi.dims}")
    prog = diamond_program(v1, v2)
    sol = _solve(prog, "diamond_distance")
    value = certified_diamond_bound(v1, v2, sol["Z"])
    return TaskResult(value, sol.status, sol, details={"solver_value": sol.primal_value})


def certified_diamond_bound(v1: VirtualChannel, v2: VirtualChannel, z: np.ndarray) -> float:
    """Objective of the nearest feasible point ``Z + sI`` of the diamond program."""
    din, dout = v1.choi.dims
    diff = v1.choi.matrix - v2.choi.matrix
    z = hermitian_part(np.asarray(z, dtype=complex))
    s = max(0.0, -np.linalg.eigvalsh(z).min(), -np.linalg.eigvalsh(z - diff).min())
    z = z + s * np.eye(din * dout)
    mu = float(np.linalg.eigvalsh(partial_trace(z, [din, dout], [0])).max())
    return mu - 0.5 * (v1.scaling - v2.scaling)


# ---------------------------------------------------------------------------
# communication: target identity of dimension d


def _twirled_code(t_blocks, v_blocks, d: int, da: int, db: int, weights) -> SuperchannelChoi:
    """Code on (A', B, A, B') from twirled blocks ``T`` (on AB) and ``V`` (on A).

    ``J = Φ_{A'B'} ⊗ T/d + (I - Φ_{A'B'}) ⊗ (V ⊗ I - T)/(d(d²-1))``.
    """
    phi = phi_matrix(d)
    rest = np.eye(d * d) - phi
    mats = []
    for t, v in zip(t_blocks, v_blocks):
        t_old = t / d
        w_old = (np.kron(v, np.eye(db)) - t) / (d * (d * d - 1))
        j = np.kron(phi, t_old) + np.kron(rest, w_old)  # order A' B' A B
        mats.append(permute_systems(j, [d, d, da, db], [0, 3, 2, 1]))
    return SuperchannelChoi(mats[0], mats[1], (d, db, da, d), weights[0], weights[1])


def _comm_blocks(prog: sdp.SdpProgram, da: int, db: int, d: int) -> None:
    """Blocks ``T±, V±`` with ``0 ⪯ T± ⪯ V± ⊗ I`` and ``tr_A T± = tr V± / d² · I``."""
    for s in "+-":
        prog.add_block(f"T{s}", da * db)
        prog.add_block(f"V{s}", da)
        prog.add_psd_constraint({f"V{s}": lambda x: embed(x, [da, db], [0]), f"T{s}": _scale(-1.0)},
                                name=f"_cap{s}")
        prog.add_equality({f"T{s}": _ptrace([da, db], [1]), f"V{s}": _trace_to_identity(db, -1.0 / d ** 2)},
                          np.zeros((db, db)), label=f"marginal{s}")


def comm_program(n: ChoiOperator, d: int, *, gamma: float | None = None, eps: float | None = None
                 ) -> sdp.SdpProgram:
    if d < 2:
        raise ValueError("target dimension must be >= 2")
    da, db = n.dims
    prog = sdp.SdpProgram(real=_is_real(n.matrix))
    jt = n.matrix.T.real if prog.real else n.matrix.T
    _comm_blocks(prog, da, db, d)
    prog.add_block("Z", d * d)
    if eps is None:
        prog.add_block("eps", 1, cone="free")
    phi = phi_matrix(d)
    k_t = (d * d * phi - np.eye(d * d)) / (d * (d * d - 1))
    k_v = (np.eye(d * d) - phi) / (d * (d * d - 1))
    if prog.real:
        k_t, k_v, phi = k_t.real, k_v.real, phi.real
    # Z ⪰ dΦ - J^M̃
    prog.add_psd_constraint({
        "Z": _scale(1.0),
        "T+": _functional_times(jt, k_t), "T-": _functional_times(jt, -k_t),
        "V+": _trace_times(k_v), "V-": _trace_times(-k_v),
    }, offset=-d * phi, name="_witness")
    # tr_B' Z ⪯ ½(2ε + 1 - tr[V+ - V-]/d²) I
    red = _ptrace([d, d], [0])
    terms = {"Z": lambda x: -red(x), "V+": _trace_to_identity(d, -0.5 / d ** 2),
             "V-": _trace_to_identity(d, 0.5 / d ** 2)}
    const = 0.5
    if eps is None:
        terms["eps"] = _scalar_to_identity(d)
    else:
        const += float(eps)
    prog.add_psd_constraint(terms, offset=const * np.eye(d), name="_error_bound")
    if eps is None:
        if gamma is not None:
            prog.add_psd_constraint({"V+": -1.0 / d ** 2, "V-": -1.0 / d ** 2},
                                    offset=np.array([[float(gamma)]]), name="_budget")
        prog.set_objective({"eps": 1.0}, sense="min")
    else:
        prog.set_objective({"V+": 1.0 / d ** 2, "V-": 1.0 / d ** 2}, sense="min")
    return prog


def _comm_code(sol: sdp.SdpSolution, n: ChoiOperator, d: int) -> SuperchannelChoi:
    da, db = n.dims
    w = [float(np.real(np.trace(sol[f"V{s}"]))) / d ** 2 for s in "+-"]
    return _twirled_code([sol["T+"], sol["T-"]], [sol["V+"], sol["V-"]], d, da, db, w)


def comm_min_error(n: ChoiOperator, d: int, gamma: float) -> TaskResult:
    """Minimum error of simulating the identity on ``d`` levels through ``n`` at cost ≤ ``gamma``."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    sol = _solve(comm_program(n, d, gamma=gamma), "comm_min_error")
    code = _comm_code(sol, n, d)
    return TaskResult(sol.primal_value, sol.status, sol, code,
                      details={"p_plus": code.p_plus, "p_minus": code.p_minus})


def comm_min_cost(n: ChoiOperator, d: int, eps: float) -> TaskResult:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    sol = _solve(comm_program(n, d, eps=eps), "comm_min_cost", allow_infeasible=True)
    if sol.status == sdp.INFEASIBLE:
        return TaskResult(math.inf, sdp.INFEASIBLE, sol)
    code = _comm_code(sol, n, d)
    return TaskResult(sol.primal_value, sol.status, sol, code,
                      details={"p_plus": code.p_plus, "p_minus": code.p_minus})


def comm_zero_error_program(n: ChoiOperator, d: int) -> sdp.SdpProgram:
    if d < 2:
        raise ValueError("target dimension must be >= 2")
    da, db = n.dims
    prog = sdp.SdpProgram(real=_is_real(n.matrix))
    jt = n.matrix.T.real if prog.real else n.matrix.T
    _comm_blocks(prog, da, db, d)
    prog.add_equality({"T+": jt, "T-": -jt}, d * d, label="exact_map")
    prog.add_equality({"V+": 1.0, "V-": -1.0}, d * d, label="exact_scaling")
    prog.set_objective({"V+": 1.0 / d ** 2, "V-": 1.0 / d ** 2}, sense="min")
    return prog


def comm_zero_error_cost(n: ChoiOperator, d: int) -> TaskResult:
    """Zero-error sampling cost of simulating the ``d``-level identity through ``n``.

    Channels that cannot do it at any cost come back with ``status == "infeasible"``
    and ``value == inf``.
    """
    sol = _solve(comm_zero_error_program(n, d), "comm_zero_error_cost", allow_infeasible=True)
    if sol.status == sdp.INFEASIBLE:
        return TaskResult(math.inf, sdp.INFEASIBLE, sol)
    code = _comm_code(sol, n, d)
    return TaskResult(sol.primal_value, sol.status, sol, code,
                      details={"p_plus": code.p_plus, "p_minus": code.p_minus})


def comm_zero_error_dual_program(n: ChoiOperator, d: int) -> sdp.SdpProgram:
    """Lagrange dual of :func:`comm_zero_error_program`.

    maximize ``λ - μ`` over ``M± ⪰ 0`` and free ``N±`` with
    ``M± + d² I ⊗ N± ⪰ ±λ J^T`` and ``tr_B M± = (1 - tr N± ± μ) I``.
    """
    da, db = n.dims
    prog = sdp.SdpProgram(real=_is_real(n.matrix))
    jt = n.matrix.T.real if prog.real else n.matrix.T
    prog.add_block("lambda", 1, cone="free")
    prog.add_block("mu", 1, cone="free")
    for s, sign in (("+", 1.0), ("-", -1.0)):
        prog.add_block(f"M{s}", da * db)
        prog.add_block(f"N{s}", db, cone="free")
        prog.add_psd_constraint({f"M{s}": _scale(1.0),
                                 f"N{s}": (lambda x: d * d * embed(x, [da, db], [1])),
                                 "lambda": (lambda sg: lambda x: -sg * x[..., :1, :1] * jt)(sign)},
                                name=f"_dual{s}")
        prog.add_equality({f"M{s}": _ptrace([da, db], [0]),
                           f"N{s}": _trace_to_identity(da, 1.0),
                           "mu": _scalar_to_identity(da, -sign)},
                          np.eye(da), label=f"dual_marginal{s}")
    prog.set_objective({"lambda": 1.0, "mu": -1.0}, sense="max")
    return prog


def capacity_program(n: ChoiOperator, gamma: float) -> sdp.SdpProgram:
    """Maximize ``tr V`` over the capacity constraints at cost budget ``gamma``."""
    if gamma < 1:
        raise ValueError("the capacity program needs gamma >= 1")
    da, db = n.dims
    prog = sdp.SdpProgram(real=_is_real(n.matrix))
    jt = n.matrix.T.real if prog.real else n.matrix.T
    g = (gamma - 1.0) / 2.0
    prog.add_block("T", da * db, cone="free")
    prog.add_block("V", da, cone="free")
    prog.add_block("R", da * db)
    prog.add_block("W", da)
    lift = lambda x: embed(x, [da, db], [0])  # noqa: E731
    prog.add_equality({"T": jt, "V": -1.0}, 0.0, label="exact_map")
    prog.add_equality({"T": _ptrace([da, db], [1])}, np.eye(db), label="marginal")
    prog.add_psd_constraint({"T": _scale(1.0), "R": _scale(1.0)}, name="_lower")
    prog.add_psd_constraint({"V": lift, "W": lift, "T": _scale(-1.0), "R": _scale(-1.0)}, name="_upper")
    prog.add_psd_constraint({"W": lift, "R": _scale(-1.0)}, name="_negative_cap")
    prog.add_equality({"R": _ptrace([da, db], [1])}, g * np.eye(db), label="negative_marginal")
    prog.add_equality({"W": 1.0, "V": -g}, 0.0, label="negative_weight")
    prog.set_objective({"V": 1.0}, sense="max")
    return prog


def capacity_program_gamma_one(n: ChoiOperator) -> sdp.SdpProgram:
    """Capacity program with ``R = W = 0``: the conventional no-signaling zero-error capacity."""
    da, db = n.dims
    prog = sdp.SdpProgram(real=_is_real(n.matrix))
    jt = n.matrix.T.real if prog.real else n.matrix.T
    prog.add_block("T", da * db)
    prog.add_block("V", da, cone="free")
    prog.add_equality({"T": jt, "V": -1.0}, 0.0, label="exact_map")
    prog.add_equality({"T": _ptrace([da, db], [1])}, np.eye(db), label="marginal")
    prog.add_psd_constraint({"V": lambda x: embed(x, [da, db], [0]), "T": _scale(-1.0)}, name="_upper")
    prog.set_objective({"V": 1.0}, sense="max")
    return prog


def _near_integer_flag(root: float, flags: list[str], what: str) -> None:
    if abs(root - round(root)) < NEAR_INTEGER_TOL:
        flags.append("near_integer")
        log.warning("%s: sqrt(tr V) = %.9f is within %.0e of an integer; check the rounding",
                    what, root, NEAR_INTEGER_TOL)


def _capacity_from_trace(trace_v: float, flags: list[str]) -> float:
    root = math.sqrt(max(trace_v, 0.0))
    _near_integer_flag(root, flags, "shadow_capacity")
    dim = math.floor(math.sqrt(max(trace_v + BOUNDARY_TOL, 0.0)))
    return math.log2(dim) if dim >= 1 else -math.inf


def shadow_capacity(n: ChoiOperator, gamma: float) -> TaskResult:
    """One-shot zero-error shadow capacity ``log2 ⌊√tr V*⌋`` at cost budget ``gamma``."""
    sol = _solve(capacity_program(n, gamma), "shadow_capacity")
    trace_v = sol.primal_value
    flags: list[str] = []
    value = _capacity_from_trace(trace_v, flags)
    return TaskResult(value, sol.status, sol, flags=flags,
                      details={"trace_v": trace_v, "dimension": int(round(2 ** value)) if value > -math.inf else 0})


def shadow_capacity_gamma_one(n: ChoiOperator) -> TaskResult:
    sol = _solve(capacity_program_gamma_one(n), "shadow_capacity_gamma_one")
    flags: list[str] = []
    value = _capacity_from_trace(sol.primal_value, flags)
    return TaskResult(value, sol.status, sol, flags=flags, details={"trace_v": sol.primal_value})


# ---------------------------------------------------------------------------
# formation: source identity of dimension d


def _formation_code(y_blocks, v_blocks, d: int, m: ChoiOperator, weights) -> SuperchannelChoi:
    """Code on (A', B, A, B') from blocks ``Y`` (on A'B') and ``V`` (on B').

    ``J = Y/d ⊗ Φ_{AB} + (I ⊗ V - Y)/(d(d²-1)) ⊗ (I - Φ_{AB})``.
    """
    da1, db1 = m.dims
    phi = phi_matrix(d)
    rest = np.eye(d * d) - phi
    mats = []
    for y, v in zip(y_blocks, v_blocks):
        x = y / d
        wt = (np.kron(np.eye(da1), v) - y) / (d * (d * d - 1))
        j = np.kron(x, phi) + np.kron(wt, rest)  # order A' B' A B
        mats.append(permute_systems(j, [da1, db1, d, d], [0, 3, 2, 1]))
    return SuperchannelChoi(mats[0], mats[1], (da1, d, d, db1), weights[0], weights[1])


def formation_program(d: int, m: ChoiOperator, *, gamma: float | None = None, eps: float | None = None
                      ) -> sdp.SdpProgram:
    if d < 2:
        raise ValueError("source dimension must be >= 2")
    da1, db1 = m.dims
    prog = sdp.SdpProgram(real=_is_real(m.matrix))
    jm = m.matrix.real if prog.real else m.matrix
    for s in "+-":
        prog.add_block(f"Y{s}", da1 * db1)
        prog.add_block(f"V{s}", db1)
        prog.add_psd_constraint({f"V{s}": lambda x: embed(x, [da1, db1], [1]), f"Y{s}": _scale(-1.0)},
                                name=f"_cap{s}")
        prog.add_equality({f"Y{s}": _ptrace([da1, db1], [0]), f"V{s}": _trace_to_identity(da1, -1.0 / d ** 2)},
                          np.zeros((da1, da1)), label=f"marginal{s}")
    prog.add_block("Z", da1 * db1)
    if eps is None:
        prog.add_block("eps", 1, cone="free")
    prog.add_psd_constraint({"Z": _scale(1.0), "Y+": _scale(1.0), "Y-": _scale(-1.0)}, offset=-jm,
                            name="_witness")
    red = _ptrace([da1, db1], [0])
    terms = {"Z": lambda x: -red(x), "V+": _trace_to_identity(da1, -0.5 / d ** 2),
             "V-": _trace_to_identity(da1, 0.5 / d ** 2)}
    const = 0.5
    if eps is None:
        terms["eps"] = _scalar_to_identity(da1)
    else:
        const += float(eps)
    prog.add_psd_constraint(terms, offset=const * np.eye(da1), name="_error_bound")
    if eps is None:
        if gamma is not None:
            prog.add_psd_constraint({"V+": -1.0 / d ** 2, "V-": -1.0 / d ** 2},
                                    offset=np.array([[float(gamma)]]), name="_budget")
        prog.set_objective({"eps": 1.0}, sense="min")
    else:
        prog.set_objective({"V+": 1.0 / d ** 2, "V-": 1.0 / d ** 2}, sense="min")
    return prog


def _formation_result(sol: sdp.SdpSolution, d: int, m: ChoiOperator) -> TaskResult:
    w = [float(np.real(np.trace(sol[f"V{s}"]))) / d ** 2 for s in "+-"]
    code = _formation_code([sol["Y+"], sol["Y-"]], [sol["V+"], sol["V-"]], d, m, w)
    return TaskResult(sol.primal_value, sol.status, sol, code, details={"p_plus": w[0], "p_minus": w[1]})


def formation_min_error(d: int, m: ChoiOperator, gamma: float) -> TaskResult:
    """Minimum error of simulating ``m`` from a ``d``-level identity at cost ≤ ``gamma``."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    sol = _solve(formation_program(d, m, gamma=gamma), "formation_min_error")
    return _formation_result(sol, d, m)


def formation_min_cost(d: int, m: ChoiOperator, eps: float) -> TaskResult:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    sol = _solve(formation_program(d, m, eps=eps), "formation_min_cost", allow_infeasible=True)
    if sol.status == sdp.INFEASIBLE:
        return TaskResult(math.inf, sdp.INFEASIBLE, sol)
    return _formation_result(sol, d, m)


def formation_zero_error_program(d: int, m: ChoiOperator) -> sdp.SdpProgram:
    if d < 2:
        raise ValueError("source dimension must be >= 2")
    da1, db1 = m.dims
    prog = sdp.SdpProgram(real=_is_real(m.matrix))
    jm = m.matrix.real if prog.real else m.matrix
    prog.add_block("R", da1 * db1)
    prog.add_block("V+", db1)
    prog.add_block("V-", db1)
    lift = lambda x: embed(x, [da1, db1], [1])  # noqa: E731
    prog.add_equality({"V+": 1.0, "V-": -1.0}, d * d, label="exact_scaling")
    prog.add_equality({"R": _ptrace([da1, db1], [0]), "V-": _trace_to_identity(da1, -1.0 / d ** 2)},
                      np.zeros((da1, da1)), label="negative_marginal")
    prog.add_psd_constraint({"V+": lift, "R": _scale(-1.0)}, offset=-jm, name="_positive_cap")
    prog.add_psd_constraint({"V-": lift, "R": _scale(-1.0)}, name="_negative_cap")
    prog.set_objective({"V+": 1.0 / d ** 2, "V-": 1.0 / d ** 2}, sense="min")
    return prog


def formation_zero_error_cost(d: int, m: ChoiOperator) -> TaskResult:
    """Zero-error sampling cost of simulating ``m`` from a ``d``-level identity."""
    sol = _solve(formation_zero_error_program(d, m), "formation_zero_error_cost", allow_infeasible=True)
    if sol.status == sdp.INFEASIBLE:
        return TaskResult(math.inf, sdp.INFEASIBLE, sol)
    jm = m.matrix
    w = [float(np.real(np.trace(sol[f"V{s}"]))) / d ** 2 for s in "+-"]
    code = _formation_code([jm + sol["R"], sol["R"]], [sol["V+"], sol["V-"]], d, m, w)
    return TaskResult(sol.primal_value, sol.status, sol, code, details={"p_plus": w[0], "p_minus": w[1]})


def formation_zero_error_dual_program(d: int, m: ChoiOperator) -> sdp.SdpProgram:
    """Lagrange dual of :func:`formation_zero_error_program`.

    maximize ``tr[M J] - λ`` over ``M, N ⪰ 0`` and free ``K`` with
    ``M + N + K ⊗ I ⪰ 0``, ``d² tr_A' M = (1 + λ) I`` and ``d² tr_A' N = (1 - λ - tr K) I``.
    """
    da1, db1 = m.dims
    prog = sdp.SdpProgram(real=_is_real(m.matrix))
    jm = m.matrix.real if prog.real else m.matrix
    prog.add_block("lambda", 1, cone="free")
    prog.add_block("M", da1 * db1)
    prog.add_block("N", da1 * db1)
    prog.add_block("K", da1, cone="free")
    prog.add_psd_constraint({"M": _scale(1.0), "N": _scale(1.0), "K": lambda x: embed(x, [da1, db1], [0])},
                            name="_joint")
    red = _ptrace([da1, db1], [1])
    prog.add_equality({"M": lambda x: d * d * red(x), "lambda": _scalar_to_identity(db1, -1.0)},
                      np.eye(db1), label="dual_positive")
    prog.add_equality({"N": lambda x: d * d * red(x), "lambda": _scalar_to_identity(db1, 1.0),
                       "K": _trace_to_identity(db1, 1.0)}, np.eye(db1), label="dual_negative")
    prog.set_objective({"M": jm, "lambda": -1.0}, sense="max")
    return prog


def simulation_cost_program(m: ChoiOperator, gamma: float) -> sdp.SdpProgram:
    """Minimize ``tr V`` over the simulation-cost constraints at cost budget ``gamma``."""
    if gamma < 1:
        raise ValueError("the simulation-cost program needs gamma >= 1")
    da1, db1 = m.dims
    prog = sdp.SdpProgram(real=_is_real(m.matrix))
    jm = m.matrix.real if prog.real else m.matrix
    g = (gamma - 1.0) / 2.0
    prog.add_block("V", db1, cone="free")
    prog.add_block("W", db1)
    prog.add_block("R", da1 * db1)
    lift = lambda x: embed(x, [da1, db1], [1])  # noqa: E731
    prog.add_psd_constraint({"V": lambda x: (gamma + 1.0) / 2.0 * lift(x), "R": _scale(-1.0)}, offset=-jm,
                            name="_positive_cap")
    prog.add_psd_constraint({"W": lift, "R": _scale(-1.0)}, name="_negative_cap")
    prog.add_equality({"R": _ptrace([da1, db1], [0])}, g * np.eye(da1), label="negative_marginal")
    prog.add_equality({"W": 1.0, "V": -g}, 0.0, label="negative_weight")
    prog.set_objective({"V": 1.0}, sense="min")
    return prog


def shadow_sim_cost(m: ChoiOperator, gamma: float) -> TaskResult:
    """One-shot zero-error simulation cost ``log2 ⌈√tr V*⌉`` at cost budget ``gamma``."""
    sol = _solve(simulation_cost_program(m, gamma), "shadow_sim_cost")
    trace_v = sol.primal_value
    flags: list[str] = []
    _near_integer_flag(math.sqrt(max(trace_v, 0.0)), flags, "shadow_sim_cost")
    dim = math.ceil(math.sqrt(max(trace_v - BOUNDARY_TOL, 0.0)))
    value = math.log2(max(dim, 1))
    return TaskResult(value, sol.status, sol, flags=flags, details={"trace_v": trace_v, "dimension": max(dim, 1)})


# ---------------------------------------------------------------------------
# audits


def realized_error(result: TaskResult, source: ChoiOperator, target: ChoiOperator) -> float:
    """Diamond distance between the target and the realized code applied to the source."""
    if result.realized_code is None:
        raise ValueError("result carries no realized code")
    simulated = compose_superchannel(result.realized_code, source)
    return diamond_distance(VirtualChannel(target, 1.0), simulated)


TASKS = ("min-error", "min-cost", "min-error-quantum", "diamond", "capacity", "simcost",
         "comm-min-error", "comm-zero-error-cost", "formation-min-error", "formation-zero-error-cost")
