"""Independent ground truth: closed-form values, explicit certificates and a brute-force diamond bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize

from . import sdp
from .channels import ChoiOperator, VirtualChannel, depolarizing_choi, identity_choi
from .linalg import gamma_matrix
from .programs import (comm_zero_error_dual_program, comm_zero_error_program, formation_zero_error_dual_program,
                       formation_zero_error_program)


def _check_p(p: float, allow_zero: bool = True) -> None:
    if not (0.0 <= p <= 1.0) or (not allow_zero and p == 0.0):
        raise ValueError(f"p={p} outside the formula's domain")


def depo_capacity_formula(p: float, gamma: float) -> float:
    """``log2 ⌊√(2pγ + p + 1)⌋`` for the qubit depolarizing channel."""
    _check_p(p)
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    # exact integer arithmetic on the radicand where possible avoids ⌊√4 - 1e-16⌋ = 1
    radicand = 2 * p * gamma + p + 1
    dim = math.isqrt(int(math.floor(radicand + 1e-12)))
    return math.log2(dim)


def identity_sim_cost_formula(d: int, d_prime: int) -> float:
    """Zero-error sampling cost ``2(d'/d)² - 1`` of simulating ``I_d'`` with ``I_d``."""
    if not (d_prime >= d >= 2):
        raise ValueError("need d' >= d >= 2")
    return 2.0 * (d_prime / d) ** 2 - 1.0


def depo_zero_error_cost_formula(p: float, d: int) -> float:
    """Zero-error cost ``(d² - 1 - p)/(2p)`` of simulating ``I_d`` with the qubit depolarizing channel."""
    _check_p(p, allow_zero=False)
    if d < 2:
        raise ValueError("d must be >= 2")
    return (d * d - 1 - p) / (2 * p)


# ---------------------------------------------------------------------------
# certificates

CERTIFICATES = ("depo_zero_error_cost_dual", "depo_zero_error_cost_primal",
                "identity_formation_dual", "identity_formation_primal")


@dataclass
class CertificatePoint:
    program_id: str
    params: dict[str, Any]
    values: dict[str, np.ndarray]
    objective: float
    program: sdp.SdpProgram = field(repr=False)

    def check(self, tol: float = 1e-9) -> tuple[bool, float]:
        """Feasibility of the point (slack blocks derived from the constraints)."""
        return sdp.check_feasible(self.program, self.program.fill_slacks(self.values), tol)

    def evaluated_objective(self) -> float:
        return self.program.objective_value(self.values)


def _s(x: float) -> np.ndarray:
    return np.array([[float(x)]])


def certificate(program_id: str, **params) -> CertificatePoint:
    """Explicit optimal points, written out from their closed forms.

    * ``depo_zero_error_cost_*``: params ``p`` (0 < p ≤ 1) and ``d`` (target dimension);
    * ``identity_formation_*``: params ``d`` (source) and ``d_prime`` (target), d' ≥ d.
    """
    if program_id.startswith("depo_zero_error_cost"):
        p, d = float(params["p"]), int(params["d"])
        _check_p(p, allow_zero=False)
        n = depolarizing_choi(p)
        g = gamma_matrix(2).real
        eye2, eye4 = np.eye(2), np.eye(4)
        cost = depo_zero_error_cost_formula(p, d)
        if program_id.endswith("dual"):
            values = {"lambda": _s(d * d / (2 * p)), "mu": _s((1 + p) / (2 * p)),
                      "M+": np.zeros((4, 4)), "M-": np.zeros((4, 4)),
                      "N+": (1 + 3 * p) / (4 * p) * eye2, "N-": (p - 1) / (4 * p) * eye2}
            prog = comm_zero_error_dual_program(n, d)
        elif program_id.endswith("primal"):
            a = d * d - 1 + p
            b = d * d - 1 - 3 * p
            values = {"T+": a / (4 * p) * g, "T-": b / (6 * p) * eye4 - b / (12 * p) * g,
                      "V+": d * d * a / (8 * p) * eye2, "V-": d * d * b / (8 * p) * eye2}
            prog = comm_zero_error_program(n, d)
        else:
            raise ValueError(f"unsupported certificate {program_id!r}")
        return CertificatePoint(program_id, {"p": p, "d": d}, values, cost, prog)
    if program_id.startswith("identity_formation"):
        d, dp = int(params["d"]), int(params["d_prime"])
        cost = identity_sim_cost_formula(d, dp)
        m = identity_choi(dp)
        g = gamma_matrix(dp).real
        if program_id.endswith("dual"):
            values = {"lambda": _s(1.0), "M": 2.0 / d ** 2 * g, "N": np.zeros((dp * dp,) * 2),
                      "K": np.zeros((dp, dp))}
            prog = formation_zero_error_dual_program(d, m)
        elif program_id.endswith("primal"):
            diff = dp * dp - d * d
            values = {"V+": dp * np.eye(dp), "V-": diff / dp * np.eye(dp),
                      "R": dp * diff / ((dp * dp - 1) * d * d) * np.eye(dp * dp)
                      - diff / ((dp * dp - 1) * d * d) * g}
            prog = formation_zero_error_program(d, m)
        else:
            raise ValueError(f"unsupported certificate {program_id!r}")
        return CertificatePoint(program_id, {"d": d, "d_prime": dp}, values, cost, prog)
    raise ValueError(f"unsupported certificate {program_id!r}")


# ---------------------------------------------------------------------------
# brute-force diamond distance


def _difference_tensor(v1: VirtualChannel | ChoiOperator, v2: VirtualChannel | ChoiOperator) -> np.ndarray:
    c1 = v1.choi if isinstance(v1, VirtualChannel) else v1
    c2 = v2.choi if isinstance(v2, VirtualChannel) else v2
    if c1.dims != c2.dims:
        raise ValueError("dimension mismatch")
    din, dout = c1.dims
    return (c1.matrix - c2.matrix).reshape(din, dout, din, dout)


def helstrom_values(v1, v2, psis: np.ndarray) -> np.ndarray:
    """``½‖(id ⊗ (v1 - v2))(ψψ†)‖₁`` for a batch of pure states ``ψ`` on R ⊗ in (``d_R = d_in``)."""
    diff = _difference_tensor(v1, v2)
    din, dout = diff.shape[0], diff.shape[1]
    psi = np.asarray(psis, dtype=complex).reshape(-1, din, din)
    out = np.einsum("nra,nsb,aobp->nrosp", psi, psi.conj(), diff)
    out = out.reshape(-1, din * dout, din * dout)
    out = 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))
    return 0.5 * np.abs(np.linalg.eigvalsh(out)).sum(axis=-1)


def random_pure_states(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def brute_force_diamond(v1, v2, samples: int = 10_000, rng: np.random.Generator | None = None,
                        polish: int = 8) -> float:
    """Lower bound on the diamond distance from explicit input states.

    ``samples`` random pure states on R ⊗ in are scored; the best ``polish`` of
    them are then refined by a quasi-Newton ascent on the state amplitudes.  Every
    number produced comes from an actual input state, so the result never exceeds
    the true value.
    """
    rng = np.random.default_rng() if rng is None else rng
    diff = _difference_tensor(v1, v2)
    din = diff.shape[0]
    dim = din * din
    psis = random_pure_states(samples, dim, rng)
    vals = helstrom_values(v1, v2, psis)
    best = float(vals.max())
    if polish <= 0:
        return best

    def negative(x):
        psi = x[:dim] + 1j * x[dim:]
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            return 0.0
        return -float(helstrom_values(v1, v2, (psi / nrm)[None])[0])

    for idx in np.argsort(vals)[-polish:]:
        x0 = np.concatenate([psis[idx].real, psis[idx].imag])
        res = minimize(negative, x0, method="BFGS", options={"gtol": 1e-10, "maxiter": 500})
        psi = res.x[:dim] + 1j * res.x[dim:]
        psi = psi / np.linalg.norm(psi)
        best = max(best, float(helstrom_values(v1, v2, psi[None])[0]))
    return best
