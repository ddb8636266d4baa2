"""Monte Carlo run of the signed-sampling protocol.

Each round picks branch ``+`` with probability ``p+/γ`` (otherwise ``-``), sends
the input through that branch's channel, measures the observable and records
``sign * outcome``.  The estimate ``ξ = (γ/M) Σ sign·o`` is unbiased for
``tr[(p+ C+ - p- C-)(ρ) O]``.

Randomness is drawn from Philox streams keyed by ``(seed, chunk)``, where a chunk
is a fixed block of consecutive rounds, so the estimate for a seed does not
depend on how rounds are batched.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import QuasiDecomposition, apply
from .linalg import eig_hermitian, hermitian_part

#: Rounds per random stream.
CHUNK = 1 << 16
STATE_TOL = 1e-9


@dataclass(frozen=True)
class SamplingPlan:
    decomposition: QuasiDecomposition
    observable: np.ndarray
    rho: np.ndarray
    rounds: int
    seed: int = 0
    ref_dim: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        dec = self.decomposition
        if dec.cost <= 0:
            raise ValueError("the decomposition has zero sampling cost")
        din = dec.choi_plus.in_dim * self.ref_dim
        dout = dec.choi_plus.out_dim * self.ref_dim
        rho = np.asarray(self.rho, dtype=complex)
        obs = np.asarray(self.observable, dtype=complex)
        if rho.shape != (din, din):
            raise ValueError(f"input state must be {din}x{din}, got {rho.shape}")
        if obs.shape != (dout, dout):
            raise ValueError(f"observable must be {dout}x{dout}, got {obs.shape}")
        if np.abs(rho - rho.conj().T).max() > STATE_TOL or abs(np.trace(rho) - 1) > STATE_TOL:
            raise ValueError("input state must be Hermitian with unit trace")
        if np.linalg.eigvalsh(hermitian_part(rho)).min() < -STATE_TOL:
            raise ValueError("input state must be positive semidefinite")
        if np.abs(obs - obs.conj().T).max() > STATE_TOL:
            raise ValueError("observable must be Hermitian")
        if np.abs(np.linalg.eigvalsh(hermitian_part(obs))).max() > 1 + STATE_TOL:
            raise ValueError("observable must have operator norm at most 1")


@dataclass
class SampleEstimate:
    xi: float
    rounds: int
    gamma: float
    signs: np.ndarray | None = field(default=None, repr=False)
    outcomes: np.ndarray | None = field(default=None, repr=False)

    def write_trace(self, stream) -> None:
        """Write the per-round trace as CSV with columns ``round, sign, outcome``."""
        if self.signs is None or self.outcomes is None:
            raise ValueError("estimate was produced without a trace")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["round", "sign", "outcome"])
        for i, (s, o) in enumerate(zip(self.signs, self.outcomes)):
            w.writerow([i, int(s), repr(float(o))])

    def trace_csv(self) -> str:
        buf = io.StringIO()
        self.write_trace(buf)
        return buf.getvalue()


def _outcome_distribution(choi, rho, ref_dim, values, projectors) -> np.ndarray:
    sigma = apply(choi, rho, ref_dim)
    probs = np.real(np.einsum("kij,ji->k", projectors, sigma))
    # the branch output is a state; only rounding can push a probability below zero
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _measurement(observable: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct eigenvalues of the observable and the projectors onto their eigenspaces."""
    w, v = eig_hermitian(observable)
    groups: list[list[int]] = []
    for i, x in enumerate(w):
        if groups and abs(x - w[groups[-1][0]]) <= 1e-12:
            groups[-1].append(i)
        else:
            groups.append([i])
    values = np.array([w[g].mean() for g in groups])
    projectors = np.stack([v[:, g] @ v[:, g].conj().T for g in groups])
    return values, projectors


def _stream(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(chunk,))
    return np.random.Generator(np.random.Philox(ss))


def run(plan: SamplingPlan, keep_trace: bool = False) -> SampleEstimate:
    dec = plan.decomposition
    gamma = dec.cost
    values, projectors = _measurement(np.asarray(plan.observable, dtype=complex))
    cdf_plus = np.cumsum(_outcome_distribution(dec.choi_plus, plan.rho, plan.ref_dim, values, projectors))
    cdf_minus = np.cumsum(_outcome_distribution(dec.choi_minus, plan.rho, plan.ref_dim, values, projectors))
    p_branch = dec.p_plus / gamma
    total = 0.0
    signs_all, outs_all = [], []
    for chunk in range(math.ceil(plan.rounds / CHUNK)):
        size = min(CHUNK, plan.rounds - chunk * CHUNK)
        u = _stream(plan.seed, chunk).random((size, 2))
        plus = u[:, 0] < p_branch
        idx_plus = np.minimum(np.searchsorted(cdf_plus, u[:, 1], side="right"), len(values) - 1)
        idx_minus = np.minimum(np.searchsorted(cdf_minus, u[:, 1], side="right"), len(values) - 1)
        outcomes = np.where(plus, values[idx_plus], values[idx_minus])
        signs = np.where(plus, 1, -1)
        total += float(np.sum(signs * outcomes))
        if keep_trace:
            signs_all.append(signs)
            outs_all.append(outcomes)
    xi = gamma * total / plan.rounds
    if keep_trace:
        return SampleEstimate(xi, plan.rounds, gamma, np.concatenate(signs_all), np.concatenate(outs_all))
    return SampleEstimate(xi, plan.rounds, gamma)


def true_expectation(decomposition: QuasiDecomposition, observable: np.ndarray, rho: np.ndarray,
                     ref_dim: int = 1) -> float:
    """Exact ``tr[(p+ C+(ρ) - p- C-(ρ)) O]``."""
    out = (decomposition.p_plus * apply(decomposition.choi_plus, rho, ref_dim)
           - decomposition.p_minus * apply(decomposition.choi_minus, rho, ref_dim))
    obs = np.asarray(observable, dtype=complex)
    if obs.shape != out.shape:
        raise ValueError(f"observable shape {obs.shape} does not match output {out.shape}")
    return float(np.real(np.trace(out @ obs)))


def hoeffding_rounds(gamma: float, eps: float, delta: float) -> int:
    """Rounds ``⌈2γ² ln(2/δ)/ε²⌉`` that put ``ξ`` within ``ε`` of its mean with probability ``1 - δ``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil(2 * gamma ** 2 * math.log(2 / delta) / eps ** 2)
