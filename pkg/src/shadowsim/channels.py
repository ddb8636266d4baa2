"""Choi-operator representation of channels, virtual channels and bipartite codes.

Conventions:

* Choi operators use the unnormalized ``|Γ> = Σ_j |jj>`` and order systems as
  (input, output), so a map is trace preserving iff ``tr_out J = I_in``.
* A bipartite code ``A'B -> AB'`` stores its Choi operator on (A', B, A, B').
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (PSD_TOL, embed, eig_hermitian, gamma_matrix, hermitian_part,
                     is_hermitian, min_eig, partial_trace, permute_systems, phi_matrix,
                     positive_negative_parts)

#: Tolerance used by the CPTP / HPTS / no-signaling predicates.
CHANNEL_TOL = 1e-8


@dataclass(frozen=True)
class ChoiOperator:
    matrix: np.ndarray
    in_dim: int
    out_dim: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("dimensions must be positive")
        n = self.in_dim * self.out_dim
        if m.shape != (n, n):
            raise ValueError(f"Choi matrix shape {m.shape} does not match {self.in_dim}x{self.out_dim}")
        if not is_hermitian(m, PSD_TOL * max(1.0, float(np.abs(m).max(initial=0.0)))):
            raise ValueError("Choi operator must be Hermitian")
        m = hermitian_part(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.in_dim, self.out_dim)

    @property
    def is_real(self) -> bool:
        return bool(np.abs(self.matrix.imag).max(initial=0.0) == 0.0)

    def reduced_input(self) -> np.ndarray:
        """``tr_out J``."""
        return partial_trace(self.matrix, self.dims, [0])

    def __add__(self, other: "ChoiOperator") -> "ChoiOperator":
        _same_dims(self, other)
        return ChoiOperator(self.matrix + other.matrix, self.in_dim, self.out_dim)

    def __sub__(self, other: "ChoiOperator") -> "ChoiOperator":
        _same_dims(self, other)
        return ChoiOperator(self.matrix - other.matrix, self.in_dim, self.out_dim)

    def __mul__(self, c: float) -> "ChoiOperator":
        return ChoiOperator(float(c) * self.matrix, self.in_dim, self.out_dim)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"in_dim": self.in_dim, "out_dim": self.out_dim,
                "re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ChoiOperator":
        m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        return cls(m, int(data["in_dim"]), int(data["out_dim"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChoiOperator":
        return cls.from_dict(json.loads(text))


def _same_dims(a: ChoiOperator, b: ChoiOperator) -> None:
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")


def hpts_scaling(choi: ChoiOperator, tol: float = CHANNEL_TOL) -> float | None:
    """Scaling factor ``λ`` with ``tr_out J = λ I``, or ``None`` if there is none."""
    red = choi.reduced_input()
    lam = float(np.real(np.trace(red))) / choi.in_dim
    if np.abs(red - lam * np.eye(choi.in_dim)).max(initial=0.0) > tol:
        return None
    return lam


@dataclass(frozen=True)
class VirtualChannel:
    """Hermitian-preserving trace-scaling map: a Choi operator plus its scaling factor."""

    choi: ChoiOperator
    scaling: float

    @classmethod
    def from_choi(cls, choi: ChoiOperator) -> "VirtualChannel":
        lam = hpts_scaling(choi)
        if lam is None:
            raise ValueError("Choi operator is not trace scaling")
        return cls(choi, lam)

    @property
    def in_dim(self) -> int:
        return self.choi.in_dim

    @property
    def out_dim(self) -> int:
        return self.choi.out_dim


@dataclass(frozen=True)
class QuasiDecomposition:
    """``p_plus * C+ - p_minus * C-`` with CPTP Choi operators ``C±``."""

    p_plus: float
    choi_plus: ChoiOperator
    p_minus: float
    choi_minus: ChoiOperator

    def __post_init__(self):
        if self.p_plus < -CHANNEL_TOL or self.p_minus < -CHANNEL_TOL:
            raise ValueError("quasi-probability weights must be non-negative")
        _same_dims(self.choi_plus, self.choi_minus)

    @property
    def cost(self) -> float:
        return self.p_plus + self.p_minus

    @property
    def scaling(self) -> float:
        return self.p_plus - self.p_minus

    def reconstruct(self) -> VirtualChannel:
        m = self.p_plus * self.choi_plus.matrix - self.p_minus * self.choi_minus.matrix
        c = ChoiOperator(m, self.choi_plus.in_dim, self.choi_plus.out_dim)
        return VirtualChannel(c, self.scaling)


@dataclass(frozen=True)
class SuperchannelChoi:
    """Bipartite code ``A'B -> AB'`` stored as the pair ``J+ , J-`` (unnormalized).

    ``J± = p± * (Choi of a CPTP no-signaling channel)``, so ``tr_{AB'} J± = p± I``.
    ``dims`` is ``(d_A', d_B, d_A, d_B')``.
    """

    plus: np.ndarray
    minus: np.ndarray
    dims: tuple[int, int, int, int]
    p_plus: float
    p_minus: float

    def __post_init__(self):
        n = int(np.prod(self.dims))
        for m in (self.plus, self.minus):
            if np.shape(m) != (n, n):
                raise ValueError(f"code Choi shape {np.shape(m)} does not match dims {self.dims}")
        object.__setattr__(self, "plus", hermitian_part(np.asarray(self.plus, dtype=complex)))
        object.__setattr__(self, "minus", hermitian_part(np.asarray(self.minus, dtype=complex)))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def matrix(self) -> np.ndarray:
        return self.plus - self.minus

    @property
    def cost(self) -> float:
        return self.p_plus + self.p_minus


# ---------------------------------------------------------------------------
# constructors


def kraus_to_choi(kraus: Sequence[np.ndarray], in_dim: int | None = None,
                  out_dim: int | None = None) -> ChoiOperator:
    ks = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
    if not ks:
        raise ValueError("need at least one Kraus operator")
    out_dim = ks[0].shape[0] if out_dim is None else out_dim
    in_dim = ks[0].shape[1] if in_dim is None else in_dim
    j = np.zeros((in_dim * out_dim,) * 2, dtype=complex)
    for k in ks:
        if k.shape != (out_dim, in_dim):
            raise ValueError(f"Kraus operator shape {k.shape} is not {(out_dim, in_dim)}")
        # (I ⊗ K)|Γ> has amplitude K[o, i] on |i>|o>
        v = k.T.reshape(-1)
        j += np.outer(v, v.conj())
    return ChoiOperator(j, in_dim, out_dim)


def _check_prob(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"channel parameter p={p} outside [0, 1]")
    return p


def identity_choi(d: int) -> ChoiOperator:
    if d < 1:
        raise ValueError("dimension must be positive")
    return ChoiOperator(gamma_matrix(d), d, d)


def depolarizing_choi(p: float, d: int = 2) -> ChoiOperator:
    """``ρ -> pρ + (1-p) tr[ρ] I/d``."""
    p = _check_prob(p)
    return ChoiOperator(p * gamma_matrix(d) + (1 - p) / d * np.eye(d * d), d, d)


def dephasing_choi(p: float) -> ChoiOperator:
    """Qubit ``ρ -> pρ + (1-p) diag(ρ)``."""
    p = _check_prob(p)
    g = gamma_matrix(2)
    return ChoiOperator(p * g + (1 - p) * np.diag(np.diag(g)), 2, 2)


def amplitude_damping_choi(p: float) -> ChoiOperator:
    """Qubit amplitude damping with Kraus ``|0><0| + √p|1><1|`` and ``√(1-p)|0><1|``."""
    p = _check_prob(p)
    k0 = np.array([[1, 0], [0, np.sqrt(p)]])
    k1 = np.array([[0, np.sqrt(1 - p)], [0, 0]])
    return kraus_to_choi([k0, k1], 2, 2)


def tensor_channels(*chois: ChoiOperator) -> ChoiOperator:
    """Choi operator of ``N1 ⊗ N2 ⊗ ...`` ordered (in1, in2, ..., out1, out2, ...)."""
    m = chois[0].matrix
    dims = list(chois[0].dims)
    for c in chois[1:]:
        m = np.kron(m, c.matrix)
        dims += list(c.dims)
    k = len(chois)
    order = [2 * i for i in range(k)] + [2 * i + 1 for i in range(k)]
    m = permute_systems(m, dims, order)
    din = int(np.prod([c.in_dim for c in chois]))
    dout = int(np.prod([c.out_dim for c in chois]))
    return ChoiOperator(m, din, dout)


def tensor_power(choi: ChoiOperator, k: int) -> ChoiOperator:
    if k < 1:
        raise ValueError("tensor power must be >= 1")
    return tensor_channels(*([choi] * k))


def completely_depolarizing_choi(in_dim: int, out_dim: int) -> ChoiOperator:
    return ChoiOperator(np.eye(in_dim * out_dim) / out_dim, in_dim, out_dim)


def random_cptp(in_dim: int, out_dim: int, rng: np.random.Generator, rank: int | None = None) -> ChoiOperator:
    """Random channel from a Haar-ish Stinespring isometry."""
    rank = in_dim * out_dim if rank is None else rank
    g = rng.normal(size=(out_dim * rank, in_dim)) + 1j * rng.normal(size=(out_dim * rank, in_dim))
    q, _ = np.linalg.qr(g)
    ks = [q[r * out_dim:(r + 1) * out_dim, :] for r in range(rank)]
    return kraus_to_choi(ks, in_dim, out_dim)


# ---------------------------------------------------------------------------
# action and composition


def apply(choi: ChoiOperator | VirtualChannel, rho: np.ndarray, ref_dim: int = 1) -> np.ndarray:
    """``N(ρ) = tr_in[(ρ^T ⊗ I) J]``; with ``ref_dim > 1``, ``ρ`` lives on R ⊗ in."""
    if isinstance(choi, VirtualChannel):
        choi = choi.choi
    rho = np.asarray(rho, dtype=complex)
    din, dout = choi.dims
    if rho.shape != (ref_dim * din,) * 2:
        raise ValueError(f"state of shape {rho.shape} does not fit input dimension {ref_dim}x{din}")
    r = rho.reshape(ref_dim, din, ref_dim, din)
    j = choi.matrix.reshape(din, dout, din, dout)
    out = np.einsum("rasb,aobp->rosp", r, j)
    return out.reshape(ref_dim * dout, ref_dim * dout)


def code_dims(code_dims_: Sequence[int]) -> tuple[int, int, int, int]:
    d = tuple(int(x) for x in code_dims_)
    if len(d) != 4:
        raise ValueError("code dims must be (d_A', d_B, d_A, d_B')")
    return d  # type: ignore[return-value]


def apply_code(code_matrix: np.ndarray, n_matrix: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """``tr_AB[((J^N)^T ⊗ I_A'B') J^S]`` for a (batch of) code Choi operators on A'BAB'."""
    da1, db, da, db1 = code_dims(dims)
    jn = np.asarray(n_matrix).reshape(da, db, da, db)
    y = np.asarray(code_matrix)
    batch = y.shape[:-2]
    y = y.reshape(*batch, da1, db, da, db1, da1, db, da, db1)
    # out[p,q,r,s] = Σ J^N[x,y,u,v] Y[p,y,x,q, r,v,u,s]
    out = np.einsum("xyuv,...pyxqrvus->...pqrs", jn, y)
    return out.reshape(*batch, da1 * db1, da1 * db1)


def compose_superchannel(code: SuperchannelChoi, n: ChoiOperator) -> VirtualChannel:
    """Apply the virtual supermap ``J+ - J-`` to channel ``n``."""
    da1, db, da, db1 = code.dims
    if n.dims != (da, db):
        raise ValueError(f"channel dims {n.dims} do not match code dims {code.dims}")
    m = apply_code(code.matrix, n.matrix, code.dims)
    return VirtualChannel(ChoiOperator(m, da1, db1), code.p_plus - code.p_minus)


def branch_decomposition(code: SuperchannelChoi, n: ChoiOperator) -> QuasiDecomposition:
    """Split ``code(n)`` into its two CPTP branches ``p± C±``."""
    da1, db, da, db1 = code.dims
    if n.dims != (da, db):
        raise ValueError(f"channel dims {n.dims} do not match code dims {code.dims}")
    parts = []
    for mat, p in ((code.plus, code.p_plus), (code.minus, code.p_minus)):
        if p > CHANNEL_TOL:
            c = apply_code(mat, n.matrix, code.dims) / p
            parts.append(ChoiOperator(c, da1, db1))
        else:
            parts.append(completely_depolarizing_choi(da1, db1))
    return QuasiDecomposition(max(code.p_plus, 0.0), parts[0], max(code.p_minus, 0.0), parts[1])


def product_code(encoder: ChoiOperator, decoder: ChoiOperator) -> SuperchannelChoi:
    """Code ``E_{A'->A} ⊗ D_{B->B'}`` with cost one."""
    m = np.kron(encoder.matrix, decoder.matrix)  # order A' A B B'
    dims = [encoder.in_dim, encoder.out_dim, decoder.in_dim, decoder.out_dim]
    m = permute_systems(m, dims, [0, 2, 1, 3])
    cdims = (encoder.in_dim, decoder.in_dim, encoder.out_dim, decoder.out_dim)
    return SuperchannelChoi(m, np.zeros_like(m), cdims, 1.0, 0.0)


def identity_code(d_in: int, d_out: int) -> SuperchannelChoi:
    """Pass-through code: identity encoder on d_in, identity decoder on d_out."""
    return product_code(identity_choi(d_in), identity_choi(d_out))


# ---------------------------------------------------------------------------
# predicates


def is_cptp(choi: ChoiOperator, tol: float = CHANNEL_TOL) -> bool:
    if min_eig(choi.matrix) < -tol:
        return False
    red = choi.reduced_input()
    return bool(np.abs(red - np.eye(choi.in_dim)).max(initial=0.0) <= tol)


def is_hpts(v: VirtualChannel | ChoiOperator, tol: float = CHANNEL_TOL) -> bool:
    choi = v.choi if isinstance(v, VirtualChannel) else v
    if not is_hermitian(choi.matrix, tol):
        return False
    lam = hpts_scaling(choi, tol)
    if lam is None:
        return False
    if isinstance(v, VirtualChannel):
        return abs(lam - v.scaling) <= tol
    return True


def ns_violation(matrix: np.ndarray, dims: Sequence[int]) -> float:
    """Largest entry of the two no-signaling residuals of a code Choi operator."""
    da1, db, da, db1 = code_dims(dims)
    dl = [da1, db, da, db1]
    # B -> A: tr_B' J = tr_BB' J ⊗ I_B / d_B
    lhs = partial_trace(matrix, dl, [0, 1, 2])
    rhs = embed(partial_trace(matrix, dl, [0, 2]), [da1, db, da], [0, 2]) / db
    r1 = float(np.abs(lhs - rhs).max(initial=0.0))
    # A -> B: tr_A J = I_A' ⊗ tr_A'A J / d_A'
    lhs = partial_trace(matrix, dl, [0, 1, 3])
    rhs = embed(partial_trace(matrix, dl, [1, 3]), [da1, db, db1], [1, 2]) / da1
    r2 = float(np.abs(lhs - rhs).max(initial=0.0))
    return max(r1, r2)


def is_no_signaling(code: SuperchannelChoi, tol: float = CHANNEL_TOL) -> bool:
    """Both no-signaling conditions for each part, plus the CPTP-scaling of each part."""
    da1, db, da, db1 = code.dims
    for mat, p in ((code.plus, code.p_plus), (code.minus, code.p_minus)):
        if ns_violation(mat, code.dims) > tol:
            return False
        red = partial_trace(mat, [da1, db, da, db1], [0, 1])
        if np.abs(red - p * np.eye(da1 * db)).max(initial=0.0) > tol:
            return False
        if min_eig(mat) < -tol:
            return False
    return True


# ---------------------------------------------------------------------------
# twirling and decompositions


def twirl(x: np.ndarray, d: int) -> np.ndarray:
    """Average of ``(U ⊗ Ū) x (U ⊗ Ū)†`` over the Haar measure."""
    if d < 2:
        raise ValueError("twirl needs d >= 2")
    x = np.asarray(x, dtype=complex)
    if x.shape != (d * d, d * d):
        raise ValueError(f"twirl expects a {d * d}x{d * d} matrix")
    phi = phi_matrix(d)
    rest = np.eye(d * d) - phi
    return np.trace(x @ phi) * phi + np.trace(x @ rest) / (d * d - 1) * rest


def decompose_hpts(v: VirtualChannel) -> QuasiDecomposition:
    """Write a virtual channel as ``p+ C+ - p- C-`` with CPTP ``C±``.

    Positive and negative eigenparts are padded with the same operator so both
    become trace scaling.  Always feasible, not cost optimal.
    """
    if not is_hpts(v):
        raise ValueError("decompose_hpts needs a Hermitian-preserving trace-scaling map")
    choi = v.choi
    din, dout = choi.dims
    pos, neg = positive_negative_parts(choi.matrix)
    red = partial_trace(pos, choi.dims, [0])
    w, _ = eig_hermitian(red)
    alpha = float(w[-1])
    pad = np.kron(alpha * np.eye(din) - red, np.eye(dout) / dout)
    p_plus = alpha
    p_minus = alpha - v.scaling
    jp = pos + pad
    jm = neg + pad
    if p_plus <= CHANNEL_TOL:
        cp = completely_depolarizing_choi(din, dout)
        p_plus = 0.0
    else:
        cp = ChoiOperator(jp / p_plus, din, dout)
    if p_minus <= CHANNEL_TOL:
        cm = completely_depolarizing_choi(din, dout)
        p_minus = 0.0
    else:
        cm = ChoiOperator(jm / p_minus, din, dout)
    return QuasiDecomposition(p_plus, cp, p_minus, cm)
