"""Dense complex matrix helpers: tensor products, partial traces, Hermitian eigensolves.

Composite indices are big-endian over the ``dims`` list: the first subsystem is the
most significant digit.  Every function that takes a matrix also accepts a stack of
matrices with arbitrary leading batch axes, which the SDP builder relies on.
"""
from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

#: Absolute tolerance for Hermiticity and PSD checks on SDP output.
PSD_TOL = 1e-9
#: Tolerance of the ``hermitian`` predicate on raw data.
HERMITIAN_TOL = 1e-12


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    return a


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        return False
    return bool(np.all(np.abs(m - np.swapaxes(m.conj(), -1, -2)) <= tol))


def hermitian_part(m) -> np.ndarray:
    m = np.asarray(m)
    return 0.5 * (m + np.swapaxes(m.conj(), -1, -2))


def dagger(m) -> np.ndarray:
    return np.swapaxes(np.asarray(m).conj(), -1, -2)


def tensor(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices (scalars count as 1x1)."""
    mats = [as_matrix(o) for o in ops]
    return reduce(np.kron, mats)


def _check_shape(m: np.ndarray, dims: Sequence[int]) -> None:
    n = int(np.prod(dims))
    if m.shape[-1] != n or m.shape[-2] != n:
        raise ValueError(f"matrix side {m.shape[-2:]} does not match subsystem dims {list(dims)}")
    if any(int(d) < 1 for d in dims):
        raise ValueError("subsystem dimensions must be positive")


def partial_trace(m, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    The kept subsystems stay in their original relative order.  ``keep`` may be
    empty, in which case the full trace is returned as a 1x1 matrix.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    _check_shape(m, dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    batch = m.shape[:-2]
    t = m.reshape(*batch, *dims, *dims)
    nb = len(batch)
    # einsum subscripts: batch letters, then row and column letters per subsystem
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    bl = [next(letters) for _ in range(nb)]
    rows = [next(letters) for _ in range(n)]
    cols = [rows[i] if i not in keep else next(letters) for i in range(n)]
    out = bl + [rows[i] for i in keep] + [cols[i] for i in keep]
    expr = "".join(bl + rows + cols) + "->" + "".join(out)
    r = np.einsum(expr, t)
    k = int(np.prod([dims[i] for i in keep])) if keep else 1
    return r.reshape(*batch, k, k)


def permute_systems(m, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder subsystems: output subsystem ``i`` is input subsystem ``order[i]``."""
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    _check_shape(m, dims)
    order = [int(o) for o in order]
    if sorted(order) != list(range(len(dims))):
        raise ValueError(f"{order} is not a permutation of {len(dims)} subsystems")
    batch = m.shape[:-2]
    nb = len(batch)
    n = len(dims)
    t = m.reshape(*batch, *dims, *dims)
    axes = list(range(nb)) + [nb + o for o in order] + [nb + n + o for o in order]
    side = m.shape[-1]
    return t.transpose(axes).reshape(*batch, side, side)


def embed(m, dims: Sequence[int], positions: Sequence[int]) -> np.ndarray:
    """Return ``m`` tensored with identities so it acts on ``positions`` of ``dims``.

    ``m`` lives on the subsystems listed in ``positions`` (in increasing order);
    every other subsystem gets an identity factor.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    positions = sorted(int(p) for p in positions)
    inner = [dims[p] for p in positions]
    _check_shape(m, inner)
    rest = [i for i in range(len(dims)) if i not in positions]
    eye = np.eye(int(np.prod([dims[i] for i in rest])) if rest else 1)
    big = np.kron(m, eye) if m.ndim == 2 else np.einsum("...ij,kl->...ikjl", m, eye).reshape(
        *m.shape[:-2], m.shape[-2] * eye.shape[0], m.shape[-1] * eye.shape[0])
    current = positions + rest
    order = [current.index(i) for i in range(len(dims))]
    return permute_systems(big, [dims[i] for i in current], order)


def transpose(m) -> np.ndarray:
    return np.swapaxes(np.asarray(m), -1, -2)


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    Raises ``ValueError`` when the input is not Hermitian within ``PSD_TOL``
    (scaled by the matrix magnitude).
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("eig_hermitian expects a square matrix")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if not is_hermitian(m, PSD_TOL * scale):
        raise ValueError("eig_hermitian called on a non-Hermitian matrix")
    w, v = np.linalg.eigh(hermitian_part(m))
    return w, v


def min_eig(m) -> float:
    m = hermitian_part(np.asarray(m))
    if m.shape[-1] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(m).min())


def is_psd(m, tol: float = PSD_TOL) -> bool:
    return is_hermitian(m, tol * max(1.0, float(np.abs(np.asarray(m)).max(initial=0.0)))) and min_eig(m) >= -tol


def positive_negative_parts(m) -> tuple[np.ndarray, np.ndarray]:
    """Split a Hermitian matrix as ``P - N`` with ``P, N >= 0`` and ``P N = 0``."""
    w, v = eig_hermitian(m)
    pos = (v * np.clip(w, 0, None)) @ dagger(v)
    neg = (v * np.clip(-w, 0, None)) @ dagger(v)
    return hermitian_part(pos), hermitian_part(neg)


def trace_norm(m) -> float:
    return float(np.abs(np.linalg.eigvalsh(hermitian_part(np.asarray(m)))).sum())


def gamma_matrix(d: int) -> np.ndarray:
    """Unnormalized maximally entangled projector ``|Γ><Γ|`` with ``|Γ> = Σ_j |jj>``."""
    v = np.eye(d).reshape(d * d)
    return np.outer(v, v).astype(complex)


def phi_matrix(d: int) -> np.ndarray:
    """Normalized maximally entangled projector ``Γ/d``."""
    return gamma_matrix(d) / d


def ket(index: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())
