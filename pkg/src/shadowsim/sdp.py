"""Small dense semidefinite programs over Hermitian blocks.

A program is written in standard primal form::

    minimize / maximize   Σ_b tr[C_b X_b] + constant
    subject to            Σ_b L_ib(X_b) = R_i      (matrix or scalar equalities)
                          X_b ⪰ 0                   (for PSD blocks)

Blocks are complex Hermitian by default.  A program flagged ``real=True`` only
carries real data, and its blocks are restricted to real symmetric matrices:
taking the real part of any feasible Hermitian point of such a program gives a
feasible point with the same objective, so nothing is lost.

Each block is parametrised by real coordinates in an orthonormal (Hilbert-Schmidt)
basis.  For real blocks the coordinates coincide with the scaled upper-triangle
vectorisation used by conic solvers.  Complex blocks are handed to the solver via
the real embedding ``H -> [[Re H, -Im H], [Im H, Re H]]``, which is PSD iff ``H`` is.
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import qr

from .linalg import PSD_TOL, hermitian_part

log = logging.getLogger(__name__)

DEFAULT_GAP_TOL = 1e-7
DEFAULT_RES_TOL = 1e-8
MAX_ITER = 200

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"

Term = Union[np.ndarray, Callable[[np.ndarray], np.ndarray], float, complex]


def default_tolerances() -> tuple[float, float]:
    """Gap and residual tolerances, honouring ``SHADOWSIM_GAP_TOL`` / ``SHADOWSIM_RES_TOL``."""
    gap = float(os.environ.get("SHADOWSIM_GAP_TOL", DEFAULT_GAP_TOL))
    res = float(os.environ.get("SHADOWSIM_RES_TOL", DEFAULT_RES_TOL))
    return gap, res


class SdpError(RuntimeError):
    """Raised when a solve does not end in an optimal status and the caller asked for one."""

    def __init__(self, message: str, solution: "SdpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


# ---------------------------------------------------------------------------
# coordinates


def coord_dim(side: int, real: bool) -> int:
    return side * (side + 1) // 2 if real else side * side


def _triu_colmajor(side: int) -> tuple[np.ndarray, np.ndarray]:
    cols, rows = [], []
    for j in range(side):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def coord_basis(side: int, real: bool) -> np.ndarray:
    """Orthonormal basis of real-symmetric (``real``) or Hermitian ``side x side`` matrices.

    Real ordering follows the column-major upper triangle.  The complex ordering is
    that same triangle (real parts) followed by the strict upper triangle (imaginary
    parts).
    """
    rows, cols = _triu_colmajor(side)
    dim = coord_dim(side, real)
    out = np.zeros((dim, side, side), dtype=float if real else complex)
    r2 = np.sqrt(0.5)
    for k, (i, j) in enumerate(zip(rows, cols)):
        if i == j:
            out[k, i, i] = 1.0
        else:
            out[k, i, j] = out[k, j, i] = r2
    if not real:
        k = len(rows)
        for i, j in zip(rows, cols):
            if i == j:
                continue
            out[k, i, j] = 1j * r2
            out[k, j, i] = -1j * r2
            k += 1
    return out


def to_coords(m: np.ndarray, real: bool) -> np.ndarray:
    """Coordinates ``tr[B_k M]`` of (a batch of) Hermitian matrices."""
    m = np.asarray(m)
    side = m.shape[-1]
    rows, cols = _triu_colmajor(side)
    upper = m[..., rows, cols]
    diag = rows == cols
    scale = np.where(diag, 1.0, np.sqrt(2.0))
    re = upper.real * scale
    if real:
        return re
    off = ~diag
    im = np.sqrt(2.0) * upper[..., off].imag
    return np.concatenate([re, im], axis=-1)


def from_coords(x: np.ndarray, side: int, real: bool) -> np.ndarray:
    basis = coord_basis(side, real)
    return np.tensordot(np.asarray(x, dtype=float), basis, axes=(0, 0))


def _embed_real(m: np.ndarray) -> np.ndarray:
    re, im = m.real, m.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


# ---------------------------------------------------------------------------
# program description


@dataclass(frozen=True)
class Block:
    name: str
    side: int
    cone: str = "psd"  # "psd" or "free"


@dataclass
class _Equality:
    terms: dict[str, Term]
    rhs: np.ndarray  # k x k Hermitian (1x1 for scalar equalities)
    label: str = ""


@dataclass
class SdpProgram:
    """Hermitian-block SDP in standard form.  Build it with the ``add_*`` methods."""

    sense: str = "min"
    real: bool = False
    blocks: dict[str, Block] = field(default_factory=dict)
    objective: dict[str, Term] = field(default_factory=dict)
    constant: float = 0.0
    equalities: list[_Equality] = field(default_factory=list)
    _slack_count: int = 0

    def add_block(self, name: str, side: int, cone: str = "psd") -> str:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name!r}")
        if cone not in ("psd", "free"):
            raise ValueError(f"unknown cone {cone!r}")
        if side < 1:
            raise ValueError("block side must be positive")
        self.blocks[name] = Block(name, int(side), cone)
        return name

    def set_objective(self, terms: Mapping[str, Term], sense: str | None = None, constant: float = 0.0):
        if sense is not None:
            if sense not in ("min", "max"):
                raise ValueError("sense must be 'min' or 'max'")
            self.sense = sense
        self._check_terms(terms)
        self.objective = dict(terms)
        self.constant = float(constant)

    def add_equality(self, terms: Mapping[str, Term], rhs, label: str = "") -> None:
        """Add ``Σ_b term_b(X_b) = rhs``.

        A term is either a callable (a Hermitian-preserving linear map that accepts a
        batch of matrices) or a coefficient: a Hermitian matrix ``C`` meaning
        ``tr[C X_b]``, or a number ``c`` meaning ``c * X_b`` for 1x1 blocks and
        ``c * tr[X_b]`` otherwise.
        """
        self._check_terms(terms)
        rhs = np.atleast_2d(np.asarray(rhs, dtype=complex))
        if rhs.shape[0] != rhs.shape[1]:
            raise ValueError("equality right-hand side must be square")
        self.equalities.append(_Equality(dict(terms), rhs, label))

    def add_psd_constraint(self, terms: Mapping[str, Term], offset=None, name: str | None = None) -> str:
        """Require ``Σ_b term_b(X_b) + offset ⪰ 0`` through a new slack PSD block."""
        side = self._term_output_side(terms, offset)
        if name is None:
            self._slack_count += 1
            name = f"_slack{self._slack_count}"
        self.add_block(name, side, "psd")
        t = dict(terms)
        t[name] = lambda s: -s
        rhs = np.zeros((side, side)) if offset is None else -np.atleast_2d(np.asarray(offset))
        self.add_equality(t, rhs, label=f"psd:{name}")
        return name

    def fill_slacks(self, values: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Complete ``values`` with the slack blocks implied by ``add_psd_constraint``."""
        out = {k: _as_block_value(v) for k, v in values.items()}
        for eq in self.equalities:
            if not eq.label.startswith("psd:"):
                continue
            name = eq.label[4:]
            if name in out:
                continue
            acc = -eq.rhs
            for bname, t in eq.terms.items():
                if bname != name:
                    acc = acc + _apply_term(t, out[bname], eq.rhs.shape[0])
            out[name] = hermitian_part(acc)
        return out

    def _check_terms(self, terms: Mapping[str, Term]) -> None:
        for name in terms:
            if name not in self.blocks:
                raise KeyError(f"unknown block {name!r}")

    def _term_output_side(self, terms, offset) -> int:
        if offset is not None:
            return int(np.atleast_2d(np.asarray(offset)).shape[0])
        for name, t in terms.items():
            if callable(t):
                b = self.blocks[name]
                probe = t(np.zeros((1, b.side, b.side), dtype=complex))
                return int(probe.shape[-1])
        return 1

    # evaluation on concrete block values --------------------------------

    def objective_value(self, values: Mapping[str, np.ndarray]) -> float:
        total = self.constant
        for name, t in self.objective.items():
            total += float(np.real(_apply_scalar_term(t, np.asarray(values[name]))))
        return total

    def equality_residuals(self, values: Mapping[str, np.ndarray]) -> list[float]:
        out = []
        for eq in self.equalities:
            acc = -eq.rhs
            for name, t in eq.terms.items():
                acc = acc + _apply_term(t, _as_block_value(values[name]), eq.rhs.shape[0])
            out.append(float(np.abs(acc).max(initial=0.0)))
        return out


def _as_block_value(v) -> np.ndarray:
    return np.atleast_2d(np.asarray(v, dtype=complex))


def _apply_scalar_term(t: Term, x: np.ndarray):
    x = np.atleast_2d(x)
    if callable(t):
        return np.trace(t(x[None])[0])
    if np.isscalar(t):
        return t * np.trace(x)
    return np.trace(np.asarray(t) @ x)


def _apply_term(t: Term, x: np.ndarray, out_side: int) -> np.ndarray:
    """Apply a term to a batch ``(..., n, n)`` and return ``(..., k, k)``."""
    if callable(t):
        return np.asarray(t(x))
    if np.isscalar(t):
        if out_side == 1:
            return (t * np.trace(x, axis1=-2, axis2=-1))[..., None, None]
        if x.shape[-1] != out_side:
            raise ValueError("scalar term needs matching block and equality sides")
        return t * x
    c = np.asarray(t)
    return np.einsum("ij,...ji->...", c, x)[..., None, None]


# ---------------------------------------------------------------------------
# solutions


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    block_values: dict[str, np.ndarray]
    duality_gap: float
    max_residual: float
    dual_residual: float = float("nan")
    iterations: int = 0
    solve_time: float = 0.0
    backend: str = ""
    raw_status: str = ""
    multipliers: list[np.ndarray] = dataclasses.field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def __getitem__(self, name: str) -> np.ndarray:
        return self.block_values[name]


@dataclass
class ConicData:
    """Real conic form handed to a backend: min q.x s.t. A x = b, cone rows ∈ PSD."""

    q: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    # per PSD block: (coordinate slice, sparse map coords -> svec of the real matrix, real side)
    cones: list[tuple[slice, sp.csr_matrix, int]]


@dataclass
class RawResult:
    status: str  # one of the module statuses, before tolerance checks
    x: np.ndarray | None
    y: np.ndarray | None  # multipliers of A x = b, sign: q - A^T y ∈ cone
    iterations: int = 0
    solve_time: float = 0.0
    raw_status: str = ""


class Backend(Protocol):
    name: str

    def solve(self, data: ConicData, gap_tol: float, res_tol: float, max_iter: int) -> RawResult: ...


class _Compiled:
    """Coordinate-level data of a program."""

    def __init__(self, prog: SdpProgram):
        self.prog = prog
        self.offsets: dict[str, slice] = {}
        n = 0
        for b in prog.blocks.values():
            d = coord_dim(b.side, prog.real)
            self.offsets[b.name] = slice(n, n + d)
            n += d
        self.n = n
        sign = 1.0 if prog.sense == "min" else -1.0
        q = np.zeros(n)
        for name, t in prog.objective.items():
            q[self.offsets[name]] = sign * self._functional_row(name, t)
        self.q = q
        rows, rhs, self.eq_slices = [], [], []
        start = 0
        for eq in prog.equalities:
            mat, vec = self._equality_rows(eq)
            rows.append(mat)
            rhs.append(vec)
            self.eq_slices.append(slice(start, start + mat.shape[0]))
            start += mat.shape[0]
        self.a_eq = sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, n))
        self.b_eq = np.concatenate(rhs) if rhs else np.zeros(0)
        self.cones = []
        for b in prog.blocks.values():
            if b.cone != "psd":
                continue
            if prog.real:
                cmap = sp.identity(coord_dim(b.side, True), format="csr")
                self.cones.append((self.offsets[b.name], cmap, b.side))
            else:
                basis = coord_basis(b.side, False)
                emb = _embed_real(basis)
                cmap = sp.csr_matrix(to_coords(emb, True).T)
                self.cones.append((self.offsets[b.name], cmap, 2 * b.side))

    def _basis(self, name: str) -> np.ndarray:
        b = self.prog.blocks[name]
        return coord_basis(b.side, self.prog.real)

    def _functional_row(self, name: str, t: Term) -> np.ndarray:
        basis = self._basis(name)
        vals = _apply_term(t, basis, 1) if not callable(t) else np.trace(t(basis), axis1=-2, axis2=-1)
        vals = np.asarray(vals).reshape(basis.shape[0])
        return np.real(vals)

    def _equality_rows(self, eq: _Equality) -> tuple[sp.csr_matrix, np.ndarray]:
        k = eq.rhs.shape[0]
        real = self.prog.real
        if real and np.abs(eq.rhs.imag).max(initial=0.0) > 0:
            raise ValueError(f"complex right-hand side in real program ({eq.label})")
        out_dim = coord_dim(k, real)
        blocks = []
        for name in self.prog.blocks:
            sl = self.offsets[name]
            if name not in eq.terms:
                blocks.append(sp.csr_matrix((out_dim, sl.stop - sl.start)))
                continue
            basis = self._basis(name)
            cols = []
            for start in range(0, basis.shape[0], 256):
                chunk = basis[start:start + 256]
                img = _apply_term(eq.terms[name], chunk, k)
                if img.shape[-2:] != (k, k):
                    raise ValueError(f"term on {name!r} maps to {img.shape[-2:]}, expected {(k, k)}")
                herm_err = np.abs(img - np.swapaxes(img.conj(), -1, -2)).max(initial=0.0)
                if herm_err > 1e-10 * max(1.0, np.abs(img).max(initial=0.0)):
                    raise ValueError(f"term on {name!r} is not Hermitian-preserving ({eq.label})")
                if real and np.abs(img.imag).max(initial=0.0) > 1e-12:
                    raise ValueError(f"term on {name!r} has complex data in a real program")
                cols.append(to_coords(img, real))
            dense = np.concatenate(cols, axis=0).T
            dense[np.abs(dense) < 1e-14] = 0.0
            blocks.append(sp.csr_matrix(dense))
        mat = sp.hstack(blocks, format="csr")
        vec = to_coords(eq.rhs, real)
        return mat, vec

    def block_values(self, x: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for name, b in self.prog.blocks.items():
            out[name] = from_coords(x[self.offsets[name]], b.side, self.prog.real)
        return out

    def conic(self) -> ConicData:
        return ConicData(self.q, self.a_eq, self.b_eq, self.cones)


def compile_program(prog: SdpProgram) -> _Compiled:
    return _Compiled(prog)


_ROW_CACHE: dict[bytes, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
_ROW_CACHE_SIZE = 32


def _row_basis(a: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kept row indices, dropped row indices and ``C`` with ``A[dropped] = C @ A[kept]``."""
    a = a.tocsr()
    a.sort_indices()
    key = hashlib.sha1(np.asarray(a.shape).tobytes() + a.indptr.tobytes() + a.indices.tobytes()
                       + a.data.tobytes()).digest()
    hit = _ROW_CACHE.get(key)
    if hit is not None:
        return hit
    dense = a.toarray()
    _, r, piv = qr(dense.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    rank = int((diag > 1e-10 * max(1.0, diag.max(initial=0.0))).sum())
    keep = np.sort(piv[:rank])
    drop = np.setdiff1d(np.arange(a.shape[0]), keep)
    coef = np.linalg.lstsq(dense[keep].T, dense[drop].T, rcond=None)[0].T if drop.size else np.zeros((0, rank))
    if len(_ROW_CACHE) >= _ROW_CACHE_SIZE:
        _ROW_CACHE.pop(next(iter(_ROW_CACHE)))
    _ROW_CACHE[key] = (keep, drop, coef)
    return keep, drop, coef


def independent_rows(a: sp.csr_matrix, b: np.ndarray) -> np.ndarray | None:
    """Indices of a maximal linearly independent subset of the rows of ``a``.

    Returns ``None`` when the dropped rows are inconsistent with the kept ones,
    i.e. the equalities have no solution at all.  Interior-point solvers stall on
    rank-deficient equality blocks, and the no-signaling programs produce them
    naturally (the trace conditions are implied by the marginal conditions).
    The factorization is cached by the sparsity pattern and values of ``a``, so a
    sweep that only changes right-hand sides pays for it once.
    """
    if a.shape[0] == 0:
        return np.zeros(0, dtype=int)
    keep, drop, coef = _row_basis(a)
    if drop.size:
        mismatch = np.abs(coef @ b[keep] - b[drop]).max(initial=0.0)
        if mismatch > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
            return None
    return keep


# ---------------------------------------------------------------------------
# backends


class ClarabelBackend:
    """Primal-dual interior point with Nesterov-Todd scaling (Clarabel)."""

    name = "clarabel"

    def solve(self, data: ConicData, gap_tol: float, res_tol: float, max_iter: int) -> RawResult:
        import clarabel

        n = data.q.shape[0]
        m_eq = data.a_eq.shape[0]
        a_rows = [data.a_eq]
        b_rows = [data.b_eq]
        cones = []
        if m_eq:
            cones.append(clarabel.ZeroConeT(m_eq))
        for sl, cmap, side in data.cones:
            block = sp.hstack([sp.csr_matrix((cmap.shape[0], sl.start)), -cmap,
                               sp.csr_matrix((cmap.shape[0], n - sl.stop))], format="csr")
            a_rows.append(block)
            b_rows.append(np.zeros(cmap.shape[0]))
            cones.append(clarabel.PSDTriangleConeT(side))
        a = sp.vstack(a_rows, format="csc")
        b = np.concatenate(b_rows)
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = max_iter
        tight = min(1e-9, 0.1 * res_tol, 0.01 * gap_tol)
        settings.tol_gap_abs = tight
        settings.tol_gap_rel = tight
        settings.tol_feas = tight
        settings.tol_ktratio = 1e-7
        settings.presolve_enable = False
        p = sp.csc_matrix((n, n))
        solver = clarabel.DefaultSolver(p, data.q, a, b, cones, settings)
        res = solver.solve()
        raw = str(res.status)
        if raw in ("Solved", "AlmostSolved", "MaxIterations", "MaxTime", "InsufficientProgress",
                   "NumericalError", "AlmostPrimalInfeasible", "AlmostDualInfeasible"):
            status = OPTIMAL if raw in ("Solved", "AlmostSolved") else NUMERICAL_FAILURE
        elif raw == "PrimalInfeasible":
            status = INFEASIBLE
        elif raw == "DualInfeasible":
            status = UNBOUNDED
        else:
            status = NUMERICAL_FAILURE
        x = np.asarray(res.x, dtype=float)
        z = np.asarray(res.z, dtype=float)
        # Clarabel dual: q + A^T z = 0, so equality multipliers are y = -z_eq
        y = -z[:m_eq]
        return RawResult(status, x, y, int(res.iterations), float(res.solve_time), raw)


class CvxoptBackend:
    """cvxopt ``conelp``: interior point with Nesterov-Todd scaling, dense KKT."""

    name = "cvxopt"

    def solve(self, data: ConicData, gap_tol: float, res_tol: float, max_iter: int) -> RawResult:
        import time

        import cvxopt

        n = data.q.shape[0]
        a = data.a_eq.toarray()
        b = data.b_eq
        g_rows, sides = [], []
        for sl, cmap, side in data.cones:
            full = _svec_to_full(side) @ cmap.toarray()
            blk = np.zeros((side * side, n))
            blk[:, sl] = -full
            g_rows.append(blk)
            sides.append(side)
        g = np.vstack(g_rows) if g_rows else np.zeros((0, n))
        h = np.zeros(g.shape[0])
        opts = {"show_progress": False, "maxiters": max_iter, "abstol": 1e-10,
                "reltol": 1e-10, "feastol": 1e-10}
        t0 = time.perf_counter()
        try:
            res = cvxopt.solvers.conelp(
                cvxopt.matrix(data.q), cvxopt.matrix(g), cvxopt.matrix(h),
                {"l": 0, "q": [], "s": sides},
                cvxopt.matrix(a) if a.shape[0] else None,
                cvxopt.matrix(b) if a.shape[0] else None, options=opts)
        except (ArithmeticError, ValueError) as exc:
            # conelp divides by scaling entries that can reach zero on degenerate instances
            return RawResult(NUMERICAL_FAILURE, None, None, 0, time.perf_counter() - t0, f"exception: {exc}")
        elapsed = time.perf_counter() - t0
        raw = res["status"]
        status = {"optimal": OPTIMAL, "primal infeasible": INFEASIBLE,
                  "dual infeasible": UNBOUNDED}.get(raw, OPTIMAL if res["x"] is not None else NUMERICAL_FAILURE)
        if res["x"] is None:
            return RawResult(status if status != OPTIMAL else NUMERICAL_FAILURE, None, None, 0, elapsed, raw)
        x = np.array(res["x"]).reshape(-1)
        y = np.zeros(data.a_eq.shape[0])
        if a.shape[0]:
            # cvxopt: q + G^T z + A^T y = 0, we want q - A^T y' ∈ cone, so y' = -y
            y = -np.array(res["y"]).reshape(-1)
        return RawResult(status, x, y, int(res.get("iterations", 0)), elapsed, raw)


def _svec_to_full(side: int) -> np.ndarray:
    """Matrix mapping scaled upper-triangle vectors to column-major full vectors."""
    rows, cols = _triu_colmajor(side)
    out = np.zeros((side * side, rows.size))
    r2 = np.sqrt(0.5)
    for k, (i, j) in enumerate(zip(rows, cols)):
        if i == j:
            out[j * side + i, k] = 1.0
        else:
            out[j * side + i, k] = r2
            out[i * side + j, k] = r2
    return out


BACKENDS: dict[str, Backend] = {"clarabel": ClarabelBackend(), "cvxopt": CvxoptBackend()}


# ---------------------------------------------------------------------------
# solve / feasibility


def solve(prog: SdpProgram, gap_tol: float | None = None, res_tol: float | None = None,
          backend: str | Backend = "clarabel", max_iter: int = MAX_ITER,
          fallback: str | Backend | None = "cvxopt") -> SdpSolution:
    """Solve ``prog`` and report primal/dual values, gap and residuals.

    ``status == "optimal"`` guarantees ``max_residual <= res_tol`` and
    ``|primal - dual| <= gap_tol * (1 + |primal|)``; ``duality_gap`` holds that
    relative gap.  Infeasible and unbounded programs come back with their own
    status instead of raising.

    If ``backend`` ends in ``numerical_failure`` the program is re-solved with
    ``fallback`` (pass ``None`` to disable); the first optimal answer wins.
    """
    dg, dr = default_tolerances()
    gap_tol = dg if gap_tol is None else gap_tol
    res_tol = dr if res_tol is None else res_tol
    be = BACKENDS[backend] if isinstance(backend, str) else backend
    comp = compile_program(prog)
    nan = float("nan")
    keep = independent_rows(comp.a_eq, comp.b_eq)
    if keep is None:
        return SdpSolution(INFEASIBLE, nan, nan, {}, nan, nan, nan, 0, 0.0, be.name, "inconsistent equalities")
    reduced = ConicData(comp.q, comp.a_eq[keep], comp.b_eq[keep], comp.cones)
    sol = _solve_with(prog, comp, reduced, keep, be, gap_tol, res_tol, max_iter)
    if sol.status == NUMERICAL_FAILURE and fallback is not None:
        fb = BACKENDS[fallback] if isinstance(fallback, str) else fallback
        if fb.name != be.name:
            log.debug("%s ended with %s; retrying with %s", be.name, sol.raw_status, fb.name)
            retry = _solve_with(prog, comp, reduced, keep, fb, gap_tol, res_tol, max_iter)
            if retry.status == OPTIMAL:
                return retry
    return sol


def _solve_with(prog: SdpProgram, comp: "_Compiled", reduced: ConicData, keep: np.ndarray, be: Backend,
                gap_tol: float, res_tol: float, max_iter: int) -> SdpSolution:
    nan = float("nan")
    raw = be.solve(reduced, gap_tol, res_tol, max_iter)
    if raw.y is not None:
        y_full = np.zeros(comp.a_eq.shape[0])
        y_full[keep] = raw.y
        raw.y = y_full
    if raw.x is None or raw.status in (INFEASIBLE, UNBOUNDED):
        status = raw.status if raw.status != OPTIMAL else NUMERICAL_FAILURE
        return SdpSolution(status, nan, nan, {}, nan, nan, nan, raw.iterations,
                           raw.solve_time, be.name, raw.raw_status)
    x = raw.x
    values = comp.block_values(x)
    sign = 1.0 if prog.sense == "min" else -1.0
    primal = prog.objective_value(values)
    y = raw.y if raw.y is not None else np.zeros(comp.a_eq.shape[0])
    dual = sign * float(comp.b_eq @ y) + prog.constant
    eq_res = np.abs(comp.a_eq @ x - comp.b_eq).max(initial=0.0)
    psd_res = 0.0
    for name, b in prog.blocks.items():
        if b.cone == "psd":
            psd_res = max(psd_res, -float(np.linalg.eigvalsh(values[name]).min()))
    max_res = max(float(eq_res), psd_res, 0.0)
    slack = comp.q - comp.a_eq.T @ y
    dual_res = 0.0
    for name, b in prog.blocks.items():
        s = slack[comp.offsets[name]]
        if b.cone == "psd":
            mat = from_coords(s, b.side, prog.real)
            dual_res = max(dual_res, -float(np.linalg.eigvalsh(mat).min()))
        else:
            dual_res = max(dual_res, float(np.abs(s).max(initial=0.0)))
    gap = abs(primal - dual) / (1.0 + abs(primal))
    status = raw.status
    if status == OPTIMAL and (gap > gap_tol or max_res > res_tol):
        log.debug("solver returned %s but gap=%.2e residual=%.2e", raw.raw_status, gap, max_res)
        status = NUMERICAL_FAILURE
    multipliers = [y[s] for s in comp.eq_slices]
    return SdpSolution(status, primal, dual, values, gap, max_res, dual_res,
                       raw.iterations, raw.solve_time, be.name, raw.raw_status, multipliers)


def check_feasible(prog: SdpProgram, values: Mapping[str, np.ndarray], tol: float = PSD_TOL
                   ) -> tuple[bool, float]:
    """Check candidate block values against every constraint of ``prog``.

    Equalities are evaluated in matrix form through the original terms; PSD blocks
    must have minimum eigenvalue ``>= -tol``.  Returns the largest violation.
    """
    missing = set(prog.blocks) - set(values)
    if missing:
        raise ValueError(f"missing block values: {sorted(missing)}")
    worst = 0.0
    for name, b in prog.blocks.items():
        v = _as_block_value(values[name])
        if v.shape != (b.side, b.side):
            raise ValueError(f"block {name!r} has shape {v.shape}, expected {(b.side, b.side)}")
        herm = float(np.abs(v - v.conj().T).max(initial=0.0))
        worst = max(worst, herm)
        if b.cone == "psd":
            worst = max(worst, -float(np.linalg.eigvalsh(hermitian_part(v)).min()))
    res = prog.equality_residuals(values)
    if res:
        worst = max(worst, max(res))
    return worst <= tol, worst


def dump(prog: SdpProgram, stream: io.TextIOBase | None = None) -> str:
    """Write a plain-text description of the compiled program.

    Format (one record per line)::

        sdp <min|max> <real|complex> nvars <n> neq <m>
        block <name> <side> <psd|free> <first_coord> <ncoords>
        objective_constant <value>
        c <coord> <value>                 (nonzero objective coefficients)
        a <row> <coord> <value>           (nonzero equality coefficients)
        b <row> <value>                   (equality right-hand sides)

    Coordinates use the orthonormal basis described in the module docstring.
    """
    comp = compile_program(prog)
    out = io.StringIO()
    out.write(f"sdp {prog.sense} {'real' if prog.real else 'complex'} nvars {comp.n} neq {comp.a_eq.shape[0]}\n")
    for name, b in prog.blocks.items():
        sl = comp.offsets[name]
        out.write(f"block {name} {b.side} {b.cone} {sl.start} {sl.stop - sl.start}\n")
    out.write(f"objective_constant {prog.constant!r}\n")
    sign = 1.0 if prog.sense == "min" else -1.0
    for k in np.flatnonzero(comp.q):
        out.write(f"c {k} {sign * comp.q[k]!r}\n")
    coo = comp.a_eq.tocoo()
    for r, c, v in zip(coo.row, coo.col, coo.data):
        out.write(f"a {r} {c} {v!r}\n")
    for r, v in enumerate(comp.b_eq):
        out.write(f"b {r} {v!r}\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text
