"""Dense symmetric matrices and a first-order SDP solver.

Problems are stated over the lower triangle of a symmetric matrix ``X``
(row-major, entry ``(i, j)`` with ``j <= i`` at ``i*(i+1)//2 + j``).
Constraint rows act on that entry vector directly, so ``X[i, j] - X[k, l] = 0``
is a row with two nonzeros. Objective and ``<A, X>`` style constraints are
converted with :func:`inner_product_row`.

The solver presolves entry equalities and zero fixings into classes of
aggregated variables, drops rows and columns whose diagonal is forced to
zero, and runs over-relaxed ADMM between the affine set (in the aggregated
variables) and the PSD cone. The affine step solves one KKT system whose
factorization is computed once.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import InfeasibleError, NotPSDError, ValidationError

log = logging.getLogger(__name__)

MAX_DIM = 2000


def tri_size(dim: int) -> int:
    return dim * (dim + 1) // 2


def tri_index(i: int, j: int) -> int:
    if j > i:
        i, j = j, i
    return i * (i + 1) // 2 + j


def tri_coords(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column of every lower-triangle entry, in storage order."""
    rows, cols = np.tril_indices(dim)
    order = np.lexsort((cols, rows))
    return rows[order], cols[order]


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix stored as its row-major lower triangle."""

    dim: int
    lower: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be positive")
        if self.dim > MAX_DIM:
            raise ValidationError(f"dim {self.dim} exceeds cap {MAX_DIM}")
        lower = np.asarray(self.lower, dtype=float)
        if lower.shape != (tri_size(self.dim),):
            raise ValidationError(
                f"lower triangle needs {tri_size(self.dim)} entries, got {lower.shape}"
            )
        lower.setflags(write=False)
        object.__setattr__(self, "lower", lower)

    @classmethod
    def from_dense(cls, m: np.ndarray) -> "SymMatrix":
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("expected a square matrix")
        r, c = tri_coords(m.shape[0])
        # average the two triangles so slightly asymmetric input is accepted
        return cls(m.shape[0], 0.5 * (m[r, c] + m[c, r]))

    @classmethod
    def zeros(cls, dim: int) -> "SymMatrix":
        return cls(dim, np.zeros(tri_size(dim)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        r, c = tri_coords(self.dim)
        out[r, c] = self.lower
        out[c, r] = self.lower
        return out

    def __getitem__(self, ij) -> float:
        i, j = ij
        return float(self.lower[tri_index(i, j)])

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.to_dense())

    def to_json(self) -> dict:
        return {"dim": self.dim, "lower": self.lower.tolist()}

    @classmethod
    def from_json(cls, data: dict | str) -> "SymMatrix":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(int(data["dim"]), np.asarray(data["lower"], dtype=float))


def inner_product_row(a: SymMatrix | np.ndarray) -> np.ndarray:
    """Coefficients ``w`` with ``<A, X> = w . lower(X)`` (off-diagonals doubled)."""
    if not isinstance(a, SymMatrix):
        a = SymMatrix.from_dense(a)
    r, c = tri_coords(a.dim)
    return np.where(r == c, 1.0, 2.0) * a.lower


@dataclass
class SdpProblem:
    """``max/min <C, X>`` subject to entry-linear rows and ``X`` PSD.

    ``eq`` rows satisfy ``A_eq @ lower(X) = b_eq``; ``ineq`` rows satisfy
    ``A_ineq @ lower(X) <= b_ineq``. Each row carries a family tag used
    for violation reports.
    """

    dim: int
    objective: SymMatrix
    sense: str = "max"
    A_eq: sp.csr_matrix = None
    b_eq: np.ndarray = None
    eq_family: np.ndarray = None
    A_ineq: sp.csr_matrix = None
    b_ineq: np.ndarray = None
    ineq_family: np.ndarray = None
    families: list = field(default_factory=list)

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise ValidationError(f"sense must be 'max' or 'min', got {self.sense!r}")
        if self.objective.dim != self.dim:
            raise ValidationError("objective dimension does not match problem")
        n = tri_size(self.dim)
        for name in ("eq", "ineq"):
            A = getattr(self, f"A_{name}")
            if A is None:
                A = sp.csr_matrix((0, n))
                setattr(self, f"b_{name}", np.zeros(0))
                setattr(self, f"{name}_family", np.zeros(0, dtype=np.int32))
            A = sp.csr_matrix(A)
            if A.shape[1] != n:
                raise ValidationError(f"{name} rows must have {n} columns, got {A.shape[1]}")
            setattr(self, f"A_{name}", A)
            b = np.asarray(getattr(self, f"b_{name}"), dtype=float)
            fam = getattr(self, f"{name}_family")
            if fam is None:
                fam = np.zeros(A.shape[0], dtype=np.int32)
            setattr(self, f"b_{name}", b)
            setattr(self, f"{name}_family", np.asarray(fam, dtype=np.int32))
            if b.shape != (A.shape[0],):
                raise ValidationError(f"{name} right-hand side has wrong length")
        if not self.families:
            self.families = ["constraint"]

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def n_ineq(self) -> int:
        return self.A_ineq.shape[0]

    def objective_value(self, x: SymMatrix) -> float:
        return float(inner_product_row(self.objective) @ x.lower)

    def violations(self, x: SymMatrix) -> tuple[np.ndarray, np.ndarray]:
        """Per-row equality violation ``|Ax - b|`` and inequality excess ``max(Ax - b, 0)``."""
        eq = np.abs(self.A_eq @ x.lower - self.b_eq)
        ineq = np.maximum(self.A_ineq @ x.lower - self.b_ineq, 0.0)
        return eq, ineq

    def row_label(self, kind: str, row: int) -> str:
        fam = self.eq_family if kind == "eq" else self.ineq_family
        return f"{self.families[fam[row]]}#{row}"

    def to_json(self) -> dict:
        def rows(A, b, fam):
            A = A.tocsr()
            return [
                {
                    "idx": A.indices[A.indptr[i] : A.indptr[i + 1]].tolist(),
                    "val": A.data[A.indptr[i] : A.indptr[i + 1]].tolist(),
                    "rhs": float(b[i]),
                    "family": self.families[fam[i]],
                }
                for i in range(A.shape[0])
            ]

        return {
            "dim": self.dim,
            "sense": self.sense,
            "objective": self.objective.to_json(),
            "eq": rows(self.A_eq, self.b_eq, self.eq_family),
            "ineq": rows(self.A_ineq, self.b_ineq, self.ineq_family),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SdpProblem":
        n = tri_size(int(data["dim"]))
        b = SdpBuilder(int(data["dim"]), sense=data["sense"])
        b.objective = SymMatrix.from_json(data["objective"]).lower.copy()
        for kind in ("eq", "ineq"):
            for row in data[kind]:
                b.add_row(kind, row["idx"], row["val"], row["rhs"], row["family"])
        assert b.n_entries == n
        return b.build()


class SdpBuilder:
    """Accumulates sparse constraint rows and produces an :class:`SdpProblem`."""

    def __init__(self, dim: int, sense: str = "max"):
        if dim > MAX_DIM:
            raise ValidationError(f"dim {dim} exceeds cap {MAX_DIM}")
        self.dim = dim
        self.sense = sense
        self.n_entries = tri_size(dim)
        self.objective = np.zeros(self.n_entries)  # lower-triangle SymMatrix entries
        self.families: list[str] = []
        self._fam_index: dict[str, int] = {}
        self._rows = {"eq": ([], [], [], [], []), "ineq": ([], [], [], [], [])}
        self._count = {"eq": 0, "ineq": 0}

    def family(self, name: str) -> int:
        if name not in self._fam_index:
            self._fam_index[name] = len(self.families)
            self.families.append(name)
        return self._fam_index[name]

    def add_row(self, kind: str, idx: Sequence[int], val: Sequence[float], rhs: float, family: str):
        ri, ci, vi, bi, fi = self._rows[kind]
        row = self._count[kind]
        ri.extend([row] * len(idx))
        ci.extend(idx)
        vi.extend(val)
        bi.append(rhs)
        fi.append(self.family(family))
        self._count[kind] += 1

    def add_rows(self, kind: str, rows, cols, vals, rhs, family: str):
        """Vectorized insertion; ``rows`` are local row numbers starting at 0."""
        rows = np.asarray(rows, dtype=np.int64)
        rhs = np.asarray(rhs, dtype=float)
        ri, ci, vi, bi, fi = self._rows[kind]
        offset = self._count[kind]
        ri.append(rows + offset)
        ci.append(np.asarray(cols, dtype=np.int64))
        vi.append(np.asarray(vals, dtype=float))
        bi.append(rhs)
        fi.append(np.full(len(rhs), self.family(family), dtype=np.int32))
        self._count[kind] += len(rhs)

    def add_matrix_constraint(
        self, a: SymMatrix | np.ndarray, rhs: float, direction: str = "==", family: str = "constraint"
    ) -> None:
        """Add ``<A, X> (==|<=|>=) rhs`` from a matrix-form constraint."""
        w = inner_product_row(a)
        idx = np.flatnonzero(w)
        if direction == "==":
            self.add_row("eq", idx, w[idx], rhs, family)
        elif direction == "<=":
            self.add_row("ineq", idx, w[idx], rhs, family)
        elif direction == ">=":
            self.add_row("ineq", idx, -w[idx], -rhs, family)
        else:
            raise ValidationError(f"unknown direction {direction!r}")

    def add_entry(self, i: int, j: int, coef: float) -> None:
        """Add ``coef * <E_ij, X>`` to the objective (symmetric unit at i,j)."""
        k = tri_index(i, j)
        self.objective[k] += coef if i == j else 0.5 * coef

    def _assemble(self, kind: str):
        ri, ci, vi, bi, fi = self._rows[kind]

        def cat(parts, dtype):
            arrays = [np.atleast_1d(np.asarray(p, dtype=dtype)) for p in parts]
            return np.concatenate(arrays) if arrays else np.zeros(0, dtype=dtype)

        rows, cols, vals = cat(ri, np.int64), cat(ci, np.int64), cat(vi, float)
        b, fam = cat(bi, float), cat(fi, np.int32)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(self._count[kind], self.n_entries))
        A.sum_duplicates()
        return A, b, fam

    def build(self) -> SdpProblem:
        A_eq, b_eq, f_eq = self._assemble("eq")
        A_in, b_in, f_in = self._assemble("ineq")
        return SdpProblem(
            dim=self.dim,
            objective=SymMatrix(self.dim, self.objective),
            sense=self.sense,
            A_eq=A_eq,
            b_eq=b_eq,
            eq_family=f_eq,
            A_ineq=A_in,
            b_ineq=b_in,
            ineq_family=f_in,
            families=list(self.families) or ["constraint"],
        )


@dataclass
class SdpSolution:
    matrix: SymMatrix
    objective_value: float
    primal_residual: float
    psd_violation: float
    iterations: int
    converged: bool = True
    dual_residual: float = 0.0
    max_eq_violation: float = 0.0
    max_ineq_violation: float = 0.0
    wall_time: float = 0.0
    status: str = "converged"

    def to_json(self) -> dict:
        return {
            "matrix": self.matrix.to_json(),
            "objective_value": self.objective_value,
            "primal_residual": self.primal_residual,
            "psd_violation": self.psd_violation,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SdpSolution":
        return cls(
            matrix=SymMatrix.from_json(data["matrix"]),
            objective_value=float(data["objective_value"]),
            primal_residual=float(data["primal_residual"]),
            psd_violation=float(data["psd_violation"]),
            iterations=int(data["iterations"]),
            converged=bool(data.get("converged", True)),
            status=data.get("status", "converged"),
        )


# ---------------------------------------------------------------- presolve


@dataclass
class _Reduced:
    keep: np.ndarray  # kept row/col indices of X
    entry_class: np.ndarray  # class id per full lower entry, -1 if fixed to zero
    n_cls: int
    weight: np.ndarray  # Frobenius multiplicity of each class
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    c: np.ndarray  # maximize c @ y
    sub_class: np.ndarray  # class id per lower entry of the kept submatrix, -1 for zero


def _dedupe_rows(A: sp.csr_matrix, b: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    A = A.tocsr()
    A.sort_indices()
    seen = {}
    keep = []
    for i in range(A.shape[0]):
        s, e = A.indptr[i], A.indptr[i + 1]
        key = (A.indices[s:e].tobytes(), np.round(A.data[s:e], 12).tobytes(), round(float(b[i]), 12))
        if key not in seen:
            seen[key] = i
            keep.append(i)
    keep = np.asarray(keep, dtype=np.int64)
    return A[keep], b[keep]


def _presolve(p: SdpProblem, feas_tol: float = 1e-9) -> _Reduced:
    n = tri_size(p.dim)
    rows, cols = tri_coords(p.dim)
    A = p.A_eq.tocsr()
    A.eliminate_zeros()
    nnz = np.diff(A.indptr)
    merge_rows = []
    zero_entries = []
    general = np.ones(A.shape[0], dtype=bool)
    for i in np.flatnonzero((nnz <= 2) & (p.b_eq == 0)):
        s, e = A.indptr[i], A.indptr[i + 1]
        idx, val = A.indices[s:e], A.data[s:e]
        if len(idx) == 1:
            zero_entries.append(idx[0])
            general[i] = False
        elif len(idx) == 2 and val[0] == -val[1]:
            merge_rows.append(idx)
            general[i] = False
        elif len(idx) == 0:
            general[i] = False
    if merge_rows:
        pairs = np.asarray(merge_rows)
        graph = sp.coo_matrix(
            (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
        )
        _, labels = connected_components(graph, directed=False)
    else:
        labels = np.arange(n)
    # relabel to dense ids
    _, cls = np.unique(labels, return_inverse=True)
    n_raw = cls.max() + 1
    zero_cls = np.zeros(n_raw, dtype=bool)
    zero_cls[cls[np.asarray(zero_entries, dtype=np.int64)]] = True

    diag_entries = np.array([tri_index(i, i) for i in range(p.dim)])
    dropped = np.zeros(p.dim, dtype=bool)
    while True:
        newly = zero_cls[cls[diag_entries]] & ~dropped
        if not newly.any():
            break
        dropped |= newly
        touching = dropped[rows] | dropped[cols]
        zero_cls[cls[touching]] = True

    alive = ~zero_cls
    new_id = -np.ones(n_raw, dtype=np.int64)
    new_id[alive] = np.arange(alive.sum())
    entry_class = new_id[cls]
    n_cls = int(alive.sum())

    keep = np.flatnonzero(~dropped)
    pos = -np.ones(p.dim, dtype=np.int64)
    pos[keep] = np.arange(len(keep))
    sub_dim = len(keep)
    sub_rows, sub_cols = tri_coords(sub_dim) if sub_dim else (np.zeros(0, int), np.zeros(0, int))
    full_index = keep[sub_rows] * (keep[sub_rows] + 1) // 2 + keep[sub_cols]
    sub_class = entry_class[full_index]

    live_entries = np.flatnonzero(entry_class >= 0)
    P = sp.csr_matrix(
        (np.ones(len(live_entries)), (live_entries, entry_class[live_entries])),
        shape=(n, n_cls),
    )
    mult = np.where(rows == cols, 1.0, 2.0)
    weight = np.bincount(entry_class[live_entries], weights=mult[live_entries], minlength=n_cls)

    def reduce_rows(M, b, kind):
        R = (M @ P).tocsr()
        R.eliminate_zeros()
        empty = np.diff(R.indptr) == 0
        if kind == "eq":
            bad = empty & (np.abs(b) > feas_tol)
        else:
            bad = empty & (b < -feas_tol)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InfeasibleError(f"presolve: {kind} row {i} reduces to 0 with rhs {b[i]}")
        R, b = R[~empty], b[~empty]
        return _dedupe_rows(R, b) if R.shape[0] else (R, b)

    A_red, b_red = reduce_rows(A[general], p.b_eq[general], "eq")
    G_red, h_red = reduce_rows(p.A_ineq, p.b_ineq, "ineq")
    c = P.T @ inner_product_row(p.objective)
    if p.sense == "min":
        c = -c
    return _Reduced(keep, entry_class, n_cls, weight, A_red, b_red, G_red, h_red, c, sub_class)


def _independent_rows(A: sp.csr_matrix, b: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; raise if they are inconsistent."""
    m = A.shape[0]
    if m == 0:
        return A, b
    if m * A.shape[1] > 4e7:
        return A, b
    dense = A.toarray()
    _, R, piv = scipy.linalg.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(1.0, diag[0] if len(diag) else 1.0)))
    rows = np.sort(piv[:rank])
    if rank < m:
        sol, *_ = np.linalg.lstsq(dense[rows], b[rows], rcond=None)
        resid = np.abs(dense @ sol - b).max()
        if resid > 1e-7 * (1 + np.abs(b).max()):
            raise InfeasibleError(f"equality constraints inconsistent (residual {resid:.2e})")
    return A[rows], b[rows]


# ---------------------------------------------------------------- solver


def _psd_project(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    pos = w > 0
    if not pos.any():
        return np.zeros_like(m)
    vp = v[:, pos] * np.sqrt(w[pos])
    return vp @ vp.T


_AA_REG = 1e-8
_AA_SAFEGUARD = 1.0
_AA_STALL = 30


class _Anderson:
    """Type-II Anderson acceleration on a fixed-point map, with restarts."""

    def __init__(self, memory: int):
        self.memory = memory
        self.reset()

    def reset(self):
        self.prev_s = None
        self.prev_t = None
        self.dg: list[np.ndarray] = []
        self.dt: list[np.ndarray] = []

    def step(self, s: np.ndarray, ts: np.ndarray) -> np.ndarray:
        if self.memory == 0:
            return ts
        g = ts - s
        if self.prev_s is not None:
            self.dg.append(g - (self.prev_t - self.prev_s))
            self.dt.append(ts - self.prev_t)
            if len(self.dg) > self.memory:
                self.dg.pop(0)
                self.dt.pop(0)
        self.prev_s, self.prev_t = s, ts
        if not self.dg:
            return ts
        dG = np.column_stack(self.dg)
        gram = dG.T @ dG
        reg = _AA_REG * np.trace(gram) + 1e-300
        try:
            gamma = np.linalg.solve(gram + reg * np.eye(len(gram)), dG.T @ g)
        except np.linalg.LinAlgError:
            self.reset()
            return ts
        return ts - np.column_stack(self.dt) @ gamma


def solve_sdp(
    p: SdpProblem,
    tol: float = 1e-6,
    max_iter: int = 50000,
    rho: float = 0.1,
    alpha: float = 1.5,
    trace: Optional[Callable[[int, float, float], None]] = None,
    trace_every: int = 10,
    divergence: float = 1e-2,
    memory: int = 12,
    adapt_every: int = 100,
) -> SdpSolution:
    """Solve an SDP by over-relaxed ADMM on the presolved problem.

    The iteration alternates an affine step in the aggregated variables
    with a projection onto the PSD cone, accelerated by safeguarded
    Anderson mixing. The penalty is rebalanced between primal and dual
    residuals every ``adapt_every`` iterations.

    Args:
        p: The problem.
        tol: Target for the primal residual ``||X - Z||_F`` plus inequality
            slack mismatch (this bounds the PSD violation and inequality
            excess of the returned matrix). The dual residual must reach
            ``tol * (1 + ||c||)``.
        max_iter: Iteration cap; hitting it returns the best iterate with
            ``converged=False``.
        rho: Initial penalty.
        alpha: Over-relaxation factor in (0, 2).
        trace: Optional callback ``(iteration, primal_residual, psd_violation)``.
        divergence: A non-converged run whose best primal residual exceeds
            this is reported as infeasible.
        memory: Anderson memory; 0 disables acceleration.

    Returns:
        The matrix ``X`` assembled from the aggregated variables, so every
        entry equality and zero fixing holds exactly.

    Raises:
        InfeasibleError: presolve found inconsistent rows, or the residual
            never fell below ``divergence``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    t0 = time.perf_counter()
    red = _presolve(p)
    A, b = _independent_rows(red.A, red.b)
    G, h = red.G, red.h
    ny, D, m_in = red.n_cls, len(red.keep), red.G.shape[0]

    sub_r, sub_c = tri_coords(D) if D else (np.zeros(0, int), np.zeros(0, int))
    live = red.sub_class >= 0
    lr, lc, lcls = sub_r[live], sub_c[live], red.sub_class[live]
    mult = np.where(lr == lc, 1.0, 2.0)
    # packing of symmetric matrices: lower triangle, off-diagonals scaled by sqrt(2)
    pr, pc = np.tril_indices(D)
    pscale = np.where(pr == pc, 1.0, np.sqrt(2.0))
    n_tri = len(pr)

    def assemble(y):
        X = np.zeros((D, D))
        X[lr, lc] = y[lcls]
        X[lc, lr] = y[lcls]
        return X

    def adjoint(Z):
        return np.bincount(lcls, weights=mult * Z[lr, lc], minlength=ny)

    def unpack(vec):
        M = np.zeros((D, D))
        M[pr, pc] = vec / pscale
        M[pc, pr] = M[pr, pc]
        return M

    H0 = sp.diags(red.weight) + (G.T @ G if m_in else sp.csr_matrix((ny, ny)))
    m_eq = A.shape[0]
    K = sp.bmat([[H0, A.T], [A, -1e-12 * sp.eye(m_eq) if m_eq else None]], format="csc")
    lu = spla.splu(K)

    def kkt_solve(rhs_y):
        rhs = np.concatenate([rhs_y, b])
        sol = lu.solve(rhs)
        resid = rhs - K @ sol
        if m_eq:
            resid[ny:] -= 1e-12 * sol[ny:]
        return (sol + lu.solve(resid))[:ny]

    c = red.c
    c_norm = 1.0 + np.linalg.norm(c)

    def admm_step(state, rho):
        Z = unpack(state[:n_tri])
        U = unpack(state[n_tri : 2 * n_tri])
        v = state[2 * n_tri : 2 * n_tri + m_in]
        w = state[2 * n_tri + m_in :]
        rhs = c / rho + adjoint(Z - U)
        if m_in:
            rhs += G.T @ (v - w)
        y = kkt_solve(rhs)
        X = assemble(y)
        Xh = alpha * X + (1 - alpha) * Z
        Zn = _psd_project(Xh + U)
        Un = U + Xh - Zn
        if m_in:
            Gy = G @ y
            gh = alpha * Gy + (1 - alpha) * v
            vn = np.minimum(gh + w, h)
            wn = w + gh - vn
            r_in = np.sum((Gy - vn) ** 2)
            dz_in = G.T @ (vn - v)
        else:
            vn, wn, r_in, dz_in = v, w, 0.0, 0.0
        r_p = float(np.sqrt(np.sum((X - Zn) ** 2) + r_in))
        r_d = float(rho * np.linalg.norm(adjoint(Zn - Z) + dz_in))
        new = np.concatenate([Zn[pr, pc] * pscale, Un[pr, pc] * pscale, vn, wn])
        return new, y, X, Zn, Un, r_p, r_d

    state = np.zeros(2 * n_tri + 2 * m_in)
    aa = _Anderson(memory)
    best, best_score = None, np.inf
    prev_plain, prev_gnorm, from_aa = None, np.inf, False
    best_gnorm, stall = np.inf, 0
    converged = False
    it = 0
    r_p = r_d = np.inf
    for it in range(1, max_iter + 1):
        new, y, X, Zn, Un, r_p, r_d = admm_step(state, rho)
        gnorm = float(np.linalg.norm(new - state))
        if from_aa and not gnorm <= _AA_SAFEGUARD * prev_gnorm:
            # acceleration made things worse: fall back to the plain iterate
            aa.reset()
            state, from_aa = prev_plain, False
            continue
        score = max(r_p / tol, r_d / (tol * c_norm))
        if score < best_score:
            best_score, best = score, y
        if trace is not None and (it % trace_every == 0 or it == 1):
            trace(it, r_p, max(0.0, -float(np.linalg.eigvalsh(X)[0])) if D else 0.0)
        if r_p <= tol and r_d <= tol * c_norm:
            converged, best = True, y
            break
        if it % adapt_every == 0:
            rel_p = r_p / max(np.linalg.norm(X), np.linalg.norm(Zn), 1e-12)
            rel_d = r_d / max(rho * np.linalg.norm(adjoint(Un)), np.linalg.norm(c), 1e-12)
            ratio = np.sqrt(rel_p / max(rel_d, 1e-300))
            if ratio > 5 or ratio < 0.2:
                ratio = float(np.clip(ratio, 1e-3, 1e3))
                rho *= ratio
                new[n_tri:] /= ratio  # rescale the scaled duals U and w
                new[2 * n_tri : 2 * n_tri + m_in] *= ratio  # undo for v
                aa.reset()
                prev_plain, prev_gnorm, from_aa = new, np.inf, False
                state = new
                continue
        prev_plain, prev_gnorm = new, gnorm
        if gnorm < best_gnorm:
            best_gnorm, stall = gnorm, 0
        else:
            stall += 1
            if stall >= _AA_STALL:
                aa.reset()
                stall = 0
        cand = aa.step(state, new)
        from_aa = cand is not new
        state = cand

    y = best if best is not None else np.zeros(ny)
    X_sub = assemble(y)
    full = np.zeros((p.dim, p.dim))
    if D:
        full[np.ix_(red.keep, red.keep)] = X_sub
    Xs = SymMatrix.from_dense(full)
    eig_min = float(np.linalg.eigvalsh(X_sub)[0]) if D else 0.0
    psd_violation = max(0.0, -eig_min)
    eq_v, in_v = p.violations(Xs)
    ineq_excess = float(in_v.max()) if len(in_v) else 0.0
    primal = max(psd_violation, ineq_excess)
    status = "converged" if converged else "max_iter"
    if not converged and primal > divergence:
        raise InfeasibleError(
            f"no iterate reached primal residual {divergence:g} in {it} iterations "
            f"(psd violation {psd_violation:.3e}, inequality excess {ineq_excess:.3e})"
        )
    obj = p.objective_value(Xs)
    log.debug("solve_sdp: %s after %d iterations, obj=%.6f", status, it, obj)
    return SdpSolution(
        matrix=Xs,
        objective_value=obj,
        primal_residual=primal,
        psd_violation=psd_violation,
        iterations=it,
        converged=converged,
        dual_residual=r_d,
        max_eq_violation=float(eq_v.max()) if len(eq_v) else 0.0,
        max_ineq_violation=ineq_excess,
        wall_time=time.perf_counter() - t0,
        status=status,
    )


# ---------------------------------------------------------------- utilities


def gram_vectors(m: SymMatrix | np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Rows ``v_i`` with ``<v_i, v_j> = m[i, j]`` after clipping the negative part.

    Uses the symmetric eigendecomposition (ascending eigenvalues) so the
    output is deterministic. Columns for zero eigenvalues are dropped.

    Raises:
        NotPSDError: if the smallest eigenvalue is below ``-tol``.
    """
    dense = m.to_dense() if isinstance(m, SymMatrix) else np.asarray(m, dtype=float)
    dense = 0.5 * (dense + dense.T)
    w, v = np.linalg.eigh(dense)
    if w[0] < -tol:
        raise NotPSDError(f"minimum eigenvalue {w[0]:.3e} below -{tol:g}")
    scale = max(1.0, float(np.abs(w).max()))
    pos = w > 1e-14 * scale
    if not pos.any():
        return np.zeros((dense.shape[0], 1))
    return v[:, pos] * np.sqrt(w[pos])


def projection_residual(columns: np.ndarray, chosen: Sequence[int]) -> float:
    """``sum_i ||P v_i||^2`` where P projects off the span of the chosen columns.

    ``columns`` is a matrix whose columns are the vectors ``v_i``.
    """
    X = np.asarray(columns, dtype=float)
    total = float(np.sum(X * X))
    chosen = list(chosen)
    if not chosen:
        return total
    B = X[:, chosen]
    u, s, _ = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return total
    basis = u[:, s > s[0] * max(B.shape) * np.finfo(float).eps]
    captured = float(np.sum((basis.T @ X) ** 2))
    return min(total, max(0.0, total - captured))


def hw_pairing_bound(a: SymMatrix | np.ndarray, b: SymMatrix | np.ndarray) -> float:
    """Smallest ``sum_i (lambda_i(A) - lambda_sigma(i)(B))^2`` over pairings.

    Sorting both spectra ascending gives the minimizing pairing.
    """
    A = a.to_dense() if isinstance(a, SymMatrix) else np.asarray(a, dtype=float)
    B = b.to_dense() if isinstance(b, SymMatrix) else np.asarray(b, dtype=float)
    if A.shape != B.shape:
        raise ValidationError(f"dimension mismatch {A.shape} vs {B.shape}")
    la = np.linalg.eigvalsh(A)
    lb = np.linalg.eigvalsh(B)
    return float(np.sum((la - lb) ** 2))
