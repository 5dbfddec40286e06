"""Block-diagonal LMI problems, an interior-point solver and SDPA sparse I/O.

Problems are in SDPA's native form

    minimize  c . y   subject to   F(y) = sum_i y_i F_i - F_0  >= 0,

with the dual  maximize F_0 . Z  subject to  F_i . Z = c_i,  Z >= 0.
Any dual feasible Z gives the lower bound F_0 . Z on the minimum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"


class SDPFormatError(ValueError):
    pass


class CertificationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SDPProblem:
    """Sparse upper-triangle entries ``(mat, blk, row, col, val)``, 0-based blocks and indices.

    ``mat == 0`` addresses F_0, ``mat == i`` addresses F_i (1-based
    variables as in SDPA). Entries are sorted, deduplicated and nonzero.
    """
    nvars: int
    block_sizes: tuple
    c: np.ndarray
    mat: np.ndarray
    blk: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray

    @classmethod
    def from_entries(cls, nvars, block_sizes, c, mat, blk, row, col, val) -> "SDPProblem":
        mat, blk, row, col = (np.asarray(a, dtype=np.int64) for a in (mat, blk, row, col))
        val = np.asarray(val, dtype=float)
        block_sizes = tuple(int(s) for s in block_sizes)
        if any(s < 1 for s in block_sizes):
            raise SDPFormatError("block sizes must be positive")
        lo = np.minimum(row, col)
        hi = np.maximum(row, col)
        if mat.size:
            sizes = np.array(block_sizes)[blk]
            if np.any(hi >= sizes) or np.any(lo < 0):
                raise SDPFormatError("entry index out of block range")
            if np.any(mat < 0) or np.any(mat > nvars):
                raise SDPFormatError("matrix number out of range")
        order = np.lexsort((hi, lo, blk, mat))
        mat, blk, lo, hi, val = mat[order], blk[order], lo[order], hi[order], val[order]
        if mat.size:
            key = np.stack([mat, blk, lo, hi], axis=1)
            new = np.ones(len(mat), dtype=bool)
            new[1:] = np.any(key[1:] != key[:-1], axis=1)
            groups = np.cumsum(new) - 1
            summed = np.zeros(groups[-1] + 1)
            np.add.at(summed, groups, val)
            mat, blk, lo, hi = mat[new], blk[new], lo[new], hi[new]
            keep = summed != 0.0
            mat, blk, lo, hi, val = mat[keep], blk[keep], lo[keep], hi[keep], summed[keep]
        c = np.array(c, dtype=float).reshape(nvars)
        return cls(int(nvars), block_sizes, c, mat, blk, lo, hi, val)

    def __eq__(self, other):
        if not isinstance(other, SDPProblem):
            return NotImplemented
        return (self.nvars == other.nvars and self.block_sizes == other.block_sizes
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("c", "mat", "blk", "row", "col", "val")))

    def dense_block(self, b: int, i: int) -> np.ndarray:
        """F_i restricted to block ``b`` as a dense symmetric matrix."""
        n = self.block_sizes[b]
        sel = (self.mat == i) & (self.blk == b)
        out = np.zeros((n, n))
        out[self.row[sel], self.col[sel]] = self.val[sel]
        out[self.col[sel], self.row[sel]] = self.val[sel]
        return out

    def lmi(self, y: np.ndarray) -> list:
        """F(y) = sum y_i F_i - F_0, block by block."""
        out = [np.zeros((n, n)) for n in self.block_sizes]
        coef = np.where(self.mat == 0, -1.0, 0.0)
        nz = self.mat > 0
        coef[nz] = np.asarray(y, dtype=float)[self.mat[nz] - 1]
        w = coef * self.val
        for b, n in enumerate(self.block_sizes):
            sel = self.blk == b
            m = np.zeros((n, n))
            np.add.at(m, (self.row[sel], self.col[sel]), w[sel])
            off = self.row[sel] != self.col[sel]
            np.add.at(m, (self.col[sel][off], self.row[sel][off]), w[sel][off])
            out[b] = m
        return out


# ---------------------------------------------------------------- SDPA format

def export_sdpa(p: SDPProblem, comments: list[str] | None = None) -> str:
    lines = [f"* {c}" for c in comments or []]
    lines.append(str(p.nvars))
    lines.append(str(len(p.block_sizes)))
    lines.append(" ".join(str(s) for s in p.block_sizes))
    lines.append(" ".join(repr(float(v)) for v in p.c) if p.nvars else "")
    for m, b, i, j, v in zip(p.mat.tolist(), p.blk.tolist(), p.row.tolist(), p.col.tolist(),
                             p.val.tolist()):
        lines.append(f"{m} {b + 1} {i + 1} {j + 1} {v!r}")
    return "\n".join(lines) + "\n"


def _strip_braces(line: str) -> str:
    return line.replace("{", " ").replace("}", " ").replace(",", " ")


def parse_sdpa(text: str) -> SDPProblem:
    raw = text.splitlines()
    # the objective line may be empty when there are no variables
    header = [(no, line) for no, line in enumerate(raw, 1) if not line.lstrip().startswith(('"', "*"))]

    def fail(no, msg):
        raise SDPFormatError(f"line {no}: {msg}")

    if len(header) < 3:
        raise SDPFormatError("truncated header")
    try:
        nvars = int(_strip_braces(header[0][1]).split()[0])
    except (ValueError, IndexError):
        fail(header[0][0], "expected the number of variables")
    try:
        nblocks = int(_strip_braces(header[1][1]).split()[0])
    except (ValueError, IndexError):
        fail(header[1][0], "expected the number of blocks")
    try:
        sizes = [int(t) for t in _strip_braces(header[2][1]).split()]
    except ValueError:
        fail(header[2][0], "block sizes must be integers")
    if len(sizes) != nblocks:
        fail(header[2][0], f"expected {nblocks} block sizes, got {len(sizes)}")
    if any(s == 0 for s in sizes):
        fail(header[2][0], "block size 0")
    if any(s < 0 for s in sizes):
        fail(header[2][0], "diagonal (negative size) blocks are not supported")
    obj_idx = 3
    if nvars == 0:
        # objective line may be missing or blank
        rest = header[3:]
        if rest and not rest[0][1].strip():
            rest = rest[1:]
        c = []
    else:
        if len(header) <= obj_idx:
            raise SDPFormatError("missing objective line")
        no, line = header[obj_idx]
        try:
            c = [float(t) for t in _strip_braces(line).split()]
        except ValueError:
            fail(no, "objective entries must be numbers")
        if len(c) != nvars:
            fail(no, f"expected {nvars} objective entries, got {len(c)}")
        rest = header[obj_idx + 1:]
    mat, blk, row, col, val = [], [], [], [], []
    for no, line in rest:
        if not line.strip():
            continue
        toks = line.split()
        if len(toks) != 5:
            fail(no, "expected 'matno blkno i j value'")
        try:
            m, b, i, j = (int(t) for t in toks[:4])
            v = float(toks[4])
        except ValueError:
            fail(no, "malformed entry")
        if not 0 <= m <= nvars:
            fail(no, f"matrix number {m} out of range")
        if not 1 <= b <= nblocks:
            fail(no, f"block number {b} out of range")
        if j < i:
            fail(no, "entries must satisfy i <= j")
        if i < 1 or j > sizes[b - 1]:
            fail(no, f"index ({i}, {j}) out of range for block of size {sizes[b - 1]}")
        mat.append(m); blk.append(b - 1); row.append(i - 1); col.append(j - 1); val.append(v)
    return SDPProblem.from_entries(nvars, tuple(sizes), c, mat, blk, row, col, val)


# ---------------------------------------------------------------- solver

@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    # dual residuals only loosen the certificate (certify charges them), so a
    # slightly looser tolerance is safe
    dual_feas_tol: float = 1e-7
    max_iterations: int = 200
    step_fraction: float = 0.95
    init_scale: float | None = None


@dataclass(eq=False)
class SDPSolution:
    y: np.ndarray
    primal_objective: float
    dual_objective: float
    status: str
    Z: list                       # dual block matrices
    min_eigenvalue: float         # smallest eigenvalue of F(y)
    relative_gap: float
    primal_infeasibility: float
    dual_infeasibility: float
    iterations: int
    history: list = field(default_factory=list)  # (primal, dual, pinf, dinf) per iterate


class _Operator:
    """Precomputed sparse structure of the F_i for the Schur complement."""

    def __init__(self, p: SDPProblem):
        self.p = p
        self.m = p.nvars
        self.blocks = []
        nz = p.mat > 0
        for b, n in enumerate(p.block_sizes):
            sel = (p.blk == b) & nz
            var = p.mat[sel] - 1
            r, c, v = p.row[sel], p.col[sel], p.val[sel]
            off = r != c
            # symmetric expansion
            R = np.concatenate([r, c[off]])
            C = np.concatenate([c, r[off]])
            V = np.concatenate([v, v[off]])
            I = np.concatenate([var, var[off]])
            order = np.argsort(I, kind="stable")
            R, C, V, I = R[order], C[order], V[order], I[order]
            vars_here, starts, counts = np.unique(I, return_index=True, return_counts=True)
            # vec(F_i) columns: row index r * n + c
            A = sp.csc_matrix((V, (R * n + C, I)), shape=(n * n, self.m))
            diagonal = bool(np.all(R == C)) and not np.any(p.dense_block(b, 0) - np.diag(np.diag(p.dense_block(b, 0))))
            # variables grouped by entry count, for batched products
            groups = []
            for e in np.unique(counts):
                sel_v = counts == e
                idx = starts[sel_v][:, None] + np.arange(e)[None, :]
                groups.append((vars_here[sel_v], idx))
            self.blocks.append(dict(n=n, R=R, C=C, V=V, vars=vars_here, groups=groups, diagonal=diagonal,
                                    A=A, AT=A.T.tocsr(), Ad=A[np.arange(n) * (n + 1)] if diagonal else None,
                                    F0=p.dense_block(b, 0)))

    def apply(self, y):
        """sum_i y_i F_i per block."""
        out = []
        for bl in self.blocks:
            n = bl["n"]
            out.append((bl["A"] @ y).reshape(n, n))
        return out

    def adjoint(self, mats):
        """(F_i . M)_i summed over blocks."""
        out = np.zeros(self.m)
        for bl, M in zip(self.blocks, mats):
            out += bl["AT"] @ M.ravel()
        return out

    def schur(self, Xinv, Z):
        """B_ij = sum_blocks tr(F_i X^-1 F_j Z)."""
        B = np.zeros((self.m, self.m))
        for bl, Xi, Zb in zip(self.blocks, Xinv, Z):
            n = bl["n"]
            if len(bl["vars"]) == 0:
                continue
            if bl["diagonal"]:
                # X and Z stay diagonal on diagonal blocks
                Ad = bl["Ad"]
                B += (Ad.T @ sp.diags(np.diag(Xi) * np.diag(Zb)) @ Ad).toarray()
                continue
            R, C, V = bl["R"], bl["C"], bl["V"]
            AT = bl["AT"]
            for js_all, idx_all in bl["groups"]:
                e = idx_all.shape[1]
                chunk = max(1, int(2.5e7 // (n * max(n, e))))
                for s in range(0, len(js_all), chunk):
                    js, idx = js_all[s:s + chunk], idx_all[s:s + chunk]
                    # (X^-1 F_j Z)^T = Z F_j X^-1 = sum_entries v * Z[:, r] X^-1[c, :]
                    U = (Zb[:, R[idx]] * V[idx]).transpose(1, 0, 2)   # (g, n, e)
                    W = Xi[C[idx], :]                                   # (g, e, n)
                    Gt = np.matmul(U, W).reshape(len(js), n * n)
                    B[:, js] += AT @ Gt.T
        return (B + B.T) / 2


def _max_step(M, dM):
    """Largest alpha with M + alpha dM >= 0, via the Cholesky factor of M."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return 0.0
    Li = scipy.linalg.solve_triangular(L, np.eye(len(M)), lower=True)
    S = Li @ dM @ Li.T
    lam = np.linalg.eigvalsh((S + S.T) / 2).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _initial_point(op: _Operator, c, scale=None):
    """Scaled identities per block, following the usual infeasible-start heuristic."""
    X, Z = [], []
    for bl in op.blocks:
        n = bl["n"]
        if scale is not None:
            X.append(scale * np.eye(n)); Z.append(scale * np.eye(n))
            continue
        fnorm = np.sqrt(np.asarray(bl["A"].multiply(bl["A"]).sum(axis=0))).ravel()
        present = fnorm > 0
        ratio = ((1.0 + np.abs(c[present])) / (1.0 + fnorm[present])).max() if present.any() else 0.0
        xi = max(10.0, np.sqrt(n), n * ratio)
        eta = max(10.0, np.sqrt(n), float(np.linalg.norm(bl["F0"])), fnorm.max() if fnorm.size else 0.0)
        X.append(eta * np.eye(n))   # slack F(y) - starts from y = 0 anyway
        Z.append(xi * np.eye(n))
    return X, Z


def _factor(B):
    """Cholesky of the Schur complement, with a tiny diagonal shift if it is singular."""
    try:
        return scipy.linalg.cho_factor(B)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        shift = 1e-14 * max(1.0, float(np.abs(np.diag(B)).max()))
        return scipy.linalg.cho_factor(B + shift * np.eye(len(B)))


def _inner(As, Bs):
    return float(sum(np.sum(a * b) for a, b in zip(As, Bs)))


def solve(p: SDPProblem, opts: SolverOptions | None = None) -> SDPSolution:
    """Infeasible primal-dual path following (HKM direction, Mehrotra predictor-corrector)."""
    opts = opts or SolverOptions()
    op = _Operator(p)
    F0 = [bl["F0"] for bl in op.blocks]
    c = p.c
    m = p.nvars
    N = sum(p.block_sizes)
    norm_F0 = np.sqrt(_inner(F0, F0))
    norm_c = float(np.linalg.norm(c)) if m else 0.0

    if m == 0:
        X = [-f for f in F0]
        mineig = min(float(np.linalg.eigvalsh(x).min()) for x in X)
        status = OPTIMAL if mineig >= -opts.feas_tol else NUMERICAL_FAILURE
        Z = [np.zeros_like(f) for f in F0]
        return SDPSolution(np.zeros(0), 0.0, 0.0, status, Z, mineig, 0.0,
                           max(0.0, -mineig), 0.0, 0, [(0.0, 0.0, max(0.0, -mineig), 0.0)])

    y = np.zeros(m)
    X, Z = _initial_point(op, c, opts.init_scale)
    history = []
    status = MAX_ITERATIONS
    gamma = opts.step_fraction
    it = 0
    best = None

    def metrics(y, X, Z):
        Fy = op.apply(y)
        Rp = [x - f + f0 for x, f, f0 in zip(X, Fy, F0)]
        rd = c - op.adjoint(Z)
        pobj = float(c @ y)
        dobj = _inner(F0, Z)
        pinf = np.sqrt(_inner(Rp, Rp)) / (1.0 + norm_F0)
        dinf = float(np.linalg.norm(rd)) / (1.0 + norm_c)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return Rp, rd, pobj, dobj, pinf, dinf, gap

    def merit(gap, pinf, dinf):
        return max(gap / opts.gap_tol, pinf / opts.feas_tol, dinf / opts.dual_feas_tol)

    for it in range(opts.max_iterations + 1):
        Rp, rd, pobj, dobj, pinf, dinf, gap = metrics(y, X, Z)
        history.append((pobj, dobj, pinf, dinf))
        log.debug("it %3d  pobj %.10g  dobj %.10g  pinf %.2e  dinf %.2e  gap %.2e",
                  it, pobj, dobj, pinf, dinf, gap)
        score = merit(gap, pinf, dinf)
        if best is None or score < best[0]:
            best = (score, it, y, X, Z)
        if score <= 1.0:
            status = OPTIMAL
            break
        if score > 1e3 * best[0] and best[0] < 1e3:
            # late iterations lost accuracy; fall back to the best iterate
            status = NUMERICAL_FAILURE
            break
        if it == opts.max_iterations:
            break
        try:
            Xinv = [scipy.linalg.cho_solve(scipy.linalg.cho_factor(x), np.eye(len(x))) for x in X]
            Xinv = [(a + a.T) / 2 for a in Xinv]
            B = op.schur(Xinv, Z)
            cho = _factor(B)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            status = NUMERICAL_FAILURE
            break
        mu = _inner(X, Z) / N

        def direction(mu_target, corr):
            # dX = sum dy F - Rp,  dZ = mu X^-1 - Z - corr - X^-1 dX Z
            head = [mu_target * xi_ - z - cr for xi_, z, cr in zip(Xinv, Z, corr)]
            base = [h + xi_ @ r @ z for h, xi_, r, z in zip(head, Xinv, Rp, Z)]
            rhs = op.adjoint([(b + b.T) / 2 for b in base]) - rd
            dy = scipy.linalg.cho_solve(cho, rhs)
            for _ in range(2):  # iterative refinement
                dy += scipy.linalg.cho_solve(cho, rhs - B @ dy)
            dFy = op.apply(dy)
            dX = [f - r for f, r in zip(dFy, Rp)]
            dZ = [h - xi_ @ dx @ z for h, xi_, dx, z in zip(head, Xinv, dX, Z)]
            dZ = [(d + d.T) / 2 for d in dZ]
            return dy, dX, dZ

        zero = [np.zeros_like(x) for x in X]
        dy_a, dX_a, dZ_a = direction(0.0, zero)
        ap = min([1.0] + [_max_step(x, d) for x, d in zip(X, dX_a)])
        ad = min([1.0] + [_max_step(z, d) for z, d in zip(Z, dZ_a)])
        mu_aff = _inner([x + ap * d for x, d in zip(X, dX_a)], [z + ad * d for z, d in zip(Z, dZ_a)]) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        corr = [xi_ @ dx @ dz for xi_, dx, dz in zip(Xinv, dX_a, dZ_a)]
        dy, dX, dZ = direction(sigma * mu, corr)
        ap = min(1.0, gamma * min(_max_step(x, d) for x, d in zip(X, dX)))
        ad = min(1.0, gamma * min(_max_step(z, d) for z, d in zip(Z, dZ)))
        if ap <= 1e-12 and ad <= 1e-12:
            status = NUMERICAL_FAILURE
            break
        y = y + ap * dy
        X = [x + ap * d for x, d in zip(X, dX)]
        Z = [z + ad * d for z, d in zip(Z, dZ)]
        X = [(x + x.T) / 2 for x in X]
        Z = [(z + z.T) / 2 for z in Z]

    if status != OPTIMAL and best is not None and best[1] != it:
        _, it_best, y, X, Z = best
        log.debug("returning iterate %d", it_best)
    Fy = op.apply(y)
    Fy = [f - f0 for f, f0 in zip(Fy, F0)]
    mineig = min(float(np.linalg.eigvalsh(f).min()) for f in Fy)
    Rp, rd, pobj, dobj, pinf, dinf, gap = metrics(y, X, Z)
    if merit(gap, pinf, dinf) <= 1.0:
        status = OPTIMAL
    if status == OPTIMAL and mineig < -opts.feas_tol:
        status = NUMERICAL_FAILURE
    return SDPSolution(y, pobj, dobj, status, Z, mineig, gap, pinf, dinf, it, history)


# ---------------------------------------------------------------- certification

@dataclass(frozen=True)
class CertifiedBound:
    value: float
    slack: float
    dual_objective: float
    primal_objective: float


def certify(p: SDPProblem, s: SDPSolution, variable_bound: float = 1.0) -> CertifiedBound:
    """Rigorous lower bound on the minimum from the dual iterate.

    With Z+ the PSD part of Z and r = c - (F_i . Z+)_i, every feasible y
    with |y_i| <= variable_bound satisfies
        c . y = F(y) . Z+ + F_0 . Z+ + r . y >= F_0 . Z+ - variable_bound * |r|_1.
    Moment variables are expectations of products of POVM elements, so
    variable_bound = 1 holds for every state.
    """
    if s.status == NUMERICAL_FAILURE:
        raise CertificationError("no certificate from a failed solve")
    op = _Operator(p)
    Zp = []
    for z in s.Z:
        w, v = np.linalg.eigh((z + z.T) / 2)
        Zp.append((v * np.clip(w, 0.0, None)) @ v.T)
    F0 = [bl["F0"] for bl in op.blocks]
    dobj = _inner(F0, Zp)
    r = p.c - op.adjoint(Zp) if p.nvars else np.zeros(0)
    slack = variable_bound * float(np.abs(r).sum())
    return CertifiedBound(dobj - slack, slack, dobj, s.primal_objective)
