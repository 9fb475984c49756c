"""Krylov solvers, factorizations and eigenvalue estimation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class IndefiniteMatrixError(np.linalg.LinAlgError):
    """A Cholesky-type factorization met a nonpositive pivot."""

    def __init__(self, message: str, pivot_index: int, pivot_value: float = float("nan")):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value


class BreakdownError(RuntimeError):
    pass


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    achieved_reduction: float = float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,residual\n")
            for k, r in enumerate(self.residual_history):
                fh.write(f"{k},{r:.17g}\n")


def _as_operator(M) -> Callable[[np.ndarray], np.ndarray]:
    if M is None:
        return lambda x: x
    if callable(M) and not hasattr(M, "shape"):
        return M
    if hasattr(M, "apply"):
        return M.apply
    if hasattr(M, "matvec"):
        return M.matvec
    return lambda x: M @ x


# ---------------------------------------------------------------------------
# direct methods


def dense_spd_factor(M) -> np.ndarray:
    """Lower Cholesky factor of a dense SPD matrix.

    Raises :class:`IndefiniteMatrixError` naming the (0-based) offending pivot.
    """
    M = np.asarray(M, dtype=float)
    L, info = sla.lapack.dpotrf(M, lower=1, clean=1)
    if info > 0:
        raise IndefiniteMatrixError(f"nonpositive pivot at index {info - 1}", info - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} passed to dpotrf")
    return L


def dense_spd_solve(M, b) -> np.ndarray:
    L = dense_spd_factor(M)
    return sla.cho_solve((L, True), b)


def dense_eig(M) -> np.ndarray:
    """Eigenvalues of a symmetric matrix in ascending order."""
    M = np.asarray(M, dtype=float)
    return sla.eigvalsh(0.5 * (M + M.T))


def sparse_spd_factor(M):
    """Sparse LU with symmetric ordering and no pivoting, checked for positivity.

    With a symmetric permutation and no row pivoting the pivots of the LU
    factorization are those of an LDL^T factorization, so they are all
    positive exactly when ``M`` is SPD.
    """
    M = sp.csc_matrix(M)
    try:
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:  # exactly singular
        raise IndefiniteMatrixError(f"singular matrix: {exc}", -1, 0.0) from exc
    d = lu.U.diagonal()
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        k = int(bad[0])
        raise IndefiniteMatrixError(f"nonpositive pivot at index {k}", int(lu.perm_c[k]), float(d[k]))
    return lu


class SPDSolver:
    """Factor once, solve many times; dense Cholesky for small, sparse LDL-type for large."""

    dense_limit = 1500

    def __init__(self, M):
        self.n = M.shape[0]
        if self.n <= self.dense_limit:
            D = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
            self._L = dense_spd_factor(D)
            self._lu = None
        else:
            self._L = None
            self._lu = sparse_spd_factor(M)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._L is not None:
            return sla.cho_solve((self._L, True), b)
        return self._lu.solve(b)


# ---------------------------------------------------------------------------
# Krylov methods


def pcg(A, B, b, x0=None, reduction: float = 1e-6, maxit: int = 1000) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients.

    Stops once the Euclidean norm of the unpreconditioned residual has been
    reduced by ``reduction`` relative to ``||b - A x0||``.  One iteration is
    one update of the iterate (one preconditioner application in the loop).
    """
    if not 0 < reduction < 1:
        raise ValueError("reduction must lie in (0, 1)")
    Aop, Bop = _as_operator(A), _as_operator(B)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - Aop(x)
    r0 = np.linalg.norm(r)
    rep = SolveReport(residual_history=[float(r0)])
    if r0 == 0.0:
        rep.converged, rep.achieved_reduction = True, 0.0
        return x, rep
    z = Bop(r)
    p = z.copy()
    rz = r @ z
    for k in range(1, maxit + 1):
        Ap = Aop(p)
        curv = p @ Ap
        if not curv > 0:
            raise BreakdownError(f"nonpositive curvature {curv:.3e} at iteration {k}: operator not SPD")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        rn = np.linalg.norm(r)
        rep.residual_history.append(float(rn))
        rep.iterations = k
        if rn <= reduction * r0:
            rep.converged = True
            break
        z = Bop(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    rep.achieved_reduction = rep.residual_history[-1] / r0
    return x, rep


def gmres_left(A, B, b, x0=None, reduction: float = 1e-6, maxit: int = 500) -> tuple[np.ndarray, SolveReport]:
    """Unrestarted GMRES applied to ``B A x = B b``.

    Convergence is measured on the preconditioned residual ``||B(b - A x)||``
    relative to its initial value.  Arnoldi uses modified Gram-Schmidt and the
    least-squares problem is updated with Givens rotations.
    """
    if not 0 < reduction < 1:
        raise ValueError("reduction must lie in (0, 1)")
    Aop, Bop = _as_operator(A), _as_operator(B)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    z = Bop(b - Aop(x))
    beta = np.linalg.norm(z)
    rep = SolveReport(residual_history=[float(beta)])
    if beta == 0.0:
        rep.converged, rep.achieved_reduction = True, 0.0
        return x, rep

    n = b.size
    V = np.zeros((maxit + 1, n))
    Hm = np.zeros((maxit + 1, maxit))
    cs, sn = np.zeros(maxit), np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    V[0] = z / beta
    k = 0
    for k in range(maxit):
        w = Bop(Aop(V[k]))
        for i in range(k + 1):
            Hm[i, k] = w @ V[i]
            w -= Hm[i, k] * V[i]
        hn = np.linalg.norm(w)
        Hm[k + 1, k] = hn
        for i in range(k):
            t = cs[i] * Hm[i, k] + sn[i] * Hm[i + 1, k]
            Hm[i + 1, k] = -sn[i] * Hm[i, k] + cs[i] * Hm[i + 1, k]
            Hm[i, k] = t
        denom = np.hypot(Hm[k, k], Hm[k + 1, k])
        cs[k], sn[k] = Hm[k, k] / denom, Hm[k + 1, k] / denom
        Hm[k, k] = denom
        Hm[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        res = abs(g[k + 1])
        rep.residual_history.append(float(res))
        rep.iterations = k + 1
        # lucky breakdown: Krylov space is invariant, solution is exact
        if res <= reduction * beta or hn <= 1e-14 * beta:
            rep.converged = True
            break
        V[k + 1] = w / hn
    m = rep.iterations
    y = sla.solve_triangular(Hm[:m, :m], g[:m])
    x += V[:m].T @ y
    rep.achieved_reduction = rep.residual_history[-1] / beta
    return x, rep


# ---------------------------------------------------------------------------
# eigenvalues


def lanczos_extreme(op, inner, n: int, maxit: int = 200, tol: float = 1e-6,
                    seed: int = 0) -> tuple[float, float, int]:
    """Extreme eigenvalues of an operator self-adjoint in the ``inner`` product.

    ``op(x)`` applies the operator and ``inner(x)`` the Gram matrix of the
    inner product (for ``B A`` in the A-inner product, ``inner = A``).  Full
    reorthogonalization is used.  Returns ``(lambda_min, lambda_max, steps)``.
    """
    rng = np.random.default_rng(seed)
    Op, G = _as_operator(op), _as_operator(inner)
    maxit = min(maxit, n)
    Q = np.zeros((maxit + 1, n))
    GQ = np.zeros((maxit + 1, n))
    v = rng.standard_normal(n)
    Gv = G(v)
    nv = np.sqrt(v @ Gv)
    Q[0], GQ[0] = v / nv, Gv / nv
    alpha, beta = [], []
    prev = None
    for k in range(maxit):
        w = Op(Q[k])
        c = GQ[: k + 1] @ w
        alpha.append(float(c[k]))
        w = w - Q[: k + 1].T @ c
        # second pass of full reorthogonalization
        w = w - Q[: k + 1].T @ (GQ[: k + 1] @ w)
        Gw = G(w)
        bk = np.sqrt(max(w @ Gw, 0.0))
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        ev = sla.eigvalsh(T)
        cur = (ev[0], ev[-1])
        if prev is not None and abs(cur[0] - prev[0]) <= tol * abs(cur[0]) and abs(cur[1] - prev[1]) <= tol * abs(cur[1]) and k >= 10:
            return cur[0], cur[1], k + 1
        if bk <= 1e-12 * max(abs(ev).max(), 1.0):
            return cur[0], cur[1], k + 1
        prev = cur
        beta.append(bk)
        Q[k + 1], GQ[k + 1] = w / bk, Gw / bk
    raise np.linalg.LinAlgError(f"Lanczos did not converge in {maxit} iterations")
