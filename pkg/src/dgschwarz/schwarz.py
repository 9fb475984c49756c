"""Two-level additive Schwarz preconditioners for the DG form.

The preconditioner is ``B = sum_i I_i A_i^{-1} I_i^T`` where ``I_0`` embeds a
nested coarse DG space and ``I_1..I_N`` select the fine unknowns of each
subdomain; ``A_i = I_i^T A I_i`` are factorized once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import DofMap, gauss_rule
from .mesh import NestedHierarchy
from .solvers import SPDSolver, dense_spd_factor, lanczos_extreme


@dataclass(frozen=True, eq=False)
class Injection:
    """Map from a local space into the fine DG space.

    ``kind="coarse"`` stores a sparse prolongation matrix; ``kind="subdomain"``
    stores the selected fine dof indices.
    """

    kind: Literal["coarse", "subdomain"]
    index: int
    matrix: sp.csr_matrix | None = None
    dofs: np.ndarray | None = None

    @property
    def local_dim(self) -> int:
        return self.matrix.shape[1] if self.kind == "coarse" else len(self.dofs)

    def restrict(self, r: np.ndarray) -> np.ndarray:
        return self.matrix.T @ r if self.kind == "coarse" else r[self.dofs]

    def prolong(self, v: np.ndarray, n: int) -> np.ndarray:
        if self.kind == "coarse":
            return self.matrix @ v
        out = np.zeros((n,) + v.shape[1:])
        out[self.dofs] = v
        return out

    def as_matrix(self, n: int) -> sp.csr_matrix:
        if self.kind == "coarse":
            return self.matrix
        m = len(self.dofs)
        return sp.csr_matrix((np.ones(m), (self.dofs, np.arange(m))), shape=(n, m))


def _child_projection(fine: DofMap, coarse: DofMap, r: int, ci: int, cj: int) -> np.ndarray:
    """Fine-basis coefficients of the coarse basis on child ``(ci, cj)`` of an ``r x r`` split."""
    rule = gauss_rule(fine.space.p + 2)
    xf = rule.points
    xc = (2.0 * np.array([ci, cj]) + xf + 1.0) / r - 1.0
    phi_f = fine.space.tabulate(xf, 0)
    phi_c = coarse.space.tabulate(xc, 0)
    # reference fine basis is orthonormal, so the projection is a weighted inner product
    return np.einsum("q,qi,qj->ij", rule.weights, phi_f, phi_c)


def build_coarse_injection(fine_dofmap: DofMap, coarse_dofmap: DofMap) -> Injection:
    """Exact embedding of the coarse DG space into the fine one."""
    fm, cm = fine_dofmap.mesh, coarse_dofmap.mesh
    if fm.n % cm.n:
        raise ValueError("coarse mesh is not nested in the fine mesh")
    for a, b in coarse_dofmap.space.exponents:
        if not fine_dofmap.space.contains(int(a), int(b)):
            raise ValueError(
                f"coarse space ({coarse_dofmap.space.kind} degree {coarse_dofmap.space.p}) is not "
                f"contained in the fine space ({fine_dofmap.space.kind} degree {fine_dofmap.space.p})")
    r = fm.n // cm.n
    blocks = {(ci, cj): _child_projection(fine_dofmap, coarse_dofmap, r, ci, cj)
              for ci in range(r) for cj in range(r)}
    nbf, nbc = fine_dofmap.local_dim, coarse_dofmap.local_dim
    e = np.arange(fm.n_elements)
    i, j = fm.element_ij(e)
    parent = (j // r) * cm.n + (i // r)
    rows = np.repeat(fine_dofmap.element_dofs(e), nbc, axis=1)
    cols = np.tile(coarse_dofmap.element_dofs(parent), (1, nbf))
    vals = np.stack([blocks[(ii % r, jj % r)].ravel() for ii, jj in zip(i, j)])
    P = sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                      shape=(fine_dofmap.ndofs, coarse_dofmap.ndofs))
    P.eliminate_zeros()
    return Injection("coarse", 0, matrix=P)


def subdomain_injections(hierarchy: NestedHierarchy, fine_dofmap: DofMap) -> list[Injection]:
    out = []
    for k, elems in enumerate(hierarchy.subdomain_elements):
        dofs = fine_dofmap.element_dofs(elems).ravel()
        out.append(Injection("subdomain", k + 1, dofs=np.sort(dofs)))
    return out


class SchwarzPreconditioner:
    """Additive Schwarz preconditioner with exact local solvers.

    Parameters
    ----------
    A : sparse matrix
        SPD fine-grid matrix.
    injections : list of Injection
        Coarse injection first (if any), then subdomain injections.
    """

    def __init__(self, A, injections: list[Injection]):
        self.A = sp.csr_matrix(A)
        self.n = A.shape[0]
        self.injections = list(injections)
        self.local_matrices = []
        self.solvers = []
        self.n_factorizations = 0
        for inj in self.injections:
            if inj.kind == "coarse":
                Ai = (inj.matrix.T @ self.A @ inj.matrix).tocsc()
                Ai = 0.5 * (Ai + Ai.T)
            else:
                Ai = self.A[inj.dofs][:, inj.dofs].tocsc()
            self.local_matrices.append(Ai)
            self.solvers.append(SPDSolver(Ai))
            self.n_factorizations += 1

    def apply(self, r: np.ndarray) -> np.ndarray:
        """``B r``; ``r`` may be a vector or a matrix of column vectors."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for inj, solver in zip(self.injections, self.solvers):
            local = solver.solve(inj.restrict(r))
            if inj.kind == "coarse":
                out += inj.matrix @ local
            else:
                out[inj.dofs] += local
        return out

    __call__ = apply

    def projection(self, i: int, x: np.ndarray) -> np.ndarray:
        """``P_i x = I_i A_i^{-1} I_i^T A x``."""
        inj, solver = self.injections[i], self.solvers[i]
        return inj.prolong(solver.solve(inj.restrict(self.A @ x)), self.n)

    def preconditioned(self, x: np.ndarray) -> np.ndarray:
        """``P x = B A x``."""
        return self.apply(self.A @ x)


def build_preconditioner(A, hierarchy: NestedHierarchy | None, fine_dofmap: DofMap,
                         coarse_dofmap: DofMap | None = None) -> SchwarzPreconditioner:
    """Assemble coarse and subdomain injections and factorize the local problems.

    ``hierarchy=None`` uses a single subdomain covering the whole domain.
    """
    injections = []
    if coarse_dofmap is not None:
        injections.append(build_coarse_injection(fine_dofmap, coarse_dofmap))
    if hierarchy is None:
        injections.append(Injection("subdomain", 1, dofs=np.arange(fine_dofmap.ndofs)))
    else:
        if hierarchy.fine.n != fine_dofmap.mesh.n:
            raise ValueError("hierarchy and fine dof map use different meshes")
        injections.extend(subdomain_injections(hierarchy, fine_dofmap))
    return SchwarzPreconditioner(A, injections)


def condition_number_of_P(A, B: SchwarzPreconditioner, method: str = "auto",
                          tol: float = 1e-8, maxit: int = 200) -> tuple[float, float, float]:
    """Condition number and extreme eigenvalues of ``P = B A``.

    ``P`` is self-adjoint in the A-inner product.  The dense route forms the
    symmetric matrix ``L^T B L`` with ``A = L L^T``, which is similar to
    ``B A``; the Lanczos route works in the A-inner product directly.
    """
    n = A.shape[0]
    if method == "auto":
        method = "dense" if n < 5000 else "lanczos"
    if method == "dense":
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        L = dense_spd_factor(Ad)
        M = L.T @ B.apply(L)
        ev = sla.eigvalsh(0.5 * (M + M.T))
        lo, hi = float(ev[0]), float(ev[-1])
    elif method == "lanczos":
        lo, hi, _ = lanczos_extreme(B.preconditioned, lambda x: A @ x, n, maxit=maxit, tol=tol)
    else:
        raise ValueError(f"unknown eigenvalue method {method!r}")
    return hi / lo, lo, hi
