"""Assembly of the symmetric H2-type DG bilinear form, its jump penalty and loads.

On a uniform mesh every element carries the same local matrix and every face
of a given orientation the same face block, so assembly computes those
blocks once on the reference configuration and scatters them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp

from .basis import DofMap, PolySpace, gauss_1d, gauss_rule
from .mesh import HORIZONTAL, VERTICAL, FaceInfo
from .solvers import IndefiniteMatrixError, sparse_spd_factor


class CoercivityError(RuntimeError):
    """Raised when an assembled form fails its positive-definiteness probe."""


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty parameters for the jump form.

    ``degree-scaled``: ``mu = c_mu p^2 / h``, ``eta = c_eta p^6 / h^3``;
    ``constant-degree``: ``mu = c_mu / h``, ``eta = c_eta / h^3``.
    ``h_measure`` selects whether the element size entering the penalties is
    the side length or the diameter of the square elements.
    """

    c_mu: float = 10.0
    c_eta: float = 10.0
    mode: Literal["degree-scaled", "constant-degree"] = "degree-scaled"
    h_measure: Literal["side", "diameter"] = "side"

    def __post_init__(self):
        if self.c_mu <= 0 or self.c_eta <= 0:
            raise ValueError("penalty constants must be positive")
        if self.mode not in ("degree-scaled", "constant-degree"):
            raise ValueError(f"unknown penalty mode {self.mode!r}")
        if self.h_measure not in ("side", "diameter"):
            raise ValueError(f"unknown element size measure {self.h_measure!r}")

    def element_size(self, side: float) -> float:
        return side * np.sqrt(2.0) if self.h_measure == "diameter" else side


def penalty(face: FaceInfo | float, degrees, config: PenaltyConfig) -> tuple[float, float]:
    """Return ``(mu_F, eta_F)`` for a face.

    ``face`` is a :class:`FaceInfo` (its ``h_tilde`` is the side length of the
    smaller neighbour) or directly the value of ``h_tilde``.  ``degrees`` are
    the polynomial degrees of the neighbouring elements.
    """
    side = face.h_tilde if isinstance(face, FaceInfo) else float(face)
    h = config.element_size(side)
    p = max(np.atleast_1d(degrees))
    if config.mode == "degree-scaled":
        return config.c_mu * p**2 / h, config.c_eta * p**6 / h**3
    return config.c_mu / h, config.c_eta / h**3


# ---------------------------------------------------------------------------
# reference tables


@dataclass(frozen=True, eq=False)
class ElementTables:
    """Physical basis data at element quadrature points for element size ``h``.

    ``weights`` already include the area Jacobian ``(h/2)^2``; ``points`` are
    offsets from the element's lower-left corner.
    """

    h: float
    points: np.ndarray   # (nq, 2)
    weights: np.ndarray  # (nq,)
    values: np.ndarray   # (nq, nb)
    grads: np.ndarray    # (nq, nb, 2)
    hess: np.ndarray     # (nq, nb, 2, 2)

    @property
    def laplacians(self) -> np.ndarray:
        return self.hess[..., 0, 0] + self.hess[..., 1, 1]


@lru_cache(maxsize=64)
def element_tables(space: PolySpace, h: float, m: int) -> ElementTables:
    rule = gauss_rule(m)
    s = 2.0 / h
    return ElementTables(
        h=h,
        points=(rule.points + 1.0) * (h / 2.0),
        weights=rule.weights * (h / 2.0) ** 2,
        values=space.tabulate(rule.points, 0),
        grads=space.tabulate(rule.points, 1) * s,
        hess=space.tabulate(rule.points, 2) * s * s,
    )


@dataclass(frozen=True, eq=False)
class Trace:
    """Traces on one side of a face, shape ``(nq, nb)`` each.

    ``dn`` is the derivative along the positive face axis (not yet multiplied
    by the normal's sign), ``dt`` along the tangent, ``dtt`` and ``dtn`` the
    corresponding second derivatives.
    """

    val: np.ndarray
    dn: np.ndarray
    dt: np.ndarray
    dtt: np.ndarray
    dtn: np.ndarray


@lru_cache(maxsize=256)
def face_trace(space: PolySpace, h: float, axis: int, side: int, m: int) -> tuple[Trace, np.ndarray, np.ndarray]:
    """Traces of the element basis on its face ``axis`` at reference coordinate ``side`` (+-1).

    Returns the trace, the 1-D weights (including the Jacobian ``h/2``) and the
    tangential offsets of the quadrature points from the face start.
    """
    t, w = gauss_1d(m)
    pts = np.empty((m, 2))
    pts[:, axis] = side
    pts[:, 1 - axis] = t
    s = 2.0 / h
    g = space.tabulate(pts, 1) * s
    H = space.tabulate(pts, 2) * s * s
    n, tt = axis, 1 - axis
    tr = Trace(
        val=space.tabulate(pts, 0),
        dn=g[..., n],
        dt=g[..., tt],
        dtt=H[..., tt, tt],
        dtn=H[..., tt, n],
    )
    return tr, w * (h / 2.0), (t + 1.0) * (h / 2.0)


def _face_block(space: PolySpace, h: float, axis: int, sign: int, interior: bool,
                mu: float, eta: float, m: int, include_consistency: bool = True) -> np.ndarray:
    """Local matrix of the face contributions, unknowns ordered [ext, int]."""
    if interior:
        ext, w, _ = face_trace(space, h, axis, +1, m)
        inn, _, _ = face_trace(space, h, axis, -1, m)

        def jump(name):
            return np.hstack([getattr(ext, name), -getattr(inn, name)])

        def avg(name):
            return 0.5 * np.hstack([getattr(ext, name), getattr(inn, name)])
        sgn = 1.0
    else:
        side = +1 if sign > 0 else -1
        ext, w, _ = face_trace(space, h, axis, side, m)

        def jump(name):
            return getattr(ext, name)
        avg = jump
        sgn = float(sign)

    jv, jt = jump("val"), jump("dt")
    W = np.diag(w)
    B = eta * jv.T @ W @ jv + mu * jt.T @ W @ jt
    if interior:
        jn = sgn * jump("dn")
        B += mu * jn.T @ W @ jn
    if include_consistency:
        # -(d_t {d_n u}, [d_t v]) and its transpose, on every face
        C = -(sgn * avg("dtn")).T @ W @ jt
        if interior:
            # (d_tt {u}, [d_n v]) and its transpose, interior faces only
            C = C + (sgn * jump("dn")).T @ W @ avg("dtt")
        # C[i, j] pairs test i with trial j
        B += C + C.T
    return B


def element_block(space: PolySpace, h: float, m: int) -> np.ndarray:
    t = element_tables(space, h, m)
    return np.einsum("q,qiab,qjab->ij", t.weights, t.hess, t.hess)


def laplacian_block(space: PolySpace, h: float, m: int) -> np.ndarray:
    t = element_tables(space, h, m)
    L = t.laplacians
    return np.einsum("q,qi,qj->ij", t.weights, L, L)


def _face_groups(mesh):
    """Group faces by (interior, axis, sign) so each group shares one block."""
    groups = {}
    interior = mesh.face_int >= 0
    for key_int in (True, False):
        for axis in (VERTICAL, HORIZONTAL):
            for sign in (-1, 1):
                idx = np.flatnonzero((interior == key_int) & (mesh.face_axis == axis) & (mesh.face_sign == sign))
                if idx.size:
                    groups[(key_int, axis, sign)] = idx
    return groups


def _assemble(dofmap: DofMap, config: PenaltyConfig, volume: bool, consistency: bool,
              jumps: bool = True, m: int | None = None) -> sp.csr_matrix:
    mesh, space = dofmap.mesh, dofmap.space
    h = mesh.h
    m = m or dofmap.quad_order()
    nb = space.dim
    rows, cols, vals = [], [], []

    if volume:
        Ke = element_block(space, h, m)
        dofs = dofmap.element_dofs(np.arange(mesh.n_elements))
        rows.append(np.repeat(dofs, nb, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nb)).ravel())
        vals.append(np.broadcast_to(Ke.ravel(), (mesh.n_elements, nb * nb)).ravel())

    mu, eta = penalty(h, space.p, config)
    if not jumps:
        mu = eta = 0.0
    for (interior, axis, sign), faces in _face_groups(mesh).items():
        Bf = _face_block(space, h, axis, sign, interior, mu, eta, m, consistency)
        if interior:
            dofs = np.hstack([dofmap.element_dofs(mesh.face_ext[faces]),
                              dofmap.element_dofs(mesh.face_int[faces])])
        else:
            dofs = dofmap.element_dofs(mesh.face_ext[faces])
        k = dofs.shape[1]
        rows.append(np.repeat(dofs, k, axis=1).ravel())
        cols.append(np.tile(dofs, (1, k)).ravel())
        vals.append(np.broadcast_to(Bf.ravel(), (len(faces), k * k)).ravel())

    n = dofmap.ndofs
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A.tocsr()


def assemble_jump_form(dofmap: DofMap, config: PenaltyConfig) -> sp.csr_matrix:
    """Matrix of the jump stabilisation form ``J_h``."""
    return _assemble(dofmap, config, volume=False, consistency=False)


def assemble_laplacian_form(dofmap: DofMap) -> sp.csr_matrix:
    """Block-diagonal matrix of ``sum_K (Lap u, Lap v)_K``."""
    space, mesh = dofmap.space, dofmap.mesh
    Le = laplacian_block(space, mesh.h, dofmap.quad_order())
    return sp.block_diag([Le] * mesh.n_elements, format="csr")


def probe_coercivity(A) -> float:
    """Smallest eigenvalue (dense) or smallest symmetric pivot (sparse) of ``A``.

    Both are positive exactly when ``A`` is positive definite.
    """
    if A.shape[0] <= 2500:
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    try:
        lu = sparse_spd_factor(A)
    except IndefiniteMatrixError as exc:
        return exc.pivot_value
    return float(np.min(lu.U.diagonal()))


def assemble_ah(dofmap: DofMap, config: PenaltyConfig, check: bool | None = None) -> sp.csr_matrix:
    """Matrix ``A_ij = a_h(phi_j, phi_i)`` of the symmetric H2-type DG form.

    ``check`` runs :func:`probe_coercivity`; by default only when the system
    has at most 20000 unknowns.
    """
    A = _assemble(dofmap, config, volume=True, consistency=True)
    if check is None:
        check = dofmap.ndofs <= 20000
    if check:
        lam = probe_coercivity(A)
        if not lam > 0:
            raise CoercivityError(
                f"a_h is not positive definite (probe value {lam:.3e}); increase c_mu/c_eta")
    return A


# ---------------------------------------------------------------------------
# loads and norms


def element_quadrature_points(dofmap: DofMap, m: int | None = None) -> tuple[np.ndarray, ElementTables]:
    """Physical quadrature points of every element, shape ``(ne, nq, 2)``."""
    m = m or dofmap.quad_order()
    tab = element_tables(dofmap.space, dofmap.mesh.h, m)
    origin = dofmap.mesh.element_origin(np.arange(dofmap.mesh.n_elements))
    return origin[:, None, :] + tab.points[None, :, :], tab


def assemble_load_biharmonic_style(dofmap: DofMap, laplacian_of_u: Callable, m: int | None = None) -> np.ndarray:
    """Load vector ``l(v) = sum_K (Lap u, Lap v)_K`` for a pointwise callable ``Lap u(x, y)``."""
    X, tab = element_quadrature_points(dofmap, m)
    g = np.asarray(laplacian_of_u(X[..., 0], X[..., 1]), dtype=float) * np.ones(X.shape[:2])
    b = np.einsum("eq,q,qi->ei", g, tab.weights, tab.laplacians)
    return b.ravel()


@dataclass(frozen=True)
class ExactSolution:
    """Smooth function with its gradient and Hessian, all vectorised in (x, y).

    ``grad`` returns shape ``(..., 2)`` and ``hess`` shape ``(..., 2, 2)``.
    """

    value: Callable
    grad: Callable
    hess: Callable

    def laplacian(self, x, y):
        H = self.hess(x, y)
        return H[..., 0, 0] + H[..., 1, 1]


@dataclass(frozen=True)
class BrokenNormReport:
    l2: float
    h1_broken: float
    h2_broken: float
    jump_seminorm: float
    norm_h2: float


def _face_jumps(dofmap: DofMap, coeffs: np.ndarray, config: PenaltyConfig, m: int,
                exact: ExactSolution | None) -> float:
    """Squared jump seminorm of ``u_h - u`` (or of ``u_h`` when ``exact`` is None)."""
    mesh, space = dofmap.mesh, dofmap.space
    h = mesh.h
    U = coeffs.reshape(mesh.n_elements, space.dim)
    mu, eta = penalty(h, space.p, config)
    total = 0.0
    for (interior, axis, sign), faces in _face_groups(mesh).items():
        if interior:
            ext, w, t = face_trace(space, h, axis, +1, m)
            inn, _, _ = face_trace(space, h, axis, -1, m)
            Ue, Ui = U[mesh.face_ext[faces]], U[mesh.face_int[faces]]
            jv = Ue @ ext.val.T - Ui @ inn.val.T
            jt = Ue @ ext.dt.T - Ui @ inn.dt.T
            jn = Ue @ ext.dn.T - Ui @ inn.dn.T
            total += np.sum(w * (eta * jv**2 + mu * jt**2 + mu * jn**2))
        else:
            side = +1 if sign > 0 else -1
            ext, w, t = face_trace(space, h, axis, side, m)
            Ue = U[mesh.face_ext[faces]]
            jv = Ue @ ext.val.T
            jt = Ue @ ext.dt.T
            if exact is not None:
                off = mesh.face_offset[faces][:, None]
                along = mesh.face_start[faces][:, None] + t[None, :]
                x, y = (np.broadcast_to(off, along.shape), along) if axis == VERTICAL else (along, np.broadcast_to(off, along.shape))
                jv = jv - exact.value(x, y)
                jt = jt - exact.grad(x, y)[..., 1 - axis]
            total += np.sum(w * (eta * jv**2 + mu * jt**2))
    return float(total)


def broken_norms(dofmap: DofMap, coeffs, exact: ExactSolution | None = None,
                 config: PenaltyConfig | None = None, m: int | None = None) -> BrokenNormReport:
    """Broken L2/H1/H2 norms, jump seminorm and the mesh-dependent H2 norm.

    With ``exact`` the norms are those of ``u_h - u``.  ``h1_broken`` and
    ``h2_broken`` are full (not semi) broken Sobolev norms.
    """
    config = config or PenaltyConfig()
    coeffs = np.asarray(coeffs, dtype=float)
    m = m or dofmap.space.p + 4
    X, tab = element_quadrature_points(dofmap, m)
    U = coeffs.reshape(dofmap.mesh.n_elements, dofmap.space.dim)
    v = U @ tab.values.T
    g = np.einsum("ei,qia->eqa", U, tab.grads)
    H = np.einsum("ei,qiab->eqab", U, tab.hess)
    if exact is not None:
        x, y = X[..., 0], X[..., 1]
        v = v - exact.value(x, y)
        g = g - exact.grad(x, y)
        H = H - exact.hess(x, y)
    l2 = np.einsum("q,eq->", tab.weights, v**2)
    d1 = np.einsum("q,eqa->", tab.weights, g**2)
    d2 = np.einsum("q,eqab->", tab.weights, H**2)
    jump2 = _face_jumps(dofmap, coeffs, config, m, exact)
    h2 = l2 + d1 + d2
    return BrokenNormReport(
        l2=float(np.sqrt(l2)),
        h1_broken=float(np.sqrt(l2 + d1)),
        h2_broken=float(np.sqrt(h2)),
        jump_seminorm=float(np.sqrt(jump2)),
        norm_h2=float(np.sqrt(h2 + jump2)),
    )


def interpolate(dofmap: DofMap, func: Callable, m: int | None = None) -> np.ndarray:
    """Element-wise L2 projection of ``func(x, y)`` onto the DG space."""
    m = m or dofmap.space.p + 2
    X, tab = element_quadrature_points(dofmap, m)
    f = np.asarray(func(X[..., 0], X[..., 1]), dtype=float) * np.ones(X.shape[:2])
    # orthonormal mapped basis: element mass matrix is (h/2)^2 I
    scale = (dofmap.mesh.h / 2.0) ** 2
    return (np.einsum("eq,q,qi->ei", f, tab.weights, tab.values) / scale).ravel()


def export_coo(A, path) -> None:
    """Write a sparse matrix as plain-text ``row col value`` lines."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for i, j, v in zip(C.row, C.col, C.data):
            fh.write(f"{i} {j} {v:.17g}\n")
