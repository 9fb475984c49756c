"""DG discretisation of Cordes-type HJB equations and its semismooth Newton solver.

The problem is ``sup_alpha [a^alpha : D^2 u - f^alpha] = 0`` with ``u = 0`` on
the boundary.  Each Newton step freezes, at every quadrature point, a control
attaining the supremum and solves the resulting nonsymmetric linear system by
left-preconditioned GMRES; the preconditioner is built once from ``a_h``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import DofMap
from .forms import (ExactSolution, PenaltyConfig, assemble_ah, assemble_jump_form,
                    assemble_laplacian_form, broken_norms, element_quadrature_points)
from .solvers import SolveReport, gmres_left

log = logging.getLogger(__name__)


def diffusion_tensor(theta, phi) -> np.ndarray:
    """``a = 1/2 R(phi) [[1 + sin^2, sin cos], [sin cos, cos^2]](theta) R(phi)^T``."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    s, c = np.sin(theta), np.cos(theta)
    M = 0.5 * np.stack([np.stack([1 + s * s, s * c], -1), np.stack([s * c, c * c], -1)], -2)
    cr, sr = np.cos(phi), np.sin(phi)
    R = np.stack([np.stack([cr, -sr], -1), np.stack([sr, cr], -1)], -2)
    return R @ M @ np.swapaxes(R, -1, -2)


@dataclass(frozen=True, eq=False)
class ControlGrid:
    """Finite set of controls ``(theta, phi)`` with their diffusion tensors.

    ``gamma = tr(a) / |a|^2`` (Frobenius norm) renormalises each operator.
    """

    theta: np.ndarray
    phi: np.ndarray
    a: np.ndarray = field(init=False, repr=False)
    gamma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = diffusion_tensor(self.theta, self.phi)
        tr = np.trace(a, axis1=-2, axis2=-1)
        fro2 = np.sum(a * a, axis=(-2, -1))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gamma", tr / fro2)

    @classmethod
    def from_controls(cls, controls) -> "ControlGrid":
        c = np.atleast_2d(np.asarray(controls, dtype=float))
        return cls(c[:, 0].copy(), c[:, 1].copy())

    def __len__(self) -> int:
        return len(self.theta)

    @property
    def cordes_ratios(self) -> np.ndarray:
        """``|a|^2 / tr(a)^2`` for every control."""
        return np.sum(self.a * self.a, axis=(-2, -1)) / np.trace(self.a, axis1=-2, axis2=-1) ** 2

    @property
    def cordes_epsilon(self) -> float:
        """Largest ``eps`` with ``|a|^2/tr(a)^2 <= 1/(1 + eps)`` on the grid (d = 2)."""
        return float(1.0 / self.cordes_ratios.max() - 1.0)

    @property
    def scaled_diffusion(self) -> np.ndarray:
        return self.gamma[:, None, None] * self.a


def build_control_grid(n_theta: int = 17, n_phi: int = 16) -> ControlGrid:
    """Uniform grid of ``[0, pi/3] x [0, 2 pi)``, theta-major ordering."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("control grid sizes must be positive")
    th = np.linspace(0.0, np.pi / 3, n_theta) if n_theta > 1 else np.zeros(1)
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    return ControlGrid(T.ravel(), P.ravel())


@dataclass(frozen=True, eq=False)
class HJBProblem:
    """Controls, source terms and (optionally) the exact solution.

    ``source(x, y)`` returns ``f^alpha`` at the given points for all controls,
    shape ``x.shape + (n_controls,)``.
    """

    grid: ControlGrid
    source: Callable
    exact: ExactSolution | None = None


def manufactured_problem(grid: ControlGrid, exact: ExactSolution, kappa: float = 1.0,
                         theta_star: Callable | None = None) -> HJBProblem:
    """Sources ``f^alpha = a^alpha : D^2 u + kappa (theta - theta*(x))^2``.

    Then ``L^alpha u - f^alpha = -kappa (theta - theta*)^2``, whose supremum
    over controls vanishes where ``theta*(x)`` is a grid angle, so ``u`` solves
    the problem up to the control discretisation, and the maximising angle
    sweeps ``[0, pi/3]`` across the domain.
    """
    if theta_star is None:
        def theta_star(x, y):
            return (np.pi / 3) * x

    def source(x, y):
        H = exact.hess(x, y)
        lin = np.einsum("...ab,cab->...c", H, grid.a)
        ts = np.asarray(theta_star(x, y), dtype=float)[..., None]
        return lin + kappa * (grid.theta - ts) ** 2

    return HJBProblem(grid, source, exact)


def _hjb_values(grid: ControlGrid, hess: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``gamma^alpha (a^alpha : D^2 u - f^alpha)`` for every control, last axis."""
    return grid.gamma * (np.einsum("...ab,cab->...c", hess, grid.a) - f)


def evaluate_F_gamma(dofmap: DofMap, coeffs, problem: HJBProblem, point) -> tuple[float, int]:
    """``F_gamma[u_h](x)`` and the first control attaining it."""
    H = dofmap.evaluate(coeffs, np.atleast_2d(point), order=2)[0]
    x, y = np.asarray(point, dtype=float)
    vals = _hjb_values(problem.grid, H, np.asarray(problem.source(np.array(x), np.array(y))))
    k = int(np.argmax(vals))
    return float(vals[k]), k


@dataclass
class NewtonReport:
    newton_steps: int = 0
    gmres_iterations: list[int] = field(default_factory=list)
    increments: list[float] = field(default_factory=list)
    residual_functional: list[float] = field(default_factory=list)
    converged: bool = False
    final_error_h2: float | None = None
    factorizations_before: int = 0
    factorizations_after: int = 0
    gmres_reports: list[SolveReport] = field(default_factory=list, repr=False)

    @property
    def average_gmres(self) -> float:
        return float(np.mean(self.gmres_iterations)) if self.gmres_iterations else float("nan")


class HJBDiscretization:
    """Fixed parts of the DG scheme for one mesh, reused across Newton steps.

    The symmetric part ``1/2 (a_h - (Lap, Lap) + J_h)`` is assembled once.
    Quadrature data are evaluated per element in chunks to bound memory.
    """

    chunk = 512

    def __init__(self, dofmap: DofMap, problem: HJBProblem, config: PenaltyConfig,
                 A=None, quad_points: int | None = None):
        self.dofmap = dofmap
        self.problem = problem
        self.config = config
        self.A = assemble_ah(dofmap, config) if A is None else A
        self.J = assemble_jump_form(dofmap, config)
        self.Lap = assemble_laplacian_form(dofmap)
        self.S = (0.5 * (self.A - self.Lap + self.J)).tocsr()
        self.X, self.tab = element_quadrature_points(dofmap, quad_points)
        self.F = problem.source(self.X[..., 0], self.X[..., 1])  # (ne, nq, nc)

    def hessians(self, coeffs) -> np.ndarray:
        U = np.asarray(coeffs).reshape(self.dofmap.mesh.n_elements, self.dofmap.space.dim)
        return np.einsum("ei,qiab->eqab", U, self.tab.hess)

    def argmax_field(self, coeffs) -> tuple[np.ndarray, np.ndarray]:
        """Maximising control index and the value of ``F_gamma`` at each quadrature point."""
        H = self.hessians(coeffs)
        ne = H.shape[0]
        idx = np.empty(H.shape[:2], dtype=np.int64)
        val = np.empty(H.shape[:2])
        for s in range(0, ne, self.chunk):
            v = _hjb_values(self.problem.grid, H[s:s + self.chunk], self.F[s:s + self.chunk])
            idx[s:s + self.chunk] = np.argmax(v, axis=-1)
            val[s:s + self.chunk] = np.take_along_axis(v, idx[s:s + self.chunk, :, None], -1)[..., 0]
        return idx, val

    def residual_functional(self, coeffs) -> float:
        """``sum_K ||F_gamma[u_h]||^2_{L2(K)}``."""
        _, val = self.argmax_field(coeffs)
        return float(np.einsum("q,eq->", self.tab.weights, val**2))

    def linearization(self, controls: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
        """Matrix and right-hand side of the frozen-control linear problem."""
        grid, tab = self.problem.grid, self.tab
        G = grid.scaled_diffusion[controls]                       # (ne, nq, 2, 2)
        f = np.take_along_axis(self.F, controls[..., None], -1)[..., 0]
        gf = grid.gamma[controls] * f
        L = tab.laplacians                                        # (nq, nb)
        GH = np.einsum("eqab,qjab->eqj", G, tab.hess)
        Me = np.einsum("q,qi,eqj->eij", tab.weights, L, GH)
        rhs = np.einsum("q,qi,eq->ei", tab.weights, L, gf).ravel()
        dm = self.dofmap
        dofs = dm.element_dofs(np.arange(dm.mesh.n_elements))
        nb = dm.space.dim
        rows = np.repeat(dofs, nb, axis=1).ravel()
        cols = np.tile(dofs, (1, nb)).ravel()
        M = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(dm.ndofs, dm.ndofs))
        return (M + self.S).tocsr(), rhs

    def assemble_newton_system(self, coeffs) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        controls, _ = self.argmax_field(coeffs)
        M, rhs = self.linearization(controls)
        return M, rhs, controls

    def l2_norm(self, coeffs) -> float:
        # mapped orthonormal basis: L2 norm is (h/2) times the Euclidean norm
        return 0.5 * self.dofmap.mesh.h * float(np.linalg.norm(coeffs))

    def initial_guess(self, control: int = 0) -> np.ndarray:
        """Solution of the linear problem with the single control ``control`` everywhere."""
        ctrl = np.full(self.X.shape[:2], control, dtype=np.int64)
        M, rhs = self.linearization(ctrl)
        return spla.spsolve(M.tocsc(), rhs)


def semismooth_newton(disc: HJBDiscretization, preconditioner, initial=None,
                      newton_tol: float = 1e-6, gmres_reduction: float = 1e-6,
                      max_steps: int = 50, gmres_maxit: int = 500) -> tuple[np.ndarray, NewtonReport]:
    """Semismooth Newton iteration with left-preconditioned GMRES inner solves.

    Terminates when the L2 norm of the step increment drops below
    ``newton_tol``; the step that achieves this is counted.
    """
    u = disc.initial_guess() if initial is None else np.array(initial, dtype=float)
    rep = NewtonReport(factorizations_before=getattr(preconditioner, "n_factorizations", 0))
    rep.residual_functional.append(disc.residual_functional(u))
    for step in range(1, max_steps + 1):
        M, rhs, _ = disc.assemble_newton_system(u)
        u_new, grep = gmres_left(M, preconditioner, rhs, x0=u, reduction=gmres_reduction, maxit=gmres_maxit)
        inc = disc.l2_norm(u_new - u)
        u = u_new
        rep.newton_steps = step
        rep.gmres_iterations.append(grep.iterations)
        rep.gmres_reports.append(grep)
        rep.increments.append(inc)
        rep.residual_functional.append(disc.residual_functional(u))
        log.debug("newton step %d: %d GMRES iterations, increment %.3e", step, grep.iterations, inc)
        if not grep.converged:
            log.warning("GMRES did not converge in Newton step %d (reduction %.2e)", step, grep.achieved_reduction)
        if inc < newton_tol:
            rep.converged = True
            break
    rep.factorizations_after = getattr(preconditioner, "n_factorizations", 0)
    if disc.problem.exact is not None:
        rep.final_error_h2 = broken_norms(disc.dofmap, u, disc.problem.exact, disc.config).h2_broken
    return u, rep
