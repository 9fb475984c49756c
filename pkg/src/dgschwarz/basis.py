"""Orthonormal Legendre bases on the reference square and Gauss quadrature."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.polynomial import legendre

from .mesh import Mesh


def legendre_1d(p: int, x, order: int = 0) -> np.ndarray:
    """Derivative ``order`` of the L2([-1,1])-orthonormal Legendre polynomials.

    Returns an array of shape ``(len(x), p + 1)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((x.size, p + 1))
    for k in range(p + 1):
        c = np.zeros(k + 1)
        c[k] = np.sqrt(k + 0.5)
        if order:
            c = legendre.legder(c, order) if k >= order else np.zeros(1)
        out[:, k] = legendre.legval(x, c)
    return out


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


def gauss_1d(m: int) -> tuple[np.ndarray, np.ndarray]:
    if m < 1:
        raise ValueError("a Gauss rule needs at least one point")
    return legendre.leggauss(m)


def gauss_rule(m: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule on [-1,1]^2 with ``m`` points per axis.

    Exact for polynomials of degree ``2m - 1`` in each variable separately.
    Points are ordered with the x-coordinate running fastest.
    """
    x, w = gauss_1d(m)
    X, Y = np.meshgrid(x, x)
    W = np.outer(w, w)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), 2 * m - 1)


@dataclass(frozen=True)
class PolySpace:
    """Reference polynomial space of total or partial degree ``p``.

    The basis is the tensor product of orthonormal Legendre polynomials
    ``L_a(x) L_b(y)``; for ``kind="total"`` only ``a + b <= p`` is kept, in
    graded lexicographic order.  ``permutation`` and ``signs`` optionally
    reorder and flip basis members, which changes the matrices but not the
    operators they represent.
    """

    p: int
    kind: Literal["total", "partial"] = "total"
    permutation: tuple[int, ...] | None = None
    signs: tuple[int, ...] | None = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"polynomial degree must be >= 1, got {self.p!r}")
        if self.kind not in ("total", "partial"):
            raise ValueError(f"unknown polynomial space kind {self.kind!r}")
        n = self.dim
        if self.permutation is not None and sorted(self.permutation) != list(range(n)):
            raise ValueError("permutation must reorder all basis members")
        if self.signs is not None and (len(self.signs) != n or any(abs(s) != 1 for s in self.signs)):
            raise ValueError("signs must be +-1 for every basis member")

    @property
    def dim(self) -> int:
        p = self.p
        return (p + 1) * (p + 2) // 2 if self.kind == "total" else (p + 1) ** 2

    @cached_property
    def exponents(self) -> np.ndarray:
        """Legendre index pairs ``(a, b)`` of the basis members, shape (dim, 2)."""
        p = self.p
        if self.kind == "total":
            pairs = [(d - b, b) for d in range(p + 1) for b in range(d + 1)]
        else:
            pairs = [(a, b) for b in range(p + 1) for a in range(p + 1)]
        pairs = np.array(pairs, dtype=np.int64)
        if self.permutation is not None:
            pairs = pairs[list(self.permutation)]
        return pairs

    @cached_property
    def _signs(self) -> np.ndarray:
        return np.ones(self.dim) if self.signs is None else np.asarray(self.signs, dtype=float)

    def tabulate(self, points, order: int = 0) -> np.ndarray:
        """Reference derivatives of all basis members at ``points`` (shape (n, 2)).

        ``order=0`` returns shape ``(n, dim)``, ``order=1`` ``(n, dim, 2)`` and
        ``order=2`` ``(n, dim, 2, 2)``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ex = self.exponents
        s = self._signs
        Lx = [legendre_1d(self.p, pts[:, 0], k)[:, ex[:, 0]] for k in range(order + 1)]
        Ly = [legendre_1d(self.p, pts[:, 1], k)[:, ex[:, 1]] for k in range(order + 1)]
        if order == 0:
            return Lx[0] * Ly[0] * s
        if order == 1:
            return np.stack([Lx[1] * Ly[0], Lx[0] * Ly[1]], axis=-1) * s[:, None]
        if order == 2:
            hxx = Lx[2] * Ly[0]
            hxy = Lx[1] * Ly[1]
            hyy = Lx[0] * Ly[2]
            H = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
            return H * s[:, None, None]
        raise ValueError("derivative order must be 0, 1 or 2")

    def contains(self, a: int, b: int) -> bool:
        """Whether the monomial x^a y^b lies in the space."""
        return a + b <= self.p if self.kind == "total" else max(a, b) <= self.p


def make_poly_space(p: int, kind: str = "total") -> PolySpace:
    return PolySpace(p, kind)


def eval_basis(space: PolySpace, bounds, point, order: int = 0) -> np.ndarray:
    """Physical values/gradients/Hessians of the mapped basis on one element.

    ``bounds`` is ``(x0, x1, y0, y1)`` of an axis-aligned square element.
    Derivatives are scaled by ``(2/h)**order`` through the affine map.
    """
    x0, x1, y0, y1 = bounds
    px, py = np.asarray(point, dtype=float)
    tol = 1e-12 * max(1.0, x1 - x0)
    if not (x0 - tol <= px <= x1 + tol and y0 - tol <= py <= y1 + tol):
        raise ValueError(f"point {point!r} lies outside element {bounds!r}")
    hx, hy = x1 - x0, y1 - y0
    ref = np.array([[2.0 * (px - x0) / hx - 1.0, 2.0 * (py - y0) / hy - 1.0]])
    vals = space.tabulate(ref, order)[0]
    if order == 0:
        return vals
    J = np.array([2.0 / hx, 2.0 / hy])
    if order == 1:
        return vals * J
    return vals * J[:, None] * J[None, :]


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global numbering for a DG space with the same reference space on every element.

    Element ``e`` owns the contiguous block ``[e * dim, (e + 1) * dim)``.
    """

    mesh: Mesh
    space: PolySpace
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "offsets", np.arange(self.mesh.n_elements + 1) * self.space.dim)

    @property
    def ndofs(self) -> int:
        return int(self.offsets[-1])

    @property
    def local_dim(self) -> int:
        return self.space.dim

    def element_dofs(self, e) -> np.ndarray:
        e = np.asarray(e)
        return e[..., None] * self.space.dim + np.arange(self.space.dim)

    def quad_order(self) -> int:
        return self.space.p + 2

    def evaluate(self, coeffs, points, order: int = 0) -> np.ndarray:
        """Evaluate the discrete function at physical points (element located per point)."""
        coeffs = np.asarray(coeffs)
        out = []
        for pt in np.atleast_2d(points):
            e = self.mesh.locate(pt)
            vals = eval_basis(self.space, self.mesh.element_bounds(e), pt, order)
            out.append(np.tensordot(coeffs[self.element_dofs(e)], vals, axes=(0, 0)))
        return np.array(out)
