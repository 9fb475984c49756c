"""Uniform Cartesian meshes of the unit square and nested coarse/subdomain structure.

Elements are numbered row by row, ``e = j * n + i`` with ``i`` the column
(x-index) and ``j`` the row (y-index).  Interior faces carry the fixed normal
``+e1`` (vertical faces) or ``+e2`` (horizontal faces), so the element on the
negative side is the *exterior* element and the one on the positive side the
*interior* element; jumps are ``phi|ext - phi|int``.  Boundary faces carry the
outward unit normal and have no interior element.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

# face orientation codes
VERTICAL = 0    # normal along x
HORIZONTAL = 1  # normal along y


@dataclass(frozen=True)
class FaceInfo:
    endpoints: tuple[tuple[float, float], tuple[float, float]]
    normal: tuple[float, float]
    ext_element: int
    int_element: int | None
    h_tilde: float

    @property
    def is_boundary(self) -> bool:
        return self.int_element is None

    @property
    def classification(self) -> str:
        return "boundary" if self.is_boundary else "interior"

    @property
    def tangent(self) -> tuple[float, float]:
        # rotate the normal by +90 degrees
        return (-self.normal[1], self.normal[0])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform ``n x n`` mesh of (0, 1)^2.

    Face data are stored as parallel arrays for vectorised assembly:

    ``face_ext``, ``face_int``
        neighbour element indices (``face_int == -1`` on the boundary)
    ``face_axis``
        ``VERTICAL`` or ``HORIZONTAL``
    ``face_sign``
        sign of the normal along its axis (always +1 on interior faces)
    ``face_offset``
        coordinate of the face line along its axis
    ``face_start``
        lower endpoint of the face along the tangential axis
    """

    n: int
    face_ext: np.ndarray = field(repr=False)
    face_int: np.ndarray = field(repr=False)
    face_axis: np.ndarray = field(repr=False)
    face_sign: np.ndarray = field(repr=False)
    face_offset: np.ndarray = field(repr=False)
    face_start: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_elements(self) -> int:
        return self.n * self.n

    @property
    def n_faces(self) -> int:
        return len(self.face_ext)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_int >= 0)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_int < 0)

    def element_index(self, i, j):
        return np.asarray(j) * self.n + np.asarray(i)

    def element_ij(self, e):
        e = np.asarray(e)
        return e % self.n, e // self.n

    def element_origin(self, e) -> np.ndarray:
        """Lower-left corner(s) of element(s) ``e``."""
        i, j = self.element_ij(e)
        return np.stack([i * self.h, j * self.h], axis=-1)

    def element_bounds(self, e: int) -> tuple[float, float, float, float]:
        x0, y0 = self.element_origin(e)
        return (float(x0), float(x0 + self.h), float(y0), float(y0 + self.h))

    def locate(self, point) -> int:
        """Index of an element whose closure contains ``point``."""
        x, y = point
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ValueError(f"point {point!r} lies outside the unit square")
        i = min(int(x * self.n), self.n - 1)
        j = min(int(y * self.n), self.n - 1)
        return int(self.element_index(i, j))

    def face(self, f: int) -> FaceInfo:
        axis = int(self.face_axis[f])
        off = float(self.face_offset[f])
        s0 = float(self.face_start[f])
        if axis == VERTICAL:
            ends = ((off, s0), (off, s0 + self.h))
            normal = (float(self.face_sign[f]), 0.0)
        else:
            ends = ((s0, off), (s0 + self.h, off))
            normal = (0.0, float(self.face_sign[f]))
        ie = int(self.face_int[f])
        return FaceInfo(ends, normal, int(self.face_ext[f]),
                        None if ie < 0 else ie, self.h)

    @property
    def faces(self) -> list[FaceInfo]:
        return [self.face(f) for f in range(self.n_faces)]


def build_uniform_mesh(n: int) -> Mesh:
    """Build the uniform ``n x n`` Cartesian mesh of the unit square."""
    if int(n) != n or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    h = 1.0 / n
    ext, inn, axis, sign, off, start = [], [], [], [], [], []

    def add(e_ext, e_int, ax, sg, o, s):
        ext.append(e_ext), inn.append(e_int), axis.append(ax)
        sign.append(sg), off.append(o), start.append(s)

    for j in range(n):
        for i in range(1, n):
            add(j * n + i - 1, j * n + i, VERTICAL, 1, i * h, j * h)
    for j in range(1, n):
        for i in range(n):
            add((j - 1) * n + i, j * n + i, HORIZONTAL, 1, j * h, i * h)
    for j in range(n):
        add(j * n, -1, VERTICAL, -1, 0.0, j * h)
        add(j * n + n - 1, -1, VERTICAL, 1, 1.0, j * h)
    for i in range(n):
        add(i, -1, HORIZONTAL, -1, 0.0, i * h)
        add((n - 1) * n + i, -1, HORIZONTAL, 1, 1.0, i * h)

    return Mesh(
        n=n,
        face_ext=np.array(ext, dtype=np.int64),
        face_int=np.array(inn, dtype=np.int64),
        face_axis=np.array(axis, dtype=np.int8),
        face_sign=np.array(sign, dtype=np.int8),
        face_offset=np.array(off),
        face_start=np.array(start),
    )


@dataclass(frozen=True)
class SubdomainSpec:
    """Description of a subdomain partition.

    ``splits`` subdivides the square into ``splits x splits`` congruent
    rectangles (2 gives the four quadrants).  For ``kind="overlapping"`` each
    rectangle is extended across every interior boundary: by ``delta / 2``
    when ``overlap="width"`` (``delta`` is then the width of the strip shared
    by two neighbours) or by ``delta`` when ``overlap="extension"``.
    """

    kind: Literal["nonoverlapping", "overlapping"] = "nonoverlapping"
    delta: float = 0.0
    splits: int = 2
    overlap: Literal["width", "extension"] = "width"

    @property
    def extension(self) -> float:
        return 0.5 * self.delta if self.overlap == "width" else self.delta


@dataclass(frozen=True, eq=False)
class SubdomainPartition:
    kind: str
    delta: float
    regions: list[tuple[float, float, float, float]]  # (x0, x1, y0, y1)
    adjacency: np.ndarray = field(repr=False)

    @property
    def n_subdomains(self) -> int:
        return len(self.regions)

    @property
    def max_neighbours(self) -> int:
        """N_c: the largest number of subdomains adjacent to a single one."""
        return int(self.adjacency.sum(axis=1).max()) if len(self.regions) else 0


@dataclass(frozen=True, eq=False)
class NestedHierarchy:
    fine: Mesh
    coarse: Mesh
    subdomains: SubdomainPartition
    parent: np.ndarray = field(repr=False)
    owner: list[list[int]] = field(repr=False)

    @property
    def subdomain_elements(self) -> list[np.ndarray]:
        """Fine elements of each subdomain (sorted)."""
        groups = [[] for _ in range(self.subdomains.n_subdomains)]
        for e, owners in enumerate(self.owner):
            for s in owners:
                groups[s].append(e)
        return [np.array(g, dtype=np.int64) for g in groups]

    def children(self, d: int) -> np.ndarray:
        return np.flatnonzero(self.parent == d)


def _build_partition(spec: SubdomainSpec, fine_n: int, coarse_n: int) -> SubdomainPartition:
    s = spec.splits
    if s < 1:
        raise ValueError("splits must be positive")
    if spec.kind not in ("nonoverlapping", "overlapping"):
        raise ValueError(f"unknown partition kind {spec.kind!r}")
    if spec.kind == "nonoverlapping":
        if coarse_n % s:
            raise ValueError(
                f"a {s}x{s} subdomain partition cuts elements of the {coarse_n}x{coarse_n} coarse mesh")
        delta = 0.0
    else:
        if spec.overlap not in ("width", "extension"):
            raise ValueError(f"unknown overlap convention {spec.overlap!r}")
        if spec.delta <= 0.0:
            raise ValueError("overlapping partitions need a positive overlap delta")
        delta = float(spec.extension)
        if fine_n % s or not np.isclose(delta * fine_n, round(delta * fine_n), rtol=0, atol=1e-9):
            raise ValueError(
                f"overlap delta={spec.delta} ({spec.overlap}) does not align with the fine mesh size 1/{fine_n}")
    w = 1.0 / s
    regions = []
    for j in range(s):
        for i in range(s):
            x0, x1, y0, y1 = i * w, (i + 1) * w, j * w, (j + 1) * w
            if delta:
                x0, y0 = (max(0.0, x0 - delta) if i > 0 else 0.0), (max(0.0, y0 - delta) if j > 0 else 0.0)
                x1, y1 = (min(1.0, x1 + delta) if i < s - 1 else 1.0), (min(1.0, y1 + delta) if j < s - 1 else 1.0)
            regions.append((x0, x1, y0, y1))
    m = len(regions)
    adj = np.zeros((m, m), dtype=bool)
    for a in range(m):
        for b in range(m):
            if a == b:
                continue
            ra, rb = regions[a], regions[b]
            # closed rectangles touch or overlap
            adj[a, b] = (ra[0] <= rb[1] + 1e-14 and rb[0] <= ra[1] + 1e-14
                         and ra[2] <= rb[3] + 1e-14 and rb[2] <= ra[3] + 1e-14)
    return SubdomainPartition(spec.kind, float(spec.delta), regions, adj)


def build_hierarchy(fine_n: int, coarse_n: int, partition_spec: SubdomainSpec | None = None) -> NestedHierarchy:
    """Build nested fine mesh, coarse mesh and subdomain partition.

    Raises
    ------
    ValueError
        if ``coarse_n`` does not divide ``fine_n``, if an overlap is not
        aligned with the fine grid, or if a nonoverlapping partition cuts a
        coarse element.
    """
    if partition_spec is None:
        partition_spec = SubdomainSpec()
    if coarse_n < 1 or fine_n < 1 or fine_n % coarse_n:
        raise ValueError(f"coarse mesh {coarse_n} is not nested in fine mesh {fine_n}")
    fine = build_uniform_mesh(fine_n)
    coarse = build_uniform_mesh(coarse_n)
    part = _build_partition(partition_spec, fine_n, coarse_n)

    r = fine_n // coarse_n
    i, j = fine.element_ij(np.arange(fine.n_elements))
    parent = (j // r) * coarse_n + (i // r)

    h = fine.h
    owner: list[list[int]] = []
    for e in range(fine.n_elements):
        x0, y0 = i[e] * h, j[e] * h
        cx, cy = x0 + 0.5 * h, y0 + 0.5 * h
        owners = []
        for k, (a0, a1, b0, b1) in enumerate(part.regions):
            # element inside region: check centre, region edges are grid-aligned
            if a0 < cx < a1 and b0 < cy < b1:
                owners.append(k)
        owner.append(owners)
    return NestedHierarchy(fine, coarse, part, parent.astype(np.int64), owner)
