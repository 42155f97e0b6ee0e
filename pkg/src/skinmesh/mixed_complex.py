"""Mixed complex: the polyhedral cells that carve the skin into quadric patches.

Each simplex of the regular triangulation contributes one cell, the
Minkowski sum of half its dual power-diagram face with half the simplex
itself.  These cells tile space, and inside each cell the skin body's
defining function g is a single quadric: a sphere around a center for
vertex and tetrahedron cells, a circular hyperboloid around an axis for
edge and triangle cells.

Every cell carries a standard frame, a similarity from world coordinates
to frame coordinates xi (rotation plus a uniform sqrt(2) dilation about
the quadric center) in which

    g(x) = s1*xi1^2 + s2*xi2^2 + s3*xi3^2 + c0,

with each s a sign and the distinguished axis last.  The skin surface at
time t is the level set g = t.  Frame coordinates are the natural habitat
for everything kinetic: the surface point speed is 1/(2*||xi||) and the
local length scale (reciprocal of the largest normal curvature, measured
in the frame metric) is exactly ||xi||.

Unbounded power-diagram faces are clipped to a box scaled up from the
input's bounding box, so all cells are finite polytopes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .errors import DegeneracyError, DomainError, InputError, NumericError
from .spheres import WeightedSphere
from .triangulation import RegularTriangulation, bounding_box, build_regular_triangulation

SQRT2 = np.sqrt(2.0)

SPHERE = "sphere"
ONE_SHEET = "hyperboloid_one_sheet"
TWO_SHEET = "hyperboloid_two_sheet"


@dataclass(frozen=True)
class StandardFrame:
    """Similarity into coordinates where the cell's quadric is axis-aligned.

    ``rotation`` rows are the frame axes (orthonormal, right-handed),
    ``translation`` is the quadric center, ``signs`` the diagonal of the
    quadratic form, and ``offset`` its constant, so that
    g(x) = signs . xi^2 + offset with xi = sqrt(2) * rotation @ (x - translation).
    """

    rotation: np.ndarray
    translation: np.ndarray
    signs: tuple
    offset: float

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-12):
            raise NumericError("frame rotation is not orthogonal")
        if abs(np.linalg.det(r) - 1.0) > 1e-10:
            raise NumericError("frame rotation is not right-handed")

    def to_frame(self, x) -> np.ndarray:
        """World point(s) to frame coordinates."""
        x = np.asarray(x, dtype=float)
        return SQRT2 * (x - self.translation) @ self.rotation.T

    def to_world(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return self.translation + (xi @ self.rotation) / SQRT2

    def value(self, x) -> float:
        """g at a world point, via the frame form."""
        xi = self.to_frame(x)
        return float((np.asarray(self.signs) * xi * xi).sum(axis=-1) + self.offset)

    def gradient_world(self, x) -> np.ndarray:
        """Gradient of g with respect to world coordinates."""
        xi = self.to_frame(x)
        grad_frame = 2.0 * np.asarray(self.signs) * xi
        return SQRT2 * grad_frame @ self.rotation

    # The first two signs always agree; their common value normalizes the
    # form to xi1^2 + xi2^2 + tau*xi3^2 = rhs(t) on the surface g = t.
    @property
    def orientation(self) -> int:
        return int(self.signs[0])

    @property
    def axis_sign(self) -> int:
        return int(self.signs[2] * self.signs[0])

    def rhs(self, t: float) -> float:
        """Right-hand side of the normalized surface equation at time t."""
        return (t - self.offset) / self.orientation

    def patch_kind(self, t: float) -> str:
        if self.axis_sign > 0:
            return SPHERE
        return ONE_SHEET if self.rhs(t) > 0.0 else TWO_SHEET


@dataclass
class MixedCell:
    """One polytope of the mixed complex with its quadric frame.

    Halfspace rows are unit-normalized: A @ x <= b with ||A_i|| = 1, so
    margins are Euclidean distances.
    """

    index: int
    simplex: tuple
    dim: int
    frame: StandardFrame
    halfspaces_a: np.ndarray
    halfspaces_b: np.ndarray
    vertices: np.ndarray
    patch_kind_at_reference: str = ""
    r_squared_at_reference: float = 0.0
    aabb_lo: np.ndarray = field(default=None, repr=False)
    aabb_hi: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.aabb_lo is None:
            self.aabb_lo = self.vertices.min(axis=0)
            self.aabb_hi = self.vertices.max(axis=0)

    def margin(self, x) -> float:
        """Largest constraint violation; <= 0 means inside."""
        return float((self.halfspaces_a @ np.asarray(x, dtype=float) - self.halfspaces_b).max())

    def contains(self, x, tol: float = 1e-9) -> bool:
        return self.margin(x) <= tol


class MixedComplex:
    """All mixed cells of a sphere set, with point location."""

    def __init__(self, spheres, triangulation, cells, box):
        self.spheres = list(spheres)
        self.triangulation = triangulation
        self.cells = cells
        self.box = box
        self._aabb_lo = np.array([c.aabb_lo for c in cells])
        self._aabb_hi = np.array([c.aabb_hi for c in cells])
        diag = float(np.linalg.norm(box[1] - box[0]))
        self.locate_tol = 1e-9 * (1.0 + diag)

    def __len__(self):
        return len(self.cells)

    def cells_of_dim(self, dim: int):
        return [c for c in self.cells if c.dim == dim]

    def locate(self, x, tol: float | None = None) -> MixedCell:
        """Cell containing x; ties on shared faces go to the lowest index.

        Raises DomainError when x lies outside every (clipped) cell.
        """
        x = np.asarray(x, dtype=float)
        tol = self.locate_tol if tol is None else tol
        near = np.nonzero(
            np.all((x >= self._aabb_lo - tol) & (x <= self._aabb_hi + tol), axis=1)
        )[0]
        for idx in near:
            if self.cells[idx].contains(x, tol):
                return self.cells[idx]
        raise DomainError(f"point {x.tolist()} lies outside the mixed complex")

    def values_at(self, points, tol: float | None = None) -> np.ndarray:
        """g at many world points at once; inf where no cell contains a point.

        Ties on shared faces resolve to the lowest cell index, as in
        ``locate``, though g agrees across a face so the value is the same.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tol = self.locate_tol if tol is None else tol
        out = np.full(len(pts), np.inf)
        unresolved = np.ones(len(pts), dtype=bool)
        for cell in self.cells:
            if not unresolved.any():
                break
            idx = np.nonzero(unresolved)[0]
            sub = pts[idx]
            near = np.all(
                (sub >= cell.aabb_lo - tol) & (sub <= cell.aabb_hi + tol), axis=1
            )
            if not near.any():
                continue
            cand = idx[near]
            margins = (
                cell.halfspaces_a @ pts[cand].T - cell.halfspaces_b[:, None]
            ).max(axis=0)
            hit = cand[margins <= tol]
            if hit.size == 0:
                continue
            frame = cell.frame
            xi = frame.to_frame(pts[hit])
            out[hit] = (xi * xi) @ np.asarray(frame.signs, dtype=float) + frame.offset
            unresolved[hit] = False
        return out

    def grown_spheres(self, t: float):
        return [s.at_time(t) for s in self.spheres]


def build_mixed_complex(
    spheres,
    box_factor: float = 10.0,
    t_reference: float = 0.0,
    t_max: float = 0.0,
) -> MixedComplex:
    """Construct the mixed complex of a weighted sphere set.

    ``box_factor`` scales the clip box relative to the input bounding box.
    ``t_reference`` is the time at which each cell's patch kind and surface
    offset are recorded.
    """
    if not spheres:
        raise InputError("at least one sphere required")
    box = bounding_box(spheres, factor=box_factor, t_max=t_max)
    tri = build_regular_triangulation(spheres, box=box)
    centers = np.array([s.center for s in spheres])
    lifted = np.array([s.lifted() for s in spheres])

    cells = []
    for dim, simplex in tri.all_simplices():
        frame, basis_u, basis_v = _quadric_frame(centers, lifted, simplex)
        vor = _voronoi_piece(centers, lifted, simplex, frame.translation, basis_v, box)
        mink = _minkowski_half_sum(vor, centers[list(simplex)])
        a, b, hull_vertices = _polytope_hrep(mink)
        cell = MixedCell(
            index=len(cells),
            simplex=tuple(simplex),
            dim=dim,
            frame=frame,
            halfspaces_a=a,
            halfspaces_b=b,
            vertices=hull_vertices,
            patch_kind_at_reference=frame.patch_kind(t_reference),
            r_squared_at_reference=frame.rhs(t_reference),
        )
        cells.append(cell)
    return MixedComplex(spheres, tri, cells, box)


def _quadric_frame(centers, lifted, simplex):
    """Standard frame of the quadric governing one simplex's mixed cell.

    Minimizing the weighted-distance envelope over the simplex's sphere
    family leaves a quadratic in x: positive definite across the dual
    directions, negative across the simplex's own span.  Completing the
    square yields center, axes, signs, and constant.
    """
    members = list(simplex)
    z0 = centers[members[0]]
    k = len(members) - 1
    if k == 0:
        u = np.zeros((3, 0))
    else:
        diffs = (centers[members[1:]] - z0).T  # 3 x k
        q, r = np.linalg.qr(diffs)
        if np.abs(np.diag(r)).min() < 1e-12 * (np.abs(diffs).max() + 1.0):
            raise DegeneracyError(f"simplex {simplex} is affinely degenerate", simplex=simplex)
        u = q[:, :k]
    # Orthonormal complement spanning the dual face directions.
    full, _ = np.linalg.qr(np.hstack([u, np.eye(3)]))
    v = full[:, k:3]
    # Affine interpolant of the lifted heights over the simplex span.
    if k == 0:
        p = np.zeros(0)
    else:
        coords = (centers[members[1:]] - z0) @ u  # k x k
        p = np.linalg.solve(coords, lifted[members[1:]] - lifted[members[0]])
    q_vec = 0.5 * p - u.T @ z0
    x_c = z0 + u @ q_vec
    c0 = float(q_vec @ q_vec) - float(z0 @ z0) + float(lifted[members[0]])

    dim = k
    if dim == 0:
        rows = np.eye(3)
        signs = (1, 1, 1)
    elif dim == 1:
        rows = np.vstack([v.T, u.T])
        signs = (1, 1, -1)
    elif dim == 2:
        rows = np.vstack([u.T, v.T])
        signs = (-1, -1, 1)
    else:
        rows = np.eye(3)
        signs = (-1, -1, -1)
    if np.linalg.det(rows) < 0.0:
        rows = rows.copy()
        rows[0] = -rows[0]  # first two signs agree, so this is harmless
    return StandardFrame(rows, x_c, signs, c0), u, v


def _power_constraints(centers, lifted, simplex):
    """Halfspaces where the simplex's spheres win the power comparison."""
    a0 = simplex[0]
    others = [m for m in range(len(centers)) if m not in simplex]
    if not others:
        return np.zeros((0, 3)), np.zeros(0)
    a = 2.0 * (centers[others] - centers[a0])
    b = lifted[others] - lifted[a0]
    return a, b


def _box_constraints(box):
    lo, hi = box
    a = np.vstack([np.eye(3), -np.eye(3)])
    b = np.concatenate([hi, -lo])
    return a, b


def _chebyshev_center(a, b):
    """Deepest interior point of {x : a @ x <= b} and its clearance."""
    norms = np.linalg.norm(a, axis=1)
    res = linprog(
        np.array([0.0, 0.0, 0.0, -1.0]),
        A_ub=np.hstack([a, norms[:, None]]),
        b_ub=b,
        bounds=[(None, None)] * 3 + [(0.0, None)],
        method="highs",
    )
    if not res.success:
        raise NumericError("empty polytope while seeking an interior point")
    return res.x[:3], float(res.x[3])


def _voronoi_piece(centers, lifted, simplex, x_c, basis_v, box):
    """Vertices of the dual power-diagram face, clipped to the box.

    The face lives in the affine subspace through the quadric center
    spanned by ``basis_v``; its dimension is 3 minus the simplex dimension.
    """
    a_pow, b_pow = _power_constraints(centers, lifted, simplex)
    a_box, b_box = _box_constraints(box)
    a_all = np.vstack([a_pow, a_box])
    b_all = np.concatenate([b_pow, b_box])
    dof = basis_v.shape[1]

    if dof == 0:
        if a_pow.shape[0] and np.any(a_pow @ x_c - b_pow > 1e-7 * (np.abs(b_pow) + 1.0)):
            raise NumericError(f"orthocenter of {simplex} escapes its power cell")
        return x_c[None, :]

    # Work in face coordinates s: x = x_c + basis_v @ s.
    a_s = a_all @ basis_v
    b_s = b_all - a_all @ x_c
    lo, hi = box
    extent = float(np.linalg.norm(hi - lo)) + 2.0 * float(np.linalg.norm(x_c - 0.5 * (lo + hi)))

    if dof == 1:
        s_lo, s_hi = -extent, extent
        for coef, rhs in zip(a_s[:, 0], b_s):
            if abs(coef) < 1e-14 * (abs(rhs) + 1.0):
                if rhs < 0.0:
                    raise NumericError(f"dual edge of {simplex} is empty")
                continue
            bound = rhs / coef
            if coef > 0.0:
                s_hi = min(s_hi, bound)
            else:
                s_lo = max(s_lo, bound)
        if s_hi <= s_lo:
            raise NumericError(f"dual edge of {simplex} is empty")
        pts = np.array([[s_lo], [s_hi]])
    elif dof == 2:
        square = extent * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        poly = square
        for row, rhs in zip(a_s, b_s):
            poly = _clip_polygon(poly, row, rhs)
            if len(poly) == 0:
                raise NumericError(f"dual polygon of {simplex} is empty")
        pts = np.asarray(poly)
    else:
        interior, clearance = _chebyshev_center(a_all, b_all)
        if clearance <= 1e-10 * extent:
            raise NumericError(f"power cell of {simplex} has no interior")
        hs = np.hstack([a_all, -b_all[:, None]])
        intersection = HalfspaceIntersection(hs, interior)
        return intersection.intersections

    return x_c[None, :] + pts @ basis_v.T


def _clip_polygon(poly, normal, rhs):
    """Sutherland-Hodgman clip of a convex polygon against normal.s <= rhs."""
    if len(poly) == 0:
        return poly
    inside = poly @ normal <= rhs
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = poly[i], poly[j]
        if inside[i]:
            out.append(pi)
            if not inside[j]:
                out.append(_intersect(pi, pj, normal, rhs))
        elif inside[j]:
            out.append(_intersect(pi, pj, normal, rhs))
    return np.array(out) if out else np.zeros((0, 2))


def _intersect(p, q, normal, rhs):
    dp = normal @ p - rhs
    dq = normal @ q - rhs
    t = dp / (dp - dq)
    return p + t * (q - p)


def _minkowski_half_sum(vor_vertices, simplex_centers):
    """Vertices of (half the dual face) + (half the simplex)."""
    pts = 0.5 * (vor_vertices[:, None, :] + simplex_centers[None, :, :])
    return pts.reshape(-1, 3)


def _polytope_hrep(points):
    """Unit-normalized halfspaces and vertices of the hull of ``points``."""
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise DegeneracyError(f"mixed cell polytope is degenerate: {exc}") from exc
    eq = hull.equations
    a = eq[:, :3]
    b = -eq[:, 3]
    # Qhull triangulates facets; merge duplicate planes for compactness.
    rounded = np.round(np.hstack([a, b[:, None]]), 9)
    _, keep = np.unique(rounded, axis=0, return_index=True)
    return a[keep], b[keep], points[hull.vertices]
