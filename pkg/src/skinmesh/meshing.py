"""Triangle meshes restricted to the growing surface.

The mesh connectivity is the restricted Delaunay triangulation of the
tracked surface points: a triangle joins three points exactly when the
Voronoi edge dual to their Delaunay facet crosses the level set g = t.
Surgery (edge contraction, vertex insertion) edits the vertex set and the
connectivity is recomputed, which keeps every triangle consistent with the
current point positions rather than patching flips locally.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .errors import DegeneracyError, InputError
from .kinetics import project_to_surface
from .mixed_complex import MixedComplex
from .scheduling import MeshElement

_CROSSING_SAMPLES = 33


@dataclass
class SurfaceMesh:
    """Vertex ids mapped to surface points, plus sorted triangle id-triples."""

    vertices: dict
    triangles: list
    time: float

    def __post_init__(self):
        self.triangles = [tuple(sorted(tri)) for tri in self.triangles]
        used = {i for tri in self.triangles for i in tri}
        missing = used - self.vertices.keys()
        if missing:
            raise InputError(f"triangles reference unknown vertex ids {sorted(missing)}")

    def edges(self) -> list:
        seen = set()
        for a, b, c in self.triangles:
            seen.update({(a, b), (a, c), (b, c)})
        return sorted(seen)

    def edge_degrees(self) -> Counter:
        degrees = Counter()
        for a, b, c in self.triangles:
            degrees.update([(a, b), (a, c), (b, c)])
        return degrees

    def euler_characteristic(self) -> int:
        used = {i for tri in self.triangles for i in tri}
        return len(used) - len(self.edges()) + len(self.triangles)

    def is_closed_manifold(self) -> tuple:
        """(ok, offenders): every edge in two triangles, every link one cycle."""
        offenders = []
        for edge, degree in sorted(self.edge_degrees().items()):
            if degree != 2:
                offenders.append(("edge", edge, degree))
        links = defaultdict(list)
        for a, b, c in self.triangles:
            links[a].append((b, c))
            links[b].append((a, c))
            links[c].append((a, b))
        for vid in sorted(links):
            if not _is_single_cycle(links[vid]):
                offenders.append(("vertex", vid, len(links[vid])))
        return (not offenders, offenders)


def _is_single_cycle(opposite_edges) -> bool:
    """True when the edges opposite a vertex form exactly one closed loop."""
    degree = Counter()
    for a, b in opposite_edges:
        degree.update([a, b])
    if any(d != 2 for d in degree.values()):
        return False
    # Walk the cycle; it must consume every edge.
    adjacency = defaultdict(list)
    for a, b in opposite_edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    start = opposite_edges[0][0]
    previous, current = start, adjacency[start][0]
    steps = 1
    while current != start:
        first, second = adjacency[current]
        previous, current = current, second if first == previous else first
        steps += 1
        if steps > len(opposite_edges):
            return False
    return steps == len(opposite_edges)


def _circumcenters(points) -> np.ndarray:
    """Circumcenters of a batch of tetrahedra given as an (n, 4, 3) array."""
    a = 2.0 * (points[:, 1:] - points[:, :1])
    b = (points[:, 1:] ** 2).sum(axis=2) - (points[:, :1] ** 2).sum(axis=2)
    try:
        return np.linalg.solve(a, b[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError("degenerate tetrahedron in surface sampling") from exc


def triangle_circumcenter(p0, p1, p2) -> np.ndarray:
    """Circumcenter of a triangle embedded in 3-space."""
    d1 = p1 - p0
    d2 = p2 - p0
    normal = np.cross(d1, d2)
    area2 = float(normal @ normal)
    if area2 < 1e-30:
        raise DegeneracyError("degenerate (collinear) triangle")
    rows = np.array([2.0 * d1, 2.0 * d2, normal])
    rhs = np.array([float(d1 @ d1), float(d2 @ d2), 0.0])
    return p0 + np.linalg.solve(rows, rhs)


def triangle_circumradius(p0, p1, p2) -> float:
    center = triangle_circumcenter(p0, p1, p2)
    return float(np.linalg.norm(center - p0))


def _circumradii(p0, p1, p2) -> np.ndarray:
    """Circumradii of a batch of triangles, given as three (n, 3) arrays."""
    d1 = p1 - p0
    d2 = p2 - p0
    normal = np.cross(d1, d2)
    if np.any((normal * normal).sum(axis=1) < 1e-30):
        raise DegeneracyError("degenerate (collinear) triangle")
    rows = np.stack([2.0 * d1, 2.0 * d2, normal], axis=1)
    rhs = np.zeros(p0.shape)
    rhs[:, 0] = (d1 * d1).sum(axis=1)
    rhs[:, 1] = (d2 * d2).sum(axis=1)
    offsets = np.linalg.solve(rows, rhs[:, :, None])[:, :, 0]
    return np.sqrt((offsets * offsets).sum(axis=1))


def _crossing_mask(complex_: MixedComplex, starts, ends, t: float) -> np.ndarray:
    """Which of the segments start[i] -> end[i] cross the level set g = t.

    Each segment is sampled uniformly; a crossing is a sign change (or an
    exact zero) of g - t between consecutive samples.  Points beyond the
    clipped domain evaluate to inf: the surface stays well inside the clip,
    so they can only sit on the positive side.
    """
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    fractions = np.linspace(0.0, 1.0, _CROSSING_SAMPLES)
    samples = starts[:, None, :] + fractions[None, :, None] * (ends - starts)[:, None, :]
    values = complex_.values_at(samples.reshape(-1, 3)) - t
    values = values.reshape(len(starts), _CROSSING_SAMPLES)
    with np.errstate(invalid="ignore"):
        products = values[:, :-1] * values[:, 1:]
    # inf * 0 -> nan, meaning one sample is exactly on the surface: a crossing.
    return ((products <= 0.0) | np.isnan(products)).any(axis=1)


def restricted_delaunay(complex_: MixedComplex, vertices: dict, t: float) -> list:
    """Triangles of the restricted Delaunay triangulation of the vertex set.

    A Delaunay facet enters the mesh when its dual Voronoi edge (segment of
    adjacent tetrahedron circumcenters, or a clipped outward ray on the
    hull) crosses the surface.
    """
    ids = sorted(vertices)
    if len(ids) < 4:
        return []  # no tetrahedra, so no dual edges to cross the surface
    coords = np.array([vertices[i].world for i in ids])
    try:
        delaunay = Delaunay(coords)
    except Exception as exc:  # qhull rejects flat or duplicate input
        raise DegeneracyError(f"point set is degenerate for Delaunay: {exc}") from exc
    simplices = delaunay.simplices
    neighbors = delaunay.neighbors
    centers = _circumcenters(coords[simplices])
    box_span = float(np.linalg.norm(complex_.box[1] - complex_.box[0]))
    tet_index = np.arange(len(simplices))
    facet_parts = []
    start_parts = []
    end_parts = []
    for face_pos, kept in enumerate([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]):
        facets = simplices[:, kept]
        nb = neighbors[:, face_pos]
        # Interior facet: dual edge joins the two adjacent circumcenters;
        # visit it from the lower-index tetrahedron only.
        interior = nb > tet_index
        if interior.any():
            facet_parts.append(facets[interior])
            start_parts.append(centers[interior])
            end_parts.append(centers[nb[interior]])
        # Hull facet: dual edge is a ray along the facet's outward
        # circumcircle axis; clip it to the domain scale.
        hull = nb < 0
        if hull.any():
            p = coords[facets[hull]]
            axis = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
            norm = np.linalg.norm(axis, axis=1)
            good = norm >= 1e-30
            axis = axis[good] / norm[good][:, None]
            opposite = coords[simplices[hull, face_pos][good]]
            outward = ((axis * (opposite - p[good, 0])).sum(axis=1) > 0.0)
            axis[outward] = -axis[outward]
            facet_parts.append(facets[hull][good])
            start_parts.append(centers[hull][good])
            end_parts.append(centers[hull][good] + axis * box_span)
    if not facet_parts:
        return []
    facets = np.concatenate(facet_parts)
    starts = np.concatenate(start_parts)
    ends = np.concatenate(end_parts)
    mask = _crossing_mask(complex_, starts, ends, t)
    ids = np.asarray(ids)
    keys = np.sort(ids[facets[mask]], axis=1)
    return sorted({tuple(int(v) for v in row) for row in keys})


def build_surface_mesh(complex_: MixedComplex, vertices: dict, t: float) -> SurfaceMesh:
    triangles = restricted_delaunay(complex_, vertices, t)
    used = {i for tri in triangles for i in tri}
    kept = {i: vertices[i] for i in used}
    return SurfaceMesh(kept, triangles, t)


def mesh_elements(mesh: SurfaceMesh, params) -> dict:
    """Measured scheduler elements (edges and triangles) of a mesh."""
    elements = {}
    if not mesh.triangles:
        return elements
    ids = sorted(mesh.vertices)
    index = {vid: pos for pos, vid in enumerate(ids)}
    coords = np.array([mesh.vertices[vid].world for vid in ids])
    rhos = np.linalg.norm(np.array([mesh.vertices[vid].xi for vid in ids]), axis=1)

    edges = mesh.edges()
    pairs = np.array([(index[a], index[b]) for a, b in edges])
    halves = 0.5 * np.linalg.norm(coords[pairs[:, 0]] - coords[pairs[:, 1]], axis=1)
    edge_rhos = rhos[pairs]
    for (a, b), half, (r0, r1) in zip(edges, halves, edge_rhos):
        element = MeshElement(kind="edge", vertices=(a, b))
        element.measure(float(half), float(max(r0, r1)), float(min(r0, r1)), params)
        elements[element.key] = element

    corners = np.array([[index[i] for i in tri] for tri in mesh.triangles])
    radii = _circumradii(
        coords[corners[:, 0]], coords[corners[:, 1]], coords[corners[:, 2]]
    )
    tri_rhos = rhos[corners].min(axis=1)
    for tri, radius, rho_min in zip(mesh.triangles, radii, tri_rhos):
        element = MeshElement(kind="triangle", vertices=tuple(tri))
        element.measure(float(radius), float(rho_min), float(rho_min), params)
        elements[element.key] = element
    return elements


def contract_edge(complex_: MixedComplex, vertices: dict, edge: tuple) -> dict:
    """Vertex set with the edge's endpoints merged at the projected midpoint.

    Both endpoints must sit at the same time; the merged vertex keeps the
    lower id.  Connectivity is rebuilt by the caller.
    """
    a, b = edge
    u = vertices[a]
    v = vertices[b]
    if abs(u.t - v.t) > 1e-9 * (1.0 + abs(u.t)):
        raise InputError("contract_edge requires endpoints synced to a common time")
    midpoint = 0.5 * (u.world + v.world)
    merged = project_to_surface(complex_, midpoint, u.t)
    vertices = dict(vertices)
    del vertices[max(a, b)]
    vertices[min(a, b)] = merged
    return vertices


def insert_vertex(complex_: MixedComplex, vertices: dict, triangle: tuple) -> tuple:
    """Vertex set plus a new point at the triangle's projected circumcenter.

    Returns (vertices, new_id).  Connectivity is rebuilt by the caller.
    """
    pts = [vertices[i] for i in triangle]
    times = {round(p.t, 12) for p in pts}
    if len(times) != 1:
        raise InputError("insert_vertex requires corners synced to a common time")
    center = triangle_circumcenter(*(p.world for p in pts))
    placed = project_to_surface(complex_, center, pts[0].t)
    vertices = dict(vertices)
    new_id = max(vertices) + 1
    vertices[new_id] = placed
    return vertices, new_id


def flip_edges(complex_: MixedComplex, mesh: SurfaceMesh) -> SurfaceMesh:
    """Resync connectivity to the restricted Delaunay of the current vertices."""
    return build_surface_mesh(complex_, mesh.vertices, mesh.time)


def write_off(path, mesh: SurfaceMesh):
    """Write the mesh in OFF format (vertex coordinates plus index triples)."""
    ids = sorted(mesh.vertices)
    index = {vid: k for k, vid in enumerate(ids)}
    lines = ["OFF", f"{len(ids)} {len(mesh.triangles)} 0"]
    for vid in ids:
        x, y, z = mesh.vertices[vid].world
        lines.append(f"{x:.17g} {y:.17g} {z:.17g}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {index[a]} {index[b]} {index[c]}")
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def read_off(path) -> tuple:
    """Read an OFF file back as (coordinates array, triangle list)."""
    with open(path, encoding="ascii") as handle:
        tokens = handle.read().split()
    if not tokens or tokens[0] != "OFF":
        raise InputError(f"{path} is not an OFF file")
    n_vertices, n_faces = int(tokens[1]), int(tokens[2])
    cursor = 4
    coords = np.array(tokens[cursor:cursor + 3 * n_vertices], dtype=float).reshape(n_vertices, 3)
    cursor += 3 * n_vertices
    triangles = []
    for _ in range(n_faces):
        arity = int(tokens[cursor])
        if arity != 3:
            raise InputError("only triangle faces are supported")
        triangles.append(tuple(int(v) for v in tokens[cursor + 1:cursor + 4]))
        cursor += 4
    return coords, triangles
