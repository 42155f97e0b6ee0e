"""Regular (weighted Delaunay) triangulation of the input spheres.

Candidate tetrahedra are enumerated by brute force and kept when their
orthosphere has positive power distance to every other input sphere.  The
float predicate carries a conservative filter; anything close to zero is
recomputed in exact rational arithmetic, and an exact tie is reported as a
degeneracy instead of being perturbed away.  Inputs whose centers do not
span three dimensions (or fewer than four spheres) fall back to a small
linear-programming construction of the lower-dimensional complex.

Sphere counts are expected to stay at desk scale (tens, not thousands);
clarity and verifiability win over asymptotics here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .errors import DegeneracyError, InputError
from .spheres import WeightedSphere

# Relative filter below which a float predicate defers to exact arithmetic.
_FILTER = 1e-9


def bounding_box(spheres, factor: float = 10.0, t_max: float = 0.0):
    """Axis-aligned clip box: the input bounding box scaled about its center.

    The input box covers every sphere at its grown weight w + t_max.  A
    degenerate box (single sphere) is padded by the largest real radius so
    the scaled box always has positive volume.
    """
    centers = np.array([s.center for s in spheres])
    radii = np.sqrt(np.maximum([s.weight + t_max for s in spheres], 0.0))
    lo = (centers - radii[:, None]).min(axis=0)
    hi = (centers + radii[:, None]).max(axis=0)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    floor = max(half.max(), radii.max(), 1e-2)
    half = np.maximum(half, floor)
    return mid - factor * half, mid + factor * half


@dataclass
class RegularTriangulation:
    """Simplices of the regular triangulation, closed under face-taking.

    ``simplices[k]`` lists the k-simplices as sorted index tuples into
    ``spheres``.  Hidden spheres (empty power cell) appear in no simplex.
    """

    spheres: list
    simplices: dict

    def __post_init__(self):
        for dim, simps in self.simplices.items():
            for s in simps:
                if tuple(sorted(s)) != tuple(s) or len(s) != dim + 1:
                    raise InputError(f"malformed {dim}-simplex {s}")

    def all_simplices(self):
        """(dim, simplex) pairs, dimension 0 upward, lexicographic within."""
        for dim in sorted(self.simplices):
            for s in self.simplices[dim]:
                yield dim, s


def _det_frac(rows):
    """Exact determinant of a small square matrix of Fractions."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = Fraction(0)
    for j in range(n):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = rows[0][j] * _det_frac(minor)
        total += term if j % 2 == 0 else -term
    return total


def _exact_power_sign(centers, lifted, tet, m):
    """Exact sign of (power of sphere m against the orthosphere of tet).

    Computed as sign(det4) * sign(det3) with all entries taken as exact
    rationals.  A zero det3 means the tetrahedron is flat; a zero result
    means sphere m is exactly orthogonal to the orthosphere.
    """
    i = tet[0]
    rows3 = []
    rows4 = []
    for a in tet[1:]:
        d = [Fraction(centers[a][c]) - Fraction(centers[i][c]) for c in range(3)]
        rows3.append(d)
        rows4.append(d + [Fraction(lifted[a]) - Fraction(lifted[i])])
    dm = [Fraction(centers[m][c]) - Fraction(centers[i][c]) for c in range(3)]
    rows4.append(dm + [Fraction(lifted[m]) - Fraction(lifted[i])])
    det3 = _det_frac(rows3)
    if det3 == 0:
        return None  # flat tetrahedron, not a candidate
    det4 = _det_frac(rows4)
    s = (1 if det4 > 0 else -1 if det4 < 0 else 0) * (1 if det3 > 0 else -1)
    return s


def build_regular_triangulation(spheres, box=None) -> RegularTriangulation:
    """Construct the regular triangulation of the given weighted spheres.

    Raises DegeneracyError when an exact predicate tie is found (five
    spheres sharing an orthosphere, for instance) rather than perturbing.
    """
    n = len(spheres)
    if n == 0:
        raise InputError("at least one sphere required")
    centers = np.array([s.center for s in spheres])
    lifted = np.array([s.lifted() for s in spheres])
    weights = np.array([s.weight for s in spheres])

    for i, j in itertools.combinations(range(n), 2):
        if np.allclose(centers[i], centers[j], atol=1e-14) and abs(
            weights[i] - weights[j]
        ) < 1e-14:
            raise DegeneracyError(f"spheres {i} and {j} coincide", simplex=(i, j))

    tets = _regular_tetrahedra(centers, lifted, weights) if n >= 4 else []

    if tets:
        simplices = {3: sorted(tets)}
        for dim in (2, 1, 0):
            faces = set()
            for s in simplices[dim + 1]:
                faces.update(itertools.combinations(s, dim + 1))
            simplices[dim] = sorted(faces)
        return RegularTriangulation(list(spheres), simplices)

    if box is None:
        box = bounding_box(spheres)
    return RegularTriangulation(list(spheres), _low_dimensional(centers, lifted, box))


def _regular_tetrahedra(centers, lifted, weights):
    """All index quadruples whose orthosphere clears every other sphere."""
    n = len(centers)
    combos = np.array(list(itertools.combinations(range(n), 4)))
    i, j, k, l = combos.T
    rows = np.stack(
        [centers[j] - centers[i], centers[k] - centers[i], centers[l] - centers[i]],
        axis=1,
    )
    rhs = 0.5 * np.stack([lifted[j] - lifted[i], lifted[k] - lifted[i], lifted[l] - lifted[i]], axis=1)
    det3 = np.linalg.det(rows)
    scale3 = np.abs(rows).sum(axis=(1, 2)) ** 3 + 1e-300
    flatish = np.abs(det3) < _FILTER * scale3

    tets = []
    for t_idx, combo in enumerate(map(tuple, combos)):
        if flatish[t_idx]:
            # Near-flat candidate: decide everything exactly.
            keep = _exact_keep(centers, lifted, combo, n)
            if keep:
                tets.append(combo)
            continue
        y = np.linalg.solve(rows[t_idx], rhs[t_idx])
        power_tet = float((y - centers[combo[0]]) @ (y - centers[combo[0]])) - weights[combo[0]]
        diff = ((centers - y) ** 2).sum(axis=1) - weights - power_tet
        magnitude = ((centers - y) ** 2).sum(axis=1) + np.abs(weights) + abs(power_tet) + 1.0
        keep = True
        for m in range(n):
            if m in combo:
                continue
            if abs(diff[m]) < _FILTER * magnitude[m]:
                s = _exact_power_sign(centers, lifted, combo, m)
                if s is None:
                    keep = False
                    break
                if s == 0:
                    raise DegeneracyError(
                        f"sphere {m} exactly orthogonal to orthosphere of {combo}",
                        simplex=combo + (m,),
                    )
                if s < 0:
                    keep = False
                    break
            elif diff[m] < 0.0:
                keep = False
                break
        if keep:
            tets.append(combo)
    return tets


def _exact_keep(centers, lifted, combo, n):
    """Exact regularity test for one candidate tetrahedron."""
    for m in range(n):
        if m in combo:
            continue
        s = _exact_power_sign(centers, lifted, combo, m)
        if s is None:
            return False
        if s == 0:
            raise DegeneracyError(
                f"sphere {m} exactly orthogonal to orthosphere of {combo}",
                simplex=combo + (m,),
            )
        if s < 0:
            return False
    # Flat quadruples were already rejected by _exact_power_sign returning None
    # for every m; a 4-sphere input with no others reaches here only if solid.
    if n == len(combo):
        rows3 = []
        for a in combo[1:]:
            rows3.append([Fraction(centers[a][c]) - Fraction(centers[combo[0]][c]) for c in range(3)])
        if _det_frac(rows3) == 0:
            return False
    return True


def _power_margin_lp(centers, lifted, members, box):
    """Best strict power margin achievable for a candidate simplex.

    Maximizes delta such that some point of the equal-power locus of the
    member spheres, inside the clip box, beats every other sphere's power
    by delta.  Returns -inf when the locus misses the box entirely.
    """
    n = len(centers)
    others = [m for m in range(n) if m not in members]
    a0 = members[0]
    if len(members) == 1:
        base = centers[a0] * 0.0
        basis = np.eye(3)
    else:
        rows = 2.0 * (centers[list(members[1:])] - centers[a0])
        rhs = lifted[list(members[1:])] - lifted[a0]
        base, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
        # Residual means the equal-power system is inconsistent (parallel
        # centers with mismatched weights): no locus, not a simplex.
        if not np.allclose(rows @ base, rhs, atol=1e-8 * (np.abs(rhs).max() + 1.0)):
            return -np.inf
        _, sv, vt = np.linalg.svd(rows)
        rank = int((sv > 1e-12 * max(sv[0], 1.0)).sum())
        if rank < len(members) - 1:
            return -np.inf  # affinely dependent members
        basis = vt[rank:].T
    dof = basis.shape[1]
    lo, hi = box
    scale = float(np.abs(np.concatenate([lo, hi])).max()) + 1.0
    # Variables: s (dof) then delta.  Maximize delta.
    a_ub, b_ub = [], []
    for m in others:
        g = 2.0 * (centers[m] - centers[a0])
        c0 = lifted[m] - lifted[a0] - g @ base
        # power_m - power_a0 >= delta  <=>  -g.(base + B s) + (L_m - L_a0) >= delta
        a_ub.append(np.concatenate([g @ basis, [1.0]]))
        b_ub.append(c0)
    for axis in range(3):
        a_ub.append(np.concatenate([basis[axis], [0.0]]))
        b_ub.append(hi[axis] - base[axis])
        a_ub.append(np.concatenate([-basis[axis], [0.0]]))
        b_ub.append(base[axis] - lo[axis])
    bounds = [(None, None)] * dof + [(None, 10.0 * scale * scale)]
    cost = np.zeros(dof + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=np.array(a_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
    if not res.success:
        return -np.inf
    return float(res.x[-1])


def _low_dimensional(centers, lifted, box):
    """Simplices for inputs whose tetrahedral path found nothing."""
    n = len(centers)
    scale2 = float(np.abs(centers).max() ** 2 + np.abs(lifted).max() + 1.0)
    tol = 1e-9 * scale2
    simplices = {0: [], 1: [], 2: [], 3: []}
    for dim in (0, 1, 2):
        if n < dim + 1:
            break
        for members in itertools.combinations(range(n), dim + 1):
            margin = _power_margin_lp(centers, lifted, members, box)
            if margin > tol:
                simplices[dim].append(members)
            elif -tol <= margin <= tol:
                raise DegeneracyError(
                    f"simplex {members} has a vanishing power margin", simplex=members
                )
    # Keep only faces of top-dimensional simplices plus genuinely maximal ones;
    # the margin test already yields a complex closed under face-taking.
    return {k: sorted(v) for k, v in simplices.items()}
