"""Randomized property checks over the surface kinetics and the scheduler.

Each report function draws its own configurations from a seeded generator,
so a fixed seed reproduces the identical report.  Reports are plain dicts
ready for JSON serialization; any violation carries the offending sphere
configuration so the case can be replayed.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from .errors import (
    ConvergenceError,
    DegeneracyError,
    DomainError,
    NumericError,
    SafetyViolationError,
    SingularityError,
)
from .kinetics import (
    advance,
    project_to_surface,
    reflect_segment,
    sample_surface,
    velocity,
    velocity_under_cell,
)
from .meshing import triangle_circumradius
from .mixed_complex import build_mixed_complex
from .params import ParameterSet
from .scheduling import (
    Classification,
    EventQueue,
    MeshElement,
    RunStats,
    _log,
    run_until,
    schedule,
)
from .spheres import WeightedSphere

LENGTH_TOL = 1e-6
SPEED_TOL = 1e-9


def _random_complex(rng, n_low=2, n_high=5, t_max=0.5, tries=60):
    """A mixed complex over a few spheres in general position."""
    for _ in range(tries):
        n = int(rng.integers(n_low, n_high + 1))
        centers = rng.uniform(-1.5, 1.5, size=(n, 3))
        weights = rng.uniform(0.5, 2.0, size=n)
        spheres = [WeightedSphere(c, float(w)) for c, w in zip(centers, weights)]
        try:
            return build_mixed_complex(spheres, t_max=t_max), spheres
        except (DegeneracyError, NumericError):
            continue
    raise NumericError("failed to draw a non-degenerate sphere configuration")


def shrinking_patch_fixture(offset: float = 0.1):
    """Four tetrahedral spheres whose central patch is a shrinking sphere.

    The common orthosphere sits at the origin with squared radius
    ``offset`` at t=0, so the central patch contracts radially and hits
    its apex at t=offset; points on it realize the radial lower bounds
    exactly.
    """
    corners = math.sqrt(2.0) * np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    )
    weight = 6.0 - offset
    spheres = [WeightedSphere(c, weight) for c in corners]
    complex_ = build_mixed_complex(spheres, t_max=0.0)
    # The tetrahedron cell (all-shrinking signs) is the one of dimension 3.
    cell = complex_.cells_of_dim(3)[0]
    return complex_, cell


def _serialize(spheres) -> list:
    return [[*map(float, s.center), float(s.weight)] for s in spheres]


def _pool(complex_, rng, t: float = 0.0, per_cell: int = 30) -> list:
    points = sample_surface(complex_, t, rng, per_cell=per_cell)
    # sample_surface groups points by cell; mix them so consumers that
    # stop early still see every patch kind.
    return [points[i] for i in rng.permutation(len(points))]


def speed_report(trials: int = 1000, seed: int = 0) -> dict:
    """Check the speed law: the velocity norm times 2*rho is one."""
    rng = np.random.default_rng(seed)
    checked = 0
    max_deviation = 0.0
    patch_counts = defaultdict(int)
    violations = []
    worst = None
    while checked < trials:
        complex_, spheres = _random_complex(rng)
        for point in _pool(complex_, rng):
            if checked >= trials:
                break
            deviation = abs(
                2.0 * point.rho * float(np.linalg.norm(velocity(complex_, point))) - 1.0
            )
            patch_counts[complex_.cells[point.cell_index].frame.patch_kind(point.t)] += 1
            checked += 1
            if deviation > max_deviation:
                max_deviation = deviation
                worst = {
                    "spheres": _serialize(spheres),
                    "point": [float(v) for v in point.world],
                    "deviation": float(deviation),
                }
            if deviation > SPEED_TOL:
                violations.append(worst)
    return {
        "mode": "speed",
        "trials": trials,
        "seed": seed,
        "tolerance": SPEED_TOL,
        "max_deviation": float(max_deviation),
        "patch_counts": dict(sorted(patch_counts.items())),
        "violations": violations,
        "passed": not violations,
    }


def _advance_safely(complex_, points, dt):
    """Advance all points by dt, or None when one hits an apex or the clip."""
    out = []
    for point in points:
        try:
            out.append(advance(complex_, point, dt))
        except (SingularityError, DomainError):
            return None
    return out


def _distinct_sample(rng, pool, k, min_distance=1e-4):
    if len(pool) < k:
        return None
    idx = rng.choice(len(pool), size=k, replace=False)
    chosen = [pool[i] for i in idx]
    for i in range(k):
        for j in range(i + 1, k):
            if np.linalg.norm(chosen[i].world - chosen[j].world) < min_distance:
                return None
    return chosen


def _radial_length_gap() -> float:
    """|d1/d0 - (1-theta)| for a pair on the shrinking central patch."""
    complex_, cell = shrinking_patch_fixture()
    rho0 = math.sqrt(cell.frame.rhs(0.0))
    theta = 0.3
    dt = (2 * theta - theta * theta) * rho0 * rho0
    rng = np.random.default_rng(7)
    pts = None
    while pts is None:
        pool = [p for p in _pool(complex_, rng, per_cell=40) if p.cell_index == cell.index]
        pts = _distinct_sample(rng, pool, 2) if len(pool) >= 2 else None
    moved = _advance_safely(complex_, pts, dt)
    d0 = float(np.linalg.norm(pts[0].world - pts[1].world))
    d1 = float(np.linalg.norm(moved[0].world - moved[1].world))
    return abs(d1 / d0 - (1.0 - theta))


def length_report(trials: int = 1000, seed: int = 0) -> dict:
    """Distance ratio of advanced point pairs against the analytic window.

    Both points travel undisturbed for dt = (2*theta - theta^2) * rho0^2
    with rho0 the smaller of their length scales; the ratio of distances
    must land in [1-theta, 1/(1-theta)].
    """
    rng = np.random.default_rng(seed)
    done = 0
    cross_cell = 0
    min_margin = math.inf
    violations = []
    extremes = {"min_ratio_gap": math.inf, "max_ratio_gap": math.inf}
    while done < trials:
        complex_, spheres = _random_complex(rng)
        pool = _pool(complex_, rng)
        for _ in range(40):
            if done >= trials:
                break
            pair = _distinct_sample(rng, pool, 2)
            if pair is None:
                break
            theta = float(rng.uniform(0.02, 0.6))
            rho0 = min(p.rho for p in pair)
            dt = (2 * theta - theta * theta) * rho0 * rho0
            moved = _advance_safely(complex_, pair, dt)
            if moved is None:
                continue
            d0 = float(np.linalg.norm(pair[0].world - pair[1].world))
            d1 = float(np.linalg.norm(moved[0].world - moved[1].world))
            ratio = d1 / d0
            lo, hi = 1.0 - theta, 1.0 / (1.0 - theta)
            if pair[0].cell_index != pair[1].cell_index:
                cross_cell += 1
            done += 1
            min_margin = min(min_margin, ratio - lo, hi - ratio)
            extremes["min_ratio_gap"] = min(extremes["min_ratio_gap"], ratio - lo)
            extremes["max_ratio_gap"] = min(extremes["max_ratio_gap"], hi - ratio)
            if ratio < lo - LENGTH_TOL or ratio > hi + LENGTH_TOL:
                violations.append(
                    {
                        "spheres": _serialize(spheres),
                        "u": [float(v) for v in pair[0].world],
                        "v": [float(v) for v in pair[1].world],
                        "theta": theta,
                        "ratio": ratio,
                    }
                )
    tightness_gap = _radial_length_gap()
    return {
        "mode": "length-lemma",
        "trials": trials,
        "seed": seed,
        "tolerance": LENGTH_TOL,
        "cross_cell_pairs": cross_cell,
        "min_margin": float(min_margin),
        "lower_gap": float(extremes["min_ratio_gap"]),
        "upper_gap": float(extremes["max_ratio_gap"]),
        "radial_tightness_gap": float(tightness_gap),
        "violations": violations,
        "passed": not violations and tightness_gap <= LENGTH_TOL,
    }


def _triangle_height(a, b, c) -> float:
    """Smallest vertex-to-opposite-line distance of triangle abc."""
    heights = []
    for apex, e0, e1 in ((a, b, c), (b, a, c), (c, a, b)):
        edge = e1 - e0
        edge_len = float(np.linalg.norm(edge))
        if edge_len < 1e-30:
            return 0.0
        heights.append(float(np.linalg.norm(np.cross(apex - e0, edge))) / edge_len)
    return min(heights)


def _radial_height_gap() -> float:
    complex_, cell = shrinking_patch_fixture()
    rho0 = math.sqrt(cell.frame.rhs(0.0))
    theta = 0.25
    dt = (2 * theta - theta * theta) * rho0 * rho0
    rng = np.random.default_rng(11)
    pts = None
    while pts is None:
        pool = [p for p in _pool(complex_, rng, per_cell=60) if p.cell_index == cell.index]
        pts = _distinct_sample(rng, pool, 3, min_distance=0.05) if len(pool) >= 3 else None
        if pts is not None and _triangle_height(*(p.world for p in pts)) < 0.02:
            pts = None
    moved = _advance_safely(complex_, pts, dt)
    h0 = _triangle_height(*(p.world for p in pts))
    h1 = _triangle_height(*(p.world for p in moved))
    return abs(h1 / h0 - (1.0 - theta))


def height_report(trials: int = 1000, seed: int = 0) -> dict:
    """Height and circumradius ratios of advanced triples against the bounds.

    Triples are sampled exactly like the pair protocol and advanced
    undisturbed for dt = (2*theta - theta^2) * rho0^2.  The report holds
    the smallest vertex-to-line height ratio H1/H0 to the pair window
    [1-theta, 1/(1-theta)] and the circumradius ratio R1/R0 to the cube
    1/(1-theta)^3.  Unlike pair distances, triangle heights do not obey
    the window: a triangle can slide toward collinearity while every one
    of its chords stays inside its own bounds, so at large trial counts a
    failing report with serialized counterexamples is the honest outcome.
    On a common shrinking sphere patch the lower bound is exact, which
    the radial tightness gap witnesses.
    """
    rng = np.random.default_rng(seed)
    done = 0
    cross_cell = 0
    degenerate_skipped = 0
    min_margin = math.inf
    radius_margin = math.inf
    violations = []
    while done < trials:
        complex_, spheres = _random_complex(rng)
        pool = _pool(complex_, rng)
        for _ in range(40):
            if done >= trials:
                break
            triple = _distinct_sample(rng, pool, 3)
            if triple is None:
                break
            coords = [p.world for p in triple]
            h0 = _triangle_height(*coords)
            diam = max(
                float(np.linalg.norm(coords[i] - coords[j]))
                for i in range(3)
                for j in range(i + 1, 3)
            )
            if h0 < 1e-6 * diam:
                degenerate_skipped += 1
                continue
            theta = float(rng.uniform(0.02, 0.6))
            rho0 = min(p.rho for p in triple)
            dt = (2 * theta - theta * theta) * rho0 * rho0
            moved = _advance_safely(complex_, triple, dt)
            if moved is None:
                continue
            h1 = _triangle_height(*(p.world for p in moved))
            ratio = h1 / h0
            lo, hi = 1.0 - theta, 1.0 / (1.0 - theta)
            try:
                r0 = triangle_circumradius(*coords)
                r1 = triangle_circumradius(*(p.world for p in moved))
            except DegeneracyError:
                degenerate_skipped += 1
                continue
            radius_bound = 1.0 / (1.0 - theta) ** 3
            done += 1
            if len({p.cell_index for p in triple}) > 1:
                cross_cell += 1
            min_margin = min(min_margin, ratio - lo, hi - ratio)
            radius_margin = min(radius_margin, radius_bound - r1 / r0)
            if (
                ratio < lo - LENGTH_TOL
                or ratio > hi + LENGTH_TOL
                or r1 / r0 >= radius_bound + LENGTH_TOL
            ):
                violations.append(
                    {
                        "spheres": _serialize(spheres),
                        "points": [[float(v) for v in p.world] for p in triple],
                        "theta": theta,
                        "height_ratio": ratio,
                        "radius_ratio": float(r1 / r0),
                    }
                )
    tightness_gap = _radial_height_gap()
    return {
        "mode": "height-lemma",
        "trials": trials,
        "seed": seed,
        "tolerance": LENGTH_TOL,
        "cross_cell_triples": cross_cell,
        "degenerate_skipped": degenerate_skipped,
        "min_margin": float(min_margin),
        "radius_margin": float(radius_margin),
        "radial_tightness_gap": float(tightness_gap),
        "violations": violations,
        "passed": not violations and tightness_gap <= LENGTH_TOL,
    }


def reflection_report(trials: int = 300, seed: int = 0) -> dict:
    """Fold random segments across cell faces and check the invariants.

    Path length is preserved, the image comes no farther than the target,
    and the image's velocity under the source cell's family matches the
    target's own velocity.
    """
    rng = np.random.default_rng(seed)
    done = 0
    crossings_seen = 0
    max_length_error = 0.0
    max_velocity_error = 0.0
    contraction_failures = 0
    violations = []
    while done < trials:
        complex_, spheres = _random_complex(rng)
        pool = _pool(complex_, rng)
        for _ in range(40):
            if done >= trials:
                break
            pair = _distinct_sample(rng, pool, 2)
            if pair is None:
                break
            u, v = pair[0].world, pair[1].world
            try:
                path = reflect_segment(complex_, u, v)
            except DegeneracyError:
                continue
            straight = float(np.linalg.norm(v - u))
            length_error = abs(path.path_length() - straight) / straight
            pulled_in = float(np.linalg.norm(path.image - u)) <= straight * (1 + 1e-12)
            try:
                vel_target = velocity(complex_, pair[1])
                vel_image = velocity_under_cell(
                    complex_, pair[0].cell_index, path.image
                )
                velocity_error = float(
                    np.linalg.norm(vel_target - vel_image) / np.linalg.norm(vel_target)
                )
            except SingularityError:
                continue
            done += 1
            crossings_seen += len(path.crossings)
            max_length_error = max(max_length_error, length_error)
            max_velocity_error = max(max_velocity_error, velocity_error)
            if not pulled_in:
                contraction_failures += 1
            if length_error > 1e-9 or velocity_error > 1e-9 or not pulled_in:
                violations.append(
                    {
                        "spheres": _serialize(spheres),
                        "u": [float(x) for x in u],
                        "v": [float(x) for x in v],
                        "length_error": float(length_error),
                        "velocity_error": float(velocity_error),
                    }
                )
    return {
        "mode": "reflection",
        "trials": trials,
        "seed": seed,
        "tolerance": 1e-9,
        "crossings_seen": crossings_seen,
        "max_length_error": float(max_length_error),
        "max_velocity_error": float(max_velocity_error),
        "contraction_failures": contraction_failures,
        "violations": violations,
        "passed": not violations,
    }


class _TrackedWorld:
    """World adapter over free-floating elements with recorded trajectories.

    No mesh surgery: a restructuring signal retires the element.  Every
    vertex advance is recorded so an oracle can later evaluate the exact
    element ratio anywhere inside the scheduled intervals.
    """

    def __init__(self, complex_, vertices, params):
        self.complex = complex_
        self.vertices = vertices
        self.params = params
        self.tracks = defaultdict(list)
        self.alive = set()
        self.retired = []

    def generation_of(self, element):
        return 0 if element.key in self.alive else None

    def measure(self, element, t):
        points = []
        for vid in element.vertices:
            point = self.vertices[vid]
            if t > point.t:
                point, trajectory = advance(self.complex, point, t - point.t, record=True)
                self.tracks[vid].append(trajectory)
                self.vertices[vid] = point
            points.append(point)
        rhos = [p.rho for p in points]
        if element.kind == "edge":
            size = 0.5 * float(np.linalg.norm(points[0].world - points[1].world))
            return element.measure(size, max(rhos), min(rhos), self.params)
        size = triangle_circumradius(*(p.world for p in points))
        return element.measure(size, min(rhos), min(rhos), self.params)

    def restructure(self, element, t):
        self.alive.discard(element.key)
        self.retired.append((element.key, float(t)))
        return []

    def eval_positions(self, vid, ts):
        out = np.empty((len(ts), 3))
        rho = np.empty(len(ts))
        filled = np.zeros(len(ts), dtype=bool)
        for trajectory in self.tracks[vid]:
            mask = (ts >= trajectory.t_start - 1e-12) & (ts <= trajectory.t_end + 1e-12) & ~filled
            if mask.any():
                out[mask] = trajectory.positions(ts[mask])
                rho[mask] = trajectory.rhos(ts[mask])
                filled[mask] = True
        if not filled.all():
            raise NumericError("oracle asked for times outside recorded trajectories")
        return out, rho


def _interval_violations(world: _TrackedWorld, element, t0, t1, samples, params):
    """Count oracle samples in (t0, t1] where the element is unacceptable."""
    ts = np.linspace(t0, t1, samples)
    tracks = [world.eval_positions(vid, ts) for vid in element.vertices]
    positions = [tr[0] for tr in tracks]
    rhos = np.array([tr[1] for tr in tracks])
    if element.kind == "edge":
        ratio = 0.5 * np.linalg.norm(positions[0] - positions[1], axis=1) / rhos.max(axis=0)
        return int(np.count_nonzero(ratio <= params.edge_floor_hard))
    a = np.linalg.norm(positions[1] - positions[2], axis=1)
    b = np.linalg.norm(positions[0] - positions[2], axis=1)
    c = np.linalg.norm(positions[0] - positions[1], axis=1)
    doubled_area = np.linalg.norm(
        np.cross(positions[1] - positions[0], positions[2] - positions[0]), axis=1
    )
    radius = a * b * c / (2.0 * doubled_area)
    ratio = radius / rhos.min(axis=0)
    return int(np.count_nonzero(ratio >= params.triangle_ceiling_hard))


def scheduler_safety_report(
    windows: int = 50,
    seed: int = 0,
    samples_per_interval: int = 1000,
    params: ParameterSet | None = None,
) -> dict:
    """Run scheduled checks on random configurations and audit every interval.

    Elements are random edges and triangles over sampled surface points on
    two-to-five-sphere complexes.  The scheduler runs in its residual-interval
    mode so borderline elements stay under supervision; an element is only
    retired when its residual interval collapses.  Afterwards an oracle
    samples each element's true ratio throughout every scheduled interval,
    counting any excursion past the hard bounds.
    """
    params = params or ParameterSet()
    rng = np.random.default_rng(seed)
    unacceptable_samples = 0
    intervals_audited = 0
    total_false_positives = 0
    total_checks = 0
    total_retired = 0
    window_rows = []
    violations = []
    made = 0
    attempts = 0
    while made < windows:
        attempts += 1
        if attempts > 40 * windows:
            raise NumericError("could not assemble enough safety windows")
        complex_, spheres = _random_complex(rng)
        pool = _pool(complex_, rng, per_cell=40)
        if len(pool) < 8:
            continue
        vertices = {}
        elements = []

        def adopt(kind, chosen):
            base = len(vertices)
            for j, point in enumerate(chosen):
                vertices[base + j] = point
            elements.append(
                MeshElement(kind=kind, vertices=tuple(range(base, base + len(chosen))))
            )

        for _ in range(60):
            edges = sum(1 for e in elements if e.kind == "edge")
            if edges >= 5 and len(elements) - edges >= 4:
                break
            kind = "edge" if rng.uniform() < 0.55 else "triangle"
            k = 2 if kind == "edge" else 3
            chosen = _distinct_sample(rng, pool, k, min_distance=1e-2)
            if chosen is None:
                continue
            if kind == "triangle" and _triangle_height(*(p.world for p in chosen)) < 1e-3:
                continue
            adopt(kind, chosen)
        # A few tight pairs whose ratio sits near the borderline band, so
        # the residual-interval path and retirements get exercised too.
        for _ in range(12):
            if sum(1 for e in elements if e.kind == "edge") >= 8:
                break
            seed_point = pool[int(rng.integers(len(pool)))]
            offset = float(rng.uniform(0.05, 0.2)) * seed_point.rho
            direction = rng.normal(size=3)
            direction /= float(np.linalg.norm(direction))
            try:
                partner = project_to_surface(
                    complex_, seed_point.world + offset * direction, seed_point.t
                )
            except (ConvergenceError, DomainError, NumericError, SingularityError):
                continue
            if float(np.linalg.norm(partner.world - seed_point.world)) < 1e-6:
                continue
            adopt("edge", [seed_point, partner])
        if len(elements) < 4:
            continue
        world = _TrackedWorld(complex_, vertices, params)
        world.alive = {e.key for e in elements}
        queue = EventQueue()
        stats = RunStats()
        log = []
        try:
            for element in elements:
                cls = world.measure(element, 0.0)
                if cls is Classification.UNACCEPTABLE:
                    world.alive.discard(element.key)
                    continue
                scheduled = schedule(queue, element, 0.0, params, lazy_buffer=True)
                if scheduled is None:
                    world.restructure(element, 0.0)
                    continue
                _log(log, 0.0, element, "register", *scheduled)
            if len(queue) == 0:
                continue
            dues = sorted(entry[0] for entry in queue._heap)
            # Stay clear of shrinking-patch apexes: only the all-shrinking
            # sphere patches ever reach one, at growth time rho^2 ahead.
            apex_guard = math.inf
            for point in vertices.values():
                frame = complex_.cells[point.cell_index].frame
                if frame.axis_sign > 0 and frame.orientation < 0:
                    apex_guard = min(apex_guard, 0.45 * point.rho**2)
            t_end = float(min(dues[len(dues) // 2] * 4.0, apex_guard))
            if t_end < dues[0]:
                continue  # no check fits before an apex: draw a fresh window
            run_until(queue, t_end, world, params, log=log, stats=stats, lazy_buffer=True)
        except (SingularityError, NumericError, DomainError):
            continue  # apex hit or clip exit: draw a fresh window
        except SafetyViolationError as exc:
            violations.append({"spheres": _serialize(spheres), "error": str(exc)})
            made += 1
            continue
        made += 1
        window_bad = 0
        for element in elements:
            times = sorted(
                {
                    row["t"]
                    for row in log
                    if row["kind"] == element.kind
                    and row["vertices"] == list(element.vertices)
                }
            )
            if not times:
                continue
            final_t = min(world.vertices[vid].t for vid in element.vertices)
            times.append(final_t)
            for a, b in zip(times, times[1:]):
                if b - a <= 1e-12:
                    continue
                window_bad += _interval_violations(
                    world, element, a, b, samples_per_interval, params
                )
                intervals_audited += 1
        unacceptable_samples += window_bad
        total_false_positives += stats.false_positives
        total_checks += stats.checks
        total_retired += len(world.retired)
        window_rows.append(
            {
                "spheres": _serialize(spheres),
                "elements": len(elements),
                "checks": stats.checks,
                "false_positives": stats.false_positives,
                "retired": len(world.retired),
                "unacceptable_samples": window_bad,
            }
        )
    return {
        "mode": "scheduler-safety",
        "windows": windows,
        "seed": seed,
        "samples_per_interval": samples_per_interval,
        "intervals_audited": intervals_audited,
        "checks": total_checks,
        "false_positives": total_false_positives,
        "retired": total_retired,
        "unacceptable_samples": unacceptable_samples,
        "windows_detail": window_rows,
        "violations": violations,
        "passed": not violations and unacceptable_samples == 0 and total_false_positives > 0,
    }


REPORTERS = {
    "speed": speed_report,
    "length-lemma": length_report,
    "height-lemma": height_report,
    "reflection": reflection_report,
}
