"""Robust 2D convex polygon algebra and point location.

Polygons are (n, 2) float arrays of counterclockwise vertices; the empty
set is an array of shape (0, 2). All booleans snap results whose measure
falls below ``AREA_TOL`` (resp. ``LENGTH_TOL`` for segments) to empty, so
thin slivers produced by nearly touching inputs never propagate.
"""

from __future__ import annotations

import numpy as np

# single global degeneracy tolerance, calibrated to unit-square coordinates
AREA_TOL = 1e-12
LENGTH_TOL = 1e-12

EMPTY_POLYGON = np.empty((0, 2))


def polygon_area(poly: np.ndarray) -> float:
    """Signed area (positive for counterclockwise vertices)."""
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def normalize_polygon(poly: np.ndarray) -> np.ndarray:
    """Snap polygons of negligible area to the empty polygon."""
    if len(poly) < 3 or polygon_area(poly) < AREA_TOL:
        return EMPTY_POLYGON
    return poly


def clip_halfplane(poly: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Clip ``poly`` to the closed half-plane left of the line a -> b.

    One Sutherland-Hodgman pass; convexity is preserved and the area never
    increases. Points within LENGTH_TOL of the line count as inside so that
    flush edges do not produce slivers.
    """
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return EMPTY_POLYGON
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    norm = np.hypot(d[0], d[1])
    if norm < LENGTH_TOL:
        return normalize_polygon(poly)
    d = d / norm
    # signed distance to the line, positive on the left
    rel = poly - a
    dist = d[0] * rel[:, 1] - d[1] * rel[:, 0]

    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        di, dj = dist[i], dist[j]
        if di >= -LENGTH_TOL:
            out.append(poly[i])
        if (di > LENGTH_TOL and dj < -LENGTH_TOL) or (di < -LENGTH_TOL and dj > LENGTH_TOL):
            t = di / (di - dj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    if len(out) < 3:
        return EMPTY_POLYGON
    return normalize_polygon(np.array(out))


def intersect_convex(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Intersection of two convex polygons via successive half-plane clips."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        return EMPTY_POLYGON
    result = a
    n = len(b)
    for i in range(n):
        result = clip_halfplane(result, b[i], b[(i + 1) % n])
        if len(result) == 0:
            return EMPTY_POLYGON
    return result


def subtract_convex(poly: np.ndarray, sub: np.ndarray) -> list[np.ndarray]:
    """Difference poly \\ sub as a list of disjoint convex pieces.

    Decomposes along the edges of ``sub``: the piece for edge e is the part
    of ``poly`` strictly outside e but inside all previous edges, so pieces
    tile poly \\ sub without overlap.
    """
    poly = np.asarray(poly, dtype=float)
    sub = np.asarray(sub, dtype=float)
    if len(poly) == 0:
        return []
    if len(sub) == 0:
        return [poly]
    pieces = []
    current = poly
    n = len(sub)
    for i in range(n):
        a, b = sub[i], sub[(i + 1) % n]
        # outside of this edge: right of a -> b, i.e. left of b -> a
        outside = clip_halfplane(current, b, a)
        if len(outside) > 0:
            pieces.append(outside)
        current = clip_halfplane(current, a, b)
        if len(current) == 0:
            break
    return pieces


def segment_clip_params(p0: np.ndarray, p1: np.ndarray,
                        poly: np.ndarray) -> tuple[float, float] | None:
    """Parameter interval [t0, t1] of the part of segment p0-p1 inside ``poly``.

    Returns None when the overlap is shorter than LENGTH_TOL (in parameter
    units scaled by segment length).
    """
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return None
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    seglen = np.hypot(d[0], d[1])
    if seglen < LENGTH_TOL:
        return None
    lo, hi = 0.0, 1.0
    n = len(poly)
    for i in range(n):
        a = poly[i]
        e = poly[(i + 1) % n] - a
        enorm = np.hypot(e[0], e[1])
        if enorm < LENGTH_TOL:
            continue
        e = e / enorm
        # signed distances of endpoints to edge line, positive inside (left)
        f0 = e[0] * (p0[1] - a[1]) - e[1] * (p0[0] - a[0])
        f1 = e[0] * (p1[1] - a[1]) - e[1] * (p1[0] - a[0])
        df = f1 - f0
        if abs(df) < LENGTH_TOL:
            if f0 < -LENGTH_TOL:
                return None
            continue
        t = -f0 / df
        if df > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
        if lo >= hi:
            return None
    if (hi - lo) * seglen < LENGTH_TOL:
        return None
    return lo, hi


def clip_segment(p0: np.ndarray, p1: np.ndarray,
                 poly: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Part of segment p0-p1 inside convex ``poly`` (a single sub-segment)."""
    params = segment_clip_params(p0, p1, poly)
    if params is None:
        return None
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    lo, hi = params
    return p0 + lo * d, p0 + hi * d


def triangulate_convex(poly: np.ndarray) -> list[np.ndarray]:
    """Fan triangulation from vertex 0; degenerate fans are dropped."""
    poly = np.asarray(poly, dtype=float)
    tris = []
    for i in range(1, len(poly) - 1):
        tri = np.array([poly[0], poly[i], poly[i + 1]])
        if polygon_area(tri) >= AREA_TOL:
            tris.append(tri)
    return tris


def point_in_triangle(point: np.ndarray, tri: np.ndarray,
                      tol: float = LENGTH_TOL) -> bool:
    """Closed point-in-triangle test for a counterclockwise triangle."""
    px, py = point
    for i in range(3):
        ax, ay = tri[i]
        bx, by = tri[(i + 1) % 3]
        if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < -tol:
            return False
    return True


class CellLocator:
    """Axis-aligned bounding-box tree over the cells of a triangle mesh.

    Supports point queries (returning the lowest-index containing cell,
    which keeps on-edge ties deterministic) and box queries returning all
    cells whose bounding box meets a query box. The locator may be built
    over a subset of cells; returned indices always refer to the original
    cell numbering.
    """

    _LEAF_SIZE = 8

    def __init__(self, vertices: np.ndarray, cells: np.ndarray,
                 cell_subset: np.ndarray | None = None):
        self._verts = np.asarray(vertices, dtype=float)
        self._cells = np.asarray(cells, dtype=int)
        if cell_subset is None:
            cell_subset = np.arange(len(self._cells))
        self._ids = np.asarray(cell_subset, dtype=int)
        tri = self._verts[self._cells[self._ids]]       # (m, 3, 2)
        self._lo = tri.min(axis=1)
        self._hi = tri.max(axis=1)
        self._nodes: list[tuple] = []
        if len(self._ids) > 0:
            self._build(np.arange(len(self._ids)))

    def _build(self, items: np.ndarray) -> int:
        lo = self._lo[items].min(axis=0)
        hi = self._hi[items].max(axis=0)
        node_id = len(self._nodes)
        self._nodes.append(None)
        if len(items) <= self._LEAF_SIZE:
            self._nodes[node_id] = (lo, hi, items, -1, -1)
            return node_id
        axis = int(np.argmax(hi - lo))
        centers = 0.5 * (self._lo[items, axis] + self._hi[items, axis])
        order = np.argsort(centers, kind="stable")
        half = len(items) // 2
        left = self._build(items[order[:half]])
        right = self._build(items[order[half:]])
        self._nodes[node_id] = (lo, hi, None, left, right)
        return node_id

    def locate(self, point: np.ndarray, tol: float = LENGTH_TOL) -> int | None:
        """Index of a cell containing ``point``, or None if outside."""
        if len(self._ids) == 0:
            return None
        point = np.asarray(point, dtype=float)
        best = None
        stack = [0]
        while stack:
            lo, hi, items, left, right = self._nodes[stack.pop()]
            if (point[0] < lo[0] - tol or point[0] > hi[0] + tol
                    or point[1] < lo[1] - tol or point[1] > hi[1] + tol):
                continue
            if items is None:
                stack.append(left)
                stack.append(right)
                continue
            for k in items:
                cid = int(self._ids[k])
                if best is not None and cid >= best:
                    continue
                if point_in_triangle(point, self._verts[self._cells[cid]], tol):
                    best = cid
        return best

    def box_query(self, lo: np.ndarray, hi: np.ndarray) -> list[int]:
        """Sorted indices of cells whose bbox intersects the box [lo, hi]."""
        if len(self._ids) == 0:
            return []
        found = []
        stack = [0]
        while stack:
            nlo, nhi, items, left, right = self._nodes[stack.pop()]
            if (hi[0] < nlo[0] or lo[0] > nhi[0]
                    or hi[1] < nlo[1] or lo[1] > nhi[1]):
                continue
            if items is None:
                stack.append(left)
                stack.append(right)
                continue
            for k in items:
                if (hi[0] >= self._lo[k, 0] and lo[0] <= self._hi[k, 0]
                        and hi[1] >= self._lo[k, 1] and lo[1] <= self._hi[k, 1]):
                    found.append(int(self._ids[k]))
        found.sort()
        return found
