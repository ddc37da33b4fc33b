"""Multimesh construction: cell classification and measure databases.

Meshes are stacked in order, later meshes covering earlier ones. For each
mesh the part of its domain not covered by any later mesh is its visible
domain; the visible domains partition the unit square. Cells are
classified against the union of later domains as

* uncut: no overlap, the whole cell is visible,
* cut: partially covered, carries clipped quadrature for its visible part,
* covered: fully hidden, dropped from the active mesh.

Three quadrature databases are generated: clipped volume rules on cut
cells, line rules on the visible boundary of each mesh split against the
mesh visible directly below, and volume rules on the overlap between each
active mesh and the visible domains of later meshes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .geometry import (AREA_TOL, CellLocator, intersect_convex, polygon_area,
                       segment_clip_params, subtract_convex,
                       triangulate_convex)
from .meshing import (TriangleMesh, UNIT_SQUARE, facet_endpoints,
                      facet_outward_normal)
from .quadrature import gauss_segment, polygon_rule, triangle_rule


class CellClass(IntEnum):
    UNCUT = 0
    CUT = 1
    COVERED = 2


@dataclass
class CutCellData:
    """Visible geometry and clipped quadrature of one cut cell."""

    pieces: list[np.ndarray]        # convex pieces of the visible part
    points: np.ndarray              # (m, 2) quadrature points
    weights: np.ndarray             # (m,), summing to the visible area
    visible_area: float


@dataclass
class InterfaceSegment:
    """Quadrature on one straight piece of a visible mesh boundary.

    The piece lies on the boundary of mesh ``mesh_hi``, inside the visible
    domain of ``mesh_lo`` (mesh_hi > mesh_lo), within one cell of each.
    ``normal`` points out of the mesh_hi domain.
    """

    mesh_hi: int
    mesh_lo: int
    cell_hi: int
    cell_lo: int
    points: np.ndarray
    weights: np.ndarray
    normal: np.ndarray

    @property
    def length(self) -> float:
        return float(self.weights.sum())


@dataclass
class OverlapPiece:
    """Quadrature on one convex piece of an overlap region.

    The piece lies in a cut cell of mesh ``mesh_i`` and in the visible part
    of a cell of the later mesh ``mesh_j`` (mesh_i < mesh_j).
    """

    mesh_i: int
    mesh_j: int
    cell_i: int
    cell_j: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def area(self) -> float:
        return float(self.weights.sum())


@dataclass
class InterfacePoint:
    """Flattened per-point view of an interface segment."""

    point: np.ndarray
    weight: float
    normal: np.ndarray
    cell_hi: int
    cell_lo: int


class MultiMesh:
    """Ordered overlapping meshes with classification and measure data."""

    def __init__(self, meshes: list[TriangleMesh], quad_order: int):
        self.meshes = meshes
        self.quad_order = quad_order
        self.classes: list[np.ndarray] = []
        self.cut_data: list[dict[int, CutCellData]] = []
        self.locators: list[CellLocator] = []
        self.interface_db: dict[tuple[int, int], list[InterfaceSegment]] = {}
        self.overlap_db: dict[tuple[int, int], list[OverlapPiece]] = {}
        self.hidden_meshes: list[int] = []

    @property
    def num_meshes(self) -> int:
        return len(self.meshes)

    @property
    def h(self) -> float:
        """Global mesh size: the largest h among non-hidden meshes."""
        hidden = set(self.hidden_meshes)
        return max(m.h for i, m in enumerate(self.meshes) if i not in hidden)

    def active_cells(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.classes[i] != CellClass.COVERED)

    def cut_cells(self, i: int) -> np.ndarray:
        """Cells carrying the full-cell least-squares measure."""
        return np.flatnonzero(self.classes[i] == CellClass.CUT)

    def uncut_cells(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.classes[i] == CellClass.UNCUT)

    def cell_area(self, i: int, cell: int) -> float:
        return polygon_area(self.meshes[i].cell_coords(cell))

    def cell_quadrature(self, i: int, cell: int,
                        order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Volume rule on the visible part of one active cell.

        Uncut cells get the full-cell rule; cut cells a rule on their
        stored visible pieces. ``order`` defaults to the build order; the
        default-order rule of a cut cell is returned precomputed.
        """
        cls = self.classes[i][cell]
        if cls == CellClass.COVERED:
            return np.empty((0, 2)), np.empty(0)
        if order is None:
            order = self.quad_order
        if cls == CellClass.UNCUT:
            tris = [self.meshes[i].cell_coords(cell)]
            return polygon_rule(tris, order)
        data = self.cut_data[i][cell]
        if order == self.quad_order:
            return data.points, data.weights
        tris = [t for piece in data.pieces for t in triangulate_convex(piece)]
        return polygon_rule(tris, order)

    def domain_area(self, i: int) -> float:
        """Area of the visible domain of mesh i from the volume measure."""
        total = 0.0
        for cell in self.uncut_cells(i):
            total += self.cell_area(i, cell)
        for data in self.cut_data[i].values():
            total += data.visible_area
        return total

    def interface_length(self, i: int, j: int) -> float:
        return sum(s.length for s in self.interface_db.get((i, j), []))

    def overlap_area(self, i: int, j: int) -> float:
        return sum(p.area for p in self.overlap_db.get((i, j), []))

    def interface_points(self, i: int, j: int):
        """Iterate the (i, j) interface quadrature point by point."""
        for seg in self.interface_db.get((i, j), []):
            for p, w in zip(seg.points, seg.weights):
                yield InterfacePoint(p, float(w), seg.normal,
                                     seg.cell_hi, seg.cell_lo)


def build_multimesh(meshes: list[TriangleMesh], quad_order: int) -> MultiMesh:
    """Classify cells, trim active meshes and fill all measure databases.

    ``meshes[0]`` must cover the unit square; every later mesh must lie
    strictly inside it. Hidden meshes (empty active set) are recorded and
    drop out of every database.
    """
    if quad_order < 1:
        raise ValueError("quadrature order must be >= 1")
    if not meshes:
        raise ValueError("need at least a background mesh")
    _check_background(meshes[0])
    for m in meshes[1:]:
        _check_inside_unit_square(m)

    mm = MultiMesh(meshes, quad_order)
    for i, mesh in enumerate(meshes):
        mesh.mesh_index = i

    outlines = [m.outline() for m in meshes]
    outline_lo = [o.min(axis=0) for o in outlines]
    outline_hi = [o.max(axis=0) for o in outlines]

    # transient per-cut-cell overlap chunks: (i, cell, j) -> convex pieces
    chunks: list[tuple[int, int, int, np.ndarray]] = []

    for i, mesh in enumerate(meshes):
        classes, cut_data = _classify_mesh(mm, i, outlines, outline_lo,
                                           outline_hi, chunks)
        mm.classes.append(classes)
        mm.cut_data.append(cut_data)
        if not np.any(classes != CellClass.COVERED) :
            mm.hidden_meshes.append(i)

    for i, mesh in enumerate(meshes):
        active = mm.active_cells(i)
        mm.locators.append(CellLocator(mesh.vertices, mesh.cells, active))

    _build_overlap_db(mm, chunks)
    _build_interface_db(mm, outlines, outline_lo, outline_hi)
    return mm


def _check_background(mesh: TriangleMesh) -> None:
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    area = abs(polygon_area(mesh.outline()))
    if (np.abs(lo).max() > 1e-12 or np.abs(hi - 1.0).max() > 1e-12
            or abs(area - 1.0) > 1e-12):
        raise ValueError("background mesh must cover the unit square")


def _check_inside_unit_square(mesh: TriangleMesh) -> None:
    corners = mesh.outline()
    if np.any(corners <= 1e-12) or np.any(corners >= 1.0 - 1e-12):
        raise ValueError(
            f"mesh {mesh.mesh_index} touches the background boundary")


def _classify_mesh(mm: MultiMesh, i: int, outlines, outline_lo, outline_hi,
                   chunks) -> tuple[np.ndarray, dict[int, CutCellData]]:
    mesh = mm.meshes[i]
    n_above = len(mm.meshes) - (i + 1)
    classes = np.full(mesh.num_cells, CellClass.UNCUT, dtype=np.int8)
    cut_data: dict[int, CutCellData] = {}
    if n_above == 0:
        return classes, cut_data

    tri = mesh.vertices[mesh.cells]                       # (nc, 3, 2)
    cell_lo = tri.min(axis=1)
    cell_hi = tri.max(axis=1)

    # bbox prefilter: hits[c] lists later meshes whose box meets cell c
    hits: list[list[int]] = [[] for _ in range(mesh.num_cells)]
    for m in range(i + 1, len(mm.meshes)):
        mask = np.all(cell_hi >= outline_lo[m], axis=1) \
            & np.all(cell_lo <= outline_hi[m], axis=1)
        for c in np.flatnonzero(mask):
            hits[c].append(m)

    for c in range(mesh.num_cells):
        if not hits[c]:
            continue
        cell_poly = tri[c]
        cell_area = polygon_area(cell_poly)
        pieces = [cell_poly]
        cell_chunks: list[tuple[int, np.ndarray]] = []
        # sweep later meshes from the top down so each hidden piece is
        # assigned to the mesh that actually shows there
        for m in sorted(hits[c], reverse=True):
            new_pieces = []
            for piece in pieces:
                inter = intersect_convex(piece, outlines[m])
                if len(inter) > 0:
                    cell_chunks.append((m, inter))
                new_pieces.extend(subtract_convex(piece, outlines[m]))
            pieces = new_pieces
            if not pieces:
                break
        visible_area = sum(polygon_area(p) for p in pieces)
        hidden_area = cell_area - visible_area
        if hidden_area <= AREA_TOL:
            continue
        if visible_area <= AREA_TOL:
            classes[c] = CellClass.COVERED
            continue
        classes[c] = CellClass.CUT
        tris = [t for piece in pieces for t in triangulate_convex(piece)]
        pts, wts = polygon_rule(tris, mm.quad_order)
        cut_data[c] = CutCellData(pieces, pts, wts, visible_area)
        for j, piece in cell_chunks:
            chunks.append((i, c, j, piece))
    return classes, cut_data


def _build_overlap_db(mm: MultiMesh, chunks) -> None:
    ref_cache: dict[int, tuple] = {}
    for i, cell_i, j, piece in chunks:
        lo = piece.min(axis=0)
        hi = piece.max(axis=0)
        mesh_j = mm.meshes[j]
        for cell_j in mm.locators[j].box_query(lo, hi):
            part = intersect_convex(piece, mesh_j.cell_coords(cell_j))
            if len(part) == 0:
                continue
            tris = triangulate_convex(part)
            if not tris:
                continue
            pts, wts = polygon_rule(tris, mm.quad_order)
            mm.overlap_db.setdefault((i, j), []).append(
                OverlapPiece(i, j, cell_i, cell_j, pts, wts))


def _interval_subtract(intervals, lo, hi):
    out = []
    for a, b in intervals:
        if hi <= a or lo >= b:
            out.append((a, b))
            continue
        if lo > a:
            out.append((a, lo))
        if hi < b:
            out.append((hi, b))
    return out


def _interval_split(intervals, lo, hi):
    """Split intervals into (parts inside [lo, hi], parts outside)."""
    inside, outside = [], []
    for a, b in intervals:
        ia, ib = max(a, lo), min(b, hi)
        if ia < ib:
            inside.append((ia, ib))
            if a < ia:
                outside.append((a, ia))
            if ib < b:
                outside.append((ib, b))
        else:
            outside.append((a, b))
    return inside, outside


def _build_interface_db(mm: MultiMesh, outlines, outline_lo, outline_hi) -> None:
    n = len(mm.meshes)
    for i in range(1, n):
        if i in mm.hidden_meshes:
            continue
        mesh = mm.meshes[i]
        for cell, ledge in mesh.boundary_facets:
            if mm.classes[i][cell] == CellClass.COVERED:
                continue
            _process_facet(mm, i, int(cell), int(ledge), outlines,
                           outline_lo, outline_hi)


def _process_facet(mm: MultiMesh, i: int, cell: int, ledge: int, outlines,
                   outline_lo, outline_hi) -> None:
    mesh = mm.meshes[i]
    p0, p1 = facet_endpoints(mesh, cell, ledge)
    d = p1 - p0
    seglen = float(np.hypot(d[0], d[1]))
    param_tol = AREA_TOL / max(seglen, AREA_TOL)
    normal = facet_outward_normal(mesh, cell, ledge)
    seg_lo = np.minimum(p0, p1)
    seg_hi = np.maximum(p0, p1)

    def bbox_overlaps(m):
        return np.all(seg_hi >= outline_lo[m]) and np.all(seg_lo <= outline_hi[m])

    # visible part: remove everything hidden under later meshes
    intervals = [(0.0, 1.0)]
    for m in range(i + 1, len(mm.meshes)):
        if not intervals:
            return
        if not bbox_overlaps(m):
            continue
        prm = segment_clip_params(p0, p1, outlines[m])
        if prm is not None:
            intervals = _interval_subtract(intervals, prm[0], prm[1])
    intervals = [(a, b) for a, b in intervals if b - a > param_tol]
    if not intervals:
        return

    # ownership: the mesh visible directly below is the highest one whose
    # domain contains the piece
    assigned: list[tuple[int, float, float]] = []
    for j in range(i - 1, 0, -1):
        if not intervals:
            break
        if not bbox_overlaps(j):
            continue
        prm = segment_clip_params(p0, p1, outlines[j])
        if prm is None:
            continue
        inside, intervals = _interval_split(intervals, prm[0], prm[1])
        assigned.extend((j, a, b) for a, b in inside if b - a > param_tol)
    assigned.extend((0, a, b) for a, b in intervals if b - a > param_tol)

    npts = mm.quad_order
    ts_ref, ws_ref = gauss_segment(npts)
    for j, lo, hi in assigned:
        _emit_subsegments(mm, i, j, cell, p0, d, seglen, lo, hi, param_tol,
                          normal, ts_ref, ws_ref)


def _emit_subsegments(mm: MultiMesh, i: int, j: int, cell_hi: int,
                      p0: np.ndarray, d: np.ndarray, seglen: float,
                      lo: float, hi: float, param_tol: float,
                      normal: np.ndarray, ts_ref, ws_ref) -> None:
    mesh_j = mm.meshes[j]
    a = p0 + lo * d
    b = p0 + hi * d
    box_lo = np.minimum(a, b)
    box_hi = np.maximum(a, b)
    candidates = mm.locators[j].box_query(box_lo, box_hi)

    breaks = [lo, hi]
    for cj in candidates:
        prm = segment_clip_params(p0, p0 + d, mesh_j.cell_coords(cj))
        if prm is None:
            continue
        for t in prm:
            if lo + param_tol < t < hi - param_tol:
                breaks.append(t)
    breaks.sort()

    prev = breaks[0]
    for t in breaks[1:]:
        if t - prev <= param_tol:
            prev = max(prev, t)
            continue
        mid = p0 + 0.5 * (prev + t) * d
        cell_lo = mm.locators[j].locate(mid)
        if cell_lo is None:
            cell_lo = mm.locators[j].locate(mid, tol=1e-9)
        if cell_lo is None:
            if (t - prev) * seglen > 1e-9:
                raise RuntimeError(
                    f"interface piece of mesh {i} not located in mesh {j}")
            prev = t
            continue
        ts = prev + ts_ref * (t - prev)
        pts = p0 + np.outer(ts, d)
        wts = ws_ref * (t - prev) * seglen
        mm.interface_db.setdefault((i, j), []).append(
            InterfaceSegment(i, j, cell_hi, cell_lo, pts, wts,
                             normal.copy()))
        prev = t
