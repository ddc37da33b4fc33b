"""Triangle meshes of placed square domains.

Each mesh discretizes a scaled, rotated, translated copy of the unit
square with a structured right-triangle grid. Mesh 0 of a multimesh is
the background covering [0,1]^2; later meshes must sit strictly inside
the background.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import polygon_area

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

# local edge e of cell (a, b, c): e=0 -> (a,b), e=1 -> (b,c), e=2 -> (c,a)
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True)
class Placement:
    """Similarity transform mapping the unit square onto a placed domain."""

    scale: float = 1.0
    rotation: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError("placement scale must be positive")

    def apply(self, points: np.ndarray) -> np.ndarray:
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        return self.scale * np.asarray(points, dtype=float) @ rot.T + self.translation

    def corners(self) -> np.ndarray:
        """Counterclockwise corners of the placed square."""
        return self.apply(UNIT_SQUARE)


IDENTITY = Placement()


@dataclass
class TriangleMesh:
    """Simplicial mesh of one placed square domain.

    vertices : (nv, 2) float array
    cells : (nc, 3) int array, counterclockwise
    boundary_facets : (nb, 2) int array of (cell, local_edge)
    placement : transform that produced the domain
    mesh_index : ordinal in the multimesh ordering (0 = background)
    h : max cell diameter
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray
    placement: Placement
    mesh_index: int = 0
    h: float = field(default=0.0)

    def __post_init__(self):
        if self.h == 0.0:
            self.h = max_cell_diameter(self.vertices, self.cells)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def cell_coords(self, cell: int) -> np.ndarray:
        return self.vertices[self.cells[cell]]

    def outline(self) -> np.ndarray:
        """Convex quadrilateral bounding the domain (the placed square)."""
        return self.placement.corners()


def max_cell_diameter(vertices: np.ndarray, cells: np.ndarray) -> float:
    tri = vertices[cells]
    edges = tri - np.roll(tri, 1, axis=1)
    return float(np.sqrt((edges ** 2).sum(axis=2)).max())


def structured_square_mesh(n: int, placement: Placement = IDENTITY,
                           mesh_index: int = 0,
                           background_extent: np.ndarray | None = None) -> TriangleMesh:
    """Structured mesh of the placed unit square: n x n grid, each square
    split along its (+1, +1) diagonal, 2*n^2 triangles.

    When ``background_extent`` (a convex polygon) is given, the placed
    domain must lie strictly inside it; placements touching the extent are
    rejected because that geometry breaks interface classification.
    """
    if n < 1:
        raise ValueError("subdivision count must be >= 1")
    if background_extent is not None:
        _check_strictly_inside(placement.corners(), background_extent)

    side = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(side, side, indexing="xy")
    verts = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = np.empty((2 * n * n, 3), dtype=int)
    k = 0
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells[k] = (v00, v10, v11)
            cells[k + 1] = (v00, v11, v01)
            k += 2

    verts = placement.apply(verts)
    facets = _find_boundary_facets(cells)
    return TriangleMesh(verts, cells, facets, placement, mesh_index)


def _check_strictly_inside(corners: np.ndarray, extent: np.ndarray,
                           slack: float = 1e-12) -> None:
    n = len(extent)
    for i in range(n):
        a = extent[i]
        e = extent[(i + 1) % n] - a
        enorm = np.hypot(e[0], e[1])
        dist = (e[0] * (corners[:, 1] - a[1]) - e[1] * (corners[:, 0] - a[0])) / enorm
        if np.any(dist <= slack):
            raise ValueError(
                "placed domain touches or crosses the background boundary")


def _find_boundary_facets(cells: np.ndarray) -> np.ndarray:
    seen: dict[tuple[int, int], tuple[int, int] | None] = {}
    for c, cell in enumerate(cells):
        for e, (la, lb) in enumerate(LOCAL_EDGES):
            key = (min(cell[la], cell[lb]), max(cell[la], cell[lb]))
            if key in seen:
                seen[key] = None
            else:
                seen[key] = (c, e)
    facets = [f for f in seen.values() if f is not None]
    return np.array(sorted(facets), dtype=int).reshape(-1, 2)


def facet_endpoints(mesh: TriangleMesh, cell: int, local_edge: int) -> tuple[np.ndarray, np.ndarray]:
    la, lb = LOCAL_EDGES[local_edge]
    conn = mesh.cells[cell]
    return mesh.vertices[conn[la]], mesh.vertices[conn[lb]]


def facet_outward_normal(mesh: TriangleMesh, cell: int, local_edge: int) -> np.ndarray:
    """Unit normal of a boundary facet pointing out of the domain."""
    a, b = facet_endpoints(mesh, cell, local_edge)
    d = b - a
    n = np.array([d[1], -d[0]])
    return n / np.hypot(n[0], n[1])


def boundary_polygon(mesh: TriangleMesh) -> np.ndarray:
    """Counterclockwise closed vertex loop of the domain boundary.

    Raises ValueError for meshes whose boundary is not a single loop.
    """
    nxt: dict[int, int] = {}
    for cell, edge in mesh.boundary_facets:
        la, lb = LOCAL_EDGES[edge]
        conn = mesh.cells[cell]
        nxt[int(conn[la])] = int(conn[lb])
    if not nxt:
        raise ValueError("mesh has no boundary")
    start = min(nxt)
    loop = [start]
    v = nxt[start]
    while v != start:
        loop.append(v)
        v = nxt[v]
        if len(loop) > len(nxt):
            raise ValueError("boundary walk failed to close")
    if len(loop) != len(nxt):
        raise ValueError("mesh boundary has more than one loop")
    poly = mesh.vertices[loop]
    if polygon_area(poly) <= 0.0:
        raise ValueError("boundary loop is not counterclockwise")
    return poly


def random_placements(count: int, rng_seed: int,
                      side_range: tuple[float, float] = (0.2, 0.4),
                      margin: float = 0.05) -> list[Placement]:
    """Uniformly random square placements strictly inside the unit square.

    Side length, rotation and center are drawn independently per placement
    from a generator seeded with ``rng_seed``, so equal arguments always
    reproduce the same list. The center range is shrunk per draw so every
    rotated square keeps at least ``margin`` clearance from the boundary.
    """
    s_min, s_max = side_range
    if not (0.0 < s_min <= s_max):
        raise ValueError("side range must satisfy 0 < s_min <= s_max")
    if margin < 0.0:
        raise ValueError("margin must be nonnegative")
    if s_max * np.sqrt(2.0) > 1.0 - 2.0 * margin + 1e-12:
        raise ValueError("largest rotated square cannot fit inside the margin box")

    rng = np.random.default_rng(rng_seed)
    placements = []
    for _ in range(count):
        side = rng.uniform(s_min, s_max)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        half_extent = 0.5 * side * (abs(np.cos(angle)) + abs(np.sin(angle)))
        lo = margin + half_extent
        hi = 1.0 - margin - half_extent
        center = np.array([rng.uniform(lo, hi), rng.uniform(lo, hi)])
        pivot = Placement(side, angle).apply(np.array([[0.5, 0.5]]))[0]
        shift = center - pivot
        placements.append(Placement(side, angle, (shift[0], shift[1])))
    return placements


def check_mesh(mesh: TriangleMesh) -> None:
    """Validate orientation, edge-manifoldness and the h convention."""
    tri = mesh.vertices[mesh.cells]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if np.any(areas <= 0.0):
        raise ValueError("mesh contains a cell with nonpositive area")

    counts: dict[tuple[int, int], int] = {}
    for cell in mesh.cells:
        for la, lb in LOCAL_EDGES:
            key = (min(cell[la], cell[lb]), max(cell[la], cell[lb]))
            counts[key] = counts.get(key, 0) + 1
    if any(c > 2 for c in counts.values()):
        raise ValueError("edge shared by more than two cells")
    n_boundary = sum(1 for c in counts.values() if c == 1)
    if n_boundary != len(mesh.boundary_facets):
        raise ValueError("boundary facet list inconsistent with edge counts")

    if not np.isclose(mesh.h, max_cell_diameter(mesh.vertices, mesh.cells)):
        raise ValueError("stored h does not match the max cell diameter")
