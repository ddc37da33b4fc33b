"""Lagrange reference elements and the multimesh Taylor-Hood space.

The velocity space is continuous vector P_k per mesh, the pressure space
continuous P_{k-1}, both numbered over active cells only. Meshes never
share degrees of freedom: the global space is the direct sum of the
per-mesh spaces, with all velocity blocks first, then all pressure
blocks, then one slot for the mean-pressure multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .meshing import LOCAL_EDGES, TriangleMesh
from .multimesh import MultiMesh

_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _reference_nodes(degree: int) -> np.ndarray:
    """Equispaced Lagrange nodes: vertices, then edge nodes in local edge
    order, then interior lattice nodes."""
    nodes = [v for v in _REF_VERTS]
    for la, lb in LOCAL_EDGES:
        for t in range(1, degree):
            frac = t / degree
            nodes.append((1.0 - frac) * _REF_VERTS[la] + frac * _REF_VERTS[lb])
    for b in range(1, degree):
        for a in range(1, degree - b):
            nodes.append(np.array([a / degree, b / degree]))
    return np.array(nodes)


class LagrangeBasis:
    """Nodal Lagrange basis of given degree on the reference triangle."""

    def __init__(self, degree: int):
        if not 1 <= degree <= 4:
            raise ValueError(f"unsupported polynomial degree {degree}")
        self.degree = degree
        self.nodes = _reference_nodes(degree)
        exps = [(a, b) for total in range(degree + 1)
                for b in range(total + 1) for a in [total - b]]
        self.ex = np.array([e[0] for e in exps])
        self.ey = np.array([e[1] for e in exps])
        self.dim = len(exps)
        if len(self.nodes) != self.dim:
            raise RuntimeError("node layout does not match polynomial dimension")
        vand = self._monomials(self.nodes)
        self.coeffs = np.linalg.inv(vand)        # (monomial, basis fn)

    def _monomials(self, pts: np.ndarray) -> np.ndarray:
        x = pts[:, 0][:, None]
        y = pts[:, 1][:, None]
        return x ** self.ex * y ** self.ey

    def _mono_deriv(self, pts: np.ndarray, dx: int, dy: int) -> np.ndarray:
        ax, ay = self.ex, self.ey
        factor = np.ones(self.dim)
        for k in range(dx):
            factor = factor * np.maximum(ax - k, 0)
        for k in range(dy):
            factor = factor * np.maximum(ay - k, 0)
        px = np.maximum(ax - dx, 0)
        py = np.maximum(ay - dy, 0)
        x = pts[:, 0][:, None]
        y = pts[:, 1][:, None]
        return factor * x ** px * y ** py

    def tabulate(self, pts: np.ndarray, hessian: bool = False):
        """Values, gradients and (optionally) second derivatives.

        Returns arrays of shapes (np, dim), (np, dim, 2) and, when
        requested, (np, dim, 2, 2).
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        vals = self._monomials(pts) @ self.coeffs
        grads = np.empty((len(pts), self.dim, 2))
        grads[:, :, 0] = self._mono_deriv(pts, 1, 0) @ self.coeffs
        grads[:, :, 1] = self._mono_deriv(pts, 0, 1) @ self.coeffs
        if not hessian:
            return vals, grads, None
        hess = np.empty((len(pts), self.dim, 2, 2))
        hess[:, :, 0, 0] = self._mono_deriv(pts, 2, 0) @ self.coeffs
        hess[:, :, 1, 1] = self._mono_deriv(pts, 0, 2) @ self.coeffs
        hxy = self._mono_deriv(pts, 1, 1) @ self.coeffs
        hess[:, :, 0, 1] = hxy
        hess[:, :, 1, 0] = hxy
        return vals, grads, hess


def _build_scalar_dofmap(mesh: TriangleMesh, active: np.ndarray,
                         basis: LagrangeBasis):
    """Continuous numbering of Lagrange nodes over the active cells.

    Shared edge nodes are identified through canonical (vmin, vmax, step)
    keys, so adjacent cells agree on both the id and the coordinate.
    """
    k = basis.degree
    nd = basis.dim
    cell_dofs = np.full((mesh.num_cells, nd), -1, dtype=int)
    ids: dict[tuple, int] = {}
    coords: list[np.ndarray] = []

    def get(key, point):
        node = ids.get(key)
        if node is None:
            node = len(coords)
            ids[key] = node
            coords.append(point)
        return node

    for c in active:
        conn = mesh.cells[c]
        tri = mesh.vertices[conn]
        local = 0
        for lv in range(3):
            cell_dofs[c, local] = get(("v", int(conn[lv])), tri[lv])
            local += 1
        for la, lb in LOCAL_EDGES:
            va, vb = int(conn[la]), int(conn[lb])
            for t in range(1, k):
                frac = t / k
                point = (1.0 - frac) * tri[la] + frac * tri[lb]
                step = t if va < vb else k - t
                key = ("e", min(va, vb), max(va, vb), step)
                cell_dofs[c, local] = get(key, point)
                local += 1
        n_interior = nd - local
        for t in range(n_interior):
            ref = basis.nodes[local]
            point = tri[0] + ref[0] * (tri[1] - tri[0]) + ref[1] * (tri[2] - tri[0])
            cell_dofs[c, local] = get(("c", int(c), t), point)
            local += 1

    coord_arr = np.array(coords) if coords else np.empty((0, 2))
    return cell_dofs, coord_arr


@dataclass
class MeshSpace:
    """Per-mesh numbering and affine geometry tables."""

    cell_dofs_v: np.ndarray      # (nc, dim_v) scalar node ids, -1 when inactive
    cell_dofs_p: np.ndarray
    coords_v: np.ndarray         # (n_nodes_v, 2)
    coords_p: np.ndarray
    origin: np.ndarray           # (nc, 2) first vertex of each cell
    jac: np.ndarray              # (nc, 2, 2) reference-to-physical map
    jinv: np.ndarray
    det: np.ndarray              # (nc,) absolute Jacobian determinants

    @property
    def n_nodes_v(self) -> int:
        return len(self.coords_v)

    @property
    def n_nodes_p(self) -> int:
        return len(self.coords_p)


class FunctionSpace:
    """Direct-sum Taylor-Hood space over a multimesh."""

    def __init__(self, mm: MultiMesh, degree: int):
        if degree < 2:
            raise ValueError("Taylor-Hood requires velocity degree >= 2")
        self.mm = mm
        self.degree = degree
        self.basis_v = LagrangeBasis(degree)
        self.basis_p = LagrangeBasis(degree - 1)
        self.mesh_spaces: list[MeshSpace] = []

        for i, mesh in enumerate(mm.meshes):
            active = mm.active_cells(i)
            dofs_v, coords_v = _build_scalar_dofmap(mesh, active, self.basis_v)
            dofs_p, coords_p = _build_scalar_dofmap(mesh, active, self.basis_p)
            tri = mesh.vertices[mesh.cells]
            jac = np.stack([tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]], axis=2)
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            jinv = np.empty_like(jac)
            jinv[:, 0, 0] = jac[:, 1, 1] / det
            jinv[:, 0, 1] = -jac[:, 0, 1] / det
            jinv[:, 1, 0] = -jac[:, 1, 0] / det
            jinv[:, 1, 1] = jac[:, 0, 0] / det
            self.mesh_spaces.append(MeshSpace(
                dofs_v, dofs_p, coords_v, coords_p,
                tri[:, 0], jac, jinv, np.abs(det)))

        counts_v = [2 * ms.n_nodes_v for ms in self.mesh_spaces]
        counts_p = [ms.n_nodes_p for ms in self.mesh_spaces]
        self.n_u = sum(counts_v)
        self.n_p = sum(counts_p)
        self.v_offset = np.concatenate([[0], np.cumsum(counts_v)])[:-1]
        self.p_offset = self.n_u + np.concatenate([[0], np.cumsum(counts_p)])[:-1]

    @property
    def size(self) -> int:
        """Velocity and pressure unknowns plus the mean-pressure slot."""
        return self.n_u + self.n_p + 1

    def mesh_dof_count(self, i: int) -> int:
        ms = self.mesh_spaces[i]
        return 2 * ms.n_nodes_v + ms.n_nodes_p

    def velocity_dofs(self, i: int, cell: int) -> np.ndarray:
        """Global velocity dofs of a cell, interleaved (node0x, node0y, ...)."""
        scalar = self.mesh_spaces[i].cell_dofs_v[cell]
        dofs = np.empty(2 * len(scalar), dtype=int)
        dofs[0::2] = self.v_offset[i] + 2 * scalar
        dofs[1::2] = self.v_offset[i] + 2 * scalar + 1
        return dofs

    def pressure_dofs(self, i: int, cell: int) -> np.ndarray:
        return self.p_offset[i] + self.mesh_spaces[i].cell_dofs_p[cell]

    def to_reference(self, i: int, cell: int, pts: np.ndarray) -> np.ndarray:
        ms = self.mesh_spaces[i]
        return (np.asarray(pts) - ms.origin[cell]) @ ms.jinv[cell].T

    def interpolate(self, velocity, pressure=None) -> np.ndarray:
        """Nodal interpolation into a full coefficient vector.

        ``velocity(x, y)`` must return shape (n, 2) for array input;
        ``pressure(x, y)`` shape (n,). Missing functions interpolate zero.
        """
        coeffs = np.zeros(self.size)
        for i, ms in enumerate(self.mesh_spaces):
            if ms.n_nodes_v and velocity is not None:
                vals = np.asarray(velocity(ms.coords_v[:, 0], ms.coords_v[:, 1]))
                coeffs[self.v_offset[i] + 0:self.v_offset[i] + 2 * ms.n_nodes_v:2] = vals[:, 0]
                coeffs[self.v_offset[i] + 1:self.v_offset[i] + 2 * ms.n_nodes_v:2] = vals[:, 1]
            if ms.n_nodes_p and pressure is not None:
                coeffs[self.p_offset[i]:self.p_offset[i] + ms.n_nodes_p] = \
                    np.asarray(pressure(ms.coords_p[:, 0], ms.coords_p[:, 1]))
        return coeffs

    def eval_velocity(self, coeffs: np.ndarray, i: int, cell: int,
                      pts: np.ndarray) -> np.ndarray:
        """Velocity of the mesh-i component at physical points in ``cell``.

        The polynomial extends over the whole cell, so points in its hidden
        part are valid too.
        """
        ref = self.to_reference(i, cell, pts)
        vals, _, _ = self.basis_v.tabulate(ref)
        local = coeffs[self.velocity_dofs(i, cell)].reshape(-1, 2)
        return vals @ local

    def eval_velocity_gradient(self, coeffs: np.ndarray, i: int, cell: int,
                               pts: np.ndarray) -> np.ndarray:
        """Velocity Jacobian, shape (n, 2, 2) with entry [q, c, d] = d u_c / d x_d."""
        ref = self.to_reference(i, cell, pts)
        _, grads, _ = self.basis_v.tabulate(ref)
        pg = grads @ self.mesh_spaces[i].jinv[cell]       # (n, dim, 2)
        local = coeffs[self.velocity_dofs(i, cell)].reshape(-1, 2)
        return np.einsum("qmd,mc->qcd", pg, local)

    def eval_pressure(self, coeffs: np.ndarray, i: int, cell: int,
                      pts: np.ndarray) -> np.ndarray:
        ref = self.to_reference(i, cell, pts)
        vals, _, _ = self.basis_p.tabulate(ref)
        return vals @ coeffs[self.pressure_dofs(i, cell)]

    def boundary_velocity_dofs(self, g=None):
        """Velocity dofs on the outer boundary of the background mesh.

        Returns (dofs, values); ``g(x, y) -> (n, 2)`` supplies the values,
        defaulting to zero.
        """
        mesh = self.mm.meshes[0]
        k = self.degree
        nodes = set()
        for cell, ledge in mesh.boundary_facets:
            la, lb = LOCAL_EDGES[ledge]
            dofs = self.mesh_spaces[0].cell_dofs_v[cell]
            nodes.add(int(dofs[la]))
            nodes.add(int(dofs[lb]))
            base = 3 + ledge * (k - 1)
            for t in range(k - 1):
                nodes.add(int(dofs[base + t]))
        node_arr = np.array(sorted(nodes), dtype=int)
        coords = self.mesh_spaces[0].coords_v[node_arr]
        if g is None:
            vals = np.zeros((len(node_arr), 2))
        else:
            vals = np.asarray(g(coords[:, 0], coords[:, 1]))
        dofs = np.empty(2 * len(node_arr), dtype=int)
        dofs[0::2] = self.v_offset[0] + 2 * node_arr
        dofs[1::2] = self.v_offset[0] + 2 * node_arr + 1
        values = np.empty(2 * len(node_arr))
        values[0::2] = vals[:, 0]
        values[1::2] = vals[:, 1]
        return dofs, values


def build_space(mm: MultiMesh, degree: int) -> FunctionSpace:
    """Taylor-Hood space of velocity degree ``degree`` over ``mm``."""
    if degree not in (2, 3, 4):
        raise ValueError("supported velocity degrees are 2, 3 and 4")
    return FunctionSpace(mm, degree)
