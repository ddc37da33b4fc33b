"""Gauss quadrature rules on segments and triangles.

Triangle rules are built as collapsed tensor products: Gauss-Legendre in
one direction, Gauss-Jacobi (weight 1-t) in the other, so a rule of
order p integrates every polynomial of total degree <= p exactly on the
reference triangle (0,0)-(1,0)-(0,1).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def gauss_segment(npoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if npoints < 1:
        raise ValueError("need at least one quadrature point")
    t, w = np.polynomial.legendre.leggauss(npoints)
    return (t + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on the unit reference triangle, exact for degree <= order.

    Returns
    -------
    points : (m, 2) array of reference coordinates
    weights : (m,) array, summing to 1/2
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    n = (order + 2) // 2
    a, wa = gauss_segment(n)
    # radial direction carries the (1-t) area factor of the collapse map
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    b = (tj + 1.0) / 2.0
    wb = wj / 4.0

    pts = np.empty((n * n, 2))
    wts = np.empty(n * n)
    idx = 0
    for j in range(n):
        for i in range(n):
            pts[idx, 0] = a[i] * (1.0 - b[j])
            pts[idx, 1] = b[j]
            wts[idx] = wa[i] * wb[j]
            idx += 1
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def map_to_triangle(tri: np.ndarray, ref_pts: np.ndarray,
                    ref_wts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Push a reference rule onto the physical triangle ``tri`` ((3, 2) array)."""
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    det = e1[0] * e2[1] - e1[1] * e2[0]
    pts = tri[0] + np.outer(ref_pts[:, 0], e1) + np.outer(ref_pts[:, 1], e2)
    return pts, ref_wts * abs(det)


def polygon_rule(poly_triangles: list[np.ndarray],
                 order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature over a union of triangles (a fan-triangulated polygon)."""
    ref_pts, ref_wts = triangle_rule(order)
    all_pts = []
    all_wts = []
    for tri in poly_triangles:
        p, w = map_to_triangle(tri, ref_pts, ref_wts)
        all_pts.append(p)
        all_wts.append(w)
    if not all_pts:
        return np.empty((0, 2)), np.empty(0)
    return np.vstack(all_pts), np.concatenate(all_wts)
