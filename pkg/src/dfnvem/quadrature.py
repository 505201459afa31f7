"""Quadrature rules: conical-product triangle rules, centroid-fan polygon rules,
Gauss segment rules, and Gauss-Lobatto nodes for edge degrees of freedom."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .geometry import Polygon2, centroid_area


@lru_cache(maxsize=None)
def segment_rule(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on [0,1]; exact for degree 2*npts-1."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the unit triangle {x,y>=0, x+y<=1}, exact for polynomials of
    the given total degree. Conical product of Gauss-Legendre and
    Gauss-Jacobi(1,0) rules; no tabulated data needed."""
    m = degree // 2 + 1
    xg, wg = np.polynomial.legendre.leggauss(m)
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    xj, wj = roots_jacobi(m, 1.0, 0.0)
    xj = 0.5 * (xj + 1.0)
    wj = 0.25 * wj  # jacobian of mapping [-1,1] -> [0,1] applied to (1-x) weight
    pts = np.empty((m * m, 2))
    wts = np.empty(m * m)
    k = 0
    for i in range(m):
        for j in range(m):
            pts[k, 0] = xj[i]
            pts[k, 1] = xg[j] * (1.0 - xj[i])
            wts[k] = wj[i] * wg[j]
            k += 1
    return pts, wts


def triangle_rule(tri: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Map the reference rule onto the triangle given by a (3,2) array."""
    ref, wref = reference_triangle_rule(degree)
    a, b, c = tri
    jac = abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    pts = a + np.outer(ref[:, 0], b - a) + np.outer(ref[:, 1], c - a)
    return pts, wref * jac


def polygon_quadrature(poly: Polygon2, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on a convex polygon, exact for total degree <= degree.

    Sub-triangulates by fanning from the centroid; degenerate fan triangles
    produced by aligned vertices carry zero weight and are dropped.
    """
    c, _ = centroid_area(poly)
    v = poly.vertices
    pts_all, wts_all = [], []
    for i in range(len(v)):
        tri = np.array([c, v[i], v[(i + 1) % len(v)]])
        p, w = triangle_rule(tri, degree)
        if w.sum() <= 0.0:
            continue
        pts_all.append(p)
        wts_all.append(w)
    return np.concatenate(pts_all), np.concatenate(wts_all)


@lru_cache(maxsize=None)
def gauss_lobatto_internal(k: int) -> np.ndarray:
    """Internal Gauss-Lobatto nodes on [0,1] for an order-k edge (k-1 nodes)."""
    if k < 2:
        return np.empty(0)
    # GL nodes on [-1,1] are roots of P'_{k}(x) plus the endpoints
    deriv = np.polynomial.legendre.Legendre.basis(k).deriv()
    roots = np.sort(deriv.roots().real)
    return 0.5 * (roots + 1.0)
