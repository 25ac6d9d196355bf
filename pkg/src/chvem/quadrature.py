"""Numerical integration on edges, triangles, and general polygons.

Edges use Gauss-Legendre.  Polygons are fan-triangulated from their centroid
and each triangle carries a collapsed tensor-product Gauss rule of the
requested polynomial exactness.  Weights carry the physical measure, so
``sum(weights)`` equals the length/area of the integration domain.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n,) for 1D rules, (n, 2) for 2D rules
    weights: np.ndarray  # (n,)


@lru_cache(maxsize=None)
def _gauss1d(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def edge_rule(n_points):
    """Gauss-Legendre rule on [-1, 1], exact for polynomials of degree 2n-1."""
    if not 1 <= n_points <= 20:
        raise ValueError(f"edge rule size must be in [1, 20], got {n_points}")
    x, w = _gauss1d(n_points)
    return QuadratureRule(points=x.copy(), weights=w.copy())


def map_edge_rule(rule, p0, p1):
    """Map a [-1, 1] rule onto the segment p0 -> p1; weights absorb |e|/2."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t = 0.5 * (rule.points + 1.0)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    w = rule.weights * (0.5 * np.linalg.norm(p1 - p0))
    return pts, w


@lru_cache(maxsize=None)
def _triangle_ref_rule(degree):
    # Collapsed tensor rule on the unit triangle (0,0)-(1,0)-(0,1).
    # After x = u(1-v), y = v the integrand of degree d has degree <= d in u
    # and <= d+1 in v (including the (1-v) Jacobian), so n Gauss points with
    # 2n-1 >= d+1 suffice in both directions.
    n = (degree + 1) // 2 + 1
    xi, wi = _gauss1d(n)
    u = 0.5 * (xi + 1.0)
    v = 0.5 * (xi + 1.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wi, wi, indexing="ij")
    x = U * (1.0 - V)
    y = V
    w = 0.25 * WU * WV * (1.0 - V)
    return (
        np.column_stack([x.ravel(), y.ravel()]),
        w.ravel(),
    )


def triangle_rule(v0, v1, v2, degree):
    """Rule on a (possibly inverted) triangle; weights carry the signed area."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    ref_pts, ref_w = _triangle_ref_rule(degree)
    e1 = v1 - v0
    e2 = v2 - v0
    det = e1[0] * e2[1] - e1[1] * e2[0]  # Jacobian, = 2 * signed area
    pts = v0[None, :] + ref_pts[:, 0:1] * e1[None, :] + ref_pts[:, 1:2] * e2[None, :]
    return pts, ref_w * det


def polygon_centroid(vertices):
    """Area centroid of a simple polygon (shoelace)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        raise ValueError("degenerate polygon: zero area")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy]), area


def polygon_rule(vertices, degree):
    """Quadrature of the given polynomial exactness on a simple CCW polygon.

    The polygon is fanned into triangles about its centroid; the union of the
    mapped triangle rules is returned.
    """
    if degree < 0:
        raise ValueError("exactness degree must be nonnegative")
    v = np.asarray(vertices, dtype=float)
    c, _ = polygon_centroid(v)
    pts = []
    wts = []
    for i in range(len(v)):
        p, w = triangle_rule(c, v[i], v[(i + 1) % len(v)], degree)
        pts.append(p)
        wts.append(w)
    return QuadratureRule(points=np.vstack(pts), weights=np.concatenate(wts))
