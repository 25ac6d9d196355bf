"""Scaled monomial bases on cells and edges.

All projected polynomials are expressed in these bases.  On a cell K the
basis functions are m_a(x) = ((x - x_K)/h_K)^a for multi-indices |a| <= order,
in graded lexicographic order: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
The ordering is shared by every module that touches polynomial coefficients.
On an edge the basis is s^k with s = (x - midpoint) . tangent / length, so
s runs over [-1/2, 1/2] along the edge.
"""

from functools import lru_cache

import numpy as np


def polynomial_dim(order):
    """dim P_order in two variables; 0 for negative order."""
    if order < 0:
        return 0
    return (order + 1) * (order + 2) // 2


@lru_cache(maxsize=None)
def monomial_exponents(order):
    """(dim, 2) integer array of exponents in graded lexicographic order."""
    exps = [(d - k, k) for d in range(order + 1) for k in range(d + 1)]
    return np.array(exps, dtype=int).reshape(-1, 2)


class ScaledMonomialBasis:
    """Monomials of total degree <= order, scaled to a cell's frame."""

    def __init__(self, center, diameter, order):
        self.center = np.asarray(center, dtype=float)
        self.diameter = float(diameter)
        self.order = int(order)
        self.exponents = monomial_exponents(self.order)

    @property
    def dim(self):
        return len(self.exponents)

    def _powers(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        X = (p[:, 0] - self.center[0]) / self.diameter
        Y = (p[:, 1] - self.center[1]) / self.diameter
        deg = self.order
        # Columns 0..deg hold X^0..X^deg (same for Y).
        Xp = np.vander(X, deg + 1, increasing=True)
        Yp = np.vander(Y, deg + 1, increasing=True)
        return Xp, Yp

    def eval(self, points):
        """Values of all basis functions, shape (n_points, dim)."""
        Xp, Yp = self._powers(points)
        ax, ay = self.exponents[:, 0], self.exponents[:, 1]
        return Xp[:, ax] * Yp[:, ay]

    def eval_gradients(self, points):
        """Gradients, shape (n_points, dim, 2)."""
        Xp, Yp = self._powers(points)
        ax, ay = self.exponents[:, 0], self.exponents[:, 1]
        h = self.diameter
        gx = np.where(ax > 0, ax, 0) * Xp[:, np.maximum(ax - 1, 0)] * Yp[:, ay] / h
        gy = np.where(ay > 0, ay, 0) * Xp[:, ax] * Yp[:, np.maximum(ay - 1, 0)] / h
        gx[:, ax == 0] = 0.0
        gy[:, ay == 0] = 0.0
        return np.stack([gx, gy], axis=-1)

    def eval_hessians(self, points):
        """Second derivatives, shape (n_points, dim, 2, 2)."""
        Xp, Yp = self._powers(points)
        ax, ay = self.exponents[:, 0], self.exponents[:, 1]
        h2 = self.diameter ** 2
        hxx = ax * (ax - 1) * Xp[:, np.maximum(ax - 2, 0)] * Yp[:, ay] / h2
        hyy = ay * (ay - 1) * Xp[:, ax] * Yp[:, np.maximum(ay - 2, 0)] / h2
        hxy = ax * ay * Xp[:, np.maximum(ax - 1, 0)] * Yp[:, np.maximum(ay - 1, 0)] / h2
        hxx[:, ax < 2] = 0.0
        hyy[:, ay < 2] = 0.0
        hxy[:, (ax == 0) | (ay == 0)] = 0.0
        H = np.empty((hxx.shape[0], hxx.shape[1], 2, 2))
        H[:, :, 0, 0] = hxx
        H[:, :, 0, 1] = hxy
        H[:, :, 1, 0] = hxy
        H[:, :, 1, 1] = hyy
        return H


class ScaledEdgeBasis:
    """Monomials s^k on an oriented edge, s in [-1/2, 1/2]."""

    def __init__(self, p0, p1, order):
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)
        self.order = int(order)
        self.length = float(np.linalg.norm(self.p1 - self.p0))
        if self.length == 0.0:
            raise ValueError("degenerate edge of zero length")
        self.midpoint = 0.5 * (self.p0 + self.p1)
        self.tangent = (self.p1 - self.p0) / self.length
        # tangent rotated by -90 degrees
        self.normal = np.array([self.tangent[1], -self.tangent[0]])

    @property
    def dim(self):
        return self.order + 1

    def coord(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return (p - self.midpoint) @ self.tangent / self.length

    def eval(self, points):
        s = self.coord(points)
        return np.vander(s, self.order + 1, increasing=True)

    def eval_at_coord(self, s):
        return np.vander(np.atleast_1d(np.asarray(s, dtype=float)),
                         self.order + 1, increasing=True)

    def derivative_matrix(self):
        """Map coefficients of s^k to coefficients of d/ds (arclength)."""
        Dm = np.zeros((self.order, self.order + 1))
        for k in range(1, self.order + 1):
            Dm[k - 1, k] = k / self.length
        return Dm
