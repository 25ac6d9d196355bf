"""Polygonal meshes: representation, generation, statistics, and file I/O.

A mesh stores vertices, counter-clockwise cell loops, and a derived edge
table.  Each edge carries a globally fixed orientation (tangent from the
lower to the higher vertex index, normal = tangent rotated -90 degrees);
cells record a per-edge sign telling whether that global normal points out
of the cell.  Sharing edge-based degrees of freedom through this table is
what enforces the weak continuity of the nonconforming space.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi, cKDTree

_MERGE_TOL = 1e-10


class MeshValidationError(ValueError):
    """Raised when mesh data violates a structural invariant."""


def _signed_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _is_convex(poly):
    d = np.roll(poly, -1, axis=0) - poly
    cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
    return np.all(cross > -1e-12 * np.max(np.abs(poly)))


class Mesh:
    """Immutable polygonal decomposition of a rectangle."""

    def __init__(self, vertices, cells, bbox=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = [np.asarray(c, dtype=int) for c in cells]
        if bbox is None:
            lo = self.vertices.min(axis=0)
            hi = self.vertices.max(axis=0)
            bbox = (lo[0], lo[1], hi[0], hi[1])
        self.bbox = tuple(float(b) for b in bbox)
        self._validate_cells()
        self._build_edges()
        self._build_geometry()
        self.vertices.setflags(write=False)

    # -- construction ----------------------------------------------------

    def _validate_cells(self):
        by_size = {}
        for k, c in enumerate(self.cells):
            if len(c) < 3:
                raise MeshValidationError(
                    f"cell {k} must have at least 3 distinct vertices, got {c.tolist()}"
                )
            by_size.setdefault(len(c), []).append(k)
        for size, ks in by_size.items():
            ks = np.array(ks)
            block = np.stack([self.cells[k] for k in ks])
            if block.min() < 0 or block.max() >= len(self.vertices):
                bad = ks[np.nonzero((block < 0).any(1) | (block >= len(self.vertices)).any(1))[0][0]]
                raise MeshValidationError(f"cell {bad} references a missing vertex")
            s = np.sort(block, axis=1)
            dup = (np.diff(s, axis=1) == 0).any(axis=1)
            if dup.any():
                bad = ks[np.nonzero(dup)[0][0]]
                raise MeshValidationError(
                    f"cell {bad} must have at least 3 distinct vertices, "
                    f"got {self.cells[bad].tolist()}"
                )

    def _build_edges(self):
        edge_index = {}
        edges = []
        cell_edges = []
        cell_edge_signs = []
        for c in self.cells:
            ids = np.empty(len(c), dtype=int)
            signs = np.empty(len(c), dtype=int)
            for i in range(len(c)):
                a, b = int(c[i]), int(c[(i + 1) % len(c)])
                key = (a, b) if a < b else (b, a)
                e = edge_index.get(key)
                if e is None:
                    e = len(edges)
                    edge_index[key] = e
                    edges.append(key)
                ids[i] = e
                # +1 when the loop direction matches the global (lo -> hi)
                # tangent, i.e. the global normal is outward for this cell.
                signs[i] = 1 if a < b else -1
            cell_edges.append(ids)
            cell_edge_signs.append(signs)
        self.edges = np.array(edges, dtype=int)
        self.cell_edges = cell_edges
        self.cell_edge_signs = cell_edge_signs
        counts = np.zeros(len(edges), dtype=int)
        for ids in cell_edges:
            counts[ids] += 1
        if np.any(counts > 2):
            raise MeshValidationError("an edge is shared by more than two cells")
        self.boundary_edges = counts == 1

    def _build_geometry(self):
        # batched by vertex count; also enforces positive orientation
        n_cells = len(self.cells)
        areas = np.empty(n_cells)
        centroids = np.empty((n_cells, 2))
        diameters = np.empty(n_cells)
        by_size = {}
        for k, c in enumerate(self.cells):
            by_size.setdefault(len(c), []).append(k)
        for size, ks in by_size.items():
            ks = np.array(ks)
            P = self.vertices[np.stack([self.cells[k] for k in ks])]
            Q = np.roll(P, -1, axis=1)
            cross = P[:, :, 0] * Q[:, :, 1] - Q[:, :, 0] * P[:, :, 1]
            a = 0.5 * cross.sum(axis=1)
            bad = np.nonzero(a <= 0.0)[0]
            if len(bad):
                raise MeshValidationError(
                    f"cell {ks[bad[0]]} is not counter-clockwise (signed area <= 0)"
                )
            areas[ks] = a
            centroids[ks] = ((P + Q) * cross[:, :, None]).sum(axis=1) / (6.0 * a[:, None])
            d = P[:, :, None, :] - P[:, None, :, :]
            diameters[ks] = np.sqrt((d ** 2).sum(axis=-1)).max(axis=(1, 2))
        self.cell_areas = areas
        self.cell_centroids = centroids
        self.cell_diameters = diameters

    # -- queries ----------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def domain_area(self):
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)

    def edge_lengths(self):
        p = self.vertices[self.edges[:, 0]]
        q = self.vertices[self.edges[:, 1]]
        return np.linalg.norm(q - p, axis=1)

    def check_convex_cells(self, strict):
        """Assert (or warn about) convexity of every cell."""
        bad = [k for k, c in enumerate(self.cells) if not _is_convex(self.vertices[c])]
        if not bad:
            return
        msg = f"cells {bad[:10]} are not convex"
        if strict:
            raise MeshValidationError(msg)
        warnings.warn(msg + "; star-shapedness is assumed, not verified")


@dataclass(frozen=True)
class MeshStats:
    n_vertices: int
    n_edges: int
    n_cells: int
    h: float
    min_edge_ratio: float


def mesh_stats(mesh):
    """Counts, max cell diameter h, and the min edge/diameter ratio."""
    lengths = mesh.edge_lengths()
    ratio = np.inf
    for k in range(mesh.n_cells):
        ratio = min(ratio, lengths[mesh.cell_edges[k]].min() / mesh.cell_diameters[k])
    return MeshStats(
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        n_cells=mesh.n_cells,
        h=float(mesh.cell_diameters.max()),
        min_edge_ratio=float(ratio),
    )


# -- structured simplex ("criss") grids -----------------------------------

def generate_criss(n, bbox=(0.0, 0.0, 1.0, 1.0)):
    """n x n squares, each split along the lower-left/upper-right diagonal."""
    if n < 1:
        raise ValueError(f"criss grid needs n >= 1, got {n}")
    x0, y0, x1, y1 = bbox
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append([a, b, c])
            cells.append([a, c, d])
    return Mesh(vertices, cells, bbox=bbox)


# -- Lloyd-smoothed Voronoi grids ------------------------------------------

def _clip_to_rect(poly, bbox):
    """Sutherland-Hodgman clip of a convex CCW polygon to a rectangle."""
    x0, y0, x1, y1 = bbox
    halfplanes = (
        (lambda p: p[0] - x0, 0, x0),
        (lambda p: x1 - p[0], 0, x1),
        (lambda p: p[1] - y0, 1, y0),
        (lambda p: y1 - p[1], 1, y1),
    )
    for inside, axis, level in halfplanes:
        out = []
        m = len(poly)
        for i in range(m):
            p, q = poly[i], poly[(i + 1) % m]
            dp, dq = inside(p), inside(q)
            if dp >= 0:
                out.append(p)
            if (dp > 0) != (dq > 0) and dp != dq:
                t = dp / (dp - dq)
                r = p + t * (q - p)
                r[axis] = level  # keep clipped vertices exactly on the rim
                out.append(r)
        poly = [np.asarray(v, dtype=float) for v in out]
        if not poly:
            return np.empty((0, 2))
    return np.array(poly)


def _dedupe_loop(poly, tol):
    keep = []
    for v in poly:
        if not keep or np.linalg.norm(v - keep[-1]) > tol:
            keep.append(v)
    if len(keep) > 1 and np.linalg.norm(keep[0] - keep[-1]) <= tol:
        keep.pop()
    return np.array(keep)


def _voronoi_cells(seeds, bbox):
    """Voronoi polygons of the seeds clipped to the rectangle.

    Seeds are mirrored across all four sides, which bounds every original
    region and puts cell boundaries exactly on the rectangle rim.
    """
    x0, y0, x1, y1 = bbox
    s = seeds
    mirrored = np.vstack([
        s,
        np.column_stack([2 * x0 - s[:, 0], s[:, 1]]),
        np.column_stack([2 * x1 - s[:, 0], s[:, 1]]),
        np.column_stack([s[:, 0], 2 * y0 - s[:, 1]]),
        np.column_stack([s[:, 0], 2 * y1 - s[:, 1]]),
    ])
    vor = Voronoi(mirrored)
    polys = []
    for i in range(len(s)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise RuntimeError("unbounded Voronoi region despite mirroring")
        poly = vor.vertices[np.array(region)]
        if _signed_area(poly) < 0:
            poly = poly[::-1]
        poly = _clip_to_rect(poly, bbox)
        poly = _dedupe_loop(poly, _MERGE_TOL)
        if len(poly) < 3 or _signed_area(poly) <= 0:
            raise RuntimeError(f"degenerate clipped Voronoi cell for seed {i}")
        polys.append(poly)
    return polys


def _merge_vertices(polys):
    """Merge near-coincident vertices (<= 1e-10) into a shared global list."""
    allv = np.vstack(polys)
    tree = cKDTree(allv)
    pairs = tree.query_pairs(_MERGE_TOL, output_type="ndarray")
    parent = np.arange(len(allv))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(allv))])
    unique_roots, inverse = np.unique(roots, return_inverse=True)
    vertices = allv[unique_roots]
    cells = []
    offset = 0
    for poly in polys:
        idx = inverse[offset:offset + len(poly)]
        offset += len(poly)
        # merging can collapse consecutive loop entries
        loop = [idx[0]]
        for i in idx[1:]:
            if i != loop[-1]:
                loop.append(i)
        if loop[0] == loop[-1]:
            loop.pop()
        cells.append(loop)
    return vertices, cells


def generate_voronoi(n_seeds, rng_seed, lloyd_iterations=100, bbox=(0.0, 0.0, 1.0, 1.0),
                     return_history=False):
    """Voronoi mesh from uniform random seeds, smoothed by Lloyd iteration.

    Each Lloyd pass moves every seed to its cell centroid and recomputes the
    diagram.  Iteration stops after ``lloyd_iterations`` passes or when the
    largest seed displacement drops below 1e-6 times the current mesh size.
    """
    if n_seeds < 1:
        raise ValueError(f"need at least one seed, got {n_seeds}")
    x0, y0, x1, y1 = bbox
    rng = np.random.default_rng(rng_seed)
    seeds = np.column_stack([
        rng.uniform(x0, x1, size=n_seeds),
        rng.uniform(y0, y1, size=n_seeds),
    ])
    scale = max(x1 - x0, y1 - y0)
    # deterministically re-perturb coincident seeds from the same rng stream
    while True:
        if n_seeds == 1:
            break
        tree = cKDTree(seeds)
        pairs = tree.query_pairs(1e-9 * scale, output_type="ndarray")
        if len(pairs) == 0:
            break
        dup = np.unique(pairs[:, 1])
        seeds[dup] += rng.uniform(-1e-6, 1e-6, size=(len(dup), 2)) * scale

    history = []
    polys = _voronoi_cells(seeds, bbox)
    for _ in range(lloyd_iterations):
        new_seeds = np.array([_poly_centroid(p) for p in polys])
        disp = np.linalg.norm(new_seeds - seeds, axis=1).max()
        history.append(float(disp))
        seeds = new_seeds
        polys = _voronoi_cells(seeds, bbox)
        h = max(np.ptp(p, axis=0).max() for p in polys)
        if disp < 1e-6 * h:
            break
    vertices, cells = _merge_vertices(polys)
    mesh = Mesh(vertices, cells, bbox=bbox)
    mesh.check_convex_cells(strict=True)
    if return_history:
        return mesh, history
    return mesh


def _poly_centroid(poly):
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum() / (6 * a),
                     ((y + yn) * cross).sum() / (6 * a)])


# -- file I/O ---------------------------------------------------------------

def save_mesh(mesh, path):
    """Write a mesh as a JSON document with vertices, cells, and bbox."""
    doc = {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "cells": [[int(i) for i in c] for c in mesh.cells],
        "bbox": [float(b) for b in mesh.bbox],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_mesh(path):
    """Read a mesh written by :func:`save_mesh`, validating the structure."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise MeshValidationError(
                f"cannot parse mesh file {path}: line {exc.lineno}, col {exc.colno}: {exc.msg}"
            ) from exc
    for field in ("vertices", "cells"):
        if field not in doc:
            raise MeshValidationError(f"mesh file {path} is missing field '{field}'")
    mesh = Mesh(doc["vertices"], doc["cells"], bbox=doc.get("bbox"))
    mesh.check_convex_cells(strict=False)
    return mesh
