"""Benchmark problems, error norms, and the convergence-rate harness.

Benchmarks:
  1. manufactured solution u = sin(2 pi t) cos(2 pi x) cos(2 pi y) on the unit
     square, with the forcing derived in closed form;
  2. two interacting bubbles (tanh profiles around two circles) on (-1, 1)^2;
  3. a tilted cross of phase +0.95 inside phase -0.95 on the unit square;
  4. spinodal decomposition: deterministic value noise in a centre disc.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import timestepping
from .assembly import SemilinearEvaluator, assemble_mass_and_stiffness
from .mesh import generate_criss, generate_voronoi
from .projections import build_dof_layout, build_projections, dofs_of_function

_TWO_PI = 2.0 * math.pi


# -- benchmark 1: manufactured solution ---------------------------------------

class ManufacturedSolution:
    """u = sin(2 pi t) cos(2 pi x) cos(2 pi y) and its derivatives/forcing.

    The forcing comes from substituting u into u_t - lap(phi(u) - eps^2 lap u)
    with phi(u) = u^3 - u, expanding lap phi(u) = phi'(u) lap u + phi''(u) |grad u|^2.
    """

    def __init__(self, eps):
        self.eps = float(eps)

    @staticmethod
    def u(x, y, t):
        return np.sin(_TWO_PI * t) * np.cos(_TWO_PI * x) * np.cos(_TWO_PI * y)

    @staticmethod
    def grad(x, y, t):
        s = np.sin(_TWO_PI * t)
        ux = -_TWO_PI * s * np.sin(_TWO_PI * x) * np.cos(_TWO_PI * y)
        uy = -_TWO_PI * s * np.cos(_TWO_PI * x) * np.sin(_TWO_PI * y)
        return ux, uy

    @staticmethod
    def hess(x, y, t):
        s = np.sin(_TWO_PI * t)
        u = s * np.cos(_TWO_PI * x) * np.cos(_TWO_PI * y)
        uxx = -_TWO_PI ** 2 * u
        uyy = -_TWO_PI ** 2 * u
        uxy = _TWO_PI ** 2 * s * np.sin(_TWO_PI * x) * np.sin(_TWO_PI * y)
        return uxx, uxy, uyy

    def f(self, x, y, t):
        a = _TWO_PI
        s = np.sin(a * t)
        C = np.cos(a * x) * np.cos(a * y)
        u = s * C
        ut = a * np.cos(a * t) * C
        lap_u = -2.0 * a ** 2 * u
        grad_sq = (s * a) ** 2 * (np.sin(a * x) ** 2 * np.cos(a * y) ** 2
                                  + np.cos(a * x) ** 2 * np.sin(a * y) ** 2)
        lap_phi = (3.0 * u ** 2 - 1.0) * lap_u + 6.0 * u * grad_sq
        bilap_u = 4.0 * a ** 4 * u
        return ut - lap_phi + self.eps ** 2 * bilap_u


def test1_exact(eps=0.1):
    return ManufacturedSolution(eps)


# -- benchmark initial data ----------------------------------------------------

def test2_initial(x, y, eps):
    """Two tanh-profile bubbles around circles of radii 0.25 and 0.3."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f1 = np.tanh(((x - 0.3) ** 2 + y ** 2 - 0.25 ** 2) / eps)
    f2 = np.tanh(((x + 0.3) ** 2 + y ** 2 - 0.3 ** 2) / eps)
    return f1 * f2


def test3_initial(x, y):
    """Tilted cross: +0.95 inside either bar, -0.95 outside."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xs, ys = x - 0.5, y - 0.5
    bar1 = np.abs(ys - 0.4 * xs) + np.abs(0.4 * xs + ys) < 0.2
    bar2 = np.abs(xs - 0.4 * ys) + np.abs(0.4 * ys + xs) < 0.2
    return np.where(bar1 | bar2, 0.95, -0.95)


def _hash_noise(x, y, seed):
    """Deterministic value noise in [-1, 1] from the coordinate bit patterns."""
    bx = np.asarray(x, dtype=np.float64).view(np.uint64)
    by = np.asarray(y, dtype=np.float64).view(np.uint64)
    h = bx ^ (by << np.uint64(1) | by >> np.uint64(63)) ^ np.uint64(seed)
    # splitmix64 finalizer
    h = (h + np.uint64(0x9E3779B97F4A7C15))
    h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    h = h ^ (h >> np.uint64(31))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 52) - 1.0


def test4_initial(x, y, seed, center=(0.5, 0.5)):
    """Uniform noise in [-1, 1] inside the centre disc of diameter 0.3."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x - center[0]) ** 2 + (y - center[1]) ** 2 < 0.15 ** 2
    return np.where(inside, _hash_noise(x, y, seed), 0.0)


# -- error norms ----------------------------------------------------------------

def compute_errors(semi, u, exact, t):
    """Broken (L2, H1, H2) distances to an exact solution triple at time t."""
    return semi.broken_errors(u, exact.u, exact.grad, exact.hess, t)


# -- convergence harness ----------------------------------------------------------

CONVERGENCE_HEADER = ("size,dofs,h,l2_error,l2_eoc,h1_error,h1_eoc,"
                      "h2_error,h2_eoc")


@dataclass
class ErrorRow:
    size: int
    dofs: int
    h: float
    l2_error: float
    h1_error: float
    h2_error: float
    l2_eoc: float = math.nan
    h1_eoc: float = math.nan
    h2_eoc: float = math.nan


@dataclass
class ErrorReport:
    rows: list = field(default_factory=list)

    def add(self, size, dofs, h, l2, h1, h2):
        row = ErrorRow(int(size), int(dofs), float(h), float(l2), float(h1),
                       float(h2))
        if self.rows:
            prev = self.rows[-1]
            ratio = math.log(prev.h / h)
            row.l2_eoc = math.log(prev.l2_error / l2) / ratio
            row.h1_eoc = math.log(prev.h1_error / h1) / ratio
            row.h2_eoc = math.log(prev.h2_error / h2) / ratio
        self.rows.append(row)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CONVERGENCE_HEADER.split(","))
        for r in self.rows:
            eocs = [("" if math.isnan(e) else repr(e))
                    for e in (r.l2_eoc, r.h1_eoc, r.h2_eoc)]
            w.writerow([r.size, r.dofs, repr(r.h),
                        repr(r.l2_error), eocs[0],
                        repr(r.h1_error), eocs[1],
                        repr(r.h2_error), eocs[2]])
        return buf.getvalue()


CRISS_SIZES = (5, 10, 20, 40)
VORONOI_SIZES = (25, 100, 400, 1600)


def _grid_for(grid, size, bbox, rng_seed, lloyd):
    if grid == "criss":
        return generate_criss(size, bbox=bbox)
    if grid == "voronoi":
        return generate_voronoi(size, rng_seed=rng_seed,
                                lloyd_iterations=lloyd, bbox=bbox)
    raise ValueError(f"unknown grid family '{grid}'")


def run_convergence(scheme, order, grid, tau0=1e-2, eps=0.1, t_end=0.1,
                    sizes=None, rng_seed=7, lloyd=100, beta=1.0,
                    quad_degree=None, progress=None):
    """Refinement study against the manufactured solution.

    The time step starts at tau0 and is divided by 2 per refinement for the
    first-order scheme and by 4 for the second-order scheme, so the spatial
    rate stays visible.  Maximum-over-time broken errors are reported with
    their observed convergence orders.
    """
    if scheme == "csrk1":
        tableau = timestepping.csrk1()
        shrink = 2.0
    elif scheme == "csrk2":
        tableau = timestepping.csrk2()
        shrink = 4.0
    else:
        raise ValueError(f"unknown scheme '{scheme}'")
    if sizes is None:
        sizes = CRISS_SIZES if grid == "criss" else VORONOI_SIZES
    exact = ManufacturedSolution(eps)
    report = ErrorReport()
    for level, size in enumerate(sizes):
        tau = tau0 / shrink ** level
        n_steps = max(1, round(t_end / tau))
        mesh = _grid_for(grid, size, (0.0, 0.0, 1.0, 1.0), rng_seed, lloyd)
        layout = build_dof_layout(mesh, order)
        projections = build_projections(mesh, layout)
        forms = assemble_mass_and_stiffness(mesh, layout, projections, eps)
        semi = SemilinearEvaluator(mesh, layout, projections, beta=beta,
                                   quad_degree=quad_degree, with_hessians=True)
        u0 = dofs_of_function(
            mesh, layout,
            lambda x, y: exact.u(x, y, 0.0),
            lambda x, y: exact.grad(x, y, 0.0),
        )
        state = timestepping.SimulationState(t=0.0, u=u0)
        worst = np.array(compute_errors(semi, u0, exact, 0.0))
        for _ in range(n_steps):
            state = timestepping.step(state, tau, forms, semi, tableau,
                                      forcing=exact.f)
            worst = np.maximum(worst,
                               compute_errors(semi, state.u, exact, state.t))
        report.add(mesh.n_cells, layout.n_dofs, float(mesh.cell_diameters.max()),
                   *worst)
        if progress is not None:
            progress(report.rows[-1])
    return report


# -- zero-contour geometry -----------------------------------------------------

def vertex_cell_samples(mesh, semi, u):
    """Value of P0 u at each vertex (averaged over cells) and each centroid."""
    vsum = np.zeros(mesh.n_vertices)
    vcnt = np.zeros(mesh.n_vertices)
    cval = np.zeros(mesh.n_cells)
    for grp in semi.groups:
        for row, k in enumerate(grp.cells):
            proj = semi.projections[k]
            loop = mesh.cells[k]
            pts = np.vstack([mesh.vertices[loop], mesh.cell_centroids[k]])
            vals = proj.basis.eval(pts) @ (proj.P0 @ u[grp.gather[row]])
            vsum[loop] += vals[:-1]
            vcnt[loop] += 1.0
            cval[k] = vals[-1]
    return vsum / np.maximum(vcnt, 1.0), cval


def zero_contour_metrics(mesh, semi, u):
    """(area, perimeter, isoperimetric ratio) of the region where P0 u > 0.

    Each cell is fanned into triangles (vertices + centroid) carrying the
    sampled values; the zero level set of the linear interpolant gives the
    perimeter, and clipped positive parts give the area.  The ratio is
    4 pi area / perimeter^2, i.e. 1 for a disc.
    """
    vvals, cvals = vertex_cell_samples(mesh, semi, u)
    area = 0.0
    perim = 0.0
    for k in range(mesh.n_cells):
        loop = mesh.cells[k]
        c = mesh.cell_centroids[k]
        fc = cvals[k]
        for i in range(len(loop)):
            a, b = loop[i], loop[(i + 1) % len(loop)]
            tri = np.array([mesh.vertices[a], mesh.vertices[b], c])
            vals = np.array([vvals[a], vvals[b], fc])
            area += _positive_area(tri, vals)
            perim += _zero_segment_length(tri, vals)
    if perim == 0.0:
        return area, perim, math.nan
    return area, perim, 4.0 * math.pi * area / perim ** 2


def _tri_area(tri):
    return 0.5 * abs((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
                     - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]))


def _positive_area(tri, vals):
    """Area of {linear interpolant > 0} inside the triangle."""
    poly = []
    for i in range(3):
        p, vp = tri[i], vals[i]
        q, vq = tri[(i + 1) % 3], vals[(i + 1) % 3]
        if vp > 0:
            poly.append(p)
        if (vp > 0) != (vq > 0) and vp != vq:
            t = vp / (vp - vq)
            poly.append(p + t * (q - p))
    if len(poly) < 3:
        return 0.0
    poly = np.array(poly)
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _zero_segment_length(tri, vals):
    """Length of the zero level set of the linear interpolant in the triangle."""
    pts = []
    for i in range(3):
        p, vp = tri[i], vals[i]
        q, vq = tri[(i + 1) % 3], vals[(i + 1) % 3]
        if (vp > 0) != (vq > 0) and vp != vq:
            t = vp / (vp - vq)
            pts.append(p + t * (q - p))
    if len(pts) == 2:
        return float(np.linalg.norm(pts[1] - pts[0]))
    return 0.0
