"""Degrees of freedom and the computable per-cell projection matrices.

For order l >= 2 the degrees of freedom on a cell with n_v vertices are

  (D1) values at the vertices,
  (D2) edge moments (1/|e|) int_e v q ds against q = s^k, k <= l-3,
  (D3) edge normal moments int_e dv/dn q ds against q = s^k, k <= l-2,
  (D4) interior moments (1/|K|) int_K v m dx against m in P_{l-4}(K),

with the edge quantities taken in the globally oriented edge frame so that
the two cells sharing an edge read identical dof values.  From the dof
evaluation matrix D (rows = dofs, columns = scaled monomials) we build:

  * the value projection P0 into P_l(K) as the dof-least-squares fit,
    constrained to preserve the D4 moments when l >= 4;
  * per-edge trace and normal-trace projections into P_l(e) and P_{l-1}(e);
  * the gradient projection P1 into P_{l-1}(K)^2 and the hessian projection
    P2 into P_{l-2}(K)^{2x2}, both obtained by integrating by parts against
    the edge projections;
  * the stabilization matrix S = (I - D P0)^T (I - D P0), the Gram matrix of
    the dof residual, which vanishes exactly on polynomial dof vectors.

All matrices act on local dof vectors and produce coefficients in the scaled
monomial bases of :mod:`chvem.basis`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .basis import ScaledMonomialBasis, ScaledEdgeBasis, polynomial_dim
from .quadrature import edge_rule, map_edge_rule, polygon_centroid, polygon_rule


# -- degree-of-freedom layout ------------------------------------------------

@dataclass
class DofLayout:
    """Global numbering: vertex block, edge-value block, edge-normal block,
    interior block.  Normal dofs on boundary edges are flagged constrained
    (their value is pinned to zero by the assembled systems)."""

    mesh: object
    order: int
    n_edge_value: int
    n_edge_normal: int
    n_interior: int
    n_dofs: int
    constrained: np.ndarray
    _cell_dofs: list = field(default_factory=list, repr=False)

    def cell_dofs(self, k):
        """Global dof indices of cell k in local order (D1 | D2 | D3 | D4)."""
        return self._cell_dofs[k]

    def local_count(self, n_vertices):
        return (n_vertices * (1 + self.n_edge_value + self.n_edge_normal)
                + self.n_interior)


def build_dof_layout(mesh, order):
    if order < 2:
        raise ValueError(f"polynomial order must be >= 2, got {order}")
    nev = order - 2                       # dim P_{l-3}(e)
    nen = order - 1                       # dim P_{l-2}(e)
    nint = polynomial_dim(order - 4)      # dim P_{l-4}(K)
    V, E, C = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    off_ev = V
    off_en = off_ev + E * nev
    off_int = off_en + E * nen
    n_dofs = off_int + C * nint
    constrained = np.zeros(n_dofs, dtype=bool)
    for e in np.nonzero(mesh.boundary_edges)[0]:
        constrained[off_en + e * nen: off_en + (e + 1) * nen] = True
    cell_dofs = []
    for k in range(C):
        c = mesh.cells[k]
        eids = mesh.cell_edges[k]
        idx = [c]
        idx.extend(off_ev + e * nev + np.arange(nev) for e in eids)
        idx.extend(off_en + e * nen + np.arange(nen) for e in eids)
        idx.append(off_int + k * nint + np.arange(nint))
        cell_dofs.append(np.concatenate(idx).astype(int))
    return DofLayout(
        mesh=mesh, order=order,
        n_edge_value=nev, n_edge_normal=nen, n_interior=nint,
        n_dofs=n_dofs, constrained=constrained, _cell_dofs=cell_dofs,
    )


# -- per-cell projection construction -----------------------------------------

@dataclass
class ElementProjections:
    """Projection and stabilization matrices of one cell (or cell shape)."""

    order: int
    n_vertices: int
    centroid: np.ndarray
    diameter: float
    area: float
    basis: ScaledMonomialBasis
    edge_bases: list
    edge_signs: np.ndarray        # +1 where the global edge normal is outward
    D: np.ndarray                 # (N_K, dim P_l) dof values of the monomials
    P0: np.ndarray                # (dim P_l, N_K)
    P1: tuple                     # (P1x, P1y), each (dim P_{l-1}, N_K)
    P2: tuple                     # (P2xx, P2xy, P2yx, P2yy), (dim P_{l-2}, N_K)
    edge_value_proj: list         # per edge, (l+1, N_K) into P_l(e)
    edge_normal_proj: list        # per edge, (l, N_K) into P_{l-1}(e)
    S: np.ndarray                 # (N_K, N_K) stabilization Gram matrix
    M_loc: np.ndarray             # mass form matrix incl. h^2 S
    A_loc: np.ndarray             # hessian form matrix incl. trace-scaled S (no eps^2)
    G_loc: np.ndarray             # plain gradient Gram int P1 v . P1 w (no S)

    @property
    def n_local_dofs(self):
        return self.D.shape[0]


def _solve_gram(H, R):
    """Solve H X = R for an SPD Gram matrix H.

    Symmetric diagonal scaling keeps the solve accurate on stretched cells,
    where the raw monomial Gram is poorly conditioned.
    """
    s = np.sqrt(np.diag(H))
    Hs = H / s[:, None] / s[None, :]
    return linalg.dense_solve(Hs, R / s[:, None]) / s[:, None]


def _local_blocks(n_v, order):
    """Slices of the local dof vector: vertices, per-edge D2/D3, interior."""
    nev, nen = order - 2, order - 1
    nint = polynomial_dim(order - 4)
    o = n_v
    ev = [slice(o + i * nev, o + (i + 1) * nev) for i in range(n_v)]
    o += n_v * nev
    en = [slice(o + i * nen, o + (i + 1) * nen) for i in range(n_v)]
    o += n_v * nen
    interior = slice(o, o + nint)
    return ev, en, interior, o + nint


def build_cell_projections(vertices, order, edge_forward=None, cell_label=None):
    """Build all projection matrices for one CCW polygon.

    ``edge_forward[i]`` says whether loop edge i (vertices[i] -> vertices[i+1])
    runs along its global orientation; standalone use may leave it None, in
    which case every loop edge is taken as globally forward.
    """
    verts = np.asarray(vertices, dtype=float)
    n_v = len(verts)
    if edge_forward is None:
        edge_forward = np.ones(n_v, dtype=bool)
    l = order
    d = verts[:, None, :] - verts[None, :, :]
    h = np.sqrt((d ** 2).sum(axis=-1)).max()
    centroid, area = polygon_centroid(verts)
    bas = ScaledMonomialBasis(centroid, h, l)
    nP = bas.dim
    n1 = polynomial_dim(l - 1)
    n2 = polynomial_dim(l - 2)
    nc = polynomial_dim(l - 4)

    rule = polygon_rule(verts, 2 * l)
    Vq = bas.eval(rule.points)                       # (nq, nP)
    Gq = bas.eval_gradients(rule.points)             # (nq, nP, 2)
    wq = rule.weights
    H = Vq.T @ (wq[:, None] * Vq)                    # P_l Gram
    H1 = H[:n1, :n1]
    H2 = H[:n2, :n2]

    ev_blocks, en_blocks, int_block, N_K = _local_blocks(n_v, l)

    # edge data in the global orientation
    edge_bases = []
    edge_signs = np.empty(n_v, dtype=int)
    e_pts, e_w, e_Q, e_Vb, e_dn = [], [], [], [], []
    rule1d = edge_rule(l + 1)
    for i in range(n_v):
        p, q = verts[i], verts[(i + 1) % n_v]
        fwd = bool(edge_forward[i])
        a, b = (p, q) if fwd else (q, p)
        eb = ScaledEdgeBasis(a, b, l)
        edge_bases.append(eb)
        edge_signs[i] = 1 if fwd else -1
        pts, w = map_edge_rule(rule1d, a, b)
        e_pts.append(pts)
        e_w.append(w)
        e_Q.append(eb.eval(pts))                     # (ne, l+1)
        e_Vb.append(bas.eval(pts))                   # (ne, nP)
        e_dn.append(bas.eval_gradients(pts) @ eb.normal)  # (ne, nP)

    # dof evaluation matrix
    D = np.zeros((N_K, nP))
    D[:n_v] = bas.eval(verts)
    for i in range(n_v):
        eb, w, Q, Vb, dn = edge_bases[i], e_w[i], e_Q[i], e_Vb[i], e_dn[i]
        if l >= 3:
            D[ev_blocks[i]] = (Q[:, :l - 2] * w[:, None]).T @ Vb / eb.length
        D[en_blocks[i]] = (Q[:, :l - 1] * w[:, None]).T @ dn
    if nc:
        D[int_block] = H[:nc, :] / area

    smin = np.linalg.svd(D, compute_uv=False)
    if smin[-1] < 1e-10 * smin[0]:
        label = f" (cell {cell_label})" if cell_label is not None else ""
        raise linalg.SingularSystemError(
            f"dof matrix is rank deficient{label}: degenerate polygon"
        )

    # value projection: dof least squares, moment-constrained for l >= 4
    if nc:
        G = np.zeros((nc, N_K))
        G[:, int_block] = area * np.eye(nc)
        P0 = linalg.dense_lstsq_kkt(D, H[:nc, :], np.eye(N_K), G)
    else:
        P0 = linalg.dense_lstsq_kkt(D, None, np.eye(N_K))

    # edge trace projections
    edge_value_proj = []
    edge_normal_proj = []
    for i in range(n_v):
        eb, w, Q, Vb, dn = edge_bases[i], e_w[i], e_Q[i], e_Vb[i], e_dn[i]
        # value trace into P_l(e): dof moments, one mode from P0, endpoints
        L0 = np.zeros((l + 1, l + 1))
        R0 = np.zeros((l + 1, N_K))
        r = 0
        for k in range(l - 2):
            L0[r] = (Q[:, k] * w) @ Q
            R0[r, ev_blocks[i].start + k] = eb.length
            r += 1
        L0[r] = (Q[:, l - 2] * w) @ Q
        R0[r] = ((Q[:, l - 2] * w) @ Vb) @ P0
        r += 1
        ends = eb.eval_at_coord([-0.5, 0.5])         # rows: global tail, head
        tail = i if edge_signs[i] == 1 else (i + 1) % n_v
        head = (i + 1) % n_v if edge_signs[i] == 1 else i
        L0[r] = ends[0]
        R0[r, tail] = 1.0
        L0[r + 1] = ends[1]
        R0[r + 1, head] = 1.0
        edge_value_proj.append(linalg.dense_solve(L0, R0))

        # normal trace into P_{l-1}(e): dof moments plus one mode from P0
        L1 = np.zeros((l, l))
        R1 = np.zeros((l, N_K))
        for k in range(l - 1):
            L1[k] = (Q[:, k] * w) @ Q[:, :l]
            R1[k, en_blocks[i].start + k] = 1.0
        L1[l - 1] = (Q[:, l - 1] * w) @ Q[:, :l]
        R1[l - 1] = ((Q[:, l - 1] * w) @ dn) @ P0
        edge_normal_proj.append(linalg.dense_solve(L1, R1))

    # gradient projection: int (P1 v)_i m = -int P0 v d_i m + sum_e int tr(v) m n_i
    P1 = []
    for comp in range(2):
        R = -(Gq[:, :n1, comp] * wq[:, None]).T @ Vq @ P0
        for i in range(n_v):
            ngi = edge_signs[i] * edge_bases[i].normal[comp]
            Em = (e_Vb[i][:, :n1] * e_w[i][:, None]).T @ e_Q[i]    # (n1, l+1)
            R += ngi * (Em @ edge_value_proj[i])
        P1.append(_solve_gram(H1, R))
    P1 = tuple(P1)

    # hessian projection: the boundary gradient is split into the normal
    # trace and the arclength derivative of the value trace
    P2 = []
    for ci in range(2):
        for cj in range(2):
            R = -(Gq[:, :n2, cj] * wq[:, None]).T @ Vq[:, :n1] @ P1[ci]
            for i in range(n_v):
                eb = edge_bases[i]
                nout_j = edge_signs[i] * eb.normal[cj]
                Em = (e_Vb[i][:, :n2] * e_w[i][:, None]).T @ e_Q[i][:, :l]  # (n2, l)
                gr = (eb.normal[ci] * edge_normal_proj[i]
                      + eb.tangent[ci] * (eb.derivative_matrix() @ edge_value_proj[i]))
                R += nout_j * (Em @ gr)
            P2.append(_solve_gram(H2, R))
    P2 = tuple(P2)

    S = np.eye(N_K) - D @ P0
    S = S.T @ S

    # The hessian-form stabilization must carry that form's energy scale.
    # A bare h^-2 coefficient underweights the non-polynomial modes of
    # polygonal cells and visibly degrades the fourth-order solve, so each
    # such mode is stabilized at the energy of the strongest polynomial mode
    # (spectral norm of the consistency part; an h^-2-equivalent quantity).
    hess_gram = sum(P.T @ H2 @ P for P in P2)
    a_stab = np.linalg.eigvalsh(hess_gram)[-1]

    M_loc = P0.T @ H @ P0 + h ** 2 * S
    A_loc = hess_gram + a_stab * S
    G_loc = P1[0].T @ H1 @ P1[0] + P1[1].T @ H1 @ P1[1]

    return ElementProjections(
        order=l, n_vertices=n_v, centroid=centroid, diameter=h, area=area,
        basis=bas, edge_bases=edge_bases, edge_signs=edge_signs,
        D=D, P0=P0, P1=P1, P2=P2,
        edge_value_proj=edge_value_proj, edge_normal_proj=edge_normal_proj,
        S=S, M_loc=M_loc, A_loc=A_loc, G_loc=G_loc,
    )


def build_projections(mesh, layout):
    """Projection matrices for every cell of the mesh."""
    order = layout.order
    result = []
    for k in range(mesh.n_cells):
        verts = mesh.vertices[mesh.cells[k]]
        fwd = mesh.cell_edge_signs[k] > 0
        result.append(build_cell_projections(verts, order, fwd, cell_label=k))
    return result


# -- interpolation ------------------------------------------------------------

def dofs_of_function(mesh, layout, f, grad):
    """Global dof vector of the canonical interpolant of f.

    ``f(x, y)`` and ``grad(x, y) -> (fx, fy)`` must accept numpy arrays.  The
    gradient supplies the edge normal moments; it is required for every
    order since normal dofs are always present.  Normal dofs on boundary
    edges are set to zero.
    """
    if grad is None:
        raise ValueError("a gradient callback is required to fill normal-moment dofs")
    l = layout.order
    nev, nen, nint = layout.n_edge_value, layout.n_edge_normal, layout.n_interior
    V, E = mesh.n_vertices, mesh.n_edges
    u = np.zeros(layout.n_dofs)
    u[:V] = f(mesh.vertices[:, 0], mesh.vertices[:, 1])

    rule1d = edge_rule(max(l + 3, 5))
    off_ev = V
    off_en = V + E * nev
    for e in range(E):
        a = mesh.vertices[mesh.edges[e, 0]]
        b = mesh.vertices[mesh.edges[e, 1]]
        eb = ScaledEdgeBasis(a, b, l)
        pts, w = map_edge_rule(rule1d, a, b)
        Q = eb.eval(pts)
        fv = f(pts[:, 0], pts[:, 1])
        if nev:
            u[off_ev + e * nev: off_ev + (e + 1) * nev] = \
                (Q[:, :nev] * w[:, None]).T @ fv / eb.length
        if not mesh.boundary_edges[e]:
            fx, fy = grad(pts[:, 0], pts[:, 1])
            dn = fx * eb.normal[0] + fy * eb.normal[1]
            u[off_en + e * nen: off_en + (e + 1) * nen] = \
                (Q[:, :nen] * w[:, None]).T @ dn
    if nint:
        off_int = off_en + E * nen
        for k in range(mesh.n_cells):
            verts = mesh.vertices[mesh.cells[k]]
            rule = polygon_rule(verts, 2 * l)
            bas = ScaledMonomialBasis(mesh.cell_centroids[k], mesh.cell_diameters[k], l - 4)
            Vq = bas.eval(rule.points)
            fv = f(rule.points[:, 0], rule.points[:, 1])
            u[off_int + k * nint: off_int + (k + 1) * nint] = \
                (Vq * rule.weights[:, None]).T @ fv / mesh.cell_areas[k]
    return u
