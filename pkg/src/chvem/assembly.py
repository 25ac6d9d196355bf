"""Global assembly of the discrete forms and the semilinear residual machinery.

The discrete forms per cell are

    m_h(v, w) = int_K P0v P0w dx            + h_K^2   S(v - P0v, w - P0w)
    a_h(v, w) = int_K P2v : P2w dx          + h_K^-2  S(v - P0v, w - P0w)
    r_h(z; v, w) = int_K c(P0z) P1v . P1w dx + beta_K S(v - P0v, w - P0w)

with c the derivative of the double-well potential, c(u) = 3u^2 - 1, split
into a contractive part 3u^2 (implicit, carries the stabilization) and an
expansive part 1 (explicit, unstabilized).  The assembled mass matrix M and
stiffness matrix A = eps^2 a_h are sparse and symmetric; normal dofs on
boundary edges are eliminated by identity rows.

Residual and Jacobian evaluations run per Newton iteration, so the per-cell
quadrature values of the projected bases are cached up front, grouped by
vertex count, and contracted with einsum.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .basis import ScaledMonomialBasis, polynomial_dim
from .quadrature import polygon_rule


def _constrain(A, constrained):
    """Clear constrained rows/columns and put 1 on their diagonal."""
    n = A.shape[0]
    free = sp.diags((~constrained).astype(float))
    pinned = sp.diags(constrained.astype(float))
    return (free @ A @ free + pinned).tocsc()


@dataclass
class GlobalForms:
    """Assembled mass and stiffness matrices with the constraint applied."""

    M: sp.csc_matrix
    A: sp.csc_matrix          # eps^2 * a_h, stabilization included
    eps: float
    layout: object
    _m_factor: object = None
    _aligned: dict = None

    def mass_factor(self):
        if self._m_factor is None:
            self._m_factor = linalg.SparseFactor(self.M)
        return self._m_factor

    def aligned_data(self, semi):
        """(M, A) expanded onto the evaluator's fixed sparsity pattern."""
        if self._aligned is None or self._aligned[0] is not semi:
            self._aligned = (semi, semi.align(self.M), semi.align(self.A))
        return self._aligned[1], self._aligned[2]


def assemble_mass_and_stiffness(mesh, layout, projections, eps):
    """Scatter the per-cell form matrices into global sparse M and A."""
    n = layout.n_dofs
    rows, cols, mvals, avals = [], [], [], []
    for k in range(mesh.n_cells):
        proj = projections[k]
        idx = layout.cell_dofs(k)
        if len(idx) != proj.n_local_dofs:
            raise ValueError(f"projections for cell {k} do not match the dof layout")
        r = np.repeat(idx, len(idx))
        c = np.tile(idx, len(idx))
        rows.append(r)
        cols.append(c)
        mvals.append(proj.M_loc.ravel())
        avals.append(eps ** 2 * proj.A_loc.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    M = linalg.assemble_csc(rows, cols, np.concatenate(mvals), n)
    A = linalg.assemble_csc(rows, cols, np.concatenate(avals), n)
    con = layout.constrained
    return GlobalForms(M=_constrain(M, con), A=_constrain(A, con), eps=eps, layout=layout)


class _CellGroup:
    """Cells with a common vertex count, stacked for vectorized contraction."""

    __slots__ = ("cells", "gather", "w", "xq", "phi0", "phi1x", "phi1y",
                 "S", "G", "rows", "cols",
                 "wE", "xqE", "phi0E", "phi1xE", "phi1yE", "phi2")

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw.get(k))


class SemilinearEvaluator:
    """Quadrature caches plus residual/Jacobian/load evaluation.

    ``with_energy`` adds a higher-order rule for the quartic energy density;
    ``with_hessians`` adds hessian-projection values for broken-norm errors.

    All sparse matrices produced here live on one fixed sparsity pattern
    (cell couplings plus the diagonal), so repeated Jacobian assembly inside
    Newton reduces to filling a data array.
    """

    def __init__(self, mesh, layout, projections, beta=1.0,
                 quad_degree=None, with_energy=False, with_hessians=False):
        self.mesh = mesh
        self.layout = layout
        self.projections = projections
        self.beta = float(beta)
        l = layout.order
        deg = quad_degree if quad_degree is not None else 4 * l - 2
        deg_e = 4 * l
        n1 = polynomial_dim(l - 1)
        n2 = polynomial_dim(l - 2)

        by_nv = {}
        for k in range(mesh.n_cells):
            by_nv.setdefault(len(mesh.cells[k]), []).append(k)

        self.groups = []
        for nv in sorted(by_nv):
            cells = by_nv[nv]
            gather = np.array([layout.cell_dofs(k) for k in cells])
            Nk = gather.shape[1]
            w, xq, f0, f1x, f1y = [], [], [], [], []
            Sl, Gl = [], []
            wE, xqE, f0E, f1xE, f1yE = [], [], [], [], []
            f2 = [[] for _ in range(4)]
            for k in cells:
                proj = projections[k]
                verts = mesh.vertices[mesh.cells[k]]
                rule = polygon_rule(verts, deg)
                Vq = proj.basis.eval(rule.points)
                w.append(rule.weights)
                xq.append(rule.points)
                f0.append(Vq @ proj.P0)
                f1x.append(Vq[:, :n1] @ proj.P1[0])
                f1y.append(Vq[:, :n1] @ proj.P1[1])
                Sl.append(proj.S)
                Gl.append(proj.G_loc)
                if with_hessians:
                    for c in range(4):
                        f2[c].append(Vq[:, :n2] @ proj.P2[c])
                if with_energy:
                    ruleE = polygon_rule(verts, deg_e)
                    VqE = proj.basis.eval(ruleE.points)
                    wE.append(ruleE.weights)
                    xqE.append(ruleE.points)
                    f0E.append(VqE @ proj.P0)
                    f1xE.append(VqE[:, :n1] @ proj.P1[0])
                    f1yE.append(VqE[:, :n1] @ proj.P1[1])
            rows = np.repeat(gather, Nk, axis=1).ravel()
            cols = np.tile(gather, (1, Nk)).ravel()
            grp = _CellGroup(
                cells=np.array(cells), gather=gather,
                w=np.array(w), xq=np.array(xq),
                phi0=np.array(f0), phi1x=np.array(f1x), phi1y=np.array(f1y),
                S=np.array(Sl), G=np.array(Gl), rows=rows, cols=cols,
            )
            if with_energy:
                grp.wE = np.array(wE)
                grp.xqE = np.array(xqE)
                grp.phi0E = np.array(f0E)
                grp.phi1xE = np.array(f1xE)
                grp.phi1yE = np.array(f1yE)
            if with_hessians:
                grp.phi2 = [np.array(f2[c]) for c in range(4)]
            self.groups.append(grp)
        self._build_structure()

    def _build_structure(self):
        """Fixed CSC pattern (cell couplings + diagonal) and the map from
        concatenated per-cell triplets into its data array."""
        n = self.layout.n_dofs
        rows = np.concatenate([g.rows for g in self.groups] + [np.arange(n)])
        cols = np.concatenate([g.cols for g in self.groups] + [np.arange(n)])
        pattern = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsc()
        pattern.sort_indices()
        self._indices = pattern.indices
        self._indptr = pattern.indptr
        self._nnz = pattern.nnz
        entry_keys = (np.repeat(np.arange(n), np.diff(self._indptr)).astype(np.int64) * n
                      + self._indices)
        trip_keys = cols.astype(np.int64) * n + rows.astype(np.int64)
        self._pos = np.searchsorted(entry_keys, trip_keys[:-n])  # cell triplets only
        free = ~self.layout.constrained
        col_of = np.repeat(np.arange(n), np.diff(self._indptr))
        self._free_entry = (free[self._indices] & free[col_of]).astype(float)

    def _matrix_from_data(self, data):
        return sp.csc_matrix((data, self._indices, self._indptr),
                             shape=(self.layout.n_dofs,) * 2)

    def align(self, A):
        """Data array of a sparse matrix expanded onto the fixed pattern."""
        n = self.layout.n_dofs
        coo = A.tocoo()
        entry_keys = (np.repeat(np.arange(n), np.diff(self._indptr)).astype(np.int64) * n
                      + self._indices)
        keys = coo.col.astype(np.int64) * n + coo.row.astype(np.int64)
        pos = np.searchsorted(entry_keys, keys)
        if np.any(pos >= len(entry_keys)) or np.any(entry_keys[pos] != keys):
            raise ValueError("matrix pattern does not fit the evaluator's structure")
        data = np.zeros(self._nnz)
        np.add.at(data, pos, coo.data)
        return data

    # -- evaluation -----------------------------------------------------

    @staticmethod
    def _at_points(phi, vloc):
        # (C, nq, Nk) x (C, Nk) -> (C, nq) via batched matmul
        return (phi @ vloc[:, :, None])[:, :, 0]

    def residual(self, z, v, split="full"):
        """Vector r with r . w = r_h(P0 z; v, w) for the requested split."""
        out = np.zeros(self.layout.n_dofs)
        for grp in self.groups:
            vloc = v[grp.gather]
            if split == "expansive":
                rloc = (grp.G @ vloc[:, :, None])[:, :, 0]
            else:
                zq = self._at_points(grp.phi0, z[grp.gather])
                if split == "contractive":
                    c = 3.0 * zq ** 2
                elif split == "full":
                    c = 3.0 * zq ** 2 - 1.0
                else:
                    raise ValueError(f"unknown split '{split}'")
                c *= grp.w
                gx = self._at_points(grp.phi1x, vloc)
                gy = self._at_points(grp.phi1y, vloc)
                rloc = (grp.phi1x.transpose(0, 2, 1) @ (c * gx)[:, :, None]
                        + grp.phi1y.transpose(0, 2, 1) @ (c * gy)[:, :, None])[:, :, 0]
                rloc += self.beta * (grp.S @ vloc[:, :, None])[:, :, 0]
            out += np.bincount(grp.gather.ravel(), weights=rloc.ravel(),
                               minlength=self.layout.n_dofs)
        out[self.layout.constrained] = 0.0
        return out

    def jacobian_data(self, u):
        """Fixed-pattern data array of d/du of the contractive residual."""
        vals = []
        for grp in self.groups:
            uloc = u[grp.gather]
            uq = self._at_points(grp.phi0, uloc)
            gx = self._at_points(grp.phi1x, uloc)
            gy = self._at_points(grp.phi1y, uloc)
            wc = (grp.w * 3.0 * uq ** 2)[:, :, None]
            J = (grp.phi1x.transpose(0, 2, 1) @ (wc * grp.phi1x)
                 + grp.phi1y.transpose(0, 2, 1) @ (wc * grp.phi1y))
            P = grp.phi1x * gx[:, :, None] + grp.phi1y * gy[:, :, None]
            J += P.transpose(0, 2, 1) @ ((grp.w * 6.0 * uq)[:, :, None] * grp.phi0)
            J += self.beta * grp.S
            vals.append(J.ravel())
        data = np.bincount(self._pos, weights=np.concatenate(vals),
                           minlength=self._nnz)
        return data * self._free_entry

    def jacobian(self, u):
        """Sparse d/du of the contractive residual r_{h,c}(P0 u; u, .)."""
        return self._matrix_from_data(self.jacobian_data(u))

    def load(self, f, t):
        """Vector of int f(., t) P0(basis) dx over the mesh."""
        out = np.zeros(self.layout.n_dofs)
        for grp in self.groups:
            fv = f(grp.xq[:, :, 0], grp.xq[:, :, 1], t)
            lloc = (grp.phi0.transpose(0, 2, 1) @ (grp.w * fv)[:, :, None])[:, :, 0]
            out += np.bincount(grp.gather.ravel(), weights=lloc.ravel(),
                               minlength=self.layout.n_dofs)
        out[self.layout.constrained] = 0.0
        return out

    # -- functionals ------------------------------------------------------

    def value_mean(self, u):
        """sum_K int_K P0 u dx (the conserved quantity of the dynamics)."""
        total = 0.0
        for grp in self.groups:
            uq = self._at_points(grp.phi0, u[grp.gather])
            total += float((grp.w * uq).sum())
        return total

    def free_energy(self, u, eps):
        """Double-well plus interface energy of the projected field."""
        if self.groups and self.groups[0].wE is None:
            raise ValueError("evaluator was built without the energy rule")
        total = 0.0
        for grp in self.groups:
            uloc = u[grp.gather]
            uq = self._at_points(grp.phi0E, uloc)
            gx = self._at_points(grp.phi1xE, uloc)
            gy = self._at_points(grp.phi1yE, uloc)
            dens = 0.25 * (1.0 - uq ** 2) ** 2 + 0.5 * eps ** 2 * (gx ** 2 + gy ** 2)
            total += float((grp.wE * dens).sum())
        return total

    def broken_errors(self, u, exact_u, exact_grad, exact_hess, t):
        """Broken L2/H1/H2 distances between the projections and an exact field."""
        if self.groups and self.groups[0].phi2 is None:
            raise ValueError("evaluator was built without hessian caches")
        e0 = e1 = e2 = 0.0
        for grp in self.groups:
            uloc = u[grp.gather]
            x, y = grp.xq[:, :, 0], grp.xq[:, :, 1]
            uq = self._at_points(grp.phi0, uloc)
            gx = self._at_points(grp.phi1x, uloc)
            gy = self._at_points(grp.phi1y, uloc)
            e0 += float((grp.w * (exact_u(x, y, t) - uq) ** 2).sum())
            ex, ey = exact_grad(x, y, t)
            e1 += float((grp.w * ((ex - gx) ** 2 + (ey - gy) ** 2)).sum())
            hxx, hxy, hyy = exact_hess(x, y, t)
            for c, hex_ in zip(range(4), (hxx, hxy, hxy, hyy)):
                hq = self._at_points(grp.phi2[c], uloc)
                e2 += float((grp.w * (hex_ - hq) ** 2).sum())
        return np.sqrt(e0), np.sqrt(e1), np.sqrt(e2)
