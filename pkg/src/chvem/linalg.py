"""Dense and sparse linear algebra used by the element builders and the solver.

Everything here is a thin, checked wrapper around LAPACK (through numpy) and
SuperLU (through scipy).  The wrappers exist so that the rest of the code can
rely on a fixed contract: solves either meet a residual bound or raise
``SingularSystemError`` with a condition diagnostic.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(RuntimeError):
    """Raised when a linear system is numerically singular."""


def dense_solve(A, B):
    """Solve the dense system A X = B (B may have several columns).

    The returned solution satisfies ``|A X - B| <= 1e-10 |B|`` (Frobenius);
    otherwise a ``SingularSystemError`` carrying a condition estimate is
    raised.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"dense solve failed ({exc}); cond(A) ~ {np.linalg.cond(A):.3e}"
        ) from exc
    res = np.linalg.norm(A @ X - B)
    bound = 1e-10 * max(np.linalg.norm(B), 1.0)
    if not np.isfinite(res) or res > bound:
        raise SingularSystemError(
            f"dense solve residual {res:.3e} exceeds bound {bound:.3e}; "
            f"cond(A) ~ {np.linalg.cond(A):.3e}"
        )
    return X


def dense_lstsq_kkt(D, C, b, g=None):
    """Minimize |D a - b|_2 subject to C a = g, columnwise for matrix b, g.

    With an empty constraint block (C has zero rows) this is ordinary least
    squares through the normal equations.  Otherwise the KKT block system

        [2 D^T D   C^T] [a ]   [2 D^T b]
        [  C        0 ] [mu] = [   g   ]

    is solved with a dense factorization.  D must have full column rank.
    """
    D = np.asarray(D, dtype=float)
    b = np.asarray(b, dtype=float)
    n = D.shape[1]
    # column scaling keeps the normal/KKT blocks well conditioned on
    # stretched cells
    col = np.linalg.norm(D, axis=0)
    col[col == 0.0] = 1.0
    Ds = D / col[None, :]
    DtD = Ds.T @ Ds
    Dtb = Ds.T @ b
    if C is None or np.size(C) == 0:
        return dense_solve(DtD, Dtb) / (col[:, None] if b.ndim == 2 else col)
    C = np.asarray(C, dtype=float)
    if g is None:
        raise ValueError("constraint rhs g required when C is nonempty")
    g = np.asarray(g, dtype=float)
    Cs = C / col[None, :]
    m = C.shape[0]
    single = b.ndim == 1
    rhs_top = 2.0 * (Dtb if Dtb.ndim == 2 else Dtb[:, None])
    rhs_bot = g if g.ndim == 2 else g[:, None]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = 2.0 * DtD
    K[:n, n:] = Cs.T
    K[n:, :n] = Cs
    rhs = np.vstack([rhs_top, rhs_bot])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"KKT solve failed ({exc}); cond(K) ~ {np.linalg.cond(K):.3e}"
        ) from exc
    a = sol[:n] / col[:, None]
    return a[:, 0] if single else a


def assemble_csc(rows, cols, vals, n):
    """Sum triplets into an n x n CSC matrix.

    scipy's COO->CSC conversion sums duplicates after a deterministic sort,
    so repeated assembly of the same triplet stream is bit-stable.
    """
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    return A.tocsc()


class SparseFactor:
    """LU factorization of a sparse square matrix with checked solves."""

    def __init__(self, A):
        A = A.tocsc() if not sp.issparse(A) or A.format != "csc" else A
        self.A = A
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularSystemError(f"sparse factorization failed: {exc}") from exc

    def solve(self, b):
        """Solve A x = b to a relative residual of 1e-9, refining if needed."""
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        for _ in range(2):
            res = b - self.A @ x
            if np.linalg.norm(res) <= 1e-9 * bnorm:
                return x
            x = x + self._lu.solve(res)
        res = np.linalg.norm(b - self.A @ x)
        if res > 1e-9 * bnorm:
            raise SingularSystemError(
                f"sparse solve residual {res:.3e} > 1e-9 |b| = {1e-9 * bnorm:.3e}"
            )
        return x


def sparse_factor_solve(A, b):
    """Factor A once and solve A x = b."""
    return SparseFactor(A).solve(b)
