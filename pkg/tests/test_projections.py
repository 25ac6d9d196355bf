import numpy as np
import pytest

from chvem.basis import monomial_exponents, polynomial_dim
from chvem.linalg import SingularSystemError
from chvem.mesh import generate_criss, generate_voronoi
from chvem.projections import (build_cell_projections, build_dof_layout,
                               build_projections, dofs_of_function)


def random_convex_polygon(rng, n_vertices, scale=1.0):
    base = np.linspace(0, 2 * np.pi, n_vertices, endpoint=False)
    ang = base + rng.uniform(-0.3, 0.3, n_vertices) * (2 * np.pi / n_vertices)
    r = rng.uniform(0.7, 1.3, n_vertices)
    poly = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return poly * scale + rng.standard_normal(2) * scale


def derivative_maps(proj):
    """Exact coefficient maps a -> coefficients of da/dx, da/dy, d2a/...

    Differentiating a scaled monomial only shifts exponents and divides by
    the diameter, so these maps are closed-form and independent of the
    projection pipeline under test.
    """
    l = proj.order
    h = proj.diameter
    exps = monomial_exponents(l)
    idx = {tuple(e): i for i, e in enumerate(exps)}
    n1, n2 = polynomial_dim(l - 1), polynomial_dim(l - 2)
    Tx = np.zeros((n1, len(exps)))
    Ty = np.zeros((n1, len(exps)))
    for j, (ax, ay) in enumerate(exps):
        if ax > 0:
            Tx[idx[(ax - 1, ay)], j] = ax / h
        if ay > 0:
            Ty[idx[(ax, ay - 1)], j] = ay / h
    return Tx, Ty, n1, n2


class TestDofLayout:
    def test_global_counts_match_reference_tables(self):
        m = generate_criss(5)
        assert build_dof_layout(m, 2).n_dofs == 121
        assert build_dof_layout(m, 4).n_dofs == 511

    def test_local_count_triangle_order4(self):
        m = generate_criss(1)
        layout = build_dof_layout(m, 4)
        # 3 vertex + 6 edge-value + 9 edge-normal + 1 interior
        assert len(layout.cell_dofs(0)) == 19
        assert layout.local_count(3) == 19

    def test_rejects_low_order(self):
        m = generate_criss(1)
        with pytest.raises(ValueError):
            build_dof_layout(m, 1)

    def test_each_dof_has_one_owner(self):
        m = generate_voronoi(9, rng_seed=5, lloyd_iterations=3)
        layout = build_dof_layout(m, 3)
        seen = np.zeros(layout.n_dofs, dtype=int)
        for k in range(m.n_cells):
            seen[layout.cell_dofs(k)] += 1
        assert np.all(seen >= 1)
        # interior dofs are owned once; vertex/edge dofs once or twice
        assert np.all(seen <= 2 + max(len(c) for c in m.cells))

    def test_boundary_normal_dofs_flagged(self):
        m = generate_criss(2)
        layout = build_dof_layout(m, 2)
        n_boundary_edges = int(m.boundary_edges.sum())
        assert layout.constrained.sum() == n_boundary_edges * (2 - 1)

    def test_gather_scatter_round_trip(self):
        m = generate_criss(3)
        layout = build_dof_layout(m, 3)
        rng = np.random.default_rng(0)
        u = rng.standard_normal(layout.n_dofs)
        v = np.zeros_like(u)
        counts = np.zeros_like(u)
        for k in range(m.n_cells):
            idx = layout.cell_dofs(k)
            v[idx] = u[idx]
            counts[idx] += 1
        assert np.all(counts >= 1)
        assert np.array_equal(u, v)


class TestDofMatrix:
    def test_constant_monomial_column(self):
        proj = build_cell_projections(random_convex_polygon(np.random.default_rng(1), 5), 4)
        col = proj.D[:, 0]  # dofs of the constant monomial
        nv = proj.n_vertices
        ev, en = 4 - 2, 4 - 1
        assert np.allclose(col[:nv], 1.0)                       # vertex values
        vals = col[nv:nv + nv * ev].reshape(nv, ev)
        assert np.allclose(vals[:, 0], 1.0)                     # zeroth edge moments
        assert np.allclose(col[nv + nv * ev:nv + nv * (ev + en)], 0.0)  # normal moments
        assert col[-1] == pytest.approx(1.0)                    # zeroth interior moment

    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_full_rank_on_random_polygons(self, order):
        rng = np.random.default_rng(10 + order)
        for _ in range(100):
            poly = random_convex_polygon(rng, int(rng.integers(3, 11)))
            proj = build_cell_projections(poly, order)
            s = np.linalg.svd(proj.D, compute_uv=False)
            assert s[-1] > 1e-10 * s[0]

    def test_entries_stay_order_one_under_rescaling(self):
        rng = np.random.default_rng(3)
        poly = random_convex_polygon(rng, 6)
        norms = []
        for s in (1e-3, 1.0, 1e3):
            proj = build_cell_projections(poly * s, 3)
            norms.append(np.abs(proj.D).max())
        assert max(norms) / min(norms) < 10.0

    def test_degenerate_cell_raises_with_label(self):
        thin = np.array([[0, 0], [1, 0], [1, 1e-14], [0, 1e-14]])
        with pytest.raises((SingularSystemError, ValueError)):
            build_cell_projections(thin, 2, cell_label=17)


class TestValueProjection:
    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_reproduces_polynomial_dofs(self, order):
        rng = np.random.default_rng(20 + order)
        poly = random_convex_polygon(rng, 7)
        proj = build_cell_projections(poly, order)
        a = rng.standard_normal(proj.basis.dim)
        assert np.allclose(proj.P0 @ (proj.D @ a), a, atol=1e-10)

    def test_order4_moment_constraint_holds(self):
        rng = np.random.default_rng(4)
        poly = random_convex_polygon(rng, 5)
        proj = build_cell_projections(poly, 4)
        from chvem.quadrature import polygon_rule
        rule = polygon_rule(poly, 8)
        V = proj.basis.eval(rule.points)
        for _ in range(10):
            lam = rng.standard_normal(proj.n_local_dofs)
            coeffs = proj.P0 @ lam
            # int (P0 v) * 1 dx must equal |K| times the zeroth interior dof
            lhs = np.sum(rule.weights * (V @ coeffs))
            rhs = proj.area * lam[-1]
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_minimizer_beats_feasible_perturbations(self):
        rng = np.random.default_rng(5)
        poly = random_convex_polygon(rng, 6)
        proj = build_cell_projections(poly, 4)
        lam = rng.standard_normal(proj.n_local_dofs)
        coeffs = proj.P0 @ lam
        nc = polynomial_dim(0)
        from chvem.quadrature import polygon_rule
        rule = polygon_rule(poly, 8)
        V = proj.basis.eval(rule.points)
        C = (V * rule.weights[:, None]).T[:nc, :] @ V  # constraint row(s)

        def objective(c):
            return np.sum((proj.D @ c - lam) ** 2)

        base = objective(coeffs)
        for _ in range(100):
            d = rng.standard_normal(proj.basis.dim)
            d -= C.T @ np.linalg.lstsq(C.T, d, rcond=None)[0]  # feasible direction
            assert objective(coeffs + 1e-4 * d) >= base - 1e-12


class TestEdgeProjections:
    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_polynomial_traces_exact(self, order):
        rng = np.random.default_rng(30 + order)
        poly = random_convex_polygon(rng, 5)
        proj = build_cell_projections(poly, order)
        a = rng.standard_normal(proj.basis.dim)
        lam = proj.D @ a
        from chvem.quadrature import edge_rule, map_edge_rule
        r1 = edge_rule(8)
        for i, eb in enumerate(proj.edge_bases):
            pts, _ = map_edge_rule(r1, eb.p0, eb.p1)
            trace = proj.basis.eval(pts) @ a
            tr_proj = eb.eval(pts) @ (proj.edge_value_proj[i] @ lam)
            assert np.abs(trace - tr_proj).max() < 1e-9 * max(1, np.abs(trace).max())
            dn = (proj.basis.eval_gradients(pts) @ eb.normal) @ a
            dn_proj = eb.eval(pts)[:, :order] @ (proj.edge_normal_proj[i] @ lam)
            assert np.abs(dn - dn_proj).max() < 1e-9 * max(1, np.abs(dn).max())

    def test_constant_traces(self):
        rng = np.random.default_rng(6)
        poly = random_convex_polygon(rng, 4)
        proj = build_cell_projections(poly, 3)
        lam = proj.D[:, 0]  # dofs of the constant 1
        for i, eb in enumerate(proj.edge_bases):
            c0 = proj.edge_value_proj[i] @ lam
            assert c0[0] == pytest.approx(1.0, abs=1e-12)
            assert np.allclose(c0[1:], 0.0, atol=1e-12)
            assert np.allclose(proj.edge_normal_proj[i] @ lam, 0.0, atol=1e-12)

    def test_endpoint_interpolation(self):
        rng = np.random.default_rng(7)
        poly = random_convex_polygon(rng, 5)
        proj = build_cell_projections(poly, 2)
        lam = rng.standard_normal(proj.n_local_dofs)
        for i, eb in enumerate(proj.edge_bases):
            vals = eb.eval_at_coord([-0.5, 0.5]) @ (proj.edge_value_proj[i] @ lam)
            fwd = proj.edge_signs[i] == 1
            tail = i if fwd else (i + 1) % proj.n_vertices
            head = (i + 1) % proj.n_vertices if fwd else i
            assert vals[0] == pytest.approx(lam[tail], abs=1e-12)
            assert vals[1] == pytest.approx(lam[head], abs=1e-12)


class TestDerivativeProjections:
    def test_gradient_of_constant_is_zero(self):
        proj = build_cell_projections(random_convex_polygon(np.random.default_rng(8), 6), 3)
        lam = proj.D[:, 0]
        assert np.allclose(proj.P1[0] @ lam, 0.0, atol=1e-12)
        assert np.allclose(proj.P1[1] @ lam, 0.0, atol=1e-12)

    def test_gradient_matches_symbolic_derivative(self):
        rng = np.random.default_rng(9)
        for order in (2, 3, 4):
            poly = random_convex_polygon(rng, 5)
            proj = build_cell_projections(poly, order)
            Tx, Ty, n1, _ = derivative_maps(proj)
            a = rng.standard_normal(proj.basis.dim)
            lam = proj.D @ a
            scale = max(np.abs(Tx @ a).max(), np.abs(Ty @ a).max(), 1.0)
            assert np.abs(proj.P1[0] @ lam - Tx @ a).max() < 1e-9 * scale
            assert np.abs(proj.P1[1] @ lam - Ty @ a).max() < 1e-9 * scale

    def test_hessian_of_quadratic_scaled_monomial(self):
        rng = np.random.default_rng(11)
        poly = random_convex_polygon(rng, 5)
        proj = build_cell_projections(poly, 2)
        # dof vector of m_(2,0) = ((x-xc)/h)^2: hessian is [[2/h^2, 0], [0, 0]]
        lam = proj.D[:, 3]
        h2 = proj.diameter ** 2
        assert proj.P2[0] @ lam == pytest.approx(2.0 / h2, rel=1e-10)
        for c in (1, 2, 3):
            assert np.abs(proj.P2[c] @ lam).max() < 1e-10 / h2

    def test_hessian_of_linear_is_zero(self):
        proj = build_cell_projections(random_convex_polygon(np.random.default_rng(12), 7), 3)
        lam = proj.D[:, 1] + 2.0 * proj.D[:, 2]
        for c in range(4):
            assert np.abs(proj.P2[c] @ lam).max() < 1e-11

    def test_hessian_matches_symbolic_second_derivative(self):
        rng = np.random.default_rng(13)
        for order in (2, 3, 4):
            poly = random_convex_polygon(rng, 6)
            proj = build_cell_projections(poly, order)
            Tx, Ty, n1, n2 = derivative_maps(proj)
            a = rng.standard_normal(proj.basis.dim)
            lam = proj.D @ a
            ref = [(Tx[:n2, :n1] @ (Tx @ a)), (Ty[:n2, :n1] @ (Tx @ a)),
                   (Tx[:n2, :n1] @ (Ty @ a)), (Ty[:n2, :n1] @ (Ty @ a))]
            # second derivative maps: apply the first-order maps twice
            import itertools
            exps1 = monomial_exponents(order - 1)
            scale = max(max(np.abs(r).max() for r in ref), 1.0)
            comps = [proj.P2[0] @ lam, proj.P2[1] @ lam, proj.P2[2] @ lam, proj.P2[3] @ lam]
            # P2 component order is (xx, xy, yx, yy); d/dy of d/dx is ref[1]
            assert np.abs(comps[0] - ref[0]).max() < 1e-9 * scale
            assert np.abs(comps[1] - ref[1]).max() < 1e-9 * scale
            assert np.abs(comps[2] - ref[2]).max() < 1e-9 * scale
            assert np.abs(comps[3] - ref[3]).max() < 1e-9 * scale


class TestStabilization:
    def test_annihilates_polynomials(self):
        rng = np.random.default_rng(14)
        for order in (2, 3, 4):
            poly = random_convex_polygon(rng, 6)
            proj = build_cell_projections(poly, order)
            a = rng.standard_normal(proj.basis.dim)
            assert np.abs(proj.S @ (proj.D @ a)).max() < 1e-12 * max(1, np.abs(a).max())

    def test_symmetric_positive_semidefinite(self):
        rng = np.random.default_rng(15)
        poly = random_convex_polygon(rng, 8)
        proj = build_cell_projections(poly, 3)
        assert np.allclose(proj.S, proj.S.T)
        w = np.linalg.eigvalsh(proj.S)
        assert w.min() > -1e-12

    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_kernel_dimension_is_polynomial_dim(self, order):
        rng = np.random.default_rng(16 + order)
        for _ in range(10):
            poly = random_convex_polygon(rng, int(rng.integers(4, 9)))
            proj = build_cell_projections(poly, order)
            w = np.linalg.eigvalsh(proj.S)
            n_zero = int(np.sum(w < 1e-10))
            assert n_zero == proj.basis.dim


class TestExactnessSuite:
    def test_two_hundred_random_polynomials(self):
        rng = np.random.default_rng(99)
        trials_per_order = [67, 67, 66]
        for order, trials in zip((2, 3, 4), trials_per_order):
            for _ in range(trials):
                poly = random_convex_polygon(rng, int(rng.integers(3, 11)),
                                             scale=float(rng.uniform(0.05, 3.0)))
                proj = build_cell_projections(poly, order)
                Tx, Ty, n1, n2 = derivative_maps(proj)
                a = rng.standard_normal(proj.basis.dim)
                lam = proj.D @ a
                assert np.abs(proj.P0 @ lam - a).max() <= 1e-9 * max(1, np.abs(a).max())
                gx, gy = Tx @ a, Ty @ a
                gs = max(np.abs(gx).max(), np.abs(gy).max(), 1.0)
                assert np.abs(proj.P1[0] @ lam - gx).max() <= 1e-9 * gs
                assert np.abs(proj.P1[1] @ lam - gy).max() <= 1e-9 * gs
                hs = [Tx[:n2, :n1] @ gx, Ty[:n2, :n1] @ gx,
                      Tx[:n2, :n1] @ gy, Ty[:n2, :n1] @ gy]
                hscale = max(max(np.abs(h).max() for h in hs), 1.0)
                for c in range(4):
                    assert np.abs(proj.P2[c] @ lam - hs[c]).max() <= 1e-9 * hscale


class TestInvariance:
    def test_transport_of_coefficients(self):
        rng = np.random.default_rng(17)
        poly = random_convex_polygon(rng, 6)
        proj = build_cell_projections(poly, 3)
        for s, t in ((2.0, np.array([3.0, -1.0])), (0.05, np.array([0.9, 0.7]))):
            moved = build_cell_projections(poly * s + t, 3)
            # the transported polynomial keeps its scaled-basis coefficients,
            # so the dof matrices coincide up to coordinate round-off
            assert np.abs(moved.D - proj.D).max() < 1e-7
            assert np.abs(moved.P0 - proj.P0).max() < 1e-6

    def test_stabilization_translation_invariant(self):
        rng = np.random.default_rng(18)
        poly = random_convex_polygon(rng, 5)
        a = build_cell_projections(poly, 2)
        b = build_cell_projections(poly + np.array([5.0, -2.0]), 2)
        assert np.abs(a.S - b.S).max() < 1e-9


class TestInterpolation:
    def test_polynomial_interpolation_reproduces_field(self):
        # normal dofs on boundary edges are pinned to zero, so exact
        # reproduction of a generic polynomial holds on interior cells
        m = generate_voronoi(25, rng_seed=21, lloyd_iterations=10)
        layout = build_dof_layout(m, 3)
        projections = build_projections(m, layout)

        def f(x, y):
            return 1.0 + 2 * x - y + 0.5 * x * y + x ** 2 - 0.25 * y ** 3

        def g(x, y):
            return 2 + 0.5 * y + 2 * x, -1 + 0.5 * x - 0.75 * y ** 2

        u = dofs_of_function(m, layout, f, g)
        interior = [k for k in range(m.n_cells)
                    if not m.boundary_edges[m.cell_edges[k]].any()]
        assert interior, "expected at least one interior cell"
        for k in interior:
            proj = projections[k]
            lam = u[layout.cell_dofs(k)]
            pts = proj.centroid + 0.2 * proj.diameter * np.random.default_rng(k).standard_normal((5, 2))
            vals = proj.basis.eval(pts) @ (proj.P0 @ lam)
            assert np.abs(vals - f(pts[:, 0], pts[:, 1])).max() < 1e-10

    def test_requires_gradient(self):
        m = generate_criss(2)
        layout = build_dof_layout(m, 2)
        with pytest.raises(ValueError, match="gradient"):
            dofs_of_function(m, layout, lambda x, y: x, None)

    def test_piecewise_initial_data_vertex_values(self):
        from chvem.experiments import test3_initial
        m = generate_criss(10)
        layout = build_dof_layout(m, 2)
        zero = lambda x, y: (np.zeros_like(x), np.zeros_like(x))
        u = dofs_of_function(m, layout, test3_initial, zero)
        centre_vertex = np.argmin(np.abs(m.vertices - 0.5).sum(axis=1))
        assert u[centre_vertex] == pytest.approx(0.95)

    def test_interpolation_convergence_rate(self):
        # || f - P0 I_h f || should shrink at order l+1 for smooth f
        def f(x, y):
            return np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)

        def g(x, y):
            return (-2 * np.pi * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
                    -2 * np.pi * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y))

        for order in (2, 3):
            errs = []
            hs = []
            for n in (5, 10, 20):
                m = generate_criss(n)
                layout = build_dof_layout(m, order)
                projections = build_projections(m, layout)
                u = dofs_of_function(m, layout, f, g)
                from chvem.quadrature import polygon_rule
                err2 = 0.0
                for k in range(m.n_cells):
                    proj = projections[k]
                    rule = polygon_rule(m.vertices[m.cells[k]], 2 * order + 2)
                    vals = proj.basis.eval(rule.points) @ (proj.P0 @ u[layout.cell_dofs(k)])
                    err2 += np.sum(rule.weights * (vals - f(rule.points[:, 0], rule.points[:, 1])) ** 2)
                errs.append(np.sqrt(err2))
                hs.append(np.sqrt(2.0) / n)
            eoc = np.log(errs[0] / errs[-1]) / np.log(hs[0] / hs[-1])
            assert eoc >= order + 0.7
