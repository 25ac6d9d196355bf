"""Command-line entry point.

Commands: ``mesh`` (generate and save grids), ``check`` (projection and
stabilization self-tests on a given grid), ``converge`` (refinement study
against the manufactured solution), and ``simulate`` (benchmark evolutions
with CSV diagnostics and field snapshots).

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 self-check
failure.  Every command writes a ``manifest.json`` recording the full
configuration and library versions; rerunning with an identical manifest
reproduces the outputs bit for bit.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, timestepping
from .assembly import SemilinearEvaluator, assemble_mass_and_stiffness
from .basis import polynomial_dim
from .experiments import (ManufacturedSolution, run_convergence, test2_initial,
                          test3_initial, test4_initial, vertex_cell_samples,
                          zero_contour_metrics)
from .linalg import SingularSystemError
from .mesh import (MeshValidationError, generate_criss, generate_voronoi,
                   load_mesh, mesh_stats, save_mesh)
from .projections import build_dof_layout, build_projections, dofs_of_function
from .timestepping import StepFailure

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_CHECK = 3


class ValidationError(Exception):
    pass


def _parse_number(text):
    """Accept plain floats and simple fractions such as 1/25."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _add_grid_args(p):
    p.add_argument("--criss", type=int, metavar="N",
                   help="structured simplex grid with N x N squares")
    p.add_argument("--voronoi", type=int, metavar="N",
                   help="Lloyd-smoothed Voronoi grid with N cells")
    p.add_argument("--mesh-file", metavar="PATH", help="load a mesh file")
    p.add_argument("--seed", type=int, default=7, help="rng seed for Voronoi seeding")
    p.add_argument("--lloyd", type=int, default=100, help="max Lloyd iterations")
    p.add_argument("--bbox", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"),
                   default=(0.0, 0.0, 1.0, 1.0), help="domain rectangle")


def _build_grid(args):
    chosen = [k for k in ("criss", "voronoi", "mesh_file")
              if getattr(args, k, None) is not None]
    if len(chosen) != 1:
        raise ValidationError("choose exactly one of --criss / --voronoi / --mesh-file")
    if args.criss is not None:
        if args.criss < 1:
            raise ValidationError("--criss needs N >= 1")
        return generate_criss(args.criss, bbox=tuple(args.bbox))
    if args.voronoi is not None:
        if args.voronoi < 1:
            raise ValidationError("--voronoi needs N >= 1")
        return generate_voronoi(args.voronoi, rng_seed=args.seed,
                                lloyd_iterations=args.lloyd, bbox=tuple(args.bbox))
    return load_mesh(args.mesh_file)


def _write_manifest(outdir, command, args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": command,
        "config": cfg,
        "versions": {
            "chvem": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)


# -- commands -----------------------------------------------------------------

def cmd_mesh(args):
    mesh = _build_grid(args)
    outdir = Path(args.outdir)
    _write_manifest(outdir, "mesh", args)
    out = outdir / args.out
    save_mesh(mesh, out)
    s = mesh_stats(mesh)
    print(f"cells={s.n_cells} vertices={s.n_vertices} edges={s.n_edges} "
          f"h={s.h:.4f} min_edge_ratio={s.min_edge_ratio:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_check(args):
    mesh = _build_grid(args)
    layout = build_dof_layout(mesh, args.order)
    projections = build_projections(mesh, layout)
    rng = np.random.default_rng(12345)
    worst_proj = 0.0
    worst_kernel = 0.0
    for proj in projections:
        nP = proj.basis.dim
        a = rng.standard_normal(nP)
        lam = proj.D @ a
        scale = max(np.abs(a).max(), 1.0)
        worst_proj = max(worst_proj, np.abs(proj.P0 @ lam - a).max() / scale)
        pts = proj.centroid + 0.25 * proj.diameter * rng.standard_normal((8, 2))
        V = proj.basis.eval(pts)
        G = proj.basis.eval_gradients(pts)
        H = proj.basis.eval_hessians(pts)
        n1 = polynomial_dim(args.order - 1)
        n2 = polynomial_dim(args.order - 2)
        gref = np.stack([G[:, :, 0] @ a, G[:, :, 1] @ a])
        gscale = max(np.abs(gref).max(), 1.0)
        for c in range(2):
            worst_proj = max(worst_proj,
                             np.abs(V[:, :n1] @ (proj.P1[c] @ lam) - gref[c]).max() / gscale)
        href = [H[:, :, 0, 0] @ a, H[:, :, 0, 1] @ a, H[:, :, 1, 0] @ a, H[:, :, 1, 1] @ a]
        hscale = max(max(np.abs(h).max() for h in href), 1.0)
        for c in range(4):
            worst_proj = max(worst_proj,
                             np.abs(V[:, :n2] @ (proj.P2[c] @ lam) - href[c]).max() / hscale)
        worst_kernel = max(worst_kernel, np.abs(proj.S @ lam).max() / scale)
    print(f"projection exactness: max deviation {worst_proj:.3e}")
    print(f"stabilization kernel: max deviation {worst_kernel:.3e}")
    if worst_proj > 1e-9 or worst_kernel > 1e-9:
        print("self-check FAILED")
        return EXIT_CHECK
    print("self-check passed")
    return EXIT_OK


def cmd_converge(args):
    outdir = Path(args.outdir)
    _write_manifest(outdir, "converge", args)
    sizes = tuple(args.sizes) if args.sizes else None
    report = run_convergence(
        args.scheme, args.order, args.grid, tau0=args.tau0, eps=args.eps,
        t_end=args.t_end, sizes=sizes, rng_seed=args.seed, lloyd=args.lloyd,
        beta=args.beta, quad_degree=args.quad_degree,
        progress=lambda r: print(
            f"size={r.size} dofs={r.dofs} h={r.h:.4f} l2={r.l2_error:.4e}",
            flush=True),
    )
    out = outdir / args.out
    out.write_text(report.to_csv(), encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_OK


_INITIAL_DATA = {
    2: lambda args: (lambda x, y: test2_initial(x, y, args.eps)),
    3: lambda args: (lambda x, y: test3_initial(x, y)),
}


def _simulation_initial(args, mesh):
    if args.test == 1:
        exact = ManufacturedSolution(args.eps)
        return (lambda x, y: exact.u(x, y, 0.0),
                lambda x, y: exact.grad(x, y, 0.0),
                exact.f)
    zero_grad = lambda x, y: (np.zeros_like(x), np.zeros_like(x))
    if args.test in (2, 3):
        return _INITIAL_DATA[args.test](args), zero_grad, None
    if args.test == 4:
        x0, y0, x1, y1 = mesh.bbox
        center = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
        return (lambda x, y: test4_initial(x, y, args.seed, center=center),
                zero_grad, None)
    raise ValidationError(f"unknown benchmark {args.test}")


def _write_snapshot(path, mesh, semi, u):
    vv, cv = vertex_cell_samples(mesh, semi, u)
    with open(path, "w", encoding="utf-8") as f:
        f.write("x,y,value\n")
        for (x, y), val in zip(mesh.vertices, vv):
            f.write(f"{float(x)!r},{float(y)!r},{float(val)!r}\n")
        for (x, y), val in zip(mesh.cell_centroids, cv):
            f.write(f"{float(x)!r},{float(y)!r},{float(val)!r}\n")


def cmd_simulate(args):
    outdir = Path(args.outdir)
    _write_manifest(outdir, "simulate", args)
    mesh = _build_grid(args)
    layout = build_dof_layout(mesh, args.order)
    projections = build_projections(mesh, layout)
    forms = assemble_mass_and_stiffness(mesh, layout, projections, args.eps)
    semi = SemilinearEvaluator(mesh, layout, projections, beta=args.beta,
                               quad_degree=args.quad_degree, with_energy=True)
    f0, g0, forcing = _simulation_initial(args, mesh)
    u0 = dofs_of_function(mesh, layout, f0, g0)
    tableau = timestepping.csrk1() if args.scheme == "csrk1" else timestepping.csrk2()
    state = timestepping.SimulationState(t=0.0, u=u0)
    n_steps = int(round(args.t_end / args.tau)) if args.tau > 0 else 0
    snap_every = args.snapshot_every
    _write_snapshot(outdir / "field_000000.csv", mesh, semi, u0)

    def on_step(s):
        if snap_every and s.n % snap_every == 0:
            _write_snapshot(outdir / f"field_{s.n:06d}.csv", mesh, semi, s.u)

    state = timestepping.run(state, n_steps, args.tau, forms, semi, tableau,
                             forcing=forcing, on_step=on_step)
    if snap_every == 0 or (n_steps and state.n % max(snap_every, 1) != 0):
        _write_snapshot(outdir / f"field_{state.n:06d}.csv", mesh, semi, state.u)
    diag = outdir / "diagnostics.csv"
    with open(diag, "w", encoding="utf-8") as f:
        f.write("t,energy,mass,newton_iters\n")
        for t, e, m, it in state.diagnostics:
            f.write(f"{float(t)!r},{float(e)!r},{float(m)!r},{int(it)}\n")
    area, perim, ratio = zero_contour_metrics(mesh, semi, state.u)
    print(f"final t={state.t:.4f} energy={state.diagnostics[-1][1]:.6f} "
          f"mass={state.diagnostics[-1][2]:.6e}")
    if not math.isnan(ratio):
        print(f"zero contour: area={area:.4f} perimeter={perim:.4f} "
              f"isoperimetric_ratio={ratio:.4f}")
    print(f"wrote {diag}")
    return EXIT_OK


# -- argument plumbing ---------------------------------------------------------

def _coerce(value):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return _parse_number(value)
    except ValueError:
        return value


def _read_config_file(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = _coerce(value)
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chvem",
        description="Polygonal virtual element solver for Cahn-Hilliard dynamics",
    )
    parser.add_argument("--config", help="key = value file; flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a grid and write it to a file")
    _add_grid_args(p)
    p.add_argument("--out", default="mesh.json")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("check", help="projection/stabilization self-checks")
    _add_grid_args(p)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("converge", help="refinement study with csv output")
    p.add_argument("--scheme", choices=("csrk1", "csrk2"), default="csrk2")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--grid", choices=("criss", "voronoi"), default="criss")
    p.add_argument("--sizes", type=int, nargs="*", default=None)
    p.add_argument("--tau0", type=_parse_number, default=1e-2)
    p.add_argument("--eps", type=_parse_number, default=0.1)
    p.add_argument("--t-end", type=_parse_number, default=0.1)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--lloyd", type=int, default=100)
    p.add_argument("--beta", type=_parse_number, default=1.0)
    p.add_argument("--quad-degree", type=int, default=None)
    p.add_argument("--out", default="convergence.csv")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("simulate", help="run a benchmark evolution")
    _add_grid_args(p)
    p.add_argument("--test", type=int, choices=(1, 2, 3, 4), default=3)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--scheme", choices=("csrk1", "csrk2"), default="csrk2")
    p.add_argument("--eps", type=_parse_number, default=1 / 25)
    p.add_argument("--tau", type=_parse_number, default=1e-3)
    p.add_argument("--t-end", type=_parse_number, default=0.8)
    p.add_argument("--beta", type=_parse_number, default=1.0)
    p.add_argument("--quad-degree", type=int, default=None)
    p.add_argument("--snapshot-every", type=int, default=100,
                   help="write a field snapshot every N steps (0 = ends only)")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_simulate)
    parser._command_parsers = {name: sp for name, sp in
                               sub.choices.items()}  # for config-file defaults
    return parser


def main(argv=None):
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        try:
            overrides = _read_config_file(args.config)
        except (OSError, ValidationError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        parser.set_defaults(**overrides)
        for sp in parser._command_parsers.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in overrides.items() if k in known})
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        if getattr(args, "order", 2) < 2:
            raise ValidationError("polynomial order must be >= 2")
        return args.func(args)
    except (ValidationError, MeshValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StepFailure, SingularSystemError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
