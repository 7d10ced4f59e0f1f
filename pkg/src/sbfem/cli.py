"""Command-line driver: eigen-mode dumps, interpolation and Galerkin runs,
and convergence studies reproducing the reference tables."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import mesh as mesh_mod
from .errors import ConfigError, SbfemError
from .modes import eigenvalue_rows
from .postproc import (QuadratureConfig, convergence_table, get_exact,
                       report_to_csv, solution_errors)
from .solver import (apply_dirichlet, assemble_global, build_operators,
                     sbfem_interpolate, solve)

MESH_FAMILIES = {
    # name: (generator(n), level -> n, is_3d)
    "quad": (mesh_mod.gen_quad_mesh, lambda lev: 2 ** (lev + 1), False),
    "polygon-case1": (mesh_mod.gen_polygon_case1, lambda lev: 2 ** lev, False),
    "hex": (mesh_mod.gen_hex_mesh, lambda lev: 2 ** lev, True),
    "polyhedron-case1": (mesh_mod.gen_polyhedron_case1,
                         lambda lev: 2 ** (lev - 1), True),
    "refined-square": (mesh_mod.gen_refined_square, lambda lev: 2 ** lev, False),
    "refined-cube": (mesh_mod.gen_refined_cube, lambda lev: 2 ** (lev - 1), True),
    "singular": (mesh_mod.singular_open_selement,
                 lambda lev: 2 ** (lev - 1), False),
    "coupled-singular": (mesh_mod.gen_coupled_singular, lambda lev: lev, False),
    "single-square": (lambda n: mesh_mod.gen_quad_mesh(1), lambda lev: 1, False),
}


def build_mesh(name: str, level: int):
    if name.startswith("file:"):
        return mesh_mod.import_mesh(name[5:])
    try:
        gen, level_to_n, _ = MESH_FAMILIES[name]
    except KeyError:
        raise ConfigError(f"unknown mesh '{name}'; choose from "
                          f"{sorted(MESH_FAMILIES)} or file:<path>") from None
    n = level_to_n(level)
    if n < 1:
        raise ConfigError(f"mesh '{name}' has no level {level}")
    return gen(n)


def _parse_intlist(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text)
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(tok) for tok in text.split(",") if tok]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sbfem",
        description="Scaled boundary finite elements for the Laplace equation")
    p.add_argument("command", choices=["modes", "interp", "solve", "convergence"])
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--mesh", help="mesh family name or file:<path>")
    p.add_argument("--level", type=int, help="single refinement level")
    p.add_argument("--levels", help="level sweep, e.g. 1..4 or 1,2,3")
    p.add_argument("--k", help="trace degree(s), e.g. 2 or 1..3")
    p.add_argument("--problem", help="exact solution registry name")
    p.add_argument("--output", help="output directory (default: .)")
    p.add_argument("--bc", choices=["project", "nodal"],
                   help="Dirichlet enforcement (default: project)")
    p.add_argument("--quad-order", type=int, dest="quad_order",
                   help="facet quadrature order for the coefficient matrices")
    p.add_argument("--facet-order", type=int, dest="facet_order",
                   help="facet quadrature order for error integrals")
    p.add_argument("--radial-points", type=int, dest="radial_points",
                   help="radial Gauss points per subinterval for error integrals")
    p.add_argument("--composite-levels", type=int, dest="composite_levels",
                   help="geometric radial subdivisions for error integrals")
    p.add_argument("--threads", type=int, help="worker threads (default 1)")
    p.add_argument("--dump-eigenvalues", action="store_true", default=None,
                   help="write per-S-element eigenvalue CSVs")
    return p


_DEFAULTS = {"mesh": "quad", "level": None, "levels": None, "k": "1",
             "problem": "exp2d", "output": ".", "bc": "project",
             "quad_order": None, "facet_order": None, "radial_points": None,
             "composite_levels": None, "threads": 1,
             "dump_eigenvalues": False}


def load_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(_DEFAULTS) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key in _DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["command"] = args.command
    if cfg["levels"] is None:
        cfg["levels"] = [cfg["level"] if cfg["level"] is not None else 1]
    else:
        cfg["levels"] = _parse_intlist(cfg["levels"])
    if cfg["level"] is not None and [cfg["level"]] != cfg["levels"]:
        cfg["levels"] = [cfg["level"]]
    cfg["k"] = _parse_intlist(cfg["k"])
    if any(k < 1 for k in cfg["k"]):
        raise ConfigError(f"trace degrees must be >= 1, got {cfg['k']}")
    if cfg["command"] == "convergence" and not cfg["levels"]:
        raise ConfigError("convergence needs a non-empty level list")
    return cfg


def _quad_config(cfg: dict) -> QuadratureConfig:
    return QuadratureConfig(facet_order=cfg["facet_order"],
                            radial_points=cfg["radial_points"],
                            composite_levels=cfg["composite_levels"])


def _run_one(cfg: dict, mesh, k: int, galerkin: bool):
    exact = get_exact(cfg["problem"])
    if galerkin:
        system = assemble_global(mesh, k, quad_order=cfg["quad_order"])
        apply_dirichlet(system, exact.value,
                        facet_ids=exact.dirichlet_facets(mesh),
                        method=cfg["bc"])
        sol = solve(system)
    else:
        sol = sbfem_interpolate(mesh, k, exact.value,
                                quad_order=cfg["quad_order"])
    e_l2, e_h1 = solution_errors(sol, exact, _quad_config(cfg))
    return sol, e_l2, e_h1


def _eigen_csv(sol_ops, out_dir: Path, tag: str):
    for op in sol_ops:
        path = out_dir / f"eigenvalues_{tag}_s{op.selement.id}.csv"
        with open(path, "w") as fh:
            fh.write("re,im,selected\n")
            for re, im, selected in eigenvalue_rows(op.modes):
                fh.write(f"{re:.5E},{im:.5E},{selected}\n")


def _mesh_tag(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-." else "_"
                   for c in Path(name).name)


def run(cfg: dict) -> int:
    out_dir = Path(cfg["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    command = cfg["command"]
    threads = max(int(cfg["threads"] or 1), 1)
    if command == "modes":
        for k in cfg["k"]:
            mesh = build_mesh(cfg["mesh"], cfg["levels"][0])
            numbering = mesh_mod.number_dofs(mesh, k)
            ops = build_operators(mesh, numbering,
                                  quad_order=cfg["quad_order"])
            _eigen_csv(ops, out_dir, f"{_mesh_tag(cfg['mesh'])}_k{k}")
            lam = np.sort_complex(ops[0].modes.lambdas)
            print(f"mesh={cfg['mesh']} k={k}: selected exponents "
                  + ", ".join(f"{v.real:.6g}{v.imag:+.2g}j" if abs(v.imag) > 1e-12
                              else f"{v.real:.6g}" for v in lam))
        return 0
    galerkin = command == "solve" or command == "convergence"
    for k in cfg["k"]:
        rows = []
        levels = cfg["levels"]

        def job(lev):
            mesh = build_mesh(cfg["mesh"], lev)
            sol, e_l2, e_h1 = _run_one(cfg, mesh, k, galerkin)
            return lev, 2.0 ** (-lev), sol.n_dofs, e_l2, e_h1, sol

        if threads > 1 and len(levels) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(job, levels))
        else:
            results = [job(lev) for lev in levels]
        for lev, h, dof, e_l2, e_h1, sol in results:
            rows.append((lev, h, dof, e_l2, e_h1))
            print(f"{command} mesh={cfg['mesh']} problem={cfg['problem']} "
                  f"k={k} level={lev}: dof={dof} e_l2={e_l2:.5E} "
                  f"e_h1={e_h1:.5E}")
            if cfg["dump_eigenvalues"]:
                _eigen_csv(sol.operators, out_dir,
                           f"{_mesh_tag(cfg['mesh'])}_k{k}_l{lev}")
        report = convergence_table(rows)
        csv_text = report_to_csv(report)
        name = f"{command}_{cfg['problem']}_{_mesh_tag(cfg['mesh'])}_k{k}.csv"
        (out_dir / name).write_text(csv_text)
        if len(rows) > 1:
            print(f"  rates (last two levels): l2={report.rate_l2:.3f} "
                  f"h1={report.rate_h1:.3f} -> {out_dir / name}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = load_config(args)
        return run(cfg)
    except ConfigError as exc:
        print(f"sbfem: config error: {exc}", file=sys.stderr)
        return 2
    except SbfemError as exc:
        print(f"sbfem: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
