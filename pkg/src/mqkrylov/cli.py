"""Experiment runner and command-line interface.

Subcommands::

    mqkrylov run <config.json>
    mqkrylov solve <config.json> [--dump-matrix] [--dump-gcv]
    mqkrylov validate [--full]
    mqkrylov gen-points <geometry> <n> <distribution> -o <file>

Exit codes: 0 success, 1 validation failure, 2 configuration error, 3 I/O error.
"""

import argparse
import csv
import itertools
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checks, regularize
from .assembly import BoundarySpec, ProblemSpec, assemble, condition_number, dump_matrix
from .evaluate import CASES, exact_u, manufactured_source, reconstruct, relative_error
from .kernel import KernelParams
from .points import Distribution, ParseError, PointSetError, generate_cube, \
    generate_sphere, load_points, write_point_cloud

log = logging.getLogger("mqkrylov")

CSV_COLUMNS = [
    "geometry", "distribution", "N", "epsilon", "kappa_A", "method", "param",
    "Re_nodes", "Re_offnodes", "rho", "eta", "iterations", "cpu_seconds",
]
METHODS = ("tikh_rg", "ine_tsvd", "hkt", "reg_gmres")
EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class ExperimentConfig:
    """One sweep over (distribution, N, epsilon, method).

    ``geometry`` is ``"cube"``, ``"sphere"`` or ``{"imported": path}``.
    ``epsilon`` is mandatory; scalars and lists are accepted for
    ``distribution``, ``n_target`` and ``epsilon``.
    """

    geometry: object
    epsilon: list
    distribution: list = field(default_factory=lambda: ["random"])
    n_target: list = field(default_factory=lambda: [359])
    wavenumber: float = 3.0
    methods: list = field(default_factory=lambda: list(METHODS))
    ell: int = 140
    k_trunc: object = "auto"
    rule: str = "gcv"
    lambda_grid: tuple = regularize.DEFAULT_GRID
    seed: int = 0
    halton_start: int = 1
    noise: float = 0.0
    offnode_targets: int = 500
    case: str = None
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        problems = []
        known = set(cls.__dataclass_fields__)
        for key in sorted(set(data) - known):
            problems.append(f"unknown field {key!r}")
        if "geometry" not in data:
            problems.append("geometry is required")
        if "epsilon" not in data:
            problems.append("epsilon is required (single value or list)")
        if problems:
            raise ConfigError(problems)
        for key in ("epsilon", "distribution", "n_target", "methods"):
            if key in data:
                data[key] = _as_list(data[key])
        if "lambda_grid" in data:
            data["lambda_grid"] = tuple(data["lambda_grid"])
        cfg = cls(**{k: v for k, v in data.items() if k in known})
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc
        if not isinstance(data, dict):
            raise ConfigError([f"{path}: top level must be an object"])
        return cls.from_dict(data)

    @property
    def imported_path(self):
        if isinstance(self.geometry, dict):
            return self.geometry.get("imported")
        return None

    @property
    def geometry_name(self):
        return "imported" if self.imported_path is not None else self.geometry

    def validate(self):
        p = []
        if self.imported_path is None and self.geometry not in ("cube", "sphere"):
            p.append(f"geometry must be 'cube', 'sphere' or {{'imported': path}}, "
                     f"got {self.geometry!r}")
        for eps in self.epsilon:
            if not isinstance(eps, (int, float)) or not eps > 0:
                p.append(f"epsilon entries must be positive numbers, got {eps!r}")
        for d in self.distribution:
            if d not in ("random", "uniform", "halton"):
                p.append(f"unknown distribution {d!r}")
        for n in self.n_target:
            if not isinstance(n, int) or n < 27:
                p.append(f"n_target must be an integer >= 27, got {n!r}")
        for m in self.methods:
            if m not in METHODS:
                p.append(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if not isinstance(self.ell, int) or self.ell < 1:
            p.append(f"ell must be a positive integer, got {self.ell!r}")
        elif self.imported_path is None and any(
                isinstance(n, int) and self.ell > n for n in self.n_target):
            p.append(f"ell={self.ell} exceeds n_target")
        if self.k_trunc != "auto":
            if not isinstance(self.k_trunc, int) or self.k_trunc < 1:
                p.append(f"k_trunc must be 'auto' or a positive integer, got {self.k_trunc!r}")
            elif isinstance(self.ell, int) and self.k_trunc > self.ell:
                p.append(f"k_trunc={self.k_trunc} exceeds ell={self.ell}")
        if self.rule not in ("gcv", "lcurve"):
            p.append(f"rule must be 'gcv' or 'lcurve', got {self.rule!r}")
        g = self.lambda_grid
        if (len(g) != 3 or not 0 < g[0] < g[1] or int(g[2]) != g[2] or g[2] < 1):
            p.append(f"lambda_grid must be [min_factor, max_factor, count], got {list(g)!r}")
        if not self.wavenumber >= 0:
            p.append("wavenumber must be nonnegative")
        if self.noise < 0:
            p.append("noise must be nonnegative")
        if self.case is not None and self.case not in CASES:
            p.append(f"unknown case {self.case!r}; choose from {', '.join(CASES)}")
        if p:
            raise ConfigError(p)

    def manufactured_case(self):
        name = self.case or {"cube": "cube", "sphere": "sphere"}.get(self.geometry_name, "pump")
        return CASES[name].with_wavenumber(self.wavenumber)


def _distribution(cfg, kind):
    if kind == "random":
        return Distribution.random(cfg.seed)
    if kind == "halton":
        return Distribution.halton(cfg.halton_start)
    return Distribution.uniform()


def build_points(cfg, kind, n):
    if cfg.imported_path is not None:
        return load_points(cfg.imported_path)
    gen = generate_cube if cfg.geometry == "cube" else generate_sphere
    return gen(n, _distribution(cfg, kind))


def offnode_targets(cfg, pts, count):
    """Independent evaluation points inside the domain."""
    rng = np.random.default_rng([cfg.seed, 1])
    geom = cfg.geometry_name
    if geom == "cube":
        return rng.uniform(0.0, 1.0, size=(count, 3))
    if geom == "sphere":
        out = np.empty((0, 3))
        while len(out) < count:
            x = rng.uniform(-1.0, 1.0, size=(2 * count, 3))
            out = np.vstack([out, x[np.einsum("ij,ij->i", x, x) < 1.0]])
        return out[:count]
    # imported geometry: midpoints between interior nodes and their nearest neighbours
    from scipy.spatial import cKDTree

    X = pts.interior
    if len(X) < 2:
        return X.copy()
    _, nn = cKDTree(X).query(X, k=2)
    pick = rng.choice(len(X), size=min(count, len(X)), replace=False)
    return 0.5 * (X[pick] + X[nn[pick, 1]])


def _problem(cfg, eps):
    case = cfg.manufactured_case()
    return ProblemSpec(cfg.wavenumber, KernelParams(eps), BoundarySpec.dirichlet(),
                       lambda X: manufactured_source(case, X),
                       lambda X: exact_u(case, X)), case


def _rhs(cfg, f):
    f = np.array(f)
    if cfg.noise > 0:
        rng = np.random.default_rng([cfg.seed, 2])
        e = rng.standard_normal(f.size)
        f = f + cfg.noise * np.linalg.norm(f) / np.linalg.norm(e) * e
    return f


def solve_method(cfg, method, A, f, factors=None):
    grid_spec = tuple(cfg.lambda_grid)
    ell = min(cfg.ell, len(f))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", regularize.LowConfidenceCornerWarning)
        if method == "tikh_rg":
            s = regularize.svd(A) if factors is None else factors
            return regularize.tikhonov_solve(
                A, f, rule=cfg.rule, grid=regularize.default_grid(s.sigma[0], grid_spec),
                factors=s)
        if method == "ine_tsvd":
            k = cfg.k_trunc
            return regularize.ine_tsvd(A, f, ell=ell, k=k if k == "auto" else min(k, ell))
        if method == "hkt":
            return regularize.hkt_solve(A, f, ell, rule=cfg.rule, grid_spec=grid_spec)
        if method == "reg_gmres":
            return regularize.reg_gmres(A, f, ell, rule=cfg.rule, grid_spec=grid_spec)
    raise ValueError(f"unknown method {method!r}")


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _trace_name(geom, dist, n, eps, method):
    return f"gcv_{geom}_{dist}_{n}_eps{eps:g}_{method}.csv"


def iter_experiment(cfg):
    """Yield ``(row, report)`` for every (distribution, N, epsilon, method).

    Solver failures produce a row of nan values and a ``None`` report.
    """
    dists = ["imported"] if cfg.imported_path is not None else cfg.distribution
    sizes = [None] if cfg.imported_path is not None else cfg.n_target
    for dist, n in itertools.product(dists, sizes):
        pts = build_points(cfg, dist, n)
        ue_nodes = None
        targets = offnode_targets(cfg, pts, cfg.offnode_targets)
        for eps in cfg.epsilon:
            spec, case = _problem(cfg, eps)
            t0 = time.perf_counter()
            system = assemble(pts, spec)
            A, f = np.array(system.A), _rhs(cfg, system.f)
            t_assemble = time.perf_counter() - t0
            factors = regularize.svd(A)
            kappa = float(factors.sigma[0] / factors.sigma[-1])
            if ue_nodes is None:
                ue_nodes = exact_u(case, pts.centers)
                ue_off = exact_u(case, targets)
            for method in cfg.methods:
                row = dict(geometry=cfg.geometry_name, distribution=dist, N=len(pts),
                           epsilon=float(eps), kappa_A=kappa, method=method)
                try:
                    t1 = time.perf_counter()
                    rep = solve_method(cfg, method, A, f,
                                       factors if method == "tikh_rg" else None)
                    elapsed = t_assemble + time.perf_counter() - t1
                    p = spec.kernel
                    row.update(
                        param=float(rep.param),
                        Re_nodes=relative_error(ue_nodes, reconstruct(rep.alpha, pts, p,
                                                                      pts.centers)),
                        Re_offnodes=relative_error(ue_off, reconstruct(rep.alpha, pts, p,
                                                                       targets)),
                        rho=rep.rho, eta=rep.eta, iterations=int(rep.iterations),
                        cpu_seconds=elapsed)
                except Exception as exc:  # isolate per-row failures
                    log.error("%s/%s/N=%d/eps=%g/%s failed: %s", cfg.geometry_name, dist,
                              len(pts), eps, method, exc)
                    rep = None
                    row.update({c: float("nan") for c in CSV_COLUMNS if c not in row})
                    row["iterations"] = 0
                yield row, rep


def run_experiment(cfg):
    """Run the sweep, write ``results.csv`` and GCV traces; return the rows."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    with (out / "results.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row, rep in iter_experiment(cfg):
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
            fh.flush()
            rows.append(row)
            if rep is not None and rep.gcv_trace is not None:
                name = _trace_name(row["geometry"], row["distribution"], row["N"],
                                   row["epsilon"], row["method"])
                regularize.write_gcv_csv(rep.gcv_trace, out / name)
    return rows


def solve_once(cfg, dump_matrix_files=False, dump_gcv=False):
    """One pipeline pass for a single method and epsilon; returns ``(row, report)``."""
    if (len(cfg.methods) != 1 or len(cfg.epsilon) != 1 or len(cfg.distribution) != 1
            or len(cfg.n_target) != 1):
        raise ConfigError(["solve needs exactly one method, epsilon, distribution and "
                           "n_target"])
    if cfg.imported_path is not None and not Path(cfg.imported_path).exists():
        raise FileNotFoundError(f"point file not found: {cfg.imported_path}")
    row, rep = next(iter_experiment(cfg))
    if rep is None:
        raise RuntimeError(f"solver {cfg.methods[0]} failed; see log")
    out = Path(cfg.output_dir)
    if dump_matrix_files or dump_gcv:
        out.mkdir(parents=True, exist_ok=True)
    if dump_matrix_files:
        pts = build_points(cfg, cfg.distribution[0] if cfg.imported_path is None
                           else "imported", cfg.n_target[0])
        spec, _ = _problem(cfg, cfg.epsilon[0])
        system = assemble(pts, spec)
        dump_matrix(system.A, out / "A.txt")
        dump_matrix(_rhs(cfg, system.f)[:, None], out / "f.txt")
        dump_matrix(rep.alpha[:, None], out / "alpha.txt")
    if dump_gcv:
        if rep.gcv_trace is None:
            log.warning("method %s produced no GCV trace", cfg.methods[0])
        else:
            regularize.write_gcv_csv(rep.gcv_trace, out / "gcv.csv")
        if rep.lcurve_trace is not None:
            regularize.write_lcurve_csv(rep.lcurve_trace, out / "lcurve.csv")
    return row, rep


def validate(level="fast"):
    results = checks.run_checks(level)
    return all(r.passed for r in results), results


def _cmd_run(args):
    cfg = ExperimentConfig.load(args.config)
    rows = run_experiment(cfg)
    print(f"wrote {len(rows)} rows to {Path(cfg.output_dir) / 'results.csv'}")
    return EXIT_OK


def _cmd_solve(args):
    cfg = ExperimentConfig.load(args.config)
    row, rep = solve_once(cfg, args.dump_matrix, args.dump_gcv)
    print(json.dumps({k: (v if isinstance(v, (str, int)) else float(v)) for k, v in row.items()},
                     indent=2))
    return EXIT_OK


def _cmd_validate(args):
    ok, results = validate("full" if args.full else "fast")
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail} ({r.seconds:.2f}s)")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + "; ".join(failed))
    return EXIT_OK if ok else EXIT_VALIDATION


def _cmd_gen_points(args):
    if args.geometry not in ("cube", "sphere"):
        raise ConfigError([f"geometry must be cube or sphere, got {args.geometry!r}"])
    kinds = {"random": Distribution.random(args.seed), "uniform": Distribution.uniform(),
             "halton": Distribution.halton(args.start_index)}
    if args.distribution not in kinds:
        raise ConfigError([f"unknown distribution {args.distribution!r}"])
    gen = generate_cube if args.geometry == "cube" else generate_sphere
    try:
        pts = gen(args.n, kinds[args.distribution])
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    write_point_cloud(pts, args.output)
    print(f"wrote {len(pts)} points ({pts.n_interior} interior, {pts.n_boundary} boundary) "
          f"to {args.output}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mqkrylov", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment sweep from a JSON config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("solve", help="single solve with optional dumps")
    p.add_argument("config")
    p.add_argument("--dump-matrix", action="store_true", help="write A.txt, f.txt, alpha.txt")
    p.add_argument("--dump-gcv", action="store_true", help="write gcv.csv")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("validate", help="run the invariant checks")
    p.add_argument("--full", action="store_true")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("gen-points", help="write a generated point set")
    p.add_argument("geometry")
    p.add_argument("n", type=int)
    p.add_argument("distribution")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start-index", type=int, default=1)
    p.set_defaults(func=_cmd_gen_points)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError, PointSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
