"""Command-line entry point: ``grankin <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from grankin import __version__
from grankin.model import InvalidParameters, ModelParams, load_params, make_params

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_CHECK = 4


class CheckFailure(RuntimeError):
    """A declared invariant failed; the message names it."""


class ConfigError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# output helpers


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def emit_csv(path, header, rows) -> None:
    """RFC-4180 CSV with 17 significant digits and LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    versions: str
    outputs: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    arguments: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _versions() -> str:
    return f"grankin {__version__}; numpy {np.__version__}; scipy {scipy.__version__}"


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# commands


def _params(args) -> ModelParams:
    if args.config is None:
        return make_params()
    try:
        return load_params(args.config)
    except (OSError, ValueError, InvalidParameters, TypeError) as exc:
        raise ConfigError(f"cannot use config {args.config}: {exc}") from exc


def _grid(params, args):
    from grankin.collision import VelocityGrid

    return VelocityGrid.for_params(params, resolution=args.res)


def _kernel(name: str) -> str:
    return "hard_sphere" if name in ("hs", "hard_sphere") else "maxwell"


def cmd_spectrum(args, params, outputs):
    from grankin.spectral import spectrum_table

    kappa = args.kappa if args.kappa is not None else params.kappa
    table = spectrum_table(kappa, args.nmax, args.lmax)
    rows = table.rows()
    if args.out:
        emit_csv(args.out, ["n", "l", "lambda"], rows)
        outputs.append(args.out)
    else:
        for n, l, lam in rows:
            print(f"{n},{l},{_format(lam)}")
    bad = table.check_invariants()
    if bad:
        raise CheckFailure("spectrum invariants: " + "; ".join(bad))


def cmd_gap(args, params, outputs):
    from grankin.spectral import spectral_gap_maxwell

    print(_format(spectral_gap_maxwell(params) / params.mean_free_path))


def cmd_constants(args, params, outputs):
    from grankin.constants import constants_report

    measured = None
    if params.kappa >= 0.5:
        from grankin.collision import assemble_operator

        measured = assemble_operator(params, _grid(params, args), "hard_sphere").gain_norm()
    report = _jsonable(constants_report(params, measured).to_dict())
    if args.out:
        _write_json(args.out, report)
        outputs.append(args.out)
    print(json.dumps(report, indent=2, sort_keys=True))


def cmd_operator(args, params, outputs):
    from grankin.collision import assemble_operator

    matrix = assemble_operator(params, _grid(params, args), _kernel(args.kernel))
    res = matrix.invariant_residuals()
    print(json.dumps(res, indent=2, sort_keys=True))
    if args.check:
        limits = {"self_adjointness": 1e-8, "negativity": 1e-8, "mass_conservation": 1e-8, "equilibrium": 1e-6}
        failed = [k for k, lim in limits.items() if not res[k] <= lim]
        if failed:
            raise CheckFailure("operator invariants: " + ", ".join(failed))


def cmd_compare(args, params, outputs):
    from grankin.collision import verify_comparison

    report = verify_comparison(params, _grid(params, args))
    print(f"min_ratio={_format(report.min_ratio)} floor={_format(report.floor)} passed={report.passed}")
    if not report.passed:
        raise CheckFailure("comparison inequality D_hs >= C* D_max")


def cmd_relax(args, params, outputs):
    from grankin.homogeneous import heated_maxwellian, relax, shifted_maxwellian

    print(f"seed: {args.seed}", file=sys.stderr)
    kernel = _kernel(args.kernel)
    initial = shifted_maxwellian(params) if args.initial == "shifted" else heated_maxwellian(params)
    if args.method == "galerkin":
        trace = relax(params, kernel, "galerkin", initial, args.tend, args.samples, grid=_grid(params, args))
    else:
        trace = relax(params, kernel, "particle", initial, args.tend, args.samples,
                      particles=args.particles, seed=args.seed)
    rows = [(t, p[0], p[1], p[2], e, None if math.isnan(d) else d)
            for t, p, e, d in zip(trace.times, trace.momentum, trace.energy, trace.l2_dist)]
    if args.out:
        emit_csv(args.out, ["t", "px", "py", "pz", "energy", "l2dist"], rows)
        outputs.append(args.out)
    if args.method == "galerkin":
        d = trace.l2_dist
        if np.any(np.diff(d) > 1e-12 * max(d[0], 1.0)):
            raise CheckFailure("l2 distance increased along the Galerkin trace")


def cmd_cell(args, params, outputs):
    from grankin.hydro import solve_cell_problem

    grid = _grid(params, args)
    sol = solve_cell_problem(params, grid)
    print(f"residual={_format(sol.residual)} mean={_format(sol.mean)} iterations={sol.iterations}")
    if args.out:
        rows = [(*v, c) for v, c in zip(grid.nodes, sol.chi1)]
        emit_csv(args.out, ["v1", "v2", "v3", "chi1"], rows)
        outputs.append(args.out)
    if sol.residual > 1e-8:
        raise CheckFailure("cell problem residual above 1e-8")
    if abs(sol.mean) > 1e-10:
        raise CheckFailure("cell solution mean not zero")


def cmd_diffusivity(args, params, outputs):
    from grankin.hydro import DiffusivityBoundError, diffusivity_hs, diffusivity_maxwell

    kernel = _kernel(args.kernel)
    report = diffusivity_hs(params, _grid(params, args), kernel=kernel, check=False)
    payload = _jsonable(report.to_dict())
    payload["d_analytic_maxwell"] = diffusivity_maxwell(params)
    if args.out:
        _write_json(args.out, payload)
        outputs.append(args.out)
    print(json.dumps(payload, indent=2, sort_keys=True))
    if kernel == "hard_sphere" and not report.within_bounds:
        raise CheckFailure(str(DiffusivityBoundError("d_lower <= D_hs <= d_upper")))


def cmd_hydrolimit(args, params, outputs):
    from grankin.hydro import hydrolimit_report

    eps = [float(s) for s in args.eps.split(",") if s]
    report = hydrolimit_report(params, _kernel(args.kernel), eps, nx=args.nx, t_end=args.tend,
                               grid=_grid(params, args))
    header = ["eps", "error", "order", "diffusivity", "mass_drift", "continuity_residual", "fick_error",
              "h_max", "steps"]
    rows = [(r.eps, r.error, r.order, r.diffusivity, r.mass_drift, r.continuity_residual, r.fick_error,
             r.h_max, r.steps) for r in report.rows]
    if args.out:
        emit_csv(args.out, header, rows)
        outputs.append(args.out)
    for row in rows:
        print(",".join(_format(v) for v in row))
    if not report.strictly_decreasing():
        raise CheckFailure("E(eps) not strictly decreasing")
    if any(r.mass_drift > 1e-10 for r in report.rows):
        raise CheckFailure("mass drift above 1e-10")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "gap": cmd_gap,
    "constants": cmd_constants,
    "operator": cmd_operator,
    "compare": cmd_compare,
    "relax": cmd_relax,
    "cell": cmd_cell,
    "diffusivity": cmd_diffusivity,
    "hydrolimit": cmd_hydrolimit,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter file")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread count")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--manifest", help="manifest path (default: <out>.manifest.json or stderr)")

    parser = argparse.ArgumentParser(prog="grankin", description="Linear granular Boltzmann toolkit")
    parser.add_argument("--version", action="version", version=_versions())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common])
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--lmax", type=int, default=3)
    p.add_argument("--kappa", type=float)
    p.add_argument("--out")

    sub.add_parser("gap", parents=[common])

    p = sub.add_parser("constants", parents=[common])
    p.add_argument("--res", type=int, default=16)
    p.add_argument("--out")

    p = sub.add_parser("operator", parents=[common])
    p.add_argument("--kernel", choices=["maxwell", "hs"], default="maxwell")
    p.add_argument("--res", type=int, default=16)
    p.add_argument("--check", action="store_true")

    p = sub.add_parser("compare", parents=[common])
    p.add_argument("--res", type=int, default=16)

    p = sub.add_parser("relax", parents=[common])
    p.add_argument("--kernel", choices=["maxwell", "hs"], default="maxwell")
    p.add_argument("--method", choices=["galerkin", "particle"], default="galerkin")
    p.add_argument("--tend", type=float, default=5.0)
    p.add_argument("--samples", type=int, default=65)
    p.add_argument("--particles", type=int, default=100_000)
    p.add_argument("--initial", choices=["shifted", "heated"], default="shifted")
    p.add_argument("--res", type=int, default=16)
    p.add_argument("--out")

    p = sub.add_parser("cell", parents=[common])
    p.add_argument("--res", type=int, default=16)
    p.add_argument("--out")

    p = sub.add_parser("diffusivity", parents=[common])
    p.add_argument("--kernel", choices=["maxwell", "hs"], default="hs")
    p.add_argument("--res", type=int, default=16)
    p.add_argument("--out")

    p = sub.add_parser("hydrolimit", parents=[common])
    p.add_argument("--kernel", choices=["maxwell", "hs"], default="maxwell")
    p.add_argument("--eps", default="0.5,0.25,0.125")
    p.add_argument("--nx", type=int, default=128)
    p.add_argument("--tend", type=float, default=0.1)
    p.add_argument("--res", type=int, default=16)
    p.add_argument("--out")
    return parser


def _thread_count(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("GRANKIN_THREADS")
    return int(env) if env else None


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    start = time.perf_counter()
    outputs: list[str] = []
    code = EXIT_OK
    try:
        params = _params(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=_thread_count(args)):
            COMMANDS[args.command](args, params, outputs)
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        code = EXIT_CHECK
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_CHECK
    manifest = RunManifest(
        command=args.command,
        config=params.to_dict(),
        seed=args.seed,
        versions=_versions(),
        outputs=outputs,
        wall_time=time.perf_counter() - start,
        arguments={k: v for k, v in sorted(vars(args).items()) if k not in ("manifest",)},
    )
    target = args.manifest or (f"{outputs[0]}.manifest.json" if outputs else None)
    if target:
        Path(target).write_text(manifest.to_json() + "\n", encoding="utf-8")
    else:
        print(manifest.to_json(), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
