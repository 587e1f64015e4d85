"""``tracestab`` command line."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import harness
from .convex2d import GeometryError, PolygonFormatError, asymmetry_indices, load_polygon, nearly_spherical_check, steiner_point_and_ball
from .fem import mesh_domain, minimize_trace_quotient
from .harness import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, ConfigError, SuiteConfig, dumps_stable
from .radial import Ball, ProblemParams, Shell, solve_ball, solve_shell
from .webfunc import comparison_chain_report

_CONFIG_FLAGS = {"p": "p", "q": "q", "d": "d", "R": "R", "R1": "R1", "R2": "R2", "n": "sample_count", "seed": "seed", "mesh_h": "mesh_h"}


def _common(sp: argparse.ArgumentParser, *, radii: str) -> None:
    sp.add_argument("--p", type=float, default=None, help="gradient exponent (default 2)")
    sp.add_argument("--q", type=float, default=None, help="boundary exponent (default 2)")
    sp.add_argument("--d", type=int, default=None, help="dimension (default 2)")
    if radii in ("ball", "all"):
        sp.add_argument("--R", type=float, default=None, help="ball radius (default 1)")
    if radii in ("shell", "all"):
        sp.add_argument("--R1", type=float, default=None, help="inner shell radius (default 1)")
        sp.add_argument("--R2", type=float, default=None, help="outer shell radius (default 2)")
    sp.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
    sp.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tracestab", description="Sobolev trace constants and their stability on convex and holed planar domains.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sigma-ball", help="radial trace constant of a ball")
    _common(sp, radii="ball")
    sp = sub.add_parser("sigma-shell", help="radial exterior trace constant of a shell")
    _common(sp, radii="shell")

    sp = sub.add_parser("sigma-polygon", help="FEM trace constant of a polygon plus the web-function bound")
    sp.add_argument("polygon", type=Path, help='polygon JSON: {"vertices": [[x, y], ...]}')
    _common(sp, radii="none")
    sp.add_argument("--mesh-h", type=float, default=0.05)

    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("suite", choices=harness.SUITES)
    _common(sp, radii="all")
    sp.add_argument("--n", type=int, default=None, help="number of sampled instances")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--mesh-h", type=float, default=None)
    sp.add_argument("--config", type=Path, default=None, help="JSON file with SuiteConfig fields")
    sp.add_argument("--threads", type=int, default=1, help="worker processes for independent instances")

    sp = sub.add_parser("asymmetry", help="Hausdorff asymmetries and Steiner ball of a polygon")
    sp.add_argument("polygon", type=Path)
    _common(sp, radii="none")

    sp = sub.add_parser("counterexample-4d", help="thinning-cylinder counterexample in four dimensions")
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--C", type=float, default=1.0, help="constant of the would-be stability bound")
    sp.add_argument("--out", type=Path, default=None)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    return ap


def _emit_record(record: dict, fmt: str, out: Path | None) -> None:
    if fmt == "json":
        text = dumps_stable(record)
    else:
        flat: dict = {}
        harness._flatten("", record, flat)
        text = ",".join(flat) + "\n" + ",".join(harness._cell(v) for v in flat.values()) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _or(value, default):
    return default if value is None else value


def _radial_record(prof) -> dict:
    return {
        "sigma": prof.sigma,
        "z_m": prof.z_m,
        "z_M": prof.z_M,
        "ell_zM": float(prof.dpsi[-1]),
        "energy_grad": prof.energy_grad,
        "energy_lp": prof.energy_lp,
        "params": prof.params.to_dict(),
    }


def _suite_config(args) -> SuiteConfig:
    base = SuiteConfig.load(args.config).to_dict() if args.config else {}
    for flag, key in _CONFIG_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            base[key] = val
    return SuiteConfig.from_dict(base)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sigma-ball":
            params = ProblemParams(_or(args.p, 2.0), _or(args.q, 2.0), _or(args.d, 2), Ball(_or(args.R, 1.0)))
            _emit_record(_radial_record(solve_ball(params).normalized()), args.format, args.out)
            return EXIT_OK
        if args.command == "sigma-shell":
            params = ProblemParams(_or(args.p, 2.0), _or(args.q, 2.0), _or(args.d, 2), Shell(_or(args.R1, 1.0), _or(args.R2, 2.0)))
            _emit_record(_radial_record(solve_shell(params).normalized()), args.format, args.out)
            return EXIT_OK
        if args.command in ("sigma-polygon", "asymmetry"):
            poly = load_polygon(args.polygon)
            if args.command == "asymmetry":
                idx = asymmetry_indices(poly)
                sb = steiner_point_and_ball(poly)
                ns = nearly_spherical_check(poly, poly.perimeter / (2 * math.pi))
                rec = {
                    "area": poly.area,
                    "perimeter": poly.perimeter,
                    "asymmetry_star": idx.star,
                    "asymmetry_sharp": idx.sharp,
                    "steiner_center": list(sb.center),
                    "steiner_radius": sb.radius,
                    "nearly_spherical": ns.is_nearly_spherical,
                }
            else:
                p, q = _or(args.p, 2.0), _or(args.q, 2.0)
                sol = minimize_trace_quotient(mesh_domain(poly, None, args.mesh_h), p, q)
                R = poly.perimeter / (2 * math.pi)
                rep = comparison_chain_report(poly, solve_ball(ProblemParams(p, q, 2, Ball(R))), sigma_h=sol.sigma)
                rec = {
                    "sigma_h": sol.sigma,
                    "iterations": sol.iterations,
                    "residual": sol.grad_norm,
                    "quotient_web": rep.quotient_web,
                    "sigma_ball_same_perimeter": rep.sigma_optimal,
                    "mesh_h": args.mesh_h,
                }
            _emit_record(rec, args.format, args.out)
            return EXIT_OK
        if args.command == "counterexample-4d":
            _emit_record(harness.counterexample_4d(args.epsilon, args.C), args.format, args.out)
            return EXIT_OK
        if args.command == "verify":
            cfg = _suite_config(args)
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            report = harness.run_suite(args.suite, cfg, threads=args.threads)
            text = harness.emit_report(report, args.format)
            if args.out is None:
                sys.stdout.write(text)
            else:
                args.out.write_text(text)
            for f in report.failures:
                print(f"FAILED instance {f['index']} (seed {f['seed']}): {f['check']} {f['detail']}".rstrip(), file=sys.stderr)
            return harness.exit_code(report)
    except (ConfigError, PolygonFormatError, GeometryError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
