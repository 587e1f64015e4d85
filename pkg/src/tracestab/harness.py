"""Verification suites, instance generators and report emission.

Every suite is a pure function of its :class:`SuiteConfig`; instance ``i``
draws all of its randomness from ``seed + i``, so rows can be regenerated one
at a time and a suite rerun reproduces its report byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .convex2d import (
    ConvexPolygon,
    GenerationError,
    asymmetry_indices,
    g_modulus,
    random_convex_polygon,
    regular_polygon,
    steiner_point_and_ball,
)
from .fem import OUTER, mesh_domain, minimize_trace_quotient, robin_neumann_fem
from .radial import Ball, ProblemParams, Shell, robin_neumann_profile, sigma_ball, solve_ball, solve_shell
from .webfunc import ClassParams, HoledDomain, build_web, comparison_chain_report, hybrid_asymmetry, nearly_annular_check

SUITES = ("mt1", "mt2", "mt3", "mt4", "robin")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_TOLERANCES = {
    "flag": 1e-9,  # slack on the web comparison flags
    "chain": 1e-8,  # slack on deficit-chain margins
    "mesh": 1e-3,  # discretization slack on FEM-vs-radial comparisons
    "asymmetry_gate": 0.05,  # mt1 asserts strict inequality above this 𝒜*
    "alpha_gate": 1e-4,  # mt4 asserts positive deficit above this α_hyb
    "equality_alpha": 1e-6,  # α_hyb of the discretized shell
    "equality_deficit": 1e-3,  # |deficit| and 𝒜* of the near-equality rows
    "robin": 1e-3,
}


class ConfigError(ValueError):
    """Invalid suite configuration (exit code 2)."""


# ------------------------------------------------------------------ serialization
def _plain(obj):
    """Convert numpy scalars, tuples and dataclasses into JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _fmt_float(x: float) -> str:
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(obj)


def dumps_stable(obj, indent: int = 2) -> str:
    """Deterministic JSON: insertion-ordered keys, 17 significant digits, non-finite as null."""
    return _dump(_plain(obj), indent, 0) + "\n"


# ------------------------------------------------------------------ configuration
@dataclass(frozen=True)
class SuiteConfig:
    p: float = 2.0
    q: float = 2.0
    d: int = 2
    R: float = 1.0
    R1: float = 1.0
    R2: float = 2.0
    sample_count: int = 10
    seed: int = 0
    mesh_h: float = 0.02
    beta: float = -1.0
    delta0: float | None = None
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tolerances", {**DEFAULT_TOLERANCES, **dict(self.tolerances)})
        self.validate()

    def validate(self) -> None:
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p!r}")
        if not 1 <= self.q <= self.p:
            raise ConfigError(f"q must satisfy 1 <= q <= p, got q={self.q!r}, p={self.p!r}")
        if self.d != 2:
            raise ConfigError("polygon suites are two-dimensional; d must be 2")
        if not (self.R > 0 and 0 < self.R1 < self.R2):
            raise ConfigError("radii must satisfy R > 0 and 0 < R1 < R2")
        if int(self.sample_count) != self.sample_count or self.sample_count < 1:
            raise ConfigError("sample_count must be a positive integer")
        if not self.mesh_h > 0:
            raise ConfigError("mesh_h must be positive")
        if not self.beta < 0:
            raise ConfigError("beta must be negative")
        if self.delta0 is not None and not self.delta0 > 0:
            raise ConfigError("delta0 must be positive when given")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
        bad = [k for k, v in self.tolerances.items() if not (isinstance(v, (int, float)) and v > 0)]
        if bad:
            raise ConfigError(f"tolerances must be positive: {sorted(bad)}")

    @property
    def vartheta(self) -> float:
        return min(self.R1, self.R2 - self.R1) / 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "SuiteConfig":
        if not isinstance(obj, dict):
            raise ConfigError("configuration must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "SuiteConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls.from_dict(obj)


# ------------------------------------------------------------------ instance generators
def convex_instance(seed: int, R: float = 1.0) -> ConvexPolygon:
    """Random convex polygon with 5 to 10 vertices and perimeter ``2πR``."""
    n = int(np.random.default_rng([seed, 7]).integers(5, 11))
    return random_convex_polygon(n, seed, target_perimeter=2 * math.pi * R, axis_ratio=(0.3, 0.85), jitter=0.15)


def class_instance(seed: int, R1: float, R2: float, vartheta: float | None = None, max_tries: int = 200) -> HoledDomain:
    """Random member of the admissible holed class for radii ``R1 < R2``.

    The outer body is a mildly eccentric polygon of perimeter ``2πR2``.  The
    hole is a random convex polygon placed near the outer Steiner point and
    scaled so that the holed area equals the shell area; draws violating the
    clearance or hole-inradius bound are rejected.
    """
    vt = min(R1, R2 - R1) / 2 if vartheta is None else vartheta
    params = ClassParams(R1, R2, vt)
    shell_area = math.pi * (R2**2 - R1**2)
    rng = np.random.default_rng([seed, 11])
    for attempt in range(max_tries):
        sub = int(rng.integers(0, 2**31))
        n_out = int(rng.integers(16, 33))
        outer = random_convex_polygon(n_out, sub, target_perimeter=2 * math.pi * R2, axis_ratio=(0.75, 0.97), jitter=0.03)
        hole_area = outer.area - shell_area
        if hole_area <= 0:
            continue
        n_in = int(rng.integers(8, 17))
        hole = random_convex_polygon(n_in, sub + 1, axis_ratio=(0.7, 1.0), jitter=0.05)
        hole = hole.scaled(math.sqrt(hole_area / hole.area), about=hole.centroid)
        centre = steiner_point_and_ball(outer).center
        offset = 0.1 * R1 * rng.uniform(0, 1) * np.array([math.cos(a := rng.uniform(0, 2 * math.pi)), math.sin(a)])
        hole = hole.translated(np.asarray(centre) + offset - hole.centroid)
        if not np.all(outer.contains(hole.vertices)):
            continue
        dom = HoledDomain(outer, hole, params)
        if not dom.class_violations():
            return dom
    raise GenerationError(f"no admissible holed instance after {max_tries} draws (seed={seed})")


def disc_polygon(R: float = 1.0, n: int = 512) -> ConvexPolygon:
    return regular_polygon(n).with_perimeter(2 * math.pi * R)


def shell_domain(R1: float, R2: float, n_out: int = 512, n_in: int = 256) -> HoledDomain:
    """The shell discretized by concentric regular polygons, rescaled into the class."""
    outer = regular_polygon(n_out).with_perimeter(2 * math.pi * R2)
    hole = regular_polygon(n_in)
    hole = hole.scaled(math.sqrt((outer.area - math.pi * (R2**2 - R1**2)) / hole.area))
    return HoledDomain(outer, hole, ClassParams(R1, R2, min(R1, R2 - R1) / 2))


# ------------------------------------------------------------------ suite rows
def _check(checks: dict, name: str, ok) -> None:
    checks[name] = bool(ok)


def _convex_row(name: str, cfg: SuiteConfig, index: int, kind: str) -> dict:
    tol = cfg.tolerances
    seed = cfg.seed + index
    poly = disc_polygon(cfg.R) if kind == "disc" else convex_instance(seed, cfg.R)
    params = ProblemParams(cfg.p, cfg.q, 2, Ball(cfg.R))
    prof = solve_ball(params)
    sigma_B = prof.sigma
    asym = asymmetry_indices(poly)
    sol = minimize_trace_quotient(mesh_domain(poly, None, cfg.mesh_h), cfg.p, cfg.q)
    rep = comparison_chain_report(poly, prof, tol=tol["flag"], sigma_h=sol.sigma)
    deficit = sigma_B - sol.sigma
    g = g_modulus(2, asym.star)
    checks: dict = {}
    ex = rep.extras
    if name == "mt1":
        for f in ("wq", "dwp", "wp"):
            _check(checks, f, rep.flags[f])
        _check(checks, "deficit_chain", ex["deficit_chain_margin"] >= -tol["chain"])
        if kind == "disc":
            _check(checks, "equality_deficit", abs(deficit) <= tol["equality_deficit"])
        elif asym.star >= tol["asymmetry_gate"]:
            _check(checks, "sigma_h_below_ball", sol.sigma < sigma_B)
    else:
        _check(checks, "deficit_chain", ex["deficit_chain_margin"] >= -tol["chain"])
        _check(checks, "bernoulli", ex["bernoulli_margin"] >= -tol["chain"])
        if kind == "disc":
            _check(checks, "equality_deficit", abs(deficit) <= tol["equality_deficit"])
            _check(checks, "equality_asymmetry", asym.star <= tol["equality_deficit"])
        else:
            _check(checks, "ratio_positive", g > 0 and deficit / g > 0)
    metrics = {
        "n_vertices": poly.n,
        "area": poly.area,
        "perimeter": poly.perimeter,
        "asymmetry_star": asym.star,
        "asymmetry_sharp": asym.sharp,
        "sigma_ball": sigma_B,
        "sigma_h": sol.sigma,
        "fem_iterations": sol.iterations,
        "deficit_h": deficit,
        "ratio": deficit / g if g > 0 else None,
    }
    return {"index": index, "seed": seed, "kind": kind, "metrics": metrics, "checks": checks, "report": rep.to_dict()}


def _holed_row(name: str, cfg: SuiteConfig, index: int, kind: str) -> dict:
    tol = cfg.tolerances
    seed = cfg.seed + index
    dom = shell_domain(cfg.R1, cfg.R2) if kind == "shell" else class_instance(seed, cfg.R1, cfg.R2, cfg.vartheta)
    violations = dom.class_violations()
    mesh = mesh_domain(dom.outer, dom.hole, cfg.mesh_h)
    checks: dict = {}
    _check(checks, "class", not violations)
    metrics: dict = {
        "outer_vertices": dom.outer.n,
        "hole_vertices": dom.hole.n,
        "area": dom.area,
        "outer_perimeter": dom.outer.perimeter,
        "clearance": dom.clearance,
        "hole_inradius": dom.hole.profile.inradius,
    }
    rep = None
    if name == "robin":
        lam_A = robin_neumann_profile(cfg.p, 2, cfg.beta, cfg.R1, cfg.R2)
        lam_h = robin_neumann_fem(mesh, cfg.p, cfg.beta, boundary=OUTER).eigenvalue
        z = lam_A.scaled(lam_A.energy_lp ** (-1.0 / cfg.p), "volume_pnorm")
        hyb = hybrid_asymmetry(dom, build_web(z, dom.outer))
        deficit = lam_A.sigma - lam_h
        ratio = deficit / hyb.alpha_hyb if hyb.alpha_hyb > 0 else None
        _check(checks, "negative", lam_h < 0 and lam_A.sigma < 0)
        _check(checks, "shell_maximal", lam_A.sigma >= lam_h - tol["robin"])
        if kind != "shell":
            _check(checks, "ratio_nonnegative", ratio is not None and ratio >= 0)
        metrics.update(lambda_shell=lam_A.sigma, lambda_h=lam_h, deficit_h=deficit, alpha_hyb=hyb.alpha_hyb, A_tilde=hyb.A_tilde, alpha_out=hyb.alpha_out, ratio=ratio)
    else:
        prof = solve_shell(ProblemParams(cfg.p, cfg.q, 2, Shell(cfg.R1, cfg.R2)))
        sol = minimize_trace_quotient(mesh, cfg.p, cfg.q, boundary=OUTER)
        rep = comparison_chain_report(dom, prof, tol=tol["flag"], sigma_h=sol.sigma)
        deficit = prof.sigma - sol.sigma
        metrics.update(sigma_shell=prof.sigma, sigma_h=sol.sigma, fem_iterations=sol.iterations, deficit_h=deficit)
        if name == "mt3":
            _check(checks, "sigma_h_below_shell", sol.sigma <= prof.sigma + tol["mesh"])
            _check(checks, "inner_chain", rep.extras["inner_chain_margin"] >= -tol["chain"])
        else:
            na = nearly_annular_check(dom, cfg.R1, cfg.R2)
            metrics.update(
                alpha_hyb=rep.alpha_hyb,
                ratio=deficit / rep.alpha_hyb if rep.alpha_hyb > 0 else None,
                nearly_annular=na["nearly_annular"],
                norm_u=na["norm_u"],
                norm_v=na["norm_v"],
            )
            if kind == "shell":
                _check(checks, "equality_alpha", rep.alpha_hyb <= tol["equality_alpha"])
                _check(checks, "equality_deficit", abs(deficit) <= tol["equality_deficit"])
            else:
                _check(checks, "alpha_positive", rep.alpha_hyb > 0)
                if rep.alpha_hyb > tol["alpha_gate"]:
                    _check(checks, "deficit_positive", deficit > 0)
    row = {"index": index, "seed": seed, "kind": kind, "metrics": metrics, "checks": checks, "violations": violations}
    if rep is not None:
        row["report"] = rep.to_dict()
    return row


def run_instance(name: str, cfg_dict: dict, index: int) -> dict:
    """One suite row; index 0 of mt1/mt2/mt4 is the near-equality reference body."""
    cfg = SuiteConfig.from_dict(cfg_dict)
    reference = index == 0 and name in ("mt1", "mt2", "mt4")
    try:
        if name in ("mt1", "mt2"):
            return _convex_row(name, cfg, index, "disc" if reference else "random")
        return _holed_row(name, cfg, index, "shell" if reference else "random")
    except Exception as exc:  # noqa: BLE001 - logged as an instance failure
        return {"index": index, "seed": cfg.seed + index, "kind": "error", "metrics": {}, "checks": {}, "error": f"{type(exc).__name__}: {exc}"}


# ------------------------------------------------------------------ suite report
@dataclass
class SuiteReport:
    name: str
    config: dict
    rows: list
    aggregate: dict
    failures: list
    provenance: dict

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config": self.config,
            "rows": self.rows,
            "aggregate": self.aggregate,
            "failures": self.failures,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return dumps_stable(self.to_dict())


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"tracestab": own, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _ratio_stats(rows: list) -> dict:
    vals = [r["metrics"].get("ratio") for r in rows if r["kind"] == "random"]
    vals = [v for v in vals if v is not None]
    if not vals:
        return {"ratio_min": None, "ratio_median": None, "ratio_count": 0}
    return {"ratio_min": min(vals), "ratio_median": statistics.median(vals), "ratio_count": len(vals)}


def run_suite(name: str, config: SuiteConfig, threads: int = 1) -> SuiteReport:
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; expected one of {SUITES}")
    cfg = config.to_dict()
    # the reference body is an extra row in front of the sampled instances
    offset = 1 if name in ("mt1", "mt2", "mt4") else 0
    indices = list(range(config.sample_count + offset))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_instance, [name] * len(indices), [cfg] * len(indices), indices))
    else:
        rows = [run_instance(name, cfg, i) for i in indices]

    aggregate = _ratio_stats(rows)
    if name == "mt4":
        deficits = [r["metrics"]["deficit_h"] for r in rows if r["kind"] == "random"]
        delta0 = config.delta0 if config.delta0 is not None else (0.1 * max(deficits) if deficits else 0.0)
        aggregate["delta0"] = delta0
        for r in rows:
            m = r["metrics"]
            if "deficit_h" in m and m["deficit_h"] <= delta0:
                r["checks"]["nearly_annular_gate"] = bool(m["nearly_annular"])
    if name == "mt1":
        gated = [r for r in rows if r["kind"] == "random" and r["metrics"]["asymmetry_star"] >= config.tolerances["asymmetry_gate"]]
        aggregate["gated_instances"] = len(gated)
        aggregate["max_sigma_h"] = max((r["metrics"]["sigma_h"] for r in gated), default=None)

    failures = []
    for r in rows:
        if "error" in r:
            failures.append({"index": r["index"], "seed": r["seed"], "check": "error", "detail": r["error"]})
        for k, ok in r["checks"].items():
            if not ok:
                failures.append({"index": r["index"], "seed": r["seed"], "check": k, "detail": ""})
    provenance = {"suite": name, "seeds": [r["seed"] for r in rows], "versions": _versions()}
    return SuiteReport(name, cfg, rows, aggregate, failures, provenance)


# ------------------------------------------------------------------ emission
def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(obj, list):
        out[prefix] = ";".join(_cell(v) for v in obj)
    else:
        out[prefix] = obj


def _cell(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt_float(v)
    return str(v)


def report_csv(report: SuiteReport) -> str:
    """One line per row; columns are the union of flattened row keys in first-seen order."""
    flat = []
    columns: list[str] = []
    for r in report.rows:
        f: dict = {"suite": report.name}
        _flatten("", {k: v for k, v in r.items() if k != "violations"}, f)
        flat.append(f)
        for k in f:
            if k not in columns:
                columns.append(k)
    if not columns:
        columns = ["suite", "index", "seed", "kind"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for f in flat:
        w.writerow([_cell(f.get(c)) for c in columns])
    return buf.getvalue()


def emit_report(report: SuiteReport, fmt: str = "json", path: str | Path | None = None) -> str:
    """Serialize ``report``; write to ``path`` when given and return the text."""
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv":
        text = report_csv(report)
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def exit_code(report: SuiteReport) -> int:
    return EXIT_OK if report.passed else EXIT_FAIL


# ------------------------------------------------------------------ counterexample
def counterexample_4d(epsilon: float, C: float = 1.0) -> dict:
    """Thinning 4D cylinders: the would-be stability bound outgrows any trace deficit.

    ``Ω_ε = D_ε × [-(2π/ε² - ε/3), 2π/ε² - ε/3]`` with ``D_ε`` the 3-ball of
    radius ``ε``; its perimeter is ``16π²`` for every ``ε``, matching the
    4-ball of radius 2.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    eps = float(epsilon)
    half = 2 * math.pi / eps**2 - eps / 3
    ball3 = 4 / 3 * math.pi * eps**3
    perimeter = 4 * math.pi * eps**2 * (2 * half) + 2 * ball3
    volume = ball3 * 2 * half
    volume_closed = 16 / 3 * math.pi**2 * eps - 8 / 9 * math.pi * eps**4
    asym = 2 * math.pi / eps**2 - 2
    trivial = math.sqrt(volume / perimeter)
    bound = C * g_modulus(4, asym)
    sigma_B2 = sigma_ball(2.0, 2.0, 4, 2.0)
    return {
        "epsilon": eps,
        "perimeter": perimeter,
        "perimeter_closed": 16 * math.pi**2,
        "volume": volume,
        "volume_closed": volume_closed,
        "asymmetry_star": asym,
        "trivial_bound": trivial,
        "C": C,
        "stability_bound": bound,
        "orders_of_magnitude": math.log10(bound / trivial),
        "sigma_ball_R2": sigma_B2,
        "bound_exceeds_sigma_ball": bound > sigma_B2,
    }


__all__ = [
    "ConfigError",
    "DEFAULT_TOLERANCES",
    "EXIT_CONFIG",
    "EXIT_FAIL",
    "EXIT_OK",
    "SUITES",
    "SuiteConfig",
    "SuiteReport",
    "class_instance",
    "convex_instance",
    "counterexample_4d",
    "disc_polygon",
    "dumps_stable",
    "emit_report",
    "exit_code",
    "report_csv",
    "run_instance",
    "run_suite",
    "shell_domain",
]
