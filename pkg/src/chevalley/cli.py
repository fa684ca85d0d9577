"""Command-line orchestration of the verification suites.

Every subcommand runs one family of checks against one group type and emits
a SuiteReport (JSON, CSV or text).  All randomness flows from the single
config seed through counter-based generators, so a fixed config reproduces
its report byte for byte (the wall-clock runtime field aside).

Exit codes: 0 all checks passed; 1 a check failed or an anomaly was found;
2 usage or capability error; 3 cache integrity error; 4 convergence error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coxeter import build_root_system, coxeter_type, enumerate_strata
from .errors import ChevalleyError, UsageError
from .invariants import (
    basic_invariants,
    numeric_jacobian_rank,
    save_basis,
    verify_invariance,
)
from .jacobian import (
    det_vanishing_calibration,
    verify_det_factorization,
    verify_stratum_rank,
)
from .probe import (
    critical_points,
    fiber_connectivity,
    fiber_value_interval,
    random_regular_target,
    sample_fiber,
)
from .regularity import (
    build_chamber_mesh,
    build_image_graph,
    envelope_functions,
    whitney_ratio,
    whitney_study,
)


SCHEMA_VERSION = 1

EXPLAIN = {
    "invariants": "Constructs a basic invariant system for the group: correct "
                  "degree table, exact invariance under the generators, "
                  "algebraically independent (Jacobian of full rank), and "
                  "injective on the open chamber.",
    "verify-jacobian": "The Jacobian determinant of the invariant map equals a "
                       "nonzero constant times the product of the linear forms "
                       "of all reflection hyperplanes, and vanishes exactly on "
                       "their union.",
    "verify-statement": "On every dimension-k face of the fundamental chamber "
                        "the invariant map has rank exactly k: some k x k minor "
                        "of the first k rows survives while every (k+1) x (k+1) "
                        "minor vanishes.",
    "morse": "On a generic fiber of the first k invariants, the next invariant "
             "is a Morse function: its constrained critical points lie on "
             "dimension-k faces, satisfy the multiplier equations, and have a "
             "nondegenerate projected Hessian.",
    "fiber": "Every nonempty fiber of the first k invariants inside the closed "
             "chamber is connected, and the values of the next invariant over "
             "it fill an interval.",
    "whitney": "The image of a closed ball under the invariant map is Whitney "
               "1-regular: the geodesic distance inside the image is bounded by "
               "a constant multiple of the Euclidean distance.",
    "report": "Re-emits a stored suite report in another format.",
    "all": "Runs every verification suite for the type at desk scale.",
}


@dataclass
class RunConfig:
    type_spec: str = "B2"
    command: str = "all"
    seed: int = 1
    tol_zero: float = 1e-9
    tol_rank: float = 1e-8
    eps_fiber: float = 1e-9
    radius: float = 1.0
    pitch: float = 0.05
    samples: int = 100
    pairs: int = 2000
    n_points: int = 1000
    k: int | None = None
    target: list[float] | None = None
    cache_dir: str | None = None
    out: str | None = None
    fmt: str = "json"
    pairs_out: str | None = None
    dump_samples: bool = False

    def validate(self):
        for name in ("tol_zero", "tol_rank", "eps_fiber", "radius", "pitch"):
            if getattr(self, name) <= 0:
                raise UsageError(f"config field {name} must be positive")
        for name in ("samples", "pairs", "n_points"):
            if getattr(self, name) <= 0:
                raise UsageError(f"config field {name} must be positive")
        if self.fmt not in ("json", "csv", "text"):
            raise UsageError(f"unknown report format {self.fmt!r}")
        return self

    def content_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SuiteReport:
    config: RunConfig
    checks: list[dict] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def all_passed(self) -> bool:
        return all(c["status"] == "pass" for c in self.checks)

    def add(self, name: str, status: str, **metrics):
        self.checks.append({"name": name, "status": status, "metrics": metrics})

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "provenance": {
                "type": self.config.type_spec,
                "command": self.config.command,
                "seed": self.config.seed,
                "version": __version__,
                "config_hash": self.config.content_hash(),
            },
            "checks": self.checks,
            "all_passed": self.all_passed,
            "runtime_s": round(self.runtime_s, 3),
        }


def emit_report(report: SuiteReport, fmt: str = "json") -> bytes:
    doc = report.to_dict()
    if fmt == "json":
        return (json.dumps(doc, indent=1, default=_json_default) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["check", "status", "metrics"])
        for c in doc["checks"]:
            w.writerow([c["name"], c["status"],
                        json.dumps(c["metrics"], sort_keys=True, default=_json_default)])
        return buf.getvalue().encode()
    if fmt == "text":
        lines = [
            f"type={doc['provenance']['type']} command={doc['provenance']['command']} "
            f"seed={doc['provenance']['seed']}"
        ]
        for c in doc["checks"]:
            lines.append(f"[{c['status'].upper():7s}] {c['name']}")
        lines.append("ALL PASSED" if doc["all_passed"] else "FAILURES PRESENT")
        return ("\n".join(lines) + "\n").encode()
    raise UsageError(f"unknown report format {fmt!r}")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------------------
# suite pieces
# ---------------------------------------------------------------------------


def _suite_invariants(cfg: RunConfig, rep: SuiteReport, ctx: dict):
    basis, rs = ctx["basis"], ctx["rs"]
    ct = rs.ctype
    ok = basis.degrees == ct.degrees
    rep.add("degree-table", "pass" if ok else "fail",
            degrees=list(basis.degrees), coxeter_number=ct.coxeter_number)
    ok = len(rs.positive_f) == ct.n_positive_roots
    rep.add("root-count", "pass" if ok else "fail",
            roots=len(rs.positive_f), expected=ct.n_positive_roots)
    # exact substitution is affordable up to degree ~12; the degree-30 H4
    # system is checked numerically, matching how its data file is verified
    exact_ok = rs.exact and ct.coxeter_number <= 12
    gens = rs.simple_reflections if exact_ok else list(rs.simple_reflections_f)
    inv_ok = verify_invariance(basis, gens)
    rep.add("invariance", "pass" if inv_ok else "fail", exact=exact_ok)
    rank = numeric_jacobian_rank(basis, seed=cfg.seed)
    rep.add("jacobian-rank", "pass" if rank == ct.dim else "fail", rank=rank)

    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    collisions = 0
    for _ in range(200):
        x = rs.to_chamber(rng.normal(size=ct.dim))
        y = rs.to_chamber(rng.normal(size=ct.dim))
        if np.linalg.norm(x - y) < 1e-6:
            continue
        px, py = basis.compiled.P(np.stack([x, y]))
        if np.linalg.norm(px - py) <= 1e-9 * (1 + np.linalg.norm(px)):
            collisions += 1
    rep.add("chamber-injectivity", "pass" if collisions == 0 else "fail",
            collisions=collisions, pairs=200)
    if cfg.out and cfg.command == "invariants":
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        save_basis(basis, out / f"{ct.canonical_key}.json")


def _suite_jacobian(cfg: RunConfig, rep: SuiteReport, ctx: dict):
    basis, rs = ctx["basis"], ctx["rs"]
    fac = verify_det_factorization(basis, rs, seed=cfg.seed)
    rep.add("det-factorization", "pass", **fac.to_dict())
    cal = det_vanishing_calibration(basis, rs, n_points=2000, seed=cfg.seed)
    ok = (cal["ratio_spread"] <= 1e-8
          and cal["det_near_wall_max"] <= cal["det_near_wall_bound"]
          and cal["small_det_form_ok"])
    rep.add("det-vanishing-locus", "pass" if ok else "fail", **cal)


def _suite_statement(cfg: RunConfig, rep: SuiteReport, ctx: dict):
    basis, rs = ctx["basis"], ctx["rs"]
    strata = [s for s in ctx["strata"] if s.dim >= 1]
    worst = None
    all_ok = True
    for s in strata:
        r = verify_stratum_rank(basis, rs, s, samples=cfg.samples,
                                seed=cfg.seed, tol=cfg.tol_zero)
        status = "pass" if r.passed else "anomaly"
        all_ok &= r.passed
        if worst is None or r.max_bordering_minor > worst:
            worst = r.max_bordering_minor
        rep.add(f"stratum-rank:{r.stratum_id}", status, **r.to_dict())
    rep.add("stratum-rank-summary", "pass" if all_ok else "fail",
            strata=len(strata), max_bordering=worst)


def _suite_morse(cfg: RunConfig, rep: SuiteReport, ctx: dict):
    basis, rs = ctx["basis"], ctx["rs"]
    n = basis.nvars
    ks = [cfg.k] if cfg.k else list(range(1, n))
    for k in ks:
        if cfg.target is not None and cfg.k is not None:
            m, = (np.asarray(cfg.target, dtype=float),)
        else:
            m, _ = random_regular_target(basis, rs, k, cfg.seed + 17 * k)
        cps = critical_points(basis, rs, k, m, seed=cfg.seed, strata=ctx["strata"])
        anomalies = [cp for cp in cps if cp.anomaly]
        status = "pass" if cps and not anomalies else ("anomaly" if anomalies else "fail")
        extra = {"critical_points": [cp.to_dict() for cp in cps]} if cfg.dump_samples else {}
        rep.add(
            f"morse:k={k}", status,
            k=k, target=[float(v) for v in m], n_critical=len(cps),
            values=[cp.value for cp in cps],
            max_residual=max((cp.residual for cp in cps), default=None),
            max_bordering=max((cp.bordering_minor_max for cp in cps), default=None),
            anomalies=[cp.to_dict() for cp in anomalies],
            **extra,
        )


def _suite_fiber(cfg: RunConfig, rep: SuiteReport, ctx: dict):
    basis, rs = ctx["basis"], ctx["rs"]
    n = basis.nvars
    ks = [cfg.k] if cfg.k else list(range(1, n))
    for k in ks:
        if cfg.target is not None and cfg.k is not None:
            m = np.asarray(cfg.target, dtype=float)
            hint = None
        else:
            m, hint = random_regular_target(basis, rs, k, cfg.seed + 29 * k)
        fs = sample_fiber(basis, rs, k, m, n_points=cfg.n_points,
                          seed=cfg.seed, x_hint=hint)
        if fs.empty:
            rep.add(f"fiber:k={k}", "pass", k=k, target=[float(v) for v in m],
                    empty=True)
            continue
        comps = fiber_connectivity(fs)
        lo, hi, gap = fiber_value_interval(fs, basis, k) if k < n else (None, None, None)
        status = "pass" if comps == 1 else "anomaly"
        extra = {"sample": fs.to_dict()} if cfg.dump_samples else {}
        rep.add(f"fiber:k={k}", status, k=k, target=[float(v) for v in m],
                n_points=len(fs.points), components=comps,
                value_interval=[lo, hi], max_rel_gap=gap,
                residual_max=fs.residual_max, **extra)


def _suite_whitney(cfg: RunConfig, rep: SuiteReport, ctx: dict):
    basis, rs = ctx["basis"], ctx["rs"]
    if cfg.pairs_out:
        mesh = build_chamber_mesh(rs, cfg.radius, cfg.pitch)
        g = build_image_graph(basis, rs, mesh)
        table: list = []
        whitney_ratio(g, pairs=cfg.pairs, seed=cfg.seed, pair_table=table)
        with open(cfg.pairs_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["source", "target", "euclid", "geodesic", "ratio"])
            w.writerows(table)
    study = whitney_study(basis, rs, cfg.radius, cfg.pitch,
                          pairs=cfg.pairs, seed=cfg.seed)
    stable = study.refinement[-1]["max_ratio_rel_change"] <= 0.05
    lower = study.min_ratio >= 1 - 1e-6
    ok = stable and lower and np.isfinite(study.max_ratio)
    rep.add("whitney-ratio", "pass" if ok else "fail", **study.to_dict())
    # envelopes and the prism containment over the first projection
    if basis.nvars >= 2:
        env = envelope_functions(basis, rs, 1, cfg.radius, h=cfg.pitch)
        ok = env.containment_violations == 0
        rep.add("envelope-containment", "pass" if ok else "fail", **env.to_dict())


_SUITES = {
    "invariants": [_suite_invariants],
    "verify-jacobian": [_suite_jacobian],
    "verify-statement": [_suite_statement],
    "morse": [_suite_morse],
    "fiber": [_suite_fiber],
    "whitney": [_suite_whitney],
    "all": [_suite_invariants, _suite_jacobian, _suite_statement,
            _suite_morse, _suite_fiber, _suite_whitney],
}


def run_suite(cfg: RunConfig) -> SuiteReport:
    cfg.validate()
    if cfg.command not in _SUITES:
        raise UsageError(f"unknown command {cfg.command!r}")
    t0 = time.monotonic()
    rep = SuiteReport(cfg)
    basis = basic_invariants(cfg.type_spec, cache_dir=cfg.cache_dir)
    rs = build_root_system(coxeter_type(cfg.type_spec))
    ctx = {"basis": basis, "rs": rs, "strata": enumerate_strata(rs)}
    for piece in _SUITES[cfg.command]:
        piece(cfg, rep, ctx)
    rep.runtime_s = time.monotonic() - t0
    return rep


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chevalley",
        description="Verification suites for invariant maps of finite reflection groups.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("invariants", "verify-jacobian", "verify-statement",
                 "morse", "fiber", "whitney", "all"):
        p = sub.add_parser(name, help=EXPLAIN[name])
        p.add_argument("--type", default="B2", dest="type_spec",
                       help="group type: A3, B2, D6, I2:7, G2, H3, H4, F4")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--samples", type=int, default=100)
        p.add_argument("--pairs", type=int, default=2000)
        p.add_argument("--n", type=int, default=1000, dest="n_points")
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--m", type=float, nargs="+", default=None, dest="target")
        p.add_argument("--a", type=float, default=1.0, dest="radius")
        p.add_argument("--h", type=float, default=0.05, dest="pitch")
        p.add_argument("--tol", type=float, default=1e-9, dest="tol_zero")
        p.add_argument("--cache-dir", default=None, dest="cache_dir")
        p.add_argument("--out", default=None, help="write the report (or cache) here")
        p.add_argument("--format", default="json", dest="fmt",
                       choices=("json", "csv", "text"))
        p.add_argument("--pairs-out", default=None, dest="pairs_out",
                       help="whitney: write a per-pair CSV (euclid, geodesic, ratio)")
        p.add_argument("--dump-samples", action="store_true", dest="dump_samples",
                       help="fiber/morse: embed full sample and critical-point dumps")
        p.add_argument("--explain", action="store_true",
                       help="print the claim this command checks and exit")
    p = sub.add_parser("report", help=EXPLAIN["report"])
    p.add_argument("--in", dest="infile", required=False)
    p.add_argument("--format", default="text", dest="fmt",
                   choices=("json", "csv", "text"))
    p.add_argument("--explain", action="store_true")
    return ap


def _config_from_args(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
    cfg = RunConfig(**{**base}) if base else RunConfig()
    cfg.command = args.command
    defaults = RunConfig()
    for name in ("type_spec", "seed", "samples", "pairs", "n_points", "k",
                 "target", "radius", "pitch", "tol_zero", "cache_dir", "out", "fmt",
                 "pairs_out", "dump_samples"):
        if hasattr(args, name):
            val = getattr(args, name)
            if val != getattr(defaults, name) or name not in base:
                setattr(cfg, name, val)
    return cfg.validate()


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        if getattr(args, "explain", False):
            print(EXPLAIN[args.command])
            return 0
        if args.command == "report":
            if not args.infile:
                raise UsageError("report needs --in <suite-report.json>")
            doc = json.loads(Path(args.infile).read_text())
            cfg = RunConfig(type_spec=doc["provenance"]["type"],
                            command=doc["provenance"]["command"],
                            seed=doc["provenance"]["seed"])
            rep = SuiteReport(cfg, checks=doc["checks"],
                              runtime_s=doc.get("runtime_s", 0.0))
            sys.stdout.write(emit_report(rep, args.fmt).decode())
            return 0
        cfg = _config_from_args(args)
        rep = run_suite(cfg)
        payload = emit_report(rep, cfg.fmt)
        if cfg.out and cfg.command != "invariants":
            Path(cfg.out).write_bytes(payload)
        else:
            sys.stdout.write(payload.decode())
        return 0 if rep.all_passed else 1
    except ChevalleyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
