"""Command-line front end: ``squeeze-forge build|verify|certificate`` and ``squeeze-cert``.

Exit codes: 0 success, 1 violations or unverified prerequisites, 2 search
exhausted, 3 I/O, parse or configuration errors.  Every failure is also
written to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curvature import curvature_profile_rows, pinch_check, pinch_interval, stack_annuli, stack_profile
from .domain import DomainModel
from .errors import CertificateRefused, HypothesisViolated, InvariantViolation, NotFound, SearchExhausted
from .graphs import seam_jumps
from .reports import CheckReport, atomic_write_text, csv_text, dumps_json
from .schedule import (Schedule, SweepConfig, build_schedule, convexity_check, exhaustion_report,
                       find_m, find_n, nested_domains_check)
from .squeeze import SEAM_TOL, build_certificate, cap_inside_check, outer_contains_check

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_EXHAUSTED = 2
EXIT_IO = 3

THREADS_ENV = "SQUEEZE_FORGE_THREADS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    n: int = 4
    k0: int = 10
    depth: int = 6
    m: int | None = None
    seed: int = 0
    grid: int = 512
    pairs: int = 100_000
    samples: int = 2000
    points: int = 10
    out: str | None = None
    schedule: str | None = None

    @property
    def complex_interpretable(self) -> bool:
        """Even ``n`` reads as ``C^(n/2)``, the setting of the squeezing bounds."""
        return self.n % 2 == 0

    @property
    def sweep(self) -> SweepConfig:
        return SweepConfig(grid=self.grid, dim=self.n - 1)

    def problems(self) -> list[str]:
        out = []
        if self.n < 2:
            out.append("--n must be at least 2")
        if self.k0 < 2:
            out.append("--k0 must be at least 2")
        if self.depth < 1:
            out.append("--depth must be at least 1")
        if self.m is not None and self.m < 1:
            out.append("--m must be positive")
        if self.grid < 2:
            out.append("--grid must be at least 2")
        if self.pairs < 1:
            out.append("--pairs must be positive")
        if self.samples < 1:
            out.append("--samples must be positive: randomized hypotheses cannot be skipped")
        if self.points < 1:
            out.append("--points must be positive")
        return out


def _diag(**fields) -> None:
    print(json.dumps(fields, sort_keys=True), file=sys.stderr)


def _threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return nullcontext()
    try:
        limit = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if limit < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=limit)


def _load_schedule(path) -> tuple[Schedule, list[str]]:
    """Parse without validating, so a tampered file still reaches the checks that name its fault."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise ValueError(f"{path}: empty schedule file")
    sched = Schedule.from_dict(json.loads(text), validate=False)
    return sched, sched.invariant_problems()


# ---------------------------------------------------------------------------
# build


def cmd_build(cfg: RunConfig) -> int:
    k_hi = cfg.k0 + cfg.depth - 1
    try:
        if cfg.m is None:
            m, n_start = find_m((cfg.k0, k_hi), cfg=cfg.sweep)
        else:
            m = cfg.m
            n_start = find_n(m, cfg.k0, k_hi, cfg=cfg.sweep)
        sched = build_schedule(cfg.k0, cfg.depth, m, n_start, cfg=cfg.sweep)
    except SearchExhausted as exc:
        _diag(error="search-exhausted", k=exc.k, m=exc.m, halvings=exc.halvings, message=str(exc))
        return EXIT_EXHAUSTED
    except NotFound as exc:
        _diag(error="not-found", message=str(exc))
        return EXIT_EXHAUSTED
    except ValueError as exc:
        _diag(error="search-exhausted", message=str(exc))
        return EXIT_EXHAUSTED
    out = Path(cfg.out or "schedule.json")
    atomic_write_text(out, sched.to_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def run_suites(sched: Schedule, cfg: RunConfig, problems: list[str] | None = None) -> dict[str, CheckReport]:
    """Every verification suite on ``sched``; the result maps suite names to merged reports."""
    problems = list(sched.invariant_problems() if problems is None else problems)
    stack = sched.stack(validate=False)
    dom = DomainModel(stack, sched.chart_radius, cfg.n)
    problems += stack.nesting_problems() + dom.chart_problems()
    suites = {"schedule": CheckReport("schedule", 1, len(problems), -float(len(problems)),
                                      [{"problem": p} for p in problems])}
    jumps = seam_jumps(stack)
    suites["seams"] = CheckReport("seams", len(jumps), sum(j["jump"] > SEAM_TOL for j in jumps),
                                  -max((j["jump"] for j in jumps), default=0.0), jumps)
    suites["pinch"] = pinch_check(stack, sched.m, grid=cfg.grid, dim=cfg.n - 1)
    suites["convexity"] = convexity_check(dom, cfg.pairs, cfg.seed)
    suites["exhaustion"] = exhaustion_report(stack, cfg.samples, cfg.seed, cfg.n - 1)
    suites["nested"] = nested_domains_check(dom, cfg.samples, cfg.seed)
    cap = CheckReport("cap")
    outer = CheckReport("outer")
    for e in sched.entries:
        stage = dom.truncated(e.k + 1)
        cap = cap.merge(cap_inside_check(stage, e.k, sched.m, e.delta, cfg.samples, cfg.seed, cfg.points))
        outer = outer.merge(outer_contains_check(stage, e.k, sched.m, cfg.samples, cfg.seed, e.delta, cfg.points))
    suites["cap"] = cap
    suites["outer"] = outer
    return suites


def _profile_radii(stack, per_annulus: int = 64) -> np.ndarray:
    parts = []
    for _, r_lo, r_hi in stack_annuli(stack):
        lo = r_lo if r_lo > 0 else r_hi * 1e-3
        parts.append(np.geomspace(lo, r_hi, per_annulus))
    return np.unique(np.concatenate(parts))


def write_verify_outputs(sched: Schedule, suites: dict[str, CheckReport], cfg: RunConfig, out: Path) -> None:
    from . import plotting

    stack = sched.stack(validate=False)
    atomic_write_text(out / "summary.json", dumps_json({
        "schedule": sched.to_dict(), "n": cfg.n, "complex_interpretable": cfg.complex_interpretable,
        "seed": cfg.seed, "suites": {k: v.summary() for k, v in suites.items()},
    }))
    pinch = suites["pinch"].details
    atomic_write_text(out / "pinch.csv", csv_text(
        ["k", "r_lo", "r_hi", "kappa_min", "kappa_max", "lower", "upper", "ok"],
        [(d["k"], d["r_lo"], d["r_hi"], d["kappa_min"], d["kappa_max"], d["lower"], d["upper"], d["ok"])
         for d in pinch]))
    atomic_write_text(out / "convexity.csv", csv_text(
        ["window", "pairs", "violations", "min_clearance"],
        [(d["window"], d["pairs"], d["violations"], d["min_clearance"]) for d in suites["convexity"].details]))
    atomic_write_text(out / "exhaustion.csv", csv_text(
        ["j", "violations"], [(d["j"], d["violations"]) for d in suites["exhaustion"].details]))
    atomic_write_text(out / "caps.csv", csv_text(
        ["check", "k", "radius", "base_norm", "violations"],
        [(name, d["k"], d["radius"], float(np.linalg.norm(d["base"])), d["violations"])
         for name in ("cap", "outer") for d in suites[name].details]))
    rows = curvature_profile_rows(f"stack[{sched.k0}..{sched.k0 + sched.depth - 1}]",
                                  stack_profile(stack), _profile_radii(stack), cfg.n - 1)
    atomic_write_text(out / "curvature_profile.csv",
                      csv_text(["surface", "radius", "kappa_min", "kappa_max"], rows))
    bands = [(k, r_lo, r_hi, *pinch_interval(k, sched.m)) for k, r_lo, r_hi in stack_annuli(stack)]
    plotting.plot_curvature_profile(rows, bands, out / "curvature_profile.png",
                                    f"principal curvatures, m={sched.m}")
    plotting.plot_convexity(suites["convexity"].details, out / "convexity.png", "midpoint clearance")


def cmd_verify(cfg: RunConfig) -> int:
    if not cfg.schedule:
        raise ConfigError("--schedule is required")
    sched, problems = _load_schedule(cfg.schedule)
    try:
        suites = run_suites(sched, cfg, problems)
    except InvariantViolation as exc:
        _diag(error="violations", suite="schedule", message=str(exc))
        return EXIT_VIOLATIONS
    write_verify_outputs(sched, suites, cfg, Path(cfg.out or "reports"))
    failed = [name for name, rep in suites.items() if not rep.ok]
    for name in failed:
        rep = suites[name]
        _diag(error="violations", **{**rep.summary(), "suite": name})
    return EXIT_VIOLATIONS if failed else EXIT_OK


# ---------------------------------------------------------------------------
# certificate


def cmd_certificate(cfg: RunConfig) -> int:
    from . import plotting

    if not cfg.schedule:
        raise ConfigError("--schedule is required")
    sched, _ = _load_schedule(cfg.schedule)
    try:
        stack = sched.stack(validate=False)
        dom = DomainModel(stack, sched.chart_radius, cfg.n)
        cert = build_certificate(sched, dom, samples=cfg.samples, seed=cfg.seed, grid=cfg.grid,
                                 points=cfg.points)
    except CertificateRefused as exc:
        for name in exc.failing:
            _diag(error="certificate-refused", check=name, message=str(exc))
        return EXIT_VIOLATIONS
    except (InvariantViolation, HypothesisViolated) as exc:
        _diag(error="certificate-refused", check="schedule", message=str(exc))
        return EXIT_VIOLATIONS
    out = Path(cfg.out or "certificate.json")
    atomic_write_text(out, dumps_json(cert.to_dict()))
    rows = [(k, b, 1.0 - 2.0 * sched.m / (k + sched.m)) for k, b in cert.bound_rows()]
    csv_path = out.with_name(out.stem + "_bounds.csv")
    atomic_write_text(csv_path, csv_text(["k", "bound", "floor"], rows))
    plotting.plot_bounds([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                         out.with_name(out.stem + "_bounds.png"), f"certified shell bounds, m={sched.m}")
    return EXIT_OK


COMMANDS = {"build": cmd_build, "verify": cmd_verify, "certificate": cmd_certificate}


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, *, schedule: bool) -> None:
    p.add_argument("--n", type=int, default=4, help="ambient real dimension (default 4, i.e. C^2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=512, help="radial sweep resolution")
    p.add_argument("--out", default=None, help="output file (build, certificate) or directory (verify)")
    if schedule:
        p.add_argument("--schedule", required=True, help="schedule JSON written by build")
        p.add_argument("--samples", type=int, default=2000, help="samples per randomized check")
        p.add_argument("--points", type=int, default=10, help="boundary points per shell")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squeeze-forge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", help="search gluing radii and write a schedule")
    b.add_argument("--k0", type=int, default=10)
    b.add_argument("--depth", type=int, default=6)
    b.add_argument("--m", type=int, default=None, help="pinching margin (default: smallest that works)")
    _common(b, schedule=False)
    v = sub.add_parser("verify", help="run every check on a schedule and write CSV reports")
    _common(v, schedule=True)
    v.add_argument("--pairs", type=int, default=100_000, help="midpoint tests for convexity")
    c = sub.add_parser("certificate", help="write the squeezing-bound certificate")
    _common(c, schedule=True)
    return parser


def cert_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="squeeze-cert", description="write the squeezing-bound certificate")
    _common(p, schedule=True)
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__}
    return RunConfig(**fields)


def _run(command: str, ns: argparse.Namespace) -> int:
    try:
        cfg = _config(ns)
        problems = cfg.problems()
        if problems:
            for p in problems:
                _diag(error="config", message=p)
            return EXIT_IO
        with _threads():
            return COMMANDS[command](cfg)
    except ConfigError as exc:
        _diag(error="config", message=str(exc))
        return EXIT_IO
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _diag(error="io", kind=type(exc).__name__, message=str(exc))
        return EXIT_IO


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    return _run(ns.command, ns)


def cert_main(argv=None) -> int:
    return _run("certificate", cert_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
