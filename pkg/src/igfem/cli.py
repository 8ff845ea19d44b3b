"""Convergence-study driver: run level sweeps for an element family, compare
against the matching baseline, and emit text/csv/json reports.

Errors are printed in fixed-point exponent style (0.614E-03) and observed
orders to one decimal, so text reports diff directly against reference
tables.  Serial runs are byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .analysis import ErrorRecord, convergence_orders, error_norms, interpolate_exact, FeFunction
from .assembly import FAMILIES, assemble_system, build_space, resolve_degree
from .mesh import build_crisscross_mesh
from .solver import SolverError, cg_solve, estimate_condition

__all__ = [
    "Problem",
    "PROBLEMS",
    "ExperimentConfig",
    "ConvergenceReport",
    "run_experiment",
    "emit_report",
    "fixed_sci",
    "main",
]

MAX_LEVEL = 9

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


@dataclass(frozen=True)
class Problem:
    """Analytic manufactured solution with exact forcing f = -Lap u."""

    name: str
    u: callable
    f: callable
    grad: callable


def _sine_u(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _sine_f(x, y):
    return 2.0 * np.pi ** 2 * np.sin(np.pi * x) * np.sin(np.pi * y)


def _sine_grad(x, y):
    return np.stack([np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
                     np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)], axis=-1)


def _poly4_u(x, y):
    return x * (1.0 - x) * y * (1.0 - y)


def _poly4_f(x, y):
    return 2.0 * (y * (1.0 - y) + x * (1.0 - x))


def _poly4_grad(x, y):
    return np.stack([(1.0 - 2.0 * x) * y * (1.0 - y),
                     x * (1.0 - x) * (1.0 - 2.0 * y)], axis=-1)


PROBLEMS = {
    "sine": Problem("sine", _sine_u, _sine_f, _sine_grad),
    "poly4": Problem("poly4", _poly4_u, _poly4_f, _poly4_grad),
}

_BASELINE = {
    "p2c_interp": ("pk_lagrange", 2),
    "p2nc_interp": ("p2nc_std", 2),
    "p3_interp": ("pk_lagrange", 3),
    "pk_interp": ("pk_lagrange", None),  # same degree
}


@dataclass
class ExperimentConfig:
    family: str
    degree: int | None = None
    levels: tuple = (2, 3, 4)
    problem: str = "sine"
    tol: float = 1e-13
    output_format: str = "text"
    compare: bool = False
    condition: bool = False
    parallel: bool = False

    def validate(self) -> None:
        self.degree = resolve_degree(self.family, self.degree)
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; "
                             f"registry has {sorted(PROBLEMS)}")
        if not self.levels:
            raise ValueError("level range is empty")
        lv = list(self.levels)
        if lv != sorted(set(lv)):
            raise ValueError("levels must be strictly increasing")
        if lv[0] < 1 or lv[-1] > MAX_LEVEL:
            raise ValueError(f"levels must lie in 1..{MAX_LEVEL}, got {lv}")
        if self.output_format not in ("text", "csv", "json"):
            raise ValueError(f"unknown format {self.output_format!r}")
        if not (0 < self.tol < 1e-2):
            raise ValueError(f"tol must be in (0, 1e-2), got {self.tol}")
        if self.compare and self.family not in _BASELINE:
            raise ValueError(f"family {self.family} has no matching baseline")

    def baseline(self) -> tuple[str, int]:
        fam, k = _BASELINE[self.family]
        return fam, self.degree if k is None else k

    def to_dict(self) -> dict:
        return {"family": self.family, "degree": self.degree,
                "levels": list(self.levels), "problem": self.problem,
                "tol": self.tol, "compare": self.compare,
                "condition": self.condition, "parallel": self.parallel}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(family=d["family"], degree=d["degree"],
                   levels=tuple(d["levels"]), problem=d["problem"],
                   tol=d["tol"], compare=d["compare"],
                   condition=d["condition"], parallel=d["parallel"])


_ROW_KEYS = ("level", "h", "free_dofs", "interp_dofs", "l2_ih", "h1_ih",
             "l2_true", "h1_true", "order_l2", "order_h1", "cg_iters")


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    rows: list = field(default_factory=list)           # dicts, _ROW_KEYS (+cond_est...)
    baseline_rows: list | None = None
    failures: list = field(default_factory=list)       # (level, message)

    def to_dict(self) -> dict:
        out = {"config": self.config.to_dict(), "rows": self.rows}
        if self.baseline_rows is not None:
            out["baseline_rows"] = self.baseline_rows
        if self.failures:
            out["failures"] = [list(fl) for fl in self.failures]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        return cls(config=ExperimentConfig.from_dict(d["config"]),
                   rows=d["rows"], baseline_rows=d.get("baseline_rows"),
                   failures=[tuple(fl) for fl in d.get("failures", [])])

    def __eq__(self, other):
        return isinstance(other, ConvergenceReport) and self.to_dict() == other.to_dict()


def _run_family(family: str, k: int, levels, problem: Problem, tol: float,
                condition: bool, parallel: bool, failures: list) -> list[dict]:
    workers = (os.cpu_count() or 1) if parallel else 1
    rows = []
    for level in levels:
        mesh = build_crisscross_mesh(level)
        space = build_space(mesh, family, k, workers=workers)
        system = assemble_system(space, f=problem.f, workers=workers)
        dm = space.dof_map
        try:
            if dm.n_free:
                x, stats = cg_solve(system.A, system.F, rel_tol=tol)
                iters = stats.iterations
            else:
                x = np.zeros(0)
                iters = 0
        except SolverError as err:
            failures.append((level, f"{family} level {level}: {err}"))
            print(f"solver failure: {family} level {level}: {err}", file=sys.stderr)
            continue
        u_h = FeFunction(space=space, free=x, interp=system.interp_coeffs)
        i_h = interpolate_exact(problem.u, problem.f, space)
        l2_ih, h1_ih = error_norms(i_h, u_h)
        l2_true, h1_true = error_norms(problem, u_h)
        record = ErrorRecord(level=level, h=mesh.h, free_dofs=dm.n_free,
                             interp_dofs=dm.n_interp, l2_ih=l2_ih, h1_ih=h1_ih,
                             l2_true=l2_true, h1_true=h1_true)
        row = {**vars(record), "cg_iters": iters}
        if condition and dm.n_free:
            est = estimate_condition(system.A)
            row["cond_est"] = est.condition
            row["lambda_max"] = est.lambda_max
            row["lambda_min"] = est.lambda_min_nonzero
        rows.append(row)
    for key, okey in (("l2_ih", "order_l2"), ("h1_ih", "order_h1")):
        orders = convergence_orders([r[key] for r in rows])
        for r, o in zip(rows, orders):
            # orders only between consecutive levels, as in the tables
            r[okey] = o
        for prev, r in zip(rows, rows[1:]):
            if r["level"] != prev["level"] + 1:
                r[okey] = None
    return rows


def run_experiment(config: ExperimentConfig) -> ConvergenceReport:
    """Run a level sweep (and optional baseline) per the configuration."""
    config.validate()
    problem = PROBLEMS[config.problem]
    failures: list = []
    rows = _run_family(config.family, config.degree, config.levels, problem,
                       config.tol, config.condition, config.parallel, failures)
    baseline_rows = None
    if config.compare:
        bfam, bk = config.baseline()
        baseline_rows = _run_family(bfam, bk, config.levels, problem,
                                    config.tol, config.condition,
                                    config.parallel, failures)
    return ConvergenceReport(config=config, rows=rows,
                             baseline_rows=baseline_rows, failures=failures)


def fixed_sci(v: float) -> str:
    """Fixed-point scientific notation with 3 digits: 6.14e-4 -> 0.614E-03."""
    if v == 0.0:
        return "0.000E+00"
    sign = "-" if v < 0 else ""
    a = abs(v)
    e = math.floor(math.log10(a)) + 1
    mant = a / 10.0 ** e
    digits = round(mant * 1000.0)
    if digits >= 1000:
        digits = 100
        e += 1
    return f"{sign}0.{digits:03d}E{e:+03d}"


def _fmt_order(o) -> str:
    return f"{o:4.1f}" if o is not None else "  - "


def _family_label(family: str, k: int) -> str:
    names = {
        "p2c_interp": "P2 interpolated conforming",
        "p2nc_interp": "P2 interpolated nonconforming",
        "p2nc_std": "P2 nonconforming",
        "p3_interp": "P3 interpolated",
        "pk_interp": f"P{k} interpolated",
        "pk_lagrange": f"P{k} Lagrange",
    }
    return names[family]


def _text_report(report: ConvergenceReport) -> str:
    cfg = report.config
    out = io.StringIO()
    groups = [(_family_label(cfg.family, cfg.degree), report.rows)]
    if report.baseline_rows is not None:
        bfam, bk = cfg.baseline()
        groups.append((_family_label(bfam, bk), report.baseline_rows))
    head = "grid  " + " | ".join(
        f"{label:^38s}" for label, _ in groups)
    sub = "      " + " | ".join(
        f"{'||e_h||_0    h^n   |e_h|_1      h^n':38s}" for _ in groups)
    print(f"# problem={cfg.problem} family={cfg.family} k={cfg.degree}", file=out)
    print(head, file=out)
    print(sub, file=out)
    by_level = {}
    for label, rows in groups:
        for r in rows:
            by_level.setdefault(r["level"], {})[label] = r
    for level in sorted(by_level):
        cells = []
        for label, _ in groups:
            r = by_level[level].get(label)
            if r is None:
                cell = "(solver failure)"
            else:
                cell = (f"{fixed_sci(r['l2_ih'])}  {_fmt_order(r['order_l2'])}"
                        f"  {fixed_sci(r['h1_ih'])}  {_fmt_order(r['order_h1'])}")
            cells.append(f"{cell:<38s}")
        print(f"{level:4d}  " + " | ".join(cells), file=out)
    if cfg.condition:
        print("# condition estimates (lambda_max / lambda_min_nonzero / cond):", file=out)
        for label, rows in groups:
            for r in rows:
                if "cond_est" in r:
                    print(f"#   {label} level {r['level']}: "
                          f"{fixed_sci(r['lambda_max'])} / {fixed_sci(r['lambda_min'])}"
                          f" / {fixed_sci(r['cond_est'])}", file=out)
    return out.getvalue()


def _csv_report(report: ConvergenceReport) -> str:
    out = io.StringIO()
    extra = ["cond_est"] if report.config.condition else []
    fields = ["family"] + list(_ROW_KEYS) + extra
    w = csv.DictWriter(out, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    groups = [(report.config.family, report.rows)]
    if report.baseline_rows is not None:
        groups.append((report.config.baseline()[0], report.baseline_rows))
    for fam, rows in groups:
        for r in rows:
            w.writerow({"family": fam, **r})
    return out.getvalue()


def emit_report(report: ConvergenceReport, output_format: str | None = None,
                destination=None) -> str:
    """Render the report and write it to `destination` (path, file, or None)."""
    fmt = output_format or report.config.output_format
    if fmt == "text":
        payload = _text_report(report)
    elif fmt == "csv":
        payload = _csv_report(report)
    elif fmt == "json":
        payload = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if destination is None:
        return payload
    if hasattr(destination, "write"):
        destination.write(payload)
        return payload
    try:
        with open(destination, "w") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write report to {destination}: {exc}") from exc
    return payload


def _parse_levels(text: str) -> tuple[int, ...]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return (int(text),)


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="igfem",
        description="Poisson convergence studies with interpolated Galerkin elements")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--degree", type=int, default=None,
                   help="polynomial degree (pk families only)")
    p.add_argument("--levels", default="2..4", metavar="A..B",
                   help="inclusive level range, e.g. 4..7")
    p.add_argument("--problem", default="sine", help="problem registry name")
    p.add_argument("--format", dest="output_format", default="text",
                   choices=("text", "csv", "json"))
    p.add_argument("--out", default=None, metavar="PATH",
                   help="write the report here instead of stdout")
    p.add_argument("--compare", action="store_true",
                   help="run the matching baseline family side by side")
    p.add_argument("--condition", action="store_true",
                   help="estimate extreme eigenvalues of each system")
    p.add_argument("--tol", type=float, default=1e-13,
                   help="CG relative residual tolerance")
    p.add_argument("--parallel", action="store_true",
                   help="thread the element loops (results are reduced "
                        "in element order and stay deterministic)")
    return p


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        levels = _parse_levels(args.levels)
        config = ExperimentConfig(
            family=args.family, degree=args.degree, levels=levels,
            problem=args.problem, tol=args.tol,
            output_format=args.output_format, compare=args.compare,
            condition=args.condition, parallel=args.parallel)
        config.validate()
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_experiment(config)
    try:
        emit_report(report, args.output_format,
                    args.out if args.out else sys.stdout)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_SOLVER if report.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
