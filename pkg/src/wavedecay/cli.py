"""Command-line experiment runner.

    wavedecay run <config> [--out DIR]
    wavedecay sweep <config> --param KEY --values V1,V2,... [--out DIR]
    wavedecay certify-potential <config> [--out DIR]
    wavedecay fit <series.csv> --window A,B [--gamma G]

Exit codes: 0 every audit passed, 2 some audit failed, 1 runtime or input error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .audit import AuditEntry, AuditReport
from .config import ConfigError, RunConfig, load_config, serialize, with_parameter
from .diagnostics.energy import morawetz_residual
from .diagnostics.fitting import decay_fit
from .diagnostics.suite import AUDITS, run_audits
from .field import Grid2D
from .initial_data import make_dataset
from .potential import certify_far_field, certify_energy_growth, certify_near_field, far_field_points, newtonian_potential
from .solver import run

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_certify_potential", "cmd_fit", "SERIES_COLUMNS", "AUDIT_COLUMNS"]

log = logging.getLogger("wavedecay")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
SERIES_COLUMNS = ("t", "E_total", "E_loc", "E_ext", "l2_norm", "weighted_ext", "support_radius",
                  "morawetz_residual", "K_integral")
AUDIT_COLUMNS = ("name", "anchor", "lhs", "rhs", "margin", "pass")
SUMMARY_COLUMNS = ("param", "value", "exit_code", "slope", "prefactor", "C_star", "max_morawetz_residual",
                   "audits_passed")


def _num(x: float) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _audit_rows(entries):
    return [(e.name, e.anchor, _num(e.lhs), _num(e.rhs), _num(e.margin), _num(e.passed)) for e in entries]


def _entry_line(e: AuditEntry) -> str:
    status = "PASS" if e.passed else "FAIL"
    line = (f"{status}  {e.name} [{e.anchor}]  lhs={_num(e.lhs)}  rhs={_num(e.rhs)}  "
            f"slack={_num(e.slack)}  margin={_num(e.margin)}")
    return line + (f"  ({e.detail})" if e.detail else "")


def _refinement_entry(cfg: RunConfig) -> AuditEntry:
    """Observed order of the Morawetz residual between dx and 2 dx at the final time."""
    res = []
    for factor in (2.0, 1.0):
        sub = with_parameter(cfg, "solver.dx", _num(cfg.dx * factor))
        r = run(sub.simulation())
        res.append(abs(morawetz_residual(r.ledgers[-1], r.records[-1])))
    order = math.log2(res[0] / res[1]) if res[1] > 0 and res[0] > 0 else math.inf
    return AuditEntry.check("morawetz_refinement", "Morawetz identity under refinement", 1.5, order, 0.0,
                            f"residuals {_num(res[0])} at 2dx, {_num(res[1])} at dx")


def _write_report(path: Path, cfg: RunConfig, report: AuditReport, result) -> None:
    out = ["wavedecay run report", "", "configuration:"]
    out += ["  " + line for line in serialize(cfg).splitlines() if line]
    out += ["", f"grid: {result.grid.nodes_per_side} nodes per side, spacing {_num(result.grid.spacing)}, "
                f"half width {_num(result.grid.half_width)}",
            f"time step: {_num(result.dt)}  samples: {len(result.records)}",
            f"coefficient: family {result.K.family}, k_m {_num(result.K.k_m)}, k0 {_num(result.K.k0)}, "
            f"k1 {_num(result.K.k1)}, r0 {_num(result.K.r0)}, gamma0 {result.K.gamma0}, eta0 {_num(result.K.eta0)}",
            f"data: {result.data.preset}, moment {_num(result.data.moment)}, E(0) {_num(result.E0)}, J0 {_num(result.J0)}",
            "", "audits:"]
    for name in list(AUDITS) + ["morawetz_refinement"]:
        if name in report.skipped:
            out.append(f"SKIP  {name} [{AUDITS.get(name, '')}]  {report.skipped[name]}")
            continue
        for e in report.entries:
            if e.name == name:
                out.append(_entry_line(e))
    fits = report.fits
    out += ["", "fits:"]
    if "growth" in fits:
        g = fits["growth"]
        out.append(f"  |u|^2 ~ a + b log t on t >= 10: a={_num(g.a)} b={_num(g.b)} R2={_num(g.r2)} n={g.n}")
    if "decay" in fits:
        d = fits["decay"]
        out.append(f"  log-log slope of E_loc: {_num(d.slope)}  prefactor(t^-1 sqrt(log t)): {_num(d.prefactor)}"
                   f"  best model: {d.best_model}")
    if "gronwall" in fits:
        g = fits["gronwall"]
        out.append(f"  certified C*: {_num(g.C_star)} on [t0={_num(g.t0)}, T]")
    c = fits.get("constants")
    if c is not None:
        out.append(f"  constants: C_r0={_num(c.C_r0)} C1'={_num(c.C1)} C2'={_num(c.C2)} C3={_num(c.C3)}")
    out += ["", f"overall: {'PASS' if report.passed else 'FAIL'}"]
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def execute(cfg: RunConfig, out_dir: Path) -> tuple[int, dict]:
    """Run one configuration and write its outputs; returns (exit code, summary)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run(cfg.simulation())
    rows = [
        (_num(rec.t), _num(rec.E_total), _num(rec.E_loc), _num(rec.E_ext), _num(rec.l2_norm),
         _num(rec.weighted_ext), _num(rec.support_radius), _num(morawetz_residual(led, rec)), _num(led.K_integral))
        for rec, led in zip(result.records, result.ledgers)
    ]
    _write_csv(out_dir / "series.csv", SERIES_COLUMNS, rows)
    report = run_audits(result, cfg.audits)
    if cfg.refinement:
        report.add(_refinement_entry(cfg))
    _write_csv(out_dir / "audits.csv", AUDIT_COLUMNS, _audit_rows(report.entries))
    _write_report(out_dir / "report.txt", cfg, report, result)
    decay = report.fits.get("decay")
    gron = report.fits.get("gronwall")
    summary = {
        "slope": decay.slope if decay else math.nan,
        "prefactor": decay.prefactor if decay else math.nan,
        "C_star": gron.C_star if gron else math.nan,
        "max_morawetz_residual": max(abs(morawetz_residual(l, r)) for r, l in zip(result.records, result.ledgers)),
        "audits_passed": report.passed,
    }
    return (EXIT_OK if report.passed else EXIT_FAIL), summary


def _guard(func, *args):
    try:
        return func(*args)
    except (ValueError, RuntimeError, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_run(cfg: RunConfig, out_dir: Path | None = None) -> int:
    def go():
        code, _ = execute(cfg, Path(out_dir or cfg.output_dir))
        return code
    return _guard(go)


def _sweep_one(args):
    text, out_dir = args
    from .config import parse_config
    try:
        code, summary = execute(parse_config(text), Path(out_dir))
    except (ValueError, RuntimeError, OSError, MemoryError) as exc:
        return EXIT_ERROR, {"error": str(exc)}
    return code, summary


def sweep_workers(n_jobs: int) -> int:
    cap = os.environ.get("WAVEDECAY_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"WAVEDECAY_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n_jobs, limit))


def cmd_sweep(cfg: RunConfig, param: str, values, out_dir: Path | None = None) -> int:
    def go():
        base = Path(out_dir or cfg.output_dir)
        base.mkdir(parents=True, exist_ok=True)
        jobs = []
        for v in values:
            sub = with_parameter(cfg, param, str(v).strip())
            jobs.append((serialize(sub), str(base / f"{param.split('.')[-1]}={str(v).strip()}")))
        workers = sweep_workers(len(jobs))
        if workers == 1:
            results = [_sweep_one(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_sweep_one, jobs))
        rows = []
        for v, (code, s) in zip(values, results):
            if "error" in s:
                print(f"error for {param}={v}: {s['error']}", file=sys.stderr)
                rows.append((param, str(v).strip(), code, "nan", "nan", "nan", "nan", "false"))
                continue
            rows.append((param, str(v).strip(), code, _num(s["slope"]), _num(s["prefactor"]), _num(s["C_star"]),
                         _num(s["max_morawetz_residual"]), _num(s["audits_passed"])))
        _write_csv(base / "summary.csv", SUMMARY_COLUMNS, rows)
        codes = [c for c, _ in results]
        if EXIT_ERROR in codes:
            return EXIT_ERROR
        return EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK
    return _guard(go)


def certify_potential_entries(cfg: RunConfig) -> list[AuditEntry]:
    grid = Grid2D.covering(cfg.L + 2 * cfg.dx, cfg.dx)
    data = make_dataset(cfg.preset, grid, cfg.L, cfg.data_amplitude)
    pf = newtonian_potential(data.u1, far_field_points(cfg.L), cfg.L)
    k1 = cfg.coefficient().k1()
    t_list = np.linspace(0.0, cfg.T_max, 9)
    return [certify_far_field(pf, data.u1, cfg.L), certify_energy_growth(pf, data.u1, cfg.L, k1, t_list),
            certify_near_field(pf, data.u1, cfg.L)]


def cmd_certify_potential(cfg: RunConfig, out_dir: Path | None = None) -> int:
    def go():
        entries = certify_potential_entries(cfg)
        for e in entries:
            print(_entry_line(e))
        base = Path(out_dir or cfg.output_dir)
        base.mkdir(parents=True, exist_ok=True)
        _write_csv(base / "potential_audits.csv", AUDIT_COLUMNS, _audit_rows(entries))
        return EXIT_OK if all(e.passed for e in entries) else EXIT_FAIL
    return _guard(go)


def read_series(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "t" not in rows[0] or "E_loc" not in rows[0]:
        raise ValueError(f"{path} has no t / E_loc columns")
    return np.array([float(r["t"]) for r in rows]), np.array([float(r["E_loc"]) for r in rows])


def cmd_fit(path, window: tuple[float, float], gamma: float = 0.0) -> int:
    def go():
        fit = decay_fit(read_series(path), window, gamma)
        print(f"window: [{_num(window[0])}, {_num(window[1])}]  samples used: {fit.n_used}  excluded: {fit.n_excluded}")
        print(f"slope: {_num(fit.slope)}")
        print(f"prefactor (t^-1 sqrt(log t)): {_num(fit.prefactor)}")
        for name, r in fit.residuals.items():
            print(f"residual {name}: {_num(r)}")
        print(f"best model: {fit.best_model}")
        return EXIT_OK
    return _guard(go)


def _window_arg(text: str) -> tuple[float, float]:
    try:
        a, b = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("window must be 'a,b'") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavedecay", description="2-D variable-coefficient wave simulations and audits")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate one configuration and audit it")
    r.add_argument("config")
    r.add_argument("--out")
    s = sub.add_parser("sweep", help="run a configuration for several values of one parameter")
    s.add_argument("config")
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True)
    s.add_argument("--out")
    c = sub.add_parser("certify-potential", help="potential certificates without a simulation")
    c.add_argument("config")
    c.add_argument("--out")
    f = sub.add_parser("fit", help="fit decay models to a series.csv")
    f.add_argument("series")
    f.add_argument("--window", required=True, type=_window_arg)
    f.add_argument("--gamma", type=float, default=0.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "fit":
        return cmd_fit(args.series, args.window, args.gamma)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out) if args.out else None
    if args.command == "run":
        return cmd_run(cfg, out)
    if args.command == "sweep":
        return cmd_sweep(cfg, args.param, [v for v in args.values.split(",") if v.strip()], out)
    return cmd_certify_potential(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
