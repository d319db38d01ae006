"""Command-line harness: ``fairpd {run, sweep-delta, sweep-inn, certify}``.

Every command reads a JSON config (``schema`` = ``fairpd/1``), writes its
resolved form to ``config.resolved.json`` in the output directory, and
emits reproducible CSV files. Wall-clock measurements are kept out of those
files and go to ``timing/`` instead (or inline with ``--inline-timing``).

Exit codes: 0 success, 1 invalid configuration, 2 divergence,
3 certificate failure.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from fairpd import certificates, io, svg
from fairpd.errors import ConfigurationError, DivergenceError, FairPDError
from fairpd.problems import ExperimentSpec, build
from fairpd.solvers import InnerSpec, PrimalDual, SolverConfig, make_config, validate

SCHEMA = "fairpd/1"
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_CERT = 0, 1, 2, 3
DEFAULT_DELTAS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99]
DEFAULT_INNS = [1, 5, 10, 20]
SUMMARY_COLUMNS = ("solver", "status", "iterations", "resi", "f_value", "snr", "ssim")

log = logging.getLogger("fairpd")


class RunConfig:
    """Parsed and validated contents of a config file."""

    def __init__(self, data, seed=None):
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        schema = data.get("schema")
        if schema != SCHEMA:
            raise ConfigurationError(f"unsupported schema {schema!r}; expected {SCHEMA!r}")
        exp = dict(data.get("experiment") or {})
        if seed is not None:
            exp["seed"] = int(seed)
        try:
            self.experiment = ExperimentSpec.from_dict(exp)
        except TypeError as exc:
            raise ConfigurationError(f"bad experiment section: {exc}") from exc
        self.solver_entries = list(data.get("solvers") or [])
        if not self.solver_entries:
            raise ConfigurationError("config lists no solvers")
        self.sweep = dict(data.get("sweep") or {})
        self.certify = dict(data.get("certify") or {})
        self.plots = bool(data.get("plots", True))
        self.truth_metrics = data.get("truth_metrics")
        self.prob, self.pair = build(self.experiment)
        self.configs = [self._solver_config(e) for e in self.solver_entries]
        names = [c.name for c in self.configs]
        self.labels = _unique_labels(names)

    def _solver_config(self, entry):
        entry = dict(entry)
        try:
            variant = entry.pop("variant")
        except KeyError as exc:
            raise ConfigurationError("solver entry needs a 'variant'") from exc
        fair = bool(entry.pop("fair", False))
        delta = float(entry.pop("delta", self.experiment.delta))
        preset = entry.pop("preset", "default")
        inner = entry.pop("inner", {}) or {}
        sigma = entry.pop("sigma", None)
        tau = entry.pop("tau", None)
        known = {"stop_tol", "max_outer", "seed"}
        unknown = set(entry) - known
        if unknown:
            raise ConfigurationError(f"unknown solver keys {sorted(unknown)}")
        try:
            inner_spec = InnerSpec(**inner)
        except TypeError as exc:
            raise ConfigurationError(f"bad inner section: {exc}") from exc
        if sigma is None or tau is None:
            cfg = make_config(self.prob, variant, fair, delta, preset, inner=inner_spec, **entry)
            if sigma is not None or tau is not None:
                cfg = replace(cfg, sigma=sigma or cfg.sigma, tau=tau or cfg.tau)
        else:
            cfg = SolverConfig(variant=variant, fair=fair, sigma=float(sigma), tau=float(tau),
                               delta=delta, inner=inner_spec, **entry)
        return validate(self.prob, cfg)

    @property
    def truth(self):
        if self.truth_metrics is False:
            return None
        if self.truth_metrics is None and self.experiment.family == "nn_lasso":
            return None
        return self.pair.truth

    def resolved(self):
        return {
            "schema": SCHEMA,
            "experiment": self.experiment.to_dict(),
            "solvers": [c.to_dict() for c in self.configs],
            "sweep": self.sweep,
            "certify": self.certify,
            "plots": self.plots,
            "derived": {
                "L_f": self.prob.L_f,
                "K_norm_sq": self.prob.K_norm_sq,
                "L_f_estimate": getattr(self.prob, "L_f_estimate", None),
                "L_f_paper": getattr(self.prob, "L_f_paper", None),
            },
        }


def _unique_labels(names):
    seen = {}
    out = []
    for n in names:
        seen[n] = seen.get(n, 0) + 1
        out.append(n if names.count(n) == 1 else f"{n}_{seen[n]}")
    return out


def load_config(path, seed=None):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    return RunConfig(data, seed=seed)


def _summary_row(label, trace):
    last = -1 if trace.iterations else None

    def pick(col):
        vals = getattr(trace, col)
        return vals[last] if last is not None else float("nan")

    return {
        "solver": label,
        "status": trace.status,
        "iterations": trace.iterations,
        "resi": pick("resi"),
        "f_value": pick("f_value"),
        "snr": pick("snr"),
        "ssim": pick("ssim"),
    }


def _run_one(rc, cfg):
    """Run one solver; divergence returns the partial trace with status set."""
    try:
        return PrimalDual(rc.prob, cfg).run(truth=rc.truth), False
    except DivergenceError as exc:
        return exc.trace, True


def cmd_run(rc, out, args):
    rows, timing = [], []
    diverged = False
    traces = {}
    for label, cfg in zip(rc.labels, rc.configs):
        log.info("running %s", label)
        trace, div = _run_one(rc, cfg)
        diverged |= div
        traces[label] = trace
        io.write_trace(out / "traces" / f"{label}.csv", trace, include_time=args.inline_timing)
        io.write_csv(out / "timing" / f"{label}.csv", ["k", "time_s"],
                     zip(trace.k, trace.time_s))
        row = _summary_row(label, trace)
        if args.inline_timing:
            row["cpu_s"] = trace.cpu
        rows.append(row)
        timing.append({"solver": label, "cpu_s": trace.cpu})
        if trace.x is not None and np.ndim(trace.x) == 2:
            io.write_pgm(out / "images" / f"{label}.pgm", trace.x, 0.0, 1.0)
        log.info("%s: %s after %d iterations", label, trace.status, trace.iterations)
    cols = list(SUMMARY_COLUMNS) + (["cpu_s"] if args.inline_timing else [])
    io.write_csv(out / "summary.csv", cols, rows)
    io.write_csv(out / "timing" / "summary.csv", ["solver", "cpu_s"], timing)
    if rc.plots and not args.no_plots:
        _plot_traces(out, traces)
    return EXIT_DIVERGED if diverged else EXIT_OK


def _plot_traces(out, traces):
    def series(col):
        return [(lbl, tr.k, getattr(tr, col)) for lbl, tr in traces.items()]

    svg.line_plot(out / "plots" / "resi.svg", series("resi"), "relative residual",
                  "iteration", "resi", logy=True)
    svg.line_plot(out / "plots" / "f_value.svg", series("f_value"), "objective",
                  "iteration", "F", logx=True)
    if any(np.isfinite(tr.snr).any() for tr in traces.values() if tr.snr):
        svg.line_plot(out / "plots" / "snr.svg", series("snr"), "SNR", "iteration", "dB")
        svg.line_plot(out / "plots" / "ssim.svg", series("ssim"), "SSIM", "iteration", "SSIM")


def cmd_sweep_delta(rc, out, args):
    deltas = [float(d) for d in rc.sweep.get("deltas", DEFAULT_DELTAS)]
    fair = [(lbl, c) for lbl, c in zip(rc.labels, rc.configs) if c.fair]
    if not fair:
        raise ConfigurationError("sweep-delta needs at least one fair solver")
    preset = rc.sweep.get("preset")
    rows, timing, curves = [], [], {}
    diverged = False
    for label, base in fair:
        its = []
        for delta in deltas:
            if preset:
                cfg = make_config(rc.prob, base.variant, True, delta, preset, inner=base.inner,
                                  stop_tol=base.stop_tol, max_outer=base.max_outer)
            else:
                cfg = validate(rc.prob, replace(base, delta=delta))
            trace, div = _run_one(rc, cfg)
            diverged |= div
            rows.append({"solver": label, "delta": delta, "iterations": trace.iterations,
                         "status": trace.status,
                         "f_value": trace.f_value[-1] if trace.f_value else float("nan")})
            timing.append({"solver": label, "delta": delta, "cpu_s": trace.cpu})
            its.append(trace.iterations)
            log.info("%s delta=%.2f: %d iterations", label, delta, trace.iterations)
        curves[label] = its
    cols = ["solver", "delta", "iterations", "status", "f_value"]
    if args.inline_timing:
        for r, t in zip(rows, timing):
            r["cpu_s"] = t["cpu_s"]
        cols.append("cpu_s")
    io.write_csv(out / "sweep_delta.csv", cols, rows)
    io.write_csv(out / "timing" / "sweep_delta.csv", ["solver", "delta", "cpu_s"], timing)
    if rc.plots and not args.no_plots:
        svg.line_plot(out / "plots" / "sweep_delta.svg",
                      [(lbl, deltas, its) for lbl, its in curves.items()],
                      "outer iterations vs delta", "delta", "iterations")
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_sweep_inn(rc, out, args):
    inns = [int(i) for i in rc.sweep.get("inns", DEFAULT_INNS)]
    fair = [(lbl, c) for lbl, c in zip(rc.labels, rc.configs) if c.fair]
    if not fair:
        raise ConfigurationError("sweep-inn needs at least one fair solver")
    rows, timing, curves = [], [], {}
    diverged = False
    for label, base in fair:
        for inn in inns:
            cfg = validate(rc.prob, replace(base, inner=replace(base.inner, mode="budget",
                                                                count=inn)))
            trace, div = _run_one(rc, cfg)
            diverged |= div
            row = _summary_row(label, trace)
            row["inn"] = inn
            rows.append(row)
            timing.append({"solver": label, "inn": inn, "cpu_s": trace.cpu})
            curves.setdefault(label, []).append(trace.cpu)
            log.info("%s inn=%d: %d iterations, %.3gs", label, inn, trace.iterations, trace.cpu)
    cols = ["solver", "inn", "status", "iterations", "resi", "f_value", "snr", "ssim"]
    if args.inline_timing:
        for r, t in zip(rows, timing):
            r["cpu_s"] = t["cpu_s"]
        cols.append("cpu_s")
    io.write_csv(out / "sweep_inn.csv", cols, rows)
    io.write_csv(out / "timing" / "sweep_inn.csv", ["solver", "inn", "cpu_s"], timing)
    if rc.plots and not args.no_plots:
        # timing plots are not reproducible, keep them with the timing files
        svg.line_plot(out / "timing" / "sweep_inn.svg",
                      [(lbl, inns, c) for lbl, c in curves.items()],
                      "wall time vs inner iterations", "inn", "seconds")
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_certify(rc, out, args):
    opts = rc.certify
    n_points = int(opts.get("n_points", 50))
    sign = opts.get("sign", "derived")
    grid_lo, grid_hi = opts.get("gap_range", [100, 2000])
    rows, summary = [], []
    failed = False
    for label, cfg in zip(rc.labels, rc.configs):
        if not cfg.fair:
            raise ConfigurationError("certify runs fair solvers only")
        ref = certificates.reference_point(
            rc.prob, replace(cfg, inner=replace(cfg.inner, method="exact"))
        )
        report = certificates.audit(rc.prob, cfg, n_points=n_points, seed=cfg.seed,
                                    v_star=ref, sign=sign)
        slope = None
        if len(report.gaps) >= grid_hi:
            grid = certificates.geometric_grid(grid_lo, grid_hi)
            gaps = [report.gaps[n - 1] for n in grid]
            if all(g > 0 for g in gaps):
                slope = certificates.loglog_slope(grid, gaps)
        for r in report.rows:
            rows.append(dict(r, solver=label))
        summary.append({
            "solver": label,
            "passed": report.passed,
            "min_residual": report.min_residual,
            "min_d": report.min_d,
            "min_dtilde": report.min_dtilde,
            "telescoping_slack": report.telescoping_slack,
            "gap_slope": slope,
            "failures": "; ".join(report.failures),
        })
        failed |= not report.passed
        log.info("%s: %s", label, "PASS" if report.passed else "FAIL " + str(report.failures))
    io.write_csv(out / "certificates.csv", ["solver", "k", "d", "dtilde", "residual", "gap"], rows)
    io.write_csv(out / "certify_summary.csv",
                 ["solver", "passed", "min_residual", "min_d", "min_dtilde",
                  "telescoping_slack", "gap_slope", "failures"], summary)
    if rc.plots and not args.no_plots:
        series = []
        for lbl in rc.labels:
            ks = [r["k"] for r in rows if r["solver"] == lbl]
            gs = [r["gap"] for r in rows if r["solver"] == lbl]
            series.append((lbl, ks, gs))
        svg.line_plot(out / "plots" / "ergodic_gap.svg", series, "ergodic gap", "N", "gap",
                      logx=True, logy=True)
    return EXIT_CERT if failed else EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep-delta": cmd_sweep_delta,
    "sweep-inn": cmd_sweep_inn,
    "certify": cmd_certify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="fairpd", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", default="fairpd_out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    p.add_argument("--inline-timing", action="store_true",
                   help="also put wall times in the main CSVs (breaks reproducibility)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        rc = load_config(args.config, seed=args.seed)
    except FairPDError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.resolved.json", rc.resolved())
    try:
        status = COMMANDS[args.command](rc, out, args)
    except FairPDError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    if status == EXIT_DIVERGED:
        log.error("at least one solver diverged; see summary")
    return status


if __name__ == "__main__":
    sys.exit(main())
