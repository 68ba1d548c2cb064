"""Command-line interface.

Exit codes: 0 success, 1 domain failure (certificate, verdict or numerical
failure), 2 usage or parse error.  Reports print numbers to four decimals;
CSV files carry full precision.  Every command that writes files also
writes ``manifest.json`` next to them.
"""

import functools
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .ensemble import CONVERGING, convergence_report, default_threads, run_ensemble
from .errors import ConsensusError, InvalidInput, ParseError
from .fileio import (
    design_to_doc, load_graph, load_schedule, read_graph_raw, write_json, write_manifest,
    write_stats_csv, write_trajectory_csv,
)
from .gain import Target, parse_gain, validate_gain
from .graph import validate_graph
from .schedule import certify_schedule
from .sde import SimConfig, default_initial_state, simulate_path
from .structure import Decomposition, NoiseIntensity, find_decomposition, verify_decomposition
from .synthesis import Mode, certify_design, synthesize

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def fmt(x):
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(fmt(v) for v in np.asarray(x).reshape(-1)) + "]"
    return f"{float(x):.4f}"


def parse_vector(text):
    try:
        return [float(v) for v in text.replace("[", "").replace("]", "").split(",") if v.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"not a comma-separated list of numbers: {text!r}") from exc


def parse_intensity(text):
    kind, _, rest = text.partition(":")
    if kind.strip().lower() in ("none", "zero"):
        return NoiseIntensity.linear(0.0)
    if kind.strip().lower() != "linear":
        raise click.BadParameter(f"unknown intensity {text!r}; use linear:KAPPA or none")
    try:
        return NoiseIntensity.linear(float(rest or 0.0))
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def domain_errors(fn):
    """Map package exceptions onto exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ParseError, InvalidInput) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        except ConsensusError as exc:
            hint = getattr(exc, "hint", None) or _HINTS.get(type(exc).__name__)
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            if hint:
                click.echo(f"hint: {hint}", err=True)
            sys.exit(EXIT_FAIL)

    return wrapper


_HINTS = {
    "OmegaSumNotPD": "move the agent to V2 or strengthen its negative in-weights",
    "EmptyV1WithAntagonism": "put an agent with negative in-edges into V1",
    "DecompositionNotFound": "check that every agent outside V1 is in-degree-dominated and pn-reachable",
    "TooLarge": "pass --v1 explicitly for large graphs",
    "NumericalBlowup": "reduce dt or the gain magnitude",
}


def _outdir(out):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _v1_option(v1):
    return None if v1 is None else [int(v) for v in parse_vector(v1)]


@click.group()
@click.version_option(__version__, prog_name="ntcons")
def main():
    """Non-trivial consensus on signed matrix-weighted networks."""


@main.command()
@click.argument("graph_file")
@click.option("--json", "as_json", is_flag=True, help="Print machine-readable diagnostics.")
@domain_errors
def validate(graph_file, as_json):
    """Check a graph file for admissible weights."""
    n, d, edges = read_graph_raw(graph_file)
    violations = validate_graph(n, d, edges)
    if as_json:
        click.echo(json.dumps({"ok": not violations, "violations": [
            {"edge": list(v.edge) if v.edge else None, "rule": v.rule, "detail": v.detail}
            for v in violations]}, indent=2))
    else:
        for v in violations:
            click.echo(str(v))
        click.echo("ok" if not violations else f"{len(violations)} violation(s)")
    sys.exit(EXIT_OK if not violations else EXIT_FAIL)


@main.command()
@click.argument("graph_file")
@click.option("--v1", default=None, help="Verify this V1 (comma list) instead of searching.")
@domain_errors
def decompose(graph_file, v1):
    """Find or verify a V1/V2 split of the agents."""
    g = load_graph(graph_file)
    v1 = _v1_option(v1)
    dec = Decomposition.from_v1(g, v1) if v1 is not None else find_decomposition(g)
    ok, diagnostics = verify_decomposition(g, dec)
    click.echo(f"V1 = {sorted(dec.v1)}")
    click.echo(f"V2 = {sorted(dec.v2)}")
    for line in diagnostics:
        click.echo(line)
    click.echo("admissible" if ok else "not admissible")
    sys.exit(EXIT_OK if ok else EXIT_FAIL)


def print_design(design, report):
    click.echo(f"C = {fmt(design.C)}")
    click.echo(f"delta = {fmt(design.delta)}")
    click.echo(f"k1 = {fmt(design.k1)}")
    click.echo(f"x0 = {fmt(design.x0)}")
    click.echo(f"informed = {sorted(design.informed_set)}")
    for i, B in sorted(design.coupling.items()):
        click.echo(f"B_{i} = {fmt(B)}")
    if design.decomposition is not None:
        click.echo(f"V1 = {sorted(design.decomposition.v1)}")
    click.echo(f"mode = {report.mode.value}")
    if report.hurwitz is not None:
        click.echo(f"hurwitz = {report.hurwitz} (residual {report.lyapunov_residual:.2e})")
    click.echo(f"sym_pd = {report.sym_pd}")
    click.echo(f"stationarity residual = {report.stationarity_residual:.2e}")
    for note in design.notes:
        click.echo(f"note: {note}")
    click.echo("certified" if report.passed else "NOT certified")


@main.command()
@click.argument("graph_file")
@click.option("--theta", required=True, help="Consensus target, e.g. 1,2,-1.")
@click.option("--margin", type=float, default=0.1, show_default=True, help="delta = C + margin.")
@click.option("--delta", type=float, default=None, help="Explicit coupling coefficient.")
@click.option("--v1", default=None, help="Use this V1 (comma list) instead of the smallest admissible one.")
@click.option("--mode", type=click.Choice([m.value for m in Mode]), default="fixed", show_default=True)
@click.option("--out", default=None, help="Directory for design.json and the manifest.")
@domain_errors
def design(graph_file, theta, margin, delta, v1, mode, out):
    """Synthesize and certify the grounded protocol for one graph."""
    g = load_graph(graph_file)
    v1 = _v1_option(v1)
    dec = Decomposition.from_v1(g, v1) if v1 is not None else find_decomposition(g)
    d = synthesize(g, dec, parse_vector(theta), margin=margin, delta=delta)
    report = certify_design(d, Mode(mode))
    print_design(d, report)
    if out:
        outdir = _outdir(out)
        path = outdir / "design.json"
        write_json(design_to_doc(d, report), path)
        write_manifest(outdir, "design", {"graph": graph_file},
                       {"theta": theta, "margin": margin, "delta": delta, "v1": v1, "mode": mode}, None, [path])
    sys.exit(EXIT_OK if report.passed else EXIT_FAIL)


@main.command()
@click.argument("schedule_file")
@click.option("--theta", default=None, help="Override the schedule's theta.")
@click.option("--out", default=None, help="Directory for certificate.json and the manifest.")
@domain_errors
def certify(schedule_file, theta, out):
    """Certify every design used by a schedule."""
    sched = load_schedule(schedule_file, None if theta is None else parse_vector(theta))
    report = certify_schedule(sched)
    click.echo(f"mode = {report.mode.value}")
    for did, r in report.designs.items():
        d = sched.designs[did]
        click.echo(f"{did}: delta = {fmt(d.delta)} C = {fmt(d.C)} x0 = {fmt(d.x0)} "
                   f"hurwitz = {r.hurwitz} sym_pd = {r.sym_pd} passed = {r.passed}")
    click.echo(f"weight bound = {fmt(report.weight_bound)}")
    click.echo("certified" if report.passed else f"NOT certified: {report.failing_segments}")
    if out:
        outdir = _outdir(out)
        path = outdir / "certificate.json"
        write_json(report.as_dict(), path)
        write_manifest(outdir, "certify", {"schedule": schedule_file}, {"theta": theta}, None, [path])
    sys.exit(EXIT_OK if report.passed else EXIT_FAIL)


@main.command("gain-check")
@click.option("--gain", "gain_text", required=True, help="power:c0=1,alpha=1 | const:c0=1 | table:FILE")
@click.option("--target", type=click.Choice(["mean-square", "almost-sure"]), default="mean-square",
              show_default=True)
@domain_errors
def gain_check(gain_text, target):
    """Check a control gain against the convergence conditions."""
    g = parse_gain(gain_text)
    tgt = Target.MEAN_SQUARE if target == "mean-square" else Target.ALMOST_SURE
    report = validate_gain(g, tgt)
    for key, value in report.as_dict().items():
        click.echo(f"{key} = {value}")
    # non-analytic tables give None, which is not a pass
    sys.exit(EXIT_OK if report.passed is True else EXIT_FAIL)


def sim_options(fn):
    options = [
        click.argument("schedule_file"),
        click.option("--theta", default=None, help="Override the schedule's theta."),
        click.option("--gain", "gain_text", default="power:c0=1,alpha=1", show_default=True),
        click.option("--sigma", type=float, default=0.4, show_default=True, help="Additive noise intensity."),
        click.option("--intensity", default="linear:0.3", show_default=True,
                     help="Multiplicative noise, linear:KAPPA or none."),
        click.option("--dt", type=float, default=0.001, show_default=True),
        click.option("--horizon", type=float, default=100.0, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--x-init", default=None, help="Initial state (N*d values); default U[-5,5] from the seed."),
        click.option("--allow-uncertified", is_flag=True, help="Run even if certification fails."),
        click.option("--out", required=True, help="Output directory."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def build_config(schedule_file, theta, gain_text, sigma, intensity, dt, horizon, seed, x_init,
                 allow_uncertified):
    sched = load_schedule(schedule_file, None if theta is None else parse_vector(theta))
    report = certify_schedule(sched)
    if not report.passed:
        msg = f"schedule is not certified (failing: {report.failing_segments})"
        if not allow_uncertified:
            click.echo(f"error: {msg}; pass --allow-uncertified to run anyway", err=True)
            sys.exit(EXIT_FAIL)
        click.echo(f"warning: {msg}", err=True)
    x0 = (parse_vector(x_init) if x_init is not None
          else default_initial_state(sched.n_agents, sched.dim, seed))
    return SimConfig(sched, parse_gain(gain_text), sigma, parse_intensity(intensity), dt, horizon, x0, seed)


@main.command()
@sim_options
@click.option("--path", "path_index", type=int, default=0, show_default=True, help="Sample path index.")
@click.option("--every", type=int, default=1, show_default=True, help="Store every n-th step.")
@click.option("--format", "layout", type=click.Choice(["long", "wide"]), default="long", show_default=True)
@domain_errors
def simulate(schedule_file, theta, gain_text, sigma, intensity, dt, horizon, seed, x_init,
             allow_uncertified, out, path_index, every, layout):
    """Integrate one sample path and write its trajectory CSV."""
    cfg = build_config(schedule_file, theta, gain_text, sigma, intensity, dt, horizon, seed, x_init,
                       allow_uncertified)
    traj = simulate_path(cfg, path_index, every)
    outdir = _outdir(out)
    path = outdir / "trajectory.csv"
    write_trajectory_csv(traj, path, wide=layout == "wide")
    err = np.sqrt(np.sum((traj.states[-1] - np.tile(cfg.theta, cfg.schedule.n_agents)) ** 2))
    click.echo(f"final error norm = {fmt(err)}")
    write_manifest(outdir, "simulate", {"schedule": schedule_file},
                   {"theta": theta, "gain": gain_text, "sigma": sigma, "intensity": intensity, "dt": dt,
                    "horizon": horizon, "x_init": cfg.initial_state.tolist(), "path": path_index,
                    "every": every, "format": layout}, seed, [path])


@main.command()
@sim_options
@click.option("-m", "--paths", "m", type=int, default=200, show_default=True, help="Number of sample paths.")
@click.option("--every", type=int, default=100, show_default=True, help="Store every n-th step.")
@click.option("--threads", type=int, default=None, help="Worker threads (default $NTCONS_THREADS or 1).")
@click.option("--window", type=float, default=0.1, show_default=True, help="Window fraction for the verdict.")
@click.option("--expect", type=click.Choice(["converge"]), default=None,
              help="Exit 1 unless the verdict matches.")
@domain_errors
def ensemble(schedule_file, theta, gain_text, sigma, intensity, dt, horizon, seed, x_init,
             allow_uncertified, out, m, every, threads, window, expect):
    """Monte Carlo ensemble: mean-square error per agent plus a verdict."""
    if m < 2:
        raise click.BadParameter("need at least 2 paths", param_hint="-m")
    cfg = build_config(schedule_file, theta, gain_text, sigma, intensity, dt, horizon, seed, x_init,
                       allow_uncertified)
    threads = threads or default_threads()
    start = time.perf_counter()
    stats = run_ensemble(cfg, m, subsample=every, threads=threads)
    elapsed = time.perf_counter() - start
    report = convergence_report(stats, window)
    outdir = _outdir(out)
    csv_path = outdir / "ensemble.csv"
    report_path = outdir / "convergence.json"
    write_stats_csv(stats, csv_path)
    write_json(report.as_dict(), report_path)
    for a in report.agents:
        click.echo(f"agent {a.agent}: initial {fmt(a.initial)} final {fmt(a.final)} "
                   f"ratio {fmt(a.ratio)} trend {a.trend} {a.verdict}")
    click.echo(f"verdict = {report.overall} ({m} paths, {elapsed:.1f} s)")
    write_manifest(outdir, "ensemble", {"schedule": schedule_file},
                   {"theta": theta, "gain": gain_text, "sigma": sigma, "intensity": intensity, "dt": dt,
                    "horizon": horizon, "x_init": cfg.initial_state.tolist(), "m": m, "every": every,
                    "window": window}, seed, [csv_path, report_path])
    if expect == "converge" and report.overall != CONVERGING:
        sys.exit(EXIT_FAIL)


if __name__ == "__main__":
    main()
