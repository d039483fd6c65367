# aoi_priority/cli.py
"""
Command-line front end.

    analyze   closed forms at one parameter point
    sweep     one CSV row per grid point (closed forms + optional simulation)
    simulate  one simulation run, JSON summary
    validate  the cross-validation suite

Exit codes: 0 success, 1 validation failure, 2 invalid input or an
unstable single-point analysis.
"""

import io
import sys
from typing import Dict, NoReturn, Optional

import click
from dotenv import dotenv_values

from aoi_priority import age
from aoi_priority.errors import AoiError, InvalidConfig
from aoi_priority.log import configure_logging, get_logger
from aoi_priority.model import ModelParams, PreemptionRule, SimConfig, SimMode
from aoi_priority.render import render_checks, render_csv, render_json, render_text
from aoi_priority.simulator import run
from aoi_priority.sweep import COLUMNS, SWEEP_NAMES, SweepSpec, analyze_point, run_sweep
from aoi_priority.validation import SuiteSettings, run_suite

log = get_logger(__name__)

EXIT_FAILED = 1
EXIT_INVALID = 2

ANALYZE_FIELDS = (
    "margin", "stable", "pi0", "e_n", "peak_age_1", "age_lb_1",
    "age_u2", "age_ref", "mean_z", "rho", "alpha1", "alpha2",
)

# config-file key -> click parameter name
CONFIG_ALIASES = {"sweep": "swept", "from": "start", "to": "stop", "format": "fmt"}

RATE_KEYS = ("l1", "l2", "m1", "m2")
SIM_KEYS = ("seed", "deliveries", "warmup", "mode")

COMMAND_KEYS = {
    "analyze": RATE_KEYS + ("format",),
    "sweep": RATE_KEYS + SIM_KEYS + ("sweep", "from", "to", "points", "no_sim", "out", "jobs"),
    "simulate": RATE_KEYS + SIM_KEYS + ("preemption", "out"),
    "validate": ("quick", "jobs", "seed"),
}
CONFIG_KEYS = frozenset(k for keys in COMMAND_KEYS.values() for k in keys)


# =========================================================
# Config file
# =========================================================

def load_config(path: str) -> Dict[str, Dict[str, str]]:
    """
    Read a `key = value` file into a click default_map, one entry per
    subcommand. Explicit flags still win over these defaults.
    """
    values = dotenv_values(path, interpolate=False)
    unknown = sorted(k for k in values if k not in CONFIG_KEYS)
    if unknown:
        raise InvalidConfig(f"Unknown config key(s) in {path}: {', '.join(unknown)}")

    default_map: Dict[str, Dict[str, str]] = {}
    for command, keys in COMMAND_KEYS.items():
        default_map[command] = {
            CONFIG_ALIASES.get(k, k): v
            for k, v in values.items()
            if k in keys and v is not None
        }
    return default_map


def fail(message: str, code: int = EXIT_INVALID) -> NoReturn:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _params(l1: float, l2: float, m1: float, m2: float) -> ModelParams:
    return ModelParams.of(lambda1=l1, lambda2=l2, mu1=m1, mu2=m2)


def _write(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        log.info("output.written", path=out)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def rate_options(f):
    f = click.option("--m2", type=float, default=5.0, show_default=True, help="priority service rate")(f)
    f = click.option("--m1", type=float, default=10.0, show_default=True, help="ordinary service rate")(f)
    f = click.option("--l2", type=float, default=5.0, show_default=True, help="priority arrival rate")(f)
    f = click.option("--l1", type=float, default=2.0, show_default=True, help="ordinary arrival rate")(f)
    return f


def sim_options(f):
    f = click.option("--mode", type=click.Choice([m.value for m in SimMode]), default=SimMode.TRUE.value,
                     show_default=True)(f)
    f = click.option("--warmup", type=int, default=1_000, show_default=True,
                     help="ordinary deliveries discarded before measuring")(f)
    f = click.option("--deliveries", type=int, default=1_000_000, show_default=True,
                     help="ordinary deliveries measured")(f)
    f = click.option("--seed", type=int, default=1, show_default=True)(f)
    return f


# =========================================================
# Commands
# =========================================================

@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="key = value file mirroring the flags")
@click.option("--verbose", is_flag=True, help="debug-level logs")
@click.option("--log-json", is_flag=True, help="JSON log lines on stderr")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str], verbose: bool, log_json: bool) -> None:
    configure_logging(verbose=verbose, json_output=log_json)
    if config_path:
        try:
            ctx.default_map = load_config(config_path)
        except AoiError as e:
            fail(str(e))


@main.command()
@rate_options
@click.option("--format", "fmt", type=click.Choice(["text", "json", "csv"]), default="text", show_default=True)
def analyze(l1: float, l2: float, m1: float, m2: float, fmt: str) -> None:
    """Closed-form quantities at one parameter point."""
    try:
        params = _params(l1, l2, m1, m2)
    except AoiError as e:
        fail(str(e))

    point = analyze_point(params)
    fields = {k: point[k] for k in ANALYZE_FIELDS}

    if fmt == "json":
        click.echo(render_json({"params": params, **fields}))
    elif fmt == "csv":
        buf = io.StringIO()
        render_csv([fields], ANALYZE_FIELDS, buf)
        click.echo(buf.getvalue(), nl=False)
    else:
        click.echo(render_text(fields, title=f"lambda=({l1}, {l2}) mu=({m1}, {m2})"))

    if not fields["stable"]:
        click.echo("unstable: mu1 - lambda1 (1 + lambda2/mu2) <= 0", err=True)
        sys.exit(EXIT_INVALID)


@main.command()
@rate_options
@click.option("--sweep", "swept", type=click.Choice(sorted(SWEEP_NAMES)), default="l2", show_default=True)
@click.option("--from", "start", type=float, default=0.5, show_default=True)
@click.option("--to", "stop", type=float, default=19.0, show_default=True)
@click.option("--points", type=int, default=38, show_default=True)
@sim_options
@click.option("--no-sim", is_flag=True, help="closed forms only")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path (stdout if omitted)")
@click.option("--jobs", type=int, default=1, show_default=True, help="worker processes")
def sweep(l1, l2, m1, m2, swept, start, stop, points, seed, deliveries, warmup, mode, no_sim, out, jobs) -> None:
    """Parameter sweep, one CSV row per grid point."""
    rates = {"lambda1": l1, "lambda2": l2, "mu1": m1, "mu2": m2}
    name = SWEEP_NAMES[swept]
    rates.pop(name)
    try:
        sim = None if no_sim else SimConfig.build(
            seed=seed, target_deliveries=deliveries, warmup_deliveries=warmup, mode=mode,
        )
        spec = SweepSpec.build(
            fixed=rates, swept=name, start=start, stop=stop, points=points, sim=sim, out=out,
        )
    except AoiError as e:
        fail(str(e))

    rows = run_sweep(spec, jobs=max(1, jobs))
    buf = io.StringIO()
    render_csv(rows, COLUMNS, buf)
    _write(buf.getvalue(), out)


@main.command()
@rate_options
@sim_options
@click.option("--preemption", type=click.Choice([p.value for p in PreemptionRule]),
              default=PreemptionRule.RESUME.value, show_default=True)
@click.option("--event-log", type=click.Path(dir_okay=False), help="JSON-lines event dump")
@click.option("--max-events", type=int, default=None, help="stop after this many events")
@click.option("--out", type=click.Path(dir_okay=False), help="JSON path (stdout if omitted)")
def simulate(l1, l2, m1, m2, seed, deliveries, warmup, mode, preemption, event_log, max_events, out) -> None:
    """One simulation run, JSON summary."""
    try:
        params = _params(l1, l2, m1, m2)
        config = SimConfig.build(
            seed=seed,
            target_deliveries=deliveries,
            warmup_deliveries=warmup,
            mode=mode,
            preemption=preemption,
        )
    except AoiError as e:
        fail(str(e))

    if event_log:
        with open(event_log, "w", encoding="utf-8") as f:
            result = run(params, config, event_log=f, max_events=max_events)
    else:
        result = run(params, config, max_events=max_events)

    summary = {"params": params, "config": config, "result": result}
    try:
        summary["age_lb_1"] = age.age_lower_bound(params)
    except AoiError:
        pass
    _write(render_json(summary), out)


@main.command()
@click.option("--quick", is_flag=True, help="reduced simulation sizes")
@click.option("--jobs", type=int, default=None, help="worker processes for the simulations (default: CPU count)")
@click.option("--seed", type=int, default=1, show_default=True)
def validate(quick: bool, jobs: Optional[int], seed: int) -> None:
    """Run the cross-validation suite; exit 1 on any failure."""
    options = {"quick": quick, "seed": seed}
    if jobs is not None:
        options["jobs"] = max(1, jobs)
    settings = SuiteSettings(**options)
    checks = run_suite(settings)
    click.echo(render_checks(c.model_dump() for c in checks))

    failed = [c for c in checks if not c.passed]
    click.echo(f"\n{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        sys.exit(EXIT_FAILED)


if __name__ == "__main__":
    main()
