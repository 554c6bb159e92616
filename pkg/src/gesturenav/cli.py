"""Command-line front end: run, batch, replay, serve and export-svg.

Exit codes: 0 for episodes ending Done, 1 for Failed outcomes, 2 for usage,
parse or validation problems. Angles are printed in degrees here; the
library itself is radians-only.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path

import click

from .errors import GestureNavError, ParseError, ValidationError
from .scenario import (
    batch as run_batch,
    dump_trace,
    load_scenario,
    load_trace,
    run,
    validate_trace,
)


def _abort(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _load(path):
    try:
        return load_scenario(path)
    except ValidationError as exc:
        _abort("invalid scenario:\n  " + "\n  ".join(exc.violations))
    except (ParseError, OSError) as exc:
        _abort(str(exc))


@click.group()
@click.version_option(package_name="gesturenav")
def main():
    """Deterministic gesture-guided navigation simulator."""


@main.command("run")
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              help="Write the episode trace (JSON lines) here.")
@click.option("--figure", "figure_path", type=click.Path(dir_okay=False),
              help="Render a top-down figure of the episode (svg/png/pdf).")
def run_cmd(scenario, seed, trace_path, figure_path):
    """Run one scenario to completion and print its report."""
    spec = _load(scenario)
    records, report, world = run(spec, seed_override=seed)
    if trace_path:
        dump_trace(records, trace_path)
    if figure_path:
        from .viz import export_topdown

        export_topdown(world, records, figure_path)
    d = report.as_dict()
    if math.isfinite(report.azimuth_error):
        d["azimuth_error_deg"] = round(math.degrees(report.azimuth_error), 3)
    click.echo(json.dumps(d, indent=2))
    sys.exit(0 if report.outcome == "Done" else 1)


def _parse_seeds(text: str):
    if ".." in text:
        lo, hi = text.split("..", 1)
        seeds = list(range(int(lo), int(hi) + 1))
    else:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    if not seeds:
        raise ValueError(f"no seeds in {text!r}")
    return seeds


@main.command("batch")
@click.argument("scenario_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--seeds", default="0..19", show_default=True,
              help="Seed range A..B (inclusive) or comma list.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default="batch_out", show_default=True,
              help="Directory for the CSV table and figures.")
def batch_cmd(scenario_dir, seeds, out_dir):
    """Run every scenario in a directory over a seed sweep.

    Writes summary.csv, a success-rate chart, and one trajectory figure per
    scenario (first seed) into the output directory.
    """
    try:
        seed_list = _parse_seeds(seeds)
    except ValueError as exc:
        _abort(str(exc))
    paths = sorted(Path(scenario_dir).glob("*.json"))
    if not paths:
        _abort(f"no scenario files in {scenario_dir}")
    specs = [_load(p) for p in paths]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_batch(specs, seed_list)

    csv_path = out / "summary.csv"
    fields = ["scenario", "n", "success_rate", "mean_distance",
              "mean_azimuth_error", "gaze_degraded_rate", "failures"]
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            flat = dict(row)
            flat["failures"] = ";".join(
                f"{k}:{v}" for k, v in sorted(row["failures"].items())
            )
            writer.writerow(flat)

    from .viz import export_batch_summary, export_topdown

    export_batch_summary(rows, out / "success_rates.png")
    for spec in specs:
        records, _, world = run(spec, seed_override=seed_list[0])
        export_topdown(world, records, out / f"{spec.name}.png")

    for row in rows:
        click.echo(
            f"{row['scenario']}: {row['success_rate']:.0%} of {row['n']}"
            + (f" failures={row['failures']}" if row["failures"] else "")
        )
    click.echo(f"wrote {csv_path}")
    sys.exit(0)


@main.command("replay")
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
def replay_cmd(trace):
    """Validate a stored trace and print its state timeline."""
    try:
        records = load_trace(trace)
        validate_trace(records)
    except (ParseError, ValidationError) as exc:
        _abort(str(exc))
    last_state = None
    for rec in records:
        state = rec.get("state")
        if state and state != last_state:
            click.echo(f"t={rec['t']:8.2f}  {state}")
            last_state = state
    terminal = records[-1]
    line = f"terminal: {terminal['outcome']}"
    if terminal.get("reason"):
        line += f" reason={terminal['reason']}"
    if terminal.get("stop_reason"):
        line += f" stop={terminal['stop_reason']}"
    click.echo(line)
    click.echo(json.dumps(terminal["metrics"], indent=2))
    sys.exit(0 if terminal["outcome"] == "Done" else 1)


@main.command("export-svg")
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario-dir", type=click.Path(file_okay=False),
              default="scenarios", show_default=True,
              help="Where to look up the scenario named in the trace header.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default=None, help="Output file [default: <trace>.svg].")
def export_svg_cmd(trace, scenario_dir, out_path):
    """Render a stored trace as a static top-down SVG drawing."""
    try:
        records = load_trace(trace)
        validate_trace(records)
    except (ParseError, ValidationError) as exc:
        _abort(str(exc))
    header = records[0] if records and records[0].get("header") else None
    if header is None:
        _abort("trace has no header record naming its scenario")
    spec_path = Path(scenario_dir) / f"{header['scenario']}.json"
    if not spec_path.exists():
        _abort(f"scenario file {spec_path} not found")
    spec = _load(spec_path)
    # Re-run for the final world (robot/object poses); trace drives the overlay.
    _, _, world = run(spec, seed_override=header.get("seed"))
    from .viz import export_topdown

    out = Path(out_path) if out_path else Path(trace).with_suffix(".svg")
    export_topdown(world, records, out)
    click.echo(f"wrote {out}")
    sys.exit(0)


@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--scenario-dir", type=click.Path(file_okay=False),
              default="scenarios", show_default=True)
@click.option("--tick-hz", type=float, default=20.0, show_default=True,
              help="Snapshot broadcast rate while playing.")
def serve_cmd(port, host, scenario_dir, tick_hz):
    """Host the interactive WebSocket session service."""
    try:
        import uvicorn

        from .service import create_app
    except ImportError as exc:
        _abort(f"service dependencies missing: {exc}")
    app = create_app(Path(scenario_dir), tick_hz=tick_hz)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
