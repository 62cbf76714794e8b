"""
Command-line entry point: calibrate, sweep, plan, verify, ingest, build-config, sample.

Design & invariants
-------------------
* Structured results are JSON and curves or plans are CSV. Data goes to stdout,
  or to `--out PATH` (written atomically).
* Every run produces a RunManifest. With --out it is written to
  `<PATH>.manifest.json`. Otherwise it goes to stderr as a single JSON line
  unless --quiet is set.
* Exit codes: 0 ok, 1 verification failed, 2 malformed input or usage error
  (JSON error object on stderr), 3 file I/O failure.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from functools import wraps
from typing import Any, Dict, List, Optional, Sequence

import click

import store
from calibrate import Method, PrivacyBudget, calibrator_for, eps_grid, sweep as run_sweep
from dist import DiscreteDistribution, conditional_prior, pairs_from_json
from errors import CalibrationToolError, ConfigError
from ingest import CategoryCodec, ConditionalQuery, build_config, distribution_from_counts, parse_filters, scan_conditional
from manifest import RunManifest
from mechanism import LaplaceNoise, answer_query, sample as draw_noise
from settings import BRENT_XTOL, LOG_FORMAT, LOG_LEVEL, TOOL_NAME, TOOL_VERSION
from transport import delta_star, kantorovich_plan, max_plan_distance
from verify import verify_pairs

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_BAD_INPUT = 2
EXIT_IO = 3


@dataclass(frozen=True)
class RunOptions:
    seed: int
    tol: float
    quiet: bool


def _configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.ERROR if quiet else logging.DEBUG if verbose else getattr(logging, LOG_LEVEL, logging.WARNING)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _report_error(kind: str, message: str) -> None:
    click.echo(json.dumps({"error": kind, "message": message}, sort_keys=True), err=True)


def exit_codes(fn):
    """Decorator: map tool exceptions onto the documented exit codes."""

    @wraps(fn)
    def wrapped(*args, **kwargs) -> int:
        try:
            return fn(*args, **kwargs)
        except click.UsageError as exc:
            _report_error(type(exc).__name__, exc.format_message())
            return EXIT_BAD_INPUT
        except click.ClickException as exc:
            _report_error(type(exc).__name__, exc.format_message())
            return EXIT_BAD_INPUT
        except CalibrationToolError as exc:
            _report_error(type(exc).__name__, str(exc))
            return EXIT_BAD_INPUT
        except OSError as exc:
            _report_error(type(exc).__name__, str(exc))
            return EXIT_IO

    return wrapped


# -----------------------------------------------------------------------------
# Input / output helpers
# -----------------------------------------------------------------------------
def _load_config(path: Optional[str]):
    return store.load_config(path) if path else None


def _load_pairs(text: Optional[str]) -> list:
    return pairs_from_json(store.parse_json_argument(text)) if text else []


def _load_dist(text: str) -> DiscreteDistribution:
    return DiscreteDistribution.from_dict(store.parse_json_argument(text))


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _finish(ctx: click.Context, text: str, out: Optional[str]) -> None:
    opts: RunOptions = ctx.obj
    inputs: Dict[str, Any] = {"seed": opts.seed, "tol": opts.tol}
    inputs.update({k: v for k, v in ctx.params.items() if k != "out"})
    manifest = RunManifest(ctx.command.name, inputs)
    if out:
        store.write_text_atomic(out, text)
        manifest.write_next_to(out)
    else:
        click.echo(text, nl=False)
        if not opts.quiet:
            manifest.emit(sys.stderr)


_out_option = click.option("--out", type=str, default=None, help="Write here instead of stdout.")
_method_choice = click.Choice([m.value for m in Method])


def _calibration_inputs(f):
    for decorator in reversed([
        click.option("--method", type=_method_choice, required=True),
        click.option("--config", "config_path", type=str, default=None, help="SystemConfig JSON file."),
        click.option("--pairs", type=str, default=None, help="Secret pairs, inline JSON or a file."),
        click.option("--dist", "dists", type=str, multiple=True, help="Distribution, inline JSON or a file."),
        click.option("--p", type=float, default=None),
        click.option("--q", type=float, default=None),
        click.option("--user", type=str, default=None),
        click.option("--use-plan", is_flag=True, help="generic: read the sup from the explicit plan."),
    ]):
        f = decorator(f)
    return f


def _calibrator(ctx: click.Context, method, config_path, pairs, dists, p, q, user, use_plan):
    return calibrator_for(
        Method(method),
        config=_load_config(config_path),
        pairs=_load_pairs(pairs),
        dists=[_load_dist(d) for d in dists],
        p=p,
        q=q,
        user_id=user,
        tol=ctx.obj.tol,
        use_plan=use_plan,
    )


# =============================================================================
# Commands
# =============================================================================
@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for noise draws.")
@click.option("--tol", type=float, default=BRENT_XTOL, show_default=True, help="Root-finding tolerance on theta.")
@click.option("--quiet", is_flag=True, help="Errors only; no manifest on stderr.")
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.version_option(TOOL_VERSION, prog_name=TOOL_NAME)
@click.pass_context
def cli(ctx: click.Context, seed: int, tol: float, quiet: bool, verbose: bool) -> None:
    """Laplace noise calibration for pufferfish privacy of summation queries."""
    _configure_logging(quiet, verbose)
    ctx.obj = RunOptions(seed, tol, quiet)


@cli.command()
@_calibration_inputs
@click.option("--epsilon", type=float, required=True)
@_out_option
@click.pass_context
def calibrate(ctx, method, config_path, pairs, dists, p, q, user, use_plan, epsilon, out) -> int:
    """Minimal theta for one privacy budget (JSON)."""
    calibrator = _calibrator(ctx, method, config_path, pairs, dists, p, q, user, use_plan)
    result = calibrator(PrivacyBudget(epsilon))
    logger.info("%s: theta=%.10g", method, result.theta)
    _finish(ctx, store.dumps(result.to_dict()), out)
    return EXIT_OK


@cli.command()
@_calibration_inputs
@click.option("--epsilon-min", type=float, required=True)
@click.option("--epsilon-max", type=float, required=True)
@click.option("--steps", type=int, default=50, show_default=True)
@_out_option
@click.pass_context
def sweep(ctx, method, config_path, pairs, dists, p, q, user, use_plan, epsilon_min, epsilon_max, steps, out) -> int:
    """Theta over an evenly spaced epsilon grid (CSV epsilon,theta)."""
    calibrator = _calibrator(ctx, method, config_path, pairs, dists, p, q, user, use_plan)
    rows = run_sweep(calibrator, eps_grid(epsilon_min, epsilon_max, steps))
    _finish(ctx, _csv_text(["epsilon", "theta"], [(repr(e), repr(t)) for e, t in rows]), out)
    return EXIT_OK


@cli.command()
@click.option("--first", type=str, default=None, help="First distribution (JSON).")
@click.option("--second", type=str, default=None, help="Second distribution (JSON).")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--pair", type=str, default=None, help="Secret pair whose conditional priors are coupled.")
@_out_option
@click.pass_context
def plan(ctx, first, second, config_path, pair, out) -> int:
    """Kantorovich coupling as CSV rows x,x_prime,mass."""
    if config_path and pair:
        config = store.load_config(config_path)
        chosen = _load_pairs(pair)
        if len(chosen) != 1:
            raise ConfigError("plan takes exactly one secret pair")
        p = conditional_prior(config, chosen[0].first)
        q = conditional_prior(config, chosen[0].second)
    elif first and second:
        p, q = _load_dist(first), _load_dist(second)
    else:
        raise click.UsageError("plan needs --first/--second or --config/--pair")
    coupling = kantorovich_plan(p, q)
    logger.info(
        "plan: %d entries, max distance %g, delta* sup %g, W1 %g",
        len(coupling), max_plan_distance(coupling), delta_star(p, q).sup, coupling.cost(),
    )
    rows = [(repr(x), repr(y), repr(m)) for x, y, m in coupling.rows()]
    _finish(ctx, _csv_text(["x", "x_prime", "mass"], rows), out)
    return EXIT_OK


@cli.command()
@click.option("--config", "config_path", type=str, required=True)
@click.option("--pair", type=str, required=True, help="One pair or a list, inline JSON or a file.")
@click.option("--theta", type=float, required=True)
@click.option("--epsilon", type=float, required=True)
@_out_option
@click.pass_context
def verify(ctx, config_path, pair, theta, epsilon, out) -> int:
    """Exact worst-case log ratio; exit 0 iff every pair satisfies the budget."""
    config = store.load_config(config_path)
    pairs = _load_pairs(pair)
    if not pairs:
        raise ConfigError("verify needs at least one secret pair")
    reports = verify_pairs(config, pairs, theta, PrivacyBudget(epsilon))
    payload: Any = reports[0].to_dict() if len(reports) == 1 else [r.to_dict() for r in reports]
    _finish(ctx, store.dumps(payload), out)
    return EXIT_OK if all(r.satisfied for r in reports) else EXIT_UNSATISFIED


@cli.command()
@click.option("--csv", "csv_path", type=str, required=True)
@click.option("--target", type=str, required=True)
@click.option("--filter", "filters", type=str, default="", help="col=val[,col=val...]")
@click.option("--codes", type=str, default=None, help="Codes file; created on first use.")
@_out_option
@click.pass_context
def ingest(ctx, csv_path, target, filters, codes, out) -> int:
    """Empirical conditional distribution of one CSV column (JSON)."""
    if codes and os.path.exists(codes):
        codec = CategoryCodec.load(codes)
    else:
        codec = CategoryCodec(target)
    counts = scan_conditional(csv_path, ConditionalQuery(target, parse_filters(filters)), codec)
    if codes and not codec.frozen:
        codec.save(codes)
    payload = distribution_from_counts(counts).to_dict()
    payload["diagnostics"] = {"matched_rows": counts.matched, "dropped_rows": counts.dropped, "rows": counts.rows}
    _finish(ctx, store.dumps(payload), out)
    return EXIT_OK


@cli.command("build-config")
@click.option("--spec", "spec_text", type=str, required=True, help="List of user entries, inline JSON or a file.")
@_out_option
@click.pass_context
def build_config_command(ctx, spec_text, out) -> int:
    """Assemble and validate a SystemConfig (JSON)."""
    entries = store.parse_json_argument(spec_text)
    if isinstance(entries, dict) and "users" in entries:
        entries = entries["users"]
    if not isinstance(entries, list):
        raise ConfigError("build-config expects a list of user entries")
    base_dir = os.path.dirname(os.path.abspath(spec_text)) if os.path.exists(spec_text) else None
    config = build_config(entries, base_dir=base_dir)
    _finish(ctx, store.dumps(config.to_dict()), out)
    return EXIT_OK


@cli.command()
@click.option("--config", "config_path", type=str, default=None)
@click.option("--realized", type=str, default=None, help='{"user": value or null, ...}')
@click.option("--theta", type=float, required=True)
@_out_option
@click.pass_context
def sample(ctx, config_path, realized, theta, out) -> int:
    """Noisy answer of the sum query under the global --seed (JSON)."""
    noise = LaplaceNoise(theta)
    values = store.parse_json_argument(realized) if realized else {}
    if not isinstance(values, dict):
        raise ConfigError("--realized must be a JSON object")
    if values:
        if not config_path:
            raise click.UsageError("--realized needs --config")
        answer = answer_query(store.load_config(config_path), values, noise, ctx.obj.seed)
    else:
        answer = draw_noise(noise, ctx.obj.seed)
    _finish(ctx, store.dumps({"answer": answer, "seed": ctx.obj.seed, "theta": theta}), out)
    return EXIT_OK


@exit_codes
def main(argv: Optional[List[str]] = None) -> int:
    rv = cli.main(args=argv, prog_name=TOOL_NAME, standalone_mode=False)
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
