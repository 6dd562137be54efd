"""Command-line front door.

Every subcommand emits a delimiter-separated table (stdout or --out) plus
a run manifest describing exactly how to reproduce it.  Exit codes:
0 ok, 1 input error, 2 internal error.
"""
from __future__ import annotations

import json
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

import click

from . import __version__
from .adaptive import (
    STRATEGY_KINDS,
    format_sweep_rows,
    sweep_tests_per_person,
)
from .classifier import (
    ClassifierConfig,
    HypothesisPair,
    evaluate,
    format_classifier_rows,
    roc_sweep,
    threshold_v,
    _row_from_report,
)
from .core import InputError
from .worstcase import format_worstcase_rows, worstcase_sweep


def _emit(table: str, manifest: dict, out: Optional[str]) -> None:
    """Table to stdout or --out; manifest as a sidecar file or on stderr."""
    payload = json.dumps(manifest, indent=2, sort_keys=True)
    if out is None:
        click.echo(table)
        click.echo(payload, err=True)
        return
    path = Path(out)
    path.write_text(table + "\n", encoding="utf-8")
    Path(str(path) + ".manifest.json").write_text(payload + "\n", encoding="utf-8")
    click.echo(f"wrote {path}", err=True)


def _manifest(subcommand: str, parameters: dict, out: Optional[str]) -> dict:
    return {
        "subcommand": subcommand,
        "parameters": parameters,
        "seed": parameters.get("seed"),
        "engine_version": __version__,
        "output": out or "stdout",
    }


@click.group()
@click.version_option(version=__version__, prog_name="poolscreen")
def cli():
    """Pooled-testing engine: evaluations, worst-case analysis, lab service."""


@cli.command("identify-eval")
@click.option("--strategy", type=click.Choice(STRATEGY_KINDS), required=True,
              help="Identification strategy to evaluate.")
@click.option("--n", "n_values", type=int, multiple=True, default=(4,),
              show_default=True, help="Population size; repeat for a grid.")
@click.option("--p", "p_values", type=float, multiple=True, required=True,
              help="Prevalence; repeat for a grid.")
@click.option("--mode", type=click.Choice(["auto", "exact", "monte-carlo"]),
              default="auto", show_default=True,
              help="auto picks exact enumeration up to n=20, Monte Carlo beyond.")
@click.option("--trials", type=int, default=10**5, show_default=True,
              help="Monte Carlo trials per grid point.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Master seed; per-point seeds derive from it.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads across grid points (results unchanged).")
@click.option("--out", type=str, default=None, help="Write table here instead of stdout.")
def identify_eval(n_values, p_values, strategy, mode, trials, seed, threads, out):
    """Expected tests per person for an identification strategy (grid)."""
    resolved = mode
    if mode == "auto":
        resolved = "exact" if max(n_values) <= 20 else "monte_carlo"
    rows = sweep_tests_per_person(
        strategy, list(n_values), list(p_values),
        resolved.replace("-", "_"), trials=trials, seed=seed, threads=threads,
    )
    params = {
        "strategy": strategy, "n": list(n_values), "p": list(p_values),
        "mode": resolved, "trials": trials, "seed": seed, "threads": threads,
    }
    _emit(format_sweep_rows(rows), _manifest("identify-eval", params, out), out)


@cli.command("worstcase")
@click.option("--strategy", type=click.Choice(STRATEGY_KINDS), required=True)
@click.option("--n", type=int, default=4, show_default=True,
              help="Population size (cost vector enumerates 2^n states).")
@click.option("--p", "p_values", type=float, multiple=True, required=True,
              help="Marginal prevalence; repeat for a grid.")
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=str, default=None)
def worstcase_cmd(strategy, n, p_values, threads, out):
    """Worst-case correlated expected tests vs the independent value."""
    rows = worstcase_sweep(strategy, n, list(p_values), threads=threads)
    params = {"strategy": strategy, "n": n, "p": list(p_values), "threads": threads}
    _emit(format_worstcase_rows(rows), _manifest("worstcase", params, out), out)


def _hp(p0: float, p1: float, pi0: float) -> HypothesisPair:
    return HypothesisPair(p0, p1, pi0, 1.0 - pi0)


@cli.command("classify-eval")
@click.option("--p0", type=float, required=True, help="Null-hypothesis prevalence.")
@click.option("--p1", type=float, required=True, help="Alternative prevalence.")
@click.option("--pi0", type=float, default=0.5, show_default=True,
              help="Prior weight of the null hypothesis.")
@click.option("--N", "n_people", type=int, required=True, help="People sampled.")
@click.option("--L", "n_subpools", type=int, required=True, help="Subpool count.")
@click.option("--V", "threshold", type=int, default=None,
              help="Decision threshold; defaults to the optimal noiseless value.")
@click.option("--tau", type=int, default=0, show_default=True,
              help="Splitting-tree depth where testing starts.")
@click.option("--rho", type=float, default=1.0, show_default=True,
              help="Assay sensitivity for pools with infected members.")
@click.option("--mode", type=click.Choice(["auto", "exact", "monte-carlo"]),
              default="auto", show_default=True)
@click.option("--trials", type=int, default=10**5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=str, default=None)
def classify_eval(p0, p1, pi0, n_people, n_subpools, threshold, tau, rho,
                  mode, trials, seed, out):
    """Error rates and expected tests for one classifier configuration."""
    hp = _hp(p0, p1, pi0)
    if threshold is None:
        threshold = threshold_v(hp, n_people, n_subpools)
    cfg = ClassifierConfig(n_people, n_subpools, threshold, tau, rho)
    resolved = mode
    if mode == "auto":
        resolved = "exact" if (n_subpools <= 20 and rho >= 1.0) else "monte_carlo"
    rep = evaluate(cfg, hp, resolved.replace("-", "_"), trials=trials, seed=seed)
    rows = [_row_from_report(cfg, hp, rep)]
    params = {
        "p0": p0, "p1": p1, "pi0": pi0, "N": n_people, "L": n_subpools,
        "V": threshold, "tau": tau, "rho": rho, "mode": resolved,
        "trials": trials, "seed": seed,
    }
    _emit(format_classifier_rows(rows), _manifest("classify-eval", params, out), out)


@cli.command("roc")
@click.option("--p0", type=float, required=True)
@click.option("--p1", type=float, required=True)
@click.option("--pi0", type=float, default=0.5, show_default=True)
@click.option("--N", "n_people_grid", type=int, multiple=True, required=True,
              help="Sample size; repeat to trace the curve.")
@click.option("--L", "n_subpools", type=int, required=True)
@click.option("--V", "threshold", type=int, required=True)
@click.option("--tau", type=int, default=0, show_default=True)
@click.option("--rho", type=float, default=1.0, show_default=True)
@click.option("--mode", type=click.Choice(["auto", "exact", "monte-carlo"]),
              default="auto", show_default=True)
@click.option("--trials", type=int, default=10**5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=str, default=None)
def roc_cmd(p0, p1, pi0, n_people_grid, n_subpools, threshold, tau, rho,
            mode, trials, seed, threads, out):
    """Operating-point table across sample sizes N."""
    hp = _hp(p0, p1, pi0)
    resolved = mode
    if mode == "auto":
        resolved = "exact" if (n_subpools <= 20 and rho >= 1.0) else "monte_carlo"
    rows = roc_sweep(
        hp, n_subpools, threshold, list(n_people_grid), tau, rho,
        resolved.replace("-", "_"), trials=trials, seed=seed, threads=threads,
    )
    params = {
        "p0": p0, "p1": p1, "pi0": pi0, "N": list(n_people_grid),
        "L": n_subpools, "V": threshold, "tau": tau, "rho": rho,
        "mode": resolved, "trials": trials, "seed": seed, "threads": threads,
    }
    _emit(format_classifier_rows(rows), _manifest("roc", params, out), out)


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8777, show_default=True)
@click.option("--data-dir", type=str, default="./poolscreen-sessions",
              show_default=True, help="Directory for session event logs.")
@click.option("--log-level", default="info", show_default=True)
def serve(host, port, data_dir, log_level):
    """Run the interactive session service (HTTP API for the web frontend)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port, log_level=log_level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
