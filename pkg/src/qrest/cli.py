"""``qrest`` command line: gen, label, train, eval, perturb-eval, report.

Exit codes: 0 success, 1 usage or input error, 2 solver-failure budget exceeded.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import pipeline
from .errors import FailureBudgetExceeded, QrestError

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--tol", type=float, default=1e-7, show_default=True, help="SDP tolerance for labeling.")
@click.option("--workers", type=int, default=1, show_default=True, help="Processes for labeling and grid cells.")
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True, help="Output directory.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx, seed, tol, workers, out, verbose):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if workers < 1:
        raise click.BadParameter("must be >= 1", param_hint="--workers")
    ctx.obj = {"seed": seed, "tol": tol, "workers": workers, "out": Path(out)}


@cli.command()
@click.argument("system", type=click.Choice(sorted(pipeline.SYSTEMS)))
@click.option("--count", type=int, default=None, help="Number of states (system default if omitted).")
@click.option("--name", default=None, help="Dataset file stem (defaults to the system name).")
@click.option("--split-seed", type=int, default=None, help="Seed for the 75/25 split (defaults to --seed).")
@click.pass_obj
def gen(obj, system, count, name, split_seed):
    """Generate an unlabeled dataset with features."""
    path = pipeline.cmd_gen(system, count, obj["seed"], obj["out"], name, split_seed)
    click.echo(str(path))


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--measure", default="all", show_default=True, help="Measure name, alias (l1, relent, geom, eg) or 'all'.")
@click.option("--failure-budget", type=float, default=0.01, show_default=True, help="Allowed fraction of failed solves.")
@click.option("--force", is_flag=True, help="Recompute labels that already exist.")
@click.pass_obj
def label(obj, dataset, measure, failure_budget, force):
    """Attach ground-truth labels to a dataset, in place."""
    path, summary = pipeline.cmd_label(dataset, measure, obj["tol"], obj["workers"], failure_budget, force)
    click.echo(json.dumps({"dataset": str(path), "failures": summary}, sort_keys=True))


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--measure", required=True, help="Target measure.")
@click.option("--kind", type=click.Choice(["svr", "svqr"]), default="svr", show_default=True)
@click.option("--grid", default="default", show_default=True, help="'default', 'none' or e.g. 'c=1,10;epsilon=0.01;tau=0.5,1'.")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--cv-max", type=int, default=None, help="Run the grid search on at most this many training records.")
@click.option("--c", "c", type=float, default=None, help="Penalty C (base value when not searched).")
@click.option("--epsilon", type=float, default=None)
@click.option("--tau", type=float, default=None, help="RBF bandwidth.")
@click.option("--delta", type=float, default=None, help="Quantile level for svqr.")
@click.option("--kkt-tol", type=float, default=None, help="SMO stopping tolerance.")
@click.pass_obj
def train(obj, dataset, measure, kind, grid, folds, cv_max, c, epsilon, tau, delta, kkt_tol):
    """Fit an SVR or SVQR model on the train split."""
    if kind == "svqr" and delta is None:
        delta = 0.02
    base = pipeline.default_base(c, epsilon, tau, delta, kkt_tol)
    path = pipeline.cmd_train(
        dataset, measure, kind, pipeline.parse_grid(grid), folds, obj["seed"], obj["out"], base, cv_max, obj["workers"]
    )
    click.echo(str(path))


@cli.command(name="eval")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--split", type=click.Choice(["test", "train", "all"]), default="test", show_default=True)
@click.pass_obj
def eval_cmd(obj, model, dataset, split):
    """Evaluate a model; writes a report JSON and a predictions CSV."""
    path = pipeline.cmd_eval(model, dataset, obj["out"], split)
    click.echo(path.read_text().strip())


@cli.command(name="perturb-eval")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=float, default=0.02, show_default=True, help="Relative feature noise.")
@click.option("--split", type=click.Choice(["test", "train", "all"]), default="test", show_default=True)
@click.pass_obj
def perturb_eval(obj, model, dataset, level, split):
    """Evaluate on features multiplied by 1 + U[-level, level]."""
    if level < 0:
        raise click.BadParameter("must be >= 0", param_hint="--level")
    path = pipeline.cmd_eval(model, dataset, obj["out"], split, level, obj["seed"])
    click.echo(path.read_text().strip())


@cli.command()
@click.argument("run_dir", type=click.Path(file_okay=False))
@click.pass_obj
def report(obj, run_dir):
    """Collect *.report.json files into report.md and report.csv."""
    md, cs = pipeline.cmd_report(run_dir, obj["out"] if str(obj["out"]) != "." else None)
    click.echo(str(md))
    click.echo(str(cs))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="qrest", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except FailureBudgetExceeded as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_SOLVER
    except (QrestError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
