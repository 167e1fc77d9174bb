import logging
import os

import click

from src.exceptions import CapacityError, ConfigError, DomainError, InvariantViolation
from src.experiments import run_experiment
from src.plotdata import plotdata as extract_plotdata
from src.result_io import write_result
from src.run_config import COMMAND_CONFIGS, load_config, parse_config

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _dispatch(ctx: click.Context, command: str, load, out_dir: str) -> None:
    """Runs an experiment and maps its outcome onto the exit status."""
    try:
        config = load()
        manifest, result = run_experiment(command, config, out_dir)
    except (ConfigError, DomainError, CapacityError) as e:
        click.echo(f"Configuration error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    except InvariantViolation as e:
        click.echo(f"Invariant violated: {e}", err=True)
        ctx.exit(EXIT_VIOLATION)
    for name, digest in sorted(manifest.outputs.items()):
        click.echo(f"{name}  {digest}")
    if result.violations:
        click.echo(f"{command}: {result.violations} violations", err=True)
        ctx.exit(EXIT_VIOLATION)
    ctx.exit(EXIT_OK)


@click.group()
def cli():
    """de Finetti and mean-field numerical laboratory."""


@cli.command()
@click.argument("command", type=click.Choice(sorted(COMMAND_CONFIGS)))
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="JSON run configuration.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False), help="Directory for results and manifest.")
@click.pass_context
def run(ctx: click.Context, command: str, config_path: str, out_dir: str):
    """Run one experiment from a JSON configuration."""
    _dispatch(ctx, command, lambda: load_config(command, config_path), out_dir)


@cli.command()
@click.argument("results_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Tidy CSV to write.")
@click.pass_context
def plotdata(ctx: click.Context, results_csv: str, spec: str, out: str):
    """Select and aggregate columns of a results CSV."""
    try:
        table = extract_plotdata(results_csv, spec)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_result(table, out)
    ctx.exit(EXIT_OK)


@cli.command()
@click.option("--n", "n_values", required=True, multiple=True, type=int, help="Particle number; repeat for several.")
@click.option("--beta", required=True, type=float, help="Inverse temperature.")
@click.option("--steps", default=20_000, show_default=True, type=int, help="Recorded sweeps per chain.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--grid", default=128, show_default=True, type=int, help="Shells of the mean-field grid.")
@click.option("--alpha", default=0.0, show_default=True, type=float, help="Regularization length of the interaction.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.pass_context
def loggas(ctx: click.Context, n_values, beta: float, steps: int, seed: int, grid: int, alpha: float, out_dir: str):
    """Metropolis sampling of the two-dimensional log-gas."""
    payload = {"N": list(n_values), "beta": beta, "steps": steps, "seed": seed, "grid": grid, "alpha": alpha}
    _dispatch(ctx, "loggas", lambda: parse_config("loggas", payload), out_dir)


if __name__ == "__main__":
    cli()
