import logging

from src.experiments import run_experiment
from src.run_config import parse_config
from zenml import step


@step(enable_cache=False)
def experiment_step(command: str, config: dict, out_dir: str) -> dict:
    """
    Runs the experiment and writes its results and manifest into out_dir.

    Parameters:
    command (str): Experiment command.
    config (dict): Resolved configuration from config_loader_step.
    out_dir (str): Output directory.

    Returns:
    dict: Manifest fields plus the experiment's summary metrics.
    """
    manifest, result = run_experiment(command, parse_config(command, config), out_dir)
    logging.info(f"{command} finished with {result.violations} violations.")
    return {
        "command": manifest.command,
        "seed": manifest.seed,
        "outputs": manifest.outputs,
        "violations": result.violations,
        "metrics": result.metrics,
        "out_dir": out_dir,
    }
