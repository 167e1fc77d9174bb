import logging

import mlflow
from zenml import step
from zenml.client import Client

# Get the active experiment tracker from ZenML
experiment_tracker = Client().active_stack.experiment_tracker


@step(enable_cache=False, experiment_tracker=experiment_tracker.name)
def results_export_step(summary: dict) -> int:
    """
    Logs summary metrics and the output directory of a run to MLflow.

    Parameters:
    summary (dict): Output of experiment_step.

    Returns:
    int: The violation count of the run.
    """
    if not mlflow.active_run():
        mlflow.start_run()

    try:
        mlflow.log_param("command", summary["command"])
        mlflow.log_param("seed", summary["seed"])
        for name, value in summary["metrics"].items():
            mlflow.log_metric(name, float(value))
        mlflow.log_metric("violations", float(summary["violations"]))
        mlflow.log_artifacts(summary["out_dir"])
        logging.info(f"Logged {len(summary['metrics'])} metrics and {len(summary['outputs'])} files to MLflow.")
    except Exception as e:
        logging.error(f"Error while exporting results: {e}")
        raise e

    finally:
        mlflow.end_run()

    return int(summary["violations"])
