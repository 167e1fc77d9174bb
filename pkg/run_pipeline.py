import click
from pipelines.experiment_pipeline import experiment_pipeline
from src.run_config import COMMAND_CONFIGS
from zenml.integrations.mlflow.mlflow_utils import get_tracking_uri


@click.command()
@click.argument("command", type=click.Choice(sorted(COMMAND_CONFIGS)))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False), help="Defaults to results/<command>.")
def main(command: str, config_path: str, out_dir: str):
    """
    Run one experiment through the ZenML pipeline and print the MLflow UI hint.
    """
    # Run the pipeline
    experiment_pipeline(command=command, config_path=config_path, out_dir=out_dir or f"results/{command}")

    print(
        "Now run \n "
        f"    mlflow ui --backend-store-uri '{get_tracking_uri()}'\n"
        "To inspect your experiment runs within the mlflow UI.\n"
        "You can find your runs tracked within the experiment."
    )


if __name__ == "__main__":
    main()
