from steps.config_loader_step import config_loader_step
from steps.experiment_step import experiment_step
from steps.results_export_step import results_export_step
from zenml import Model, pipeline


@pipeline(
    model=Model(
        # The name uniquely identifies this model
        name="deflab"
    ),
)
def experiment_pipeline(command: str, config_path: str, out_dir: str):
    """Validate a run configuration, run the experiment and export its results."""

    # Configuration Step
    config = config_loader_step(command=command, config_path=config_path)

    # Experiment Step
    summary = experiment_step(command=command, config=config, out_dir=out_dir)

    # Export Step
    violations = results_export_step(summary)

    return violations


if __name__ == "__main__":
    # Running the pipeline
    run = experiment_pipeline(command="definetti-gap", config_path="configs/definetti_gap.json", out_dir="results/definetti-gap")
