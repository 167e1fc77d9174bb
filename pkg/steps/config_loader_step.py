from src.run_config import load_config
from zenml import step


@step(enable_cache=False)
def config_loader_step(command: str, config_path: str) -> dict:
    """
    Validates a JSON run configuration for one experiment command.

    Parameters:
    command (str): Experiment command, e.g. "hartree-sweep".
    config_path (str): Path to the JSON configuration.

    Returns:
    dict: The resolved configuration with defaults filled in.
    """
    return load_config(command, config_path).to_dict()
