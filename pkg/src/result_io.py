import json
import logging
import os
from abc import ABC, abstractmethod
from typing import Any, Union

import numpy as np
import pandas as pd

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

# Shortest repr that round-trips a double
FLOAT_FORMAT = "%.17g"


def to_plain(value: Any) -> Any:
    """Converts numpy scalars, arrays and complex numbers into JSON-serializable objects."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.complexfloating, complex)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, pd.DataFrame):
        return to_plain(value.to_dict(orient="records"))
    return value


# Define an abstract class for result writers
class ResultWriter(ABC):
    """Writes one result object to a file."""

    @abstractmethod
    def write(self, payload: Union[pd.DataFrame, dict], file_path: str) -> str:
        """Writes the payload and returns the path written."""
        pass


class CSVResultWriter(ResultWriter):
    """Tables as CSV with full double precision and no index."""

    def write(self, payload: Union[pd.DataFrame, dict], file_path: str) -> str:
        if not isinstance(payload, pd.DataFrame):
            raise ValueError("CSV output needs a DataFrame.")
        logging.info(f"Writing {len(payload)} rows to {file_path}")
        payload.to_csv(file_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return file_path


class JSONResultWriter(ResultWriter):
    """Objects as sorted-key JSON."""

    def write(self, payload: Union[pd.DataFrame, dict], file_path: str) -> str:
        logging.info(f"Writing JSON to {file_path}")
        with open(file_path, "w", encoding="utf-8") as handle:
            json.dump(to_plain(payload), handle, sort_keys=True, indent=2)
            handle.write("\n")
        return file_path


class ResultWriterFactory:
    """Returns the ResultWriter matching a file extension."""

    WRITERS = {".csv": CSVResultWriter, ".json": JSONResultWriter}

    @staticmethod
    def get_writer(file_path: str) -> ResultWriter:
        file_extension = os.path.splitext(file_path)[1]
        if file_extension not in ResultWriterFactory.WRITERS:
            logging.error(f"No writer available for file extension: {file_extension}")
            raise ValueError(f"No writer available for file extension: {file_extension}")
        return ResultWriterFactory.WRITERS[file_extension]()


def write_result(payload: Union[pd.DataFrame, dict], file_path: str) -> str:
    return ResultWriterFactory.get_writer(file_path).write(payload, file_path)


def read_table(file_path: str) -> pd.DataFrame:
    """Reads a results CSV; an empty file with only a header gives an empty frame with those columns."""
    return pd.read_csv(file_path, float_precision="round_trip")
