import hashlib
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional

from src import __version__
from src.result_io import write_result

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


def sha256_digest(file_path: str) -> str:
    digest = hashlib.sha256()
    with open(file_path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """
    Record of one run: the resolved configuration and seed reproduce every
    emitted file, whose SHA-256 digests are listed under outputs.
    """

    command: str
    config: dict
    seed: int
    version: str = __version__
    started: str = field(default_factory=utc_now)
    finished: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)
    violations: int = 0

    def record(self, file_paths: List[str]) -> None:
        for file_path in file_paths:
            self.outputs[os.path.basename(file_path)] = sha256_digest(file_path)

    def finish(self, out_dir: str, file_paths: List[str]) -> str:
        """Digests the outputs, stamps the end time and writes manifest.json."""
        self.record(file_paths)
        self.finished = utc_now()
        path = os.path.join(out_dir, "manifest.json")
        write_result(asdict(self), path)
        logging.info(f"Manifest for '{self.command}' lists {len(self.outputs)} files.")
        return path
