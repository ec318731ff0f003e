"""
Writers for run artifacts. Every file written is recorded so the manifest can
list it; identical inputs give byte-identical files.
"""

import json
import logging
import os
from typing import Any, Dict, Iterable, List

import numpy as np
import pandas as pd

from utils.sim_config import DEFAULTS_VERSION, SimulationConfig, config_hash

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dump_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_to_builtin)


class RunOutputs:
    """Output directory of one run plus the list of files written to it."""

    def __init__(self, directory: str, formats: Iterable[str] = ("csv", "json")):
        self.directory = directory
        self.formats = tuple(formats)
        self.files: List[str] = []
        os.makedirs(directory, exist_ok=True)

    def _path(self, name: str) -> str:
        if name not in self.files:
            self.files.append(name)
        return os.path.join(self.directory, name)

    def table(self, name: str, table: pd.DataFrame) -> None:
        if "csv" not in self.formats:
            return
        table.to_csv(self._path(name), index=False, float_format=FLOAT_FORMAT,
                     lineterminator="\n")
        logger.info("Wrote %s (%d rows)", name, len(table))

    def json(self, name: str, payload: Any) -> None:
        if "json" not in self.formats:
            return
        with open(self._path(name), "w", encoding="utf-8") as f:
            f.write(dump_json(payload) + "\n")
        logger.info("Wrote %s", name)

    def json_lines(self, name: str, records: Iterable[Dict[str, Any]]) -> None:
        if "json" not in self.formats:
            return
        count = 0
        with open(self._path(name), "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True, default=_to_builtin) + "\n")
                count += 1
        logger.info("Wrote %s (%d records)", name, count)

    def text(self, name: str, text: str) -> None:
        with open(self._path(name), "w", encoding="utf-8") as f:
            f.write(text)
        logger.info("Wrote %s", name)

    def manifest(self, command: str, config: SimulationConfig,
                 metrics: Dict[str, Any]) -> Dict[str, Any]:
        """Write manifest.json (always, whatever the formats) and return it."""
        manifest = {
            "command": command,
            "config_hash": config_hash(config),
            "defaults_version": DEFAULTS_VERSION,
            "files": list(self.files),
            "metrics": metrics,
        }
        with open(os.path.join(self.directory, MANIFEST_NAME), "w", encoding="utf-8") as f:
            f.write(dump_json(manifest) + "\n")
        return manifest
