"""
Artifact directory writer shared by every command
"""

import logging
import time
from pathlib import Path
from typing import Any, List, Optional, Union

import pandas as pd

from .. import __version__
from ..config import settings
from ..models.schemas import RunConfig, RunManifest
from ..utils.helpers import git_describe, utc_now, write_json

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
MANIFEST_NAME = "manifest.json"


class ArtifactWriter:
    """Collects CSV/JSON outputs of one run and closes them with a manifest"""

    def __init__(self, directory: Union[str, Path], command: str, config: RunConfig,
                 recipe: Optional[str] = None):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.recipe = recipe
        self.outputs: List[str] = []
        self._started_at = utc_now()
        self._start = time.perf_counter()

    def path(self, name: str) -> Path:
        """Register an output written by someone else"""
        target = self.directory / name
        target.parent.mkdir(parents=True, exist_ok=True)
        if name not in self.outputs:
            self.outputs.append(name)
        return target

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug(f"Wrote {len(frame)} rows to {target}")
        return target

    def json(self, name: str, data: Any) -> Path:
        return write_json(self.path(name), data)

    def finish(self) -> RunManifest:
        manifest = RunManifest(
            command=self.command,
            recipe=self.recipe,
            config=self.config.model_dump(mode="json"),
            seed=self.config.seed,
            engine_version=__version__,
            git_describe=settings.git_describe or git_describe(Path(__file__).parent),
            started_at=self._started_at,
            wall_time_s=time.perf_counter() - self._start,
            outputs=sorted(self.outputs),
        )
        write_json(self.directory / MANIFEST_NAME, manifest.model_dump(mode="json"))
        logger.info(f"{self.command}: {len(self.outputs)} artifact(s) in {self.directory} "
                    f"({manifest.wall_time_s:.2f}s)")
        return manifest

