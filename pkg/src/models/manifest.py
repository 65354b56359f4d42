"""Run manifest: everything a subcommand needs besides the model itself."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.config import settings
from src.utils.errors import ConfigError


@dataclass
class RunManifest:
    subcommand: str
    config_path: Optional[str] = None
    preset: Optional[str] = None
    overrides: List[str] = field(default_factory=list)
    out_dir: str = settings.OUTPUT_DIR
    seed: int = 0
    wide: bool = False
    mode: Optional[str] = None
    trunc_eps: Optional[float] = None
    m_cap: Optional[int] = None
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if (self.config_path is None) == (self.preset is None):
            raise ConfigError("exactly one of --config or --preset is required")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")

    @property
    def source(self) -> str:
        return self.config_path if self.config_path is not None else f"preset:{self.preset}"

    def output_dir(self) -> Path:
        """Create (if needed) and return the output directory."""
        path = Path(self.out_dir)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {path} is not writable: {exc}") from exc
        if not path.is_dir():
            raise ConfigError(f"output path {path} is not a directory")
        return path
