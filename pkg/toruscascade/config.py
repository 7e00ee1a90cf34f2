"""
Configuration file handler for toruscascade runs.

Handles loading and parsing configuration files (YAML/JSON) and merging
them with command-line arguments into a validated RunConfig.
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from toruscascade.errors import ConfigError


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a family -> schedule -> simulate -> report run."""

    m0: Tuple[int, int] = (1, 0)
    K: int = 10
    cycles: int = 2
    beta_mode: str = "scaled"
    beta_base: float = 0.05
    beta_ratio: float = 0.5
    shell_depth: int = 2
    tol: float = 1e-10
    fs_tol: float = 1e-8
    sobolev: Tuple[Tuple[float, int], ...] = ((1.0, 0), (2.0, 0), (1.0, 1))
    deviation_threshold: float = 0.1
    search_constant: int = 2
    pert_cycles: Tuple[int, ...] = (1, 2, 3)
    pert_beta_base: float = 0.4
    sample_count: int = 16
    out: str = "cascade-output"

    def __post_init__(self):
        self.validate()

    def validate(self):
        """
        Raises:
            ConfigError: On the first invalid field
        """
        if len(self.m0) != 2 or tuple(self.m0) == (0, 0):
            raise ConfigError(f"m0 must be a nonzero integer pair, got {list(self.m0)}")
        if self.K < 1:
            raise ConfigError(f"K must be positive, got {self.K}")
        if not 0 <= self.cycles <= self.K - 1:
            raise ConfigError(f"cycles must lie in 0..K-1 = 0..{self.K - 1}, got {self.cycles}")
        if self.beta_mode not in ("scaled", "paper"):
            raise ConfigError(f"beta_mode must be 'scaled' or 'paper', got {self.beta_mode!r}")
        for name in ("beta_base", "pert_beta_base"):
            value = getattr(self, name)
            if not 0.0 < value < 0.5:
                raise ConfigError(f"{name} must lie in (0, 1/2) so plateaus are nonnegative, got {value}")
        if not 0.0 < self.beta_ratio <= 1.0:
            raise ConfigError(f"beta_ratio must lie in (0, 1], got {self.beta_ratio}")
        for name in ("tol", "fs_tol", "deviation_threshold"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.shell_depth < 0:
            raise ConfigError(f"shell_depth must be non-negative, got {self.shell_depth}")
        if self.search_constant < 1 or self.sample_count < 1:
            raise ConfigError("search_constant and sample_count must be positive")
        for N in self.pert_cycles:
            if not 1 <= N <= self.K - 1:
                raise ConfigError(f"pert_cycles entry {N} outside 1..K-1 = 1..{self.K - 1}")
        for s, m in self.sobolev:
            if s < 0 or m < 0:
                raise ConfigError(f"sobolev pair ({s}, {m}) must be non-negative")
        if not self.out:
            raise ConfigError("out must name an output directory")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["m0"] = list(self.m0)
        data["sobolev"] = [[s, m] for s, m in self.sobolev]
        data["pert_cycles"] = list(self.pert_cycles)
        return data


DEFAULTS = RunConfig()

DEFAULT_CONFIG_TEXT = """\
# toruscascade run configuration
# Command-line flags override these values.

# Start frequency and family length
m0: [1, 0]
K: 10
search_constant: 2

# Cascade cycles to lay out and simulate (at most K-1)
cycles: 2

# Amplitude scale: scaled (beta_k = base * ratio^k) or paper (|l_k|^-|l_k|)
beta_mode: scaled
beta_base: 0.05
beta_ratio: 0.5

# Spectral simulation
shell_depth: 2
tol: 1.0e-10
fs_tol: 1.0e-8
deviation_threshold: 0.1

# Backward perturbation solutions c^N run on their own scaled schedule
pert_cycles: [1, 2, 3]
pert_beta_base: 0.4
sample_count: 16

# (s, m) pairs for Sobolev norms of u and d_t^m V
sobolev:
  - [1, 0]
  - [2, 0]
  - [1, 1]

# Output directory
out: cascade-output
"""


def default_config_text() -> str:
    return DEFAULT_CONFIG_TEXT


class ConfigLoader:
    """Loads configuration from files."""

    DEFAULT_CONFIG_FILES = [
        ".toruscascade.yml",
        ".toruscascade.yaml",
        ".toruscascade.json",
        "toruscascade.yml",
        "toruscascade.yaml",
        "toruscascade.json",
    ]

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize config loader.

        Args:
            config_path: Optional path to config file. If not provided, searches for default files.
        """
        self.config_path = config_path
        self.config: Dict[str, Any] = {}

    def load(self) -> Dict[str, Any]:
        """
        Load configuration from file.

        Returns:
            Dictionary with configuration values

        Raises:
            FileNotFoundError: If an explicit config path does not exist
            RuntimeError: If the file cannot be read or parsed
        """
        if self.config_path:
            config_file = Path(self.config_path)
            if not config_file.exists():
                raise FileNotFoundError(f"Config file not found: {self.config_path}")
            self.config = self._load_file(config_file)
        else:
            self.config = self._find_and_load_default()

        return self.config

    def _find_and_load_default(self) -> Dict[str, Any]:
        for filename in self.DEFAULT_CONFIG_FILES:
            config_file = Path(filename)
            if config_file.exists():
                return self._load_file(config_file)
        return {}

    def _load_file(self, config_file: Path) -> Dict[str, Any]:
        suffix = config_file.suffix.lower()
        try:
            with open(config_file, "r", encoding="utf-8") as f:
                content = f.read()
            if suffix in [".yml", ".yaml"]:
                data = yaml.safe_load(content) or {}
            elif suffix == ".json":
                data = json.loads(content)
            else:
                raise ValueError(f"Unsupported config file format: {suffix}")
        except Exception as e:
            raise RuntimeError(f"Failed to load config file {config_file}: {str(e)}")
        if not isinstance(data, dict):
            raise RuntimeError(f"Failed to load config file {config_file}: top level must be a mapping")
        return data

    def _lookup(self, *keys: str) -> Any:
        for key in keys:
            if key in self.config:
                return self.config[key]
        return None

    def _number(self, cast, *keys: str) -> Optional[Any]:
        value = self._lookup(*keys)
        if value is None:
            return None
        try:
            return cast(value)
        except (ValueError, TypeError):
            raise ConfigError(f"{keys[0]} must be a number, got {value!r}")

    def get_m0(self) -> Optional[Tuple[int, int]]:
        """Start frequency, as a list [x, y] or a string "x,y"."""
        value = self._lookup("m0", "start")
        if value is None:
            return None
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        try:
            pair = tuple(int(v) for v in value)
        except (ValueError, TypeError):
            raise ConfigError(f"m0 must be an integer pair, got {value!r}")
        return pair

    def get_K(self) -> Optional[int]:
        return self._number(int, "K", "k", "family_length")

    def get_cycles(self) -> Optional[int]:
        return self._number(int, "cycles")

    def get_beta_mode(self) -> Optional[str]:
        value = self._lookup("beta_mode", "beta-mode")
        return None if value is None else str(value).lower()

    def get_beta_base(self) -> Optional[float]:
        return self._number(float, "beta_base", "beta-base")

    def get_beta_ratio(self) -> Optional[float]:
        return self._number(float, "beta_ratio", "beta-ratio")

    def get_shell_depth(self) -> Optional[int]:
        return self._number(int, "shell_depth", "shell-depth")

    def get_tol(self) -> Optional[float]:
        return self._number(float, "tol", "tolerance")

    def get_fs_tol(self) -> Optional[float]:
        return self._number(float, "fs_tol", "fs-tol")

    def get_pert_beta_base(self) -> Optional[float]:
        return self._number(float, "pert_beta_base", "pert-beta-base")

    def get_deviation_threshold(self) -> Optional[float]:
        return self._number(float, "deviation_threshold", "deviation-threshold")

    def get_search_constant(self) -> Optional[int]:
        return self._number(int, "search_constant", "search-constant")

    def get_sample_count(self) -> Optional[int]:
        return self._number(int, "sample_count", "sample-count")

    def get_pert_cycles(self) -> Optional[Tuple[int, ...]]:
        value = self._lookup("pert_cycles", "pert-cycles")
        if value is None:
            return None
        if isinstance(value, (int, str)):
            value = str(value).replace(",", " ").split()
        try:
            return tuple(int(v) for v in value)
        except (ValueError, TypeError):
            raise ConfigError(f"pert_cycles must be a list of integers, got {value!r}")

    def get_sobolev(self) -> Optional[Tuple[Tuple[float, int], ...]]:
        """(s, m) pairs, as [[s, m], ...] or "s:m s:m"."""
        value = self._lookup("sobolev", "sobolev_pairs")
        if value is None:
            return None
        if isinstance(value, str):
            value = [item.split(":") for item in value.replace(",", " ").split()]
        try:
            return tuple((float(s), int(m)) for s, m in value)
        except (ValueError, TypeError):
            raise ConfigError(f"sobolev must be a list of (s, m) pairs, got {value!r}")

    def get_out(self) -> Optional[str]:
        value = self._lookup("out", "output", "out_dir")
        return None if value is None else str(value)

    def merge_with_args(self, args: Dict[str, Any]) -> RunConfig:
        """
        Merge config with command-line arguments.

        Command-line arguments take precedence over config file, which takes
        precedence over the defaults.

        Args:
            args: Dictionary of command-line arguments

        Returns:
            Validated RunConfig

        Raises:
            ConfigError: If the merged values are invalid
        """
        values: Dict[str, Any] = {}
        getters = {
            "m0": self.get_m0,
            "K": self.get_K,
            "cycles": self.get_cycles,
            "beta_mode": self.get_beta_mode,
            "beta_base": self.get_beta_base,
            "beta_ratio": self.get_beta_ratio,
            "shell_depth": self.get_shell_depth,
            "tol": self.get_tol,
            "fs_tol": self.get_fs_tol,
            "sobolev": self.get_sobolev,
            "deviation_threshold": self.get_deviation_threshold,
            "search_constant": self.get_search_constant,
            "pert_cycles": self.get_pert_cycles,
            "pert_beta_base": self.get_pert_beta_base,
            "sample_count": self.get_sample_count,
            "out": self.get_out,
        }
        for name, getter in getters.items():
            if args.get(name) is not None:
                values[name] = args[name]
            else:
                value = getter()
                if value is not None:
                    values[name] = value

        # Only trim the default perturbation cycles; explicit lists are validated
        if "pert_cycles" not in values and "K" in values:
            values["pert_cycles"] = tuple(N for N in DEFAULTS.pert_cycles if N <= values["K"] - 1)

        return RunConfig(**values)
