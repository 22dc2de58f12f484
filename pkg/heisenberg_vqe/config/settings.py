"""
Configuration settings for Heisenberg VQE
"""
import os
import json
from typing import Dict, Tuple, Union, Any

from heisenberg_vqe.core.spectra import DENSE_MAX_SITES as DENSE_ORACLE_SITES
from heisenberg_vqe.core.spectra import ED_MAX_SITES as LANCZOS_MAX_SITES


class Config:
    """Configuration class for storing global settings and constants"""

    # Version information
    VERSION: str = "1.0.0"

    # Output locations
    OUTPUT_DIR: str = os.path.abspath("runs")  # Records and summaries land here
    CACHE_DIR: str = os.path.expanduser("~/.cache/heisenberg_vqe")  # Spectrum cache

    # Exact diagonalization limits
    ED_MAX_SITES: int = LANCZOS_MAX_SITES  # Lanczos reference refused above this
    DENSE_MAX_SITES: int = DENSE_ORACLE_SITES  # Dense oracle refused above this

    # Optimizer defaults
    DEFAULT_ROUNDS: int = 10  # Local minima per p for kagome tasks
    CHAIN_ROUNDS: int = 32  # Local minima per p for chains
    INIT_HALFWIDTH: float = 1e-3  # theta0 ~ U[-w, w)
    GRADIENT_TOLERANCE: float = 1e-5  # BFGS stops when |grad|_inf drops below
    MAX_ITERATIONS: int = 10000
    PENALTY_WEIGHT: float = 1.0  # Weight of the (S_z - 1)^2 penalty
    THREADS: int = 1  # Parallel optimizer rounds
    SEED: int = 0

    # Log configuration
    LOG_FILE: str = os.path.expanduser("~/heisenberg_vqe.log")
    LOG_LEVEL: str = "WARNING"  # Can be DEBUG, INFO, WARNING, ERROR, CRITICAL
    MAX_LOG_SIZE: int = 5 * 1024 * 1024  # 5MB
    LOG_BACKUP_COUNT: int = 3

    # Config file path
    CONFIG_FILE: str = os.path.expanduser("~/.config/heisenberg_vqe/config.json")

    VALID_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]

    def __init__(self) -> None:
        """Initialize configuration with default values and load user settings."""
        # User configurable settings (can be modified at runtime)
        self.rounds: int = self.DEFAULT_ROUNDS
        self.chain_rounds: int = self.CHAIN_ROUNDS
        self.threads: int = self.THREADS
        self.seed: int = self.SEED
        self.penalty_weight: float = self.PENALTY_WEIGHT
        self.init_halfwidth: float = self.INIT_HALFWIDTH
        self.gradient_tolerance: float = self.GRADIENT_TOLERANCE
        self.max_iterations: int = self.MAX_ITERATIONS
        self.ed_max_sites: int = self.ED_MAX_SITES
        self.dense_max_sites: int = self.DENSE_MAX_SITES
        self.output_dir: str = self.OUTPUT_DIR
        self.cache_dir: str = self.CACHE_DIR

        # Load config from file if it exists
        self.load_config()

    def set_rounds(self, rounds: Union[str, int]) -> Tuple[bool, str]:
        """Set the number of optimizer rounds per p.

        Args:
            rounds: The new round count (1-1000)

        Returns:
            A tuple of (success, message) where success is a boolean indicating
            if the update was successful, and message is a descriptive message.
        """
        try:
            value = int(rounds)
            if 1 <= value <= 1000:
                self.rounds = value
                self.save_config()
                return True, f"Rounds set to {value}"
            return False, f"Invalid round count. Keeping {self.rounds}"
        except ValueError:
            return False, f"Invalid input. Keeping {self.rounds}"

    def set_threads(self, threads: Union[str, int]) -> Tuple[bool, str]:
        """Set the number of optimizer rounds run in parallel.

        Args:
            threads: Worker count (1-256)

        Returns:
            A tuple of (success, message).
        """
        try:
            value = int(threads)
            if 1 <= value <= 256:
                self.threads = value
                self.save_config()
                return True, f"Threads set to {value}"
            return False, f"Invalid thread count. Keeping {self.threads}"
        except ValueError:
            return False, f"Invalid input. Keeping {self.threads}"

    def set_penalty_weight(self, weight: Union[str, float]) -> Tuple[bool, str]:
        """Set the magnetization penalty weight A_P2.

        Args:
            weight: Non-negative weight of the (S_z - 1)^2 penalty

        Returns:
            A tuple of (success, message).
        """
        try:
            value = float(weight)
            if value >= 0.0:
                self.penalty_weight = value
                self.save_config()
                return True, f"Penalty weight set to {value}"
            return False, f"Penalty weight must be non-negative. Keeping {self.penalty_weight}"
        except ValueError:
            return False, f"Invalid input. Keeping {self.penalty_weight}"

    def set_log_level(self, level: str) -> Tuple[bool, str]:
        """Set the log level.

        Args:
            level: One of DEBUG, INFO, WARNING, ERROR, CRITICAL

        Returns:
            A tuple of (success, message).
        """
        if not isinstance(level, str) or level.upper() not in self.VALID_LOG_LEVELS:
            return False, f"Invalid log level: {level}"
        self.LOG_LEVEL = level.upper()
        self.save_config()
        return True, f"Log level set to {self.LOG_LEVEL}"

    def load_config(self) -> None:
        """Load configuration from JSON file.

        Attempts to load saved configuration from a JSON file. If the file does not exist
        or contains invalid data, falls back to default values.
        """
        try:
            if os.path.exists(self.CONFIG_FILE):
                with open(self.CONFIG_FILE, 'r', encoding='utf-8') as f:
                    config_data = json.load(f)

                # Positive integer settings
                for key, low, high in (('rounds', 1, 1000), ('chain_rounds', 1, 1000),
                                       ('threads', 1, 256), ('max_iterations', 1, 10**7),
                                       ('ed_max_sites', 2, 30), ('dense_max_sites', 2, 14)):
                    value = config_data.get(key)
                    if isinstance(value, int) and not isinstance(value, bool) and low <= value <= high:
                        setattr(self, key, value)

                if isinstance(config_data.get('seed'), int):
                    self.seed = config_data['seed']

                # Float settings
                for key in ('penalty_weight', 'init_halfwidth', 'gradient_tolerance'):
                    value = config_data.get(key)
                    if isinstance(value, (int, float)) and not isinstance(value, bool):
                        if key == 'penalty_weight' and value >= 0:
                            setattr(self, key, float(value))
                        elif key != 'penalty_weight' and value > 0:
                            setattr(self, key, float(value))

                for key in ('output_dir', 'cache_dir'):
                    if isinstance(config_data.get(key), str):
                        setattr(self, key, os.path.expanduser(config_data[key]))

                # Load other settings
                if 'log_level' in config_data and isinstance(config_data['log_level'], str):
                    if config_data['log_level'].upper() in self.VALID_LOG_LEVELS:
                        self.LOG_LEVEL = config_data['log_level'].upper()

                if 'log_file' in config_data and isinstance(config_data['log_file'], str):
                    self.LOG_FILE = os.path.expanduser(config_data['log_file'])
        except (json.JSONDecodeError, OSError, KeyError) as e:
            # Log error but continue with defaults
            print(f"Error loading configuration: {e}")

    def to_dict(self) -> Dict[str, Any]:
        """Collect the user-configurable settings.

        Returns:
            Dictionary suitable for JSON serialization
        """
        return {
            'rounds': self.rounds,
            'chain_rounds': self.chain_rounds,
            'threads': self.threads,
            'seed': self.seed,
            'penalty_weight': self.penalty_weight,
            'init_halfwidth': self.init_halfwidth,
            'gradient_tolerance': self.gradient_tolerance,
            'max_iterations': self.max_iterations,
            'ed_max_sites': self.ed_max_sites,
            'dense_max_sites': self.dense_max_sites,
            'output_dir': self.output_dir,
            'cache_dir': self.cache_dir,
            'log_level': self.LOG_LEVEL,
            'log_file': self.LOG_FILE,
        }

    def save_config(self) -> bool:
        """Save current configuration to JSON file.

        Returns:
            True when the file was written
        """
        try:
            # Ensure the directory exists
            config_dir = os.path.dirname(self.CONFIG_FILE)
            if config_dir and not os.path.exists(config_dir):
                os.makedirs(config_dir)

            with open(self.CONFIG_FILE, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=4)
            return True
        except (OSError, TypeError) as e:
            print(f"Error saving configuration: {e}")
            return False
