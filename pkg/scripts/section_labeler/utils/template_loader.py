"""
Template loader utilities for section labeling

Loads the shipped data files under ``templates/`` (default configuration,
rule sets, synthetic report templates) and layers user configuration and
environment overrides on top of them.
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import dotenv
import yaml

from ..config import PipelineConfig, parse_pipeline_config
from ..errors import ConfigError

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"
REPO_ROOT = Path(__file__).resolve().parents[3]
ENV_PREFIX = "SECTION_LABELER_"

SHIPPED_RULE_SETS = {
    "mgb": "rules_mgb.txt",
    "mgb-style": "rules_mgb.txt",
    "mimic": "rules_mimic.txt",
    "mimic-style": "rules_mimic.txt",
}


def template_path(name: str) -> Path:
    """Absolute path of a shipped template file"""
    return TEMPLATES_DIR / name


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a YAML mapping

    Raises:
        ConfigError: If the file is unreadable or not a mapping
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file '{path}': {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed YAML in '{path}': {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file '{path}' must contain a mapping at the top level")
    return data


def deep_update(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_update(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_env_overrides(env_file: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Read SECTION_LABELER_* overrides from the environment and .env.local

    Args:
        env_file (str, optional): dotenv file; defaults to .env.local at the repository root

    Returns:
        dict: Config overrides keyed like the YAML file
    """
    env_path = Path(env_file) if env_file else REPO_ROOT / ".env.local"
    if env_path.exists():
        dotenv.load_dotenv(env_path)
        logger.debug("Loaded environment from %s", env_path)

    overrides: Dict[str, Any] = {}
    if os.getenv(ENV_PREFIX + "SEED"):
        overrides["seed"] = int(os.environ[ENV_PREFIX + "SEED"])
    if os.getenv(ENV_PREFIX + "EMBEDDINGS"):
        overrides["embeddings_path"] = os.environ[ENV_PREFIX + "EMBEDDINGS"]
    if os.getenv(ENV_PREFIX + "WORKERS"):
        overrides["workers"] = int(os.environ[ENV_PREFIX + "WORKERS"])
    return overrides


def load_config(config_path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, Any]] = None,
                use_env: bool = True,
                base: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Load the pipeline configuration

    Precedence: shipped defaults (or ``base``) < config file < environment < ``overrides``.

    Args:
        config_path (str, optional): User YAML config file
        overrides (dict, optional): Values from the command line
        use_env (bool): Whether to apply environment overrides
        base (dict, optional): Replaces the shipped defaults, e.g. the config stored in a model bundle

    Returns:
        PipelineConfig: The validated configuration
    """
    data = copy.deepcopy(base) if base is not None else load_yaml(template_path("default_config.yaml"))
    if config_path:
        data = deep_update(data, load_yaml(config_path))
    if use_env:
        try:
            data = deep_update(data, load_env_overrides())
        except ValueError as e:
            raise ConfigError(f"Invalid {ENV_PREFIX}* environment value: {e}") from e
    if overrides:
        data = deep_update(data, {k: v for k, v in overrides.items() if v is not None})
    return parse_pipeline_config(data)


def load_rule_text(name_or_path: str) -> str:
    """Return the text of a shipped rule set or of a rule file on disk

    Args:
        name_or_path (str): "mgb", "mimic" (or their "-style" spellings) or a path

    Returns:
        str: Rule file content
    """
    path = template_path(SHIPPED_RULE_SETS[name_or_path]) if name_or_path in SHIPPED_RULE_SETS else Path(name_or_path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read rule file '{name_or_path}': {e}") from e


def load_synthetic_templates(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Load synthetic report templates and sentence banks

    Args:
        path (str, optional): Template YAML; defaults to the shipped file

    Returns:
        dict: Raw template mapping (validated by corpus_io)
    """
    return load_yaml(path or template_path("synthetic_templates.yaml"))
