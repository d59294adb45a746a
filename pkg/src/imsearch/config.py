"""Configuration loading: YAML file + LGIR_BACKEND_<ROLE>_URL env overrides.

All retrieval hyperparameters (tau, k_verify, alpha_evaluate, temperature,
top_p) are first-class keys; see docs/formats.md for the full schema.
"""

from __future__ import annotations

import os
from pathlib import Path

import yaml

from .errors import ConfigError
from .gateway import ROLES, env_var_for_role
from .model import PipelineConfig


def apply_env_overrides(backends: dict[str, str], environ=None) -> dict[str, str]:
    env = os.environ if environ is None else environ
    merged = dict(backends)
    for role in ROLES:
        value = env.get(env_var_for_role(role))
        if value:
            merged[role] = value
    return merged


def mock_backends(script_path: str | None = None, dim: int | None = None) -> dict[str, str]:
    """All six roles pointed at one mock:// backend."""
    url = "mock://"
    if script_path:
        url += str(Path(script_path).resolve())
    if dim is not None:
        url += f"?dim={dim}"
    return {role: url for role in ROLES}


def load_config(
    path: str | None = None,
    overrides: dict | None = None,
    environ=None,
) -> PipelineConfig:
    """Build a PipelineConfig from (file <- env <- explicit overrides)."""
    data: dict = {}
    if path:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        data.update(raw)
    backends = dict(data.get("backends") or {})
    backends = apply_env_overrides(backends, environ)
    if overrides:
        extra = dict(overrides)
        if "backends" in extra:
            backends.update(extra.pop("backends") or {})
        data.update({k: v for k, v in extra.items() if v is not None})
    data["backends"] = backends
    try:
        return PipelineConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))
