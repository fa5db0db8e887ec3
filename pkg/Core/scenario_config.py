# SPDX-License-Identifier: Apache-2.0
# Copyright 2025 Ague Samuel Amen
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Scenario Configuration Loader
Charge un scénario (JSON, lu avec yaml.safe_load), le fusionne avec la
configuration par défaut puis le valide contre schemas/scenario.schema.json.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Optional, Union

import jsonschema
import yaml

from .errors import ConfigError

SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "scenario.schema.json"

DEFAULT_CONFIG: dict[str, Any] = {
    "lattice": {"T": 1.0, "N": 8, "d": 1, "max_log2_nodes": 24},
    "market": {"S0": 100.0, "r": 0.05, "b": 0.1, "sigma": 0.2, "nu": None},
    "driver": {"name": "zero", "params": {}, "file": None},
    "evaluation": {"source": "driver", "mu": None},
    "claim": "B1",
    "claim_time": None,
    "dividend": None,
    "solver": {
        "scheme": "implicit",
        "fixed_point_tol": 1e-12,
        "max_fixed_point_iters": 100,
        "monotonicity_guard": True,
        "damping": 1.0,
        "markov_reduction": "auto",
        "picard": False,
    },
    "samples": 100,
    "seed": 0,
    "tolerances": {"slack": 1e-9, "decomposition": 1e-8, "roundtrip": 0.05},
    "stopping": {"sigma": 0, "tau": None},
    "decompose": {"process": "-t", "method": "both", "schedule": [1, 2, 4, 8, 16, 32, 64, 128, 256]},
    "recover": {
        "times": [0],
        "y": [-1.0, 0.0, 1.0],
        "z": [-2.0, -1.0, 0.0, 1.0, 2.0],
        "method": "one_step",
        "window": 2,
        "claims": 10,
        "output": None,
    },
    "fixpoint": {"f": {"name": "linear", "params": {"a": 1.0}}, "c": None, "tol": 1e-10, "max_iter": 200},
    "probe": {"kind": "constant_z", "t": 0, "y": 0.0, "z": 1.0},
    "report": {"csv": None, "text": True},
    "output": {"path": None},
    "threads": None,
}


def _deep_merge_dict(base: dict, override: dict) -> dict:
    """Fusionne récursivement deux dictionnaires"""
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _deep_merge_dict(result[key], value)
        else:
            result[key] = value
    return result


def _load_schema() -> dict[str, Any]:
    with open(SCHEMA_PATH, encoding="utf-8") as f:
        return json.load(f)


def validate_config(config: dict[str, Any]) -> dict[str, Any]:
    try:
        jsonschema.validate(instance=config, schema=_load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid scenario at {where}: {exc.message}") from exc
    return config


def merge_config(user_config: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    """Defaults overlaid with ``user_config``, validated."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if user_config:
        if not isinstance(user_config, dict):
            raise ConfigError("a scenario must be a mapping")
        config = _deep_merge_dict(config, user_config)
    return validate_config(config)


def load_scenario_config(path: Union[str, Path, None]) -> dict[str, Any]:
    """
    Charge un scénario depuis ``path``.

    Args:
        path: Fichier JSON (ou YAML) du scénario; None donne la configuration par défaut

    Returns:
        Configuration complète, validée
    """
    if path is None:
        return merge_config(None)
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"scenario file not found: {p}")
    try:
        with open(p, encoding="utf-8") as f:
            user_config = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    return merge_config(user_config)


def canonical_json(config: dict[str, Any]) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def get_lattice_options(config: dict[str, Any]) -> dict[str, Any]:
    """Récupère les options du treillis"""
    return config.get("lattice", {})


def get_market_options(config: dict[str, Any]) -> dict[str, Any]:
    """Récupère les paramètres de marché (nu = b - sigma^2/2 par défaut)"""
    market = dict(config.get("market", {}))
    if market.get("nu") is None:
        market["nu"] = float(market.get("b", 0.0)) - 0.5 * float(market.get("sigma", 0.0)) ** 2
    return market


def get_driver_options(config: dict[str, Any]) -> dict[str, Any]:
    return config.get("driver", {})


def get_evaluation_options(config: dict[str, Any]) -> dict[str, Any]:
    return config.get("evaluation", {})


def get_solver_options(config: dict[str, Any]) -> dict[str, Any]:
    """Récupère les options du solveur"""
    return config.get("solver", {})


def get_tolerances(config: dict[str, Any]) -> dict[str, Any]:
    return config.get("tolerances", {})


def get_section(config: dict[str, Any], name: str) -> Any:
    return config.get(name, DEFAULT_CONFIG.get(name))
