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
Versions du coeur et de la pile numérique, recopiées dans l'en-tête de chaque
rapport pour qu'un calcul puisse être rejoué à l'identique.
"""

from __future__ import annotations

import importlib
import platform
import sys
from dataclasses import asdict, dataclass
from typing import Dict

LIBRARIES = {"numpy": "NumPy", "scipy": "SciPy", "yaml": "PyYAML"}


@dataclass(frozen=True)
class VersionInfo:
    name: str
    version: str
    type: str = "library"

    def __str__(self) -> str:
        return f"{self.name} v{self.version}"

    def to_dict(self) -> Dict[str, str]:
        return asdict(self)


def get_core_version() -> str:
    from . import __version__

    return __version__


def library_version(module: str) -> str:
    """``__version__`` of an importable module, "unknown" otherwise."""
    try:
        return str(importlib.import_module(module).__version__)
    except (ImportError, AttributeError):
        return "unknown"


def get_numpy_version() -> str:
    return library_version("numpy")


def get_system_version() -> str:
    v = sys.version_info
    return f"Python {v.major}.{v.minor}.{v.micro} on {platform.system()} {platform.release()}"


def get_all_versions() -> Dict[str, VersionInfo]:
    versions = {"core": VersionInfo("geval core", get_core_version(), "core")}
    for module, label in LIBRARIES.items():
        versions[module] = VersionInfo(label, library_version(module))
    versions["system"] = VersionInfo("System", get_system_version(), "system")
    return versions


def get_versions_dict() -> Dict[str, str]:
    return {key: info.version for key, info in get_all_versions().items()}


def get_version_string() -> str:
    lines = ["geval Version Information:"]
    lines.extend(f"  {info.name}: {info.version}" for info in get_all_versions().values())
    return "\n".join(lines)


__all__ = [
    "LIBRARIES",
    "VersionInfo",
    "get_all_versions",
    "get_core_version",
    "get_numpy_version",
    "get_system_version",
    "get_version_string",
    "get_versions_dict",
    "library_version",
]
