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

from __future__ import annotations

import logging
from typing import Any, Callable, Optional

from ..errors import BadParams, UnknownBuiltin
from .base import Driver

_logger = logging.getLogger("geval.drivers")

DriverFactory = Callable[..., Driver]

_REGISTRY: dict[str, DriverFactory] = {}
_ORDER: list[str] = []


def unregister(name: str) -> None:
    """Unregister a builtin name if present."""
    _REGISTRY.pop(name, None)
    if name in _ORDER:
        _ORDER.remove(name)


def register(name: str) -> Callable[[DriverFactory], DriverFactory]:
    """Register a driver factory under a non-empty unique name.

    Registering the same factory twice is a no-op; a different factory trying
    to take an existing name is ignored.
    """
    if not name or not isinstance(name, str):
        raise ValueError("builtin name must be a non-empty string")

    def deco(factory: DriverFactory) -> DriverFactory:
        existing = _REGISTRY.get(name)
        if existing is not None and existing is not factory:
            _logger.warning("builtin %r already registered, keeping the first factory", name)
            return factory
        _REGISTRY[name] = factory
        if name not in _ORDER:
            _ORDER.append(name)
        return factory

    return deco


def get_factory(name: str) -> Optional[DriverFactory]:
    return _REGISTRY.get(name)


def available_builtins() -> list[str]:
    return list(_ORDER)


def builtin(name: str, params: Optional[dict[str, Any]] = None, *, dimension: int = 1) -> Driver:
    """Instantiate the builtin ``name`` with ``params``."""
    factory = get_factory(name)
    if factory is None:
        raise UnknownBuiltin(f"driver '{name}' is not registered (known: {', '.join(_ORDER)})")
    params = dict(params or {})
    try:
        drv = factory(dimension=dimension, **params)
    except TypeError as exc:
        raise BadParams(f"{name}: {exc}") from exc
    drv.source = {"name": name, "params": params}
    return drv
