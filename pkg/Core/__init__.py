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
geval - Package Public Core

Moteur numérique pour les g-évaluations sur un arbre de chemins browniens :
BSDE rétrogrades, axiomes des évaluations non linéaires, décomposition de
Doob-Meyer non linéaire et reconstruction du générateur g.
"""

from __future__ import annotations

import logging
import os

__version__ = "1.0.0"

LOG_LEVEL_ENV = "GEVAL_LOG_LEVEL"

_logger = logging.getLogger("geval")
if not _logger.handlers:
    _handler = logging.StreamHandler()
    _formatter = logging.Formatter("[%(levelname)s] %(message)s")
    _handler.setFormatter(_formatter)
    _logger.addHandler(_handler)
    _level = logging.getLevelName(os.environ.get(LOG_LEVEL_ENV, "INFO").upper())
    _logger.setLevel(_level if isinstance(_level, int) else logging.INFO)


def set_log_level(level: int | str) -> None:
    """Change the level of the ``geval`` logger (CLI ``--verbose``/``--quiet``)."""
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        level = resolved if isinstance(resolved, int) else logging.INFO
    _logger.setLevel(level)


__all__ = ["__version__", "set_log_level", "LOG_LEVEL_ENV"]
