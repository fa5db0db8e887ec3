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
Hiérarchie d'exceptions de geval.

Chaque exception appartient à une catégorie qui fixe le code de sortie de la CLI:
  - ConfigurationError -> 2 (entrée invalide, config, usage de l'API)
  - NumericalError     -> 3 (échec numérique)
  - PropertyFailure    -> 1 (propriété mathématique violée)
"""

from __future__ import annotations

from typing import Iterable, Optional

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


class GevalError(Exception):
    """Base class of every error raised by geval."""

    exit_code: int = EXIT_NUMERICAL_ERROR


class ConfigurationError(GevalError):
    exit_code = EXIT_CONFIG_ERROR


class NumericalError(GevalError):
    exit_code = EXIT_NUMERICAL_ERROR


class PropertyFailure(GevalError):
    exit_code = EXIT_PROPERTY_FAILURE


# Lattice
class InvalidSpec(ConfigurationError, ValueError):
    pass


class CapacityExceeded(ConfigurationError):
    pass


class TimeOrder(ConfigurationError, ValueError):
    pass


class LatticeMismatch(ConfigurationError, ValueError):
    pass


class NotAStoppingTime(ConfigurationError, ValueError):
    pass


class StoppingOrder(ConfigurationError, ValueError):
    pass


class NotMeasurable(ConfigurationError, ValueError):
    pass


# Drivers
class UnknownBuiltin(ConfigurationError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown builtin"


class BadParams(ConfigurationError, ValueError):
    pass


class DegenerateGrid(ConfigurationError, ValueError):
    pass


# Solvers
class StepTooLarge(NumericalError):
    pass


class MonotonicityViolated(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class RootBracketFailure(NumericalError):
    pass


# Evaluations / martingales
class BadPartition(ConfigurationError, ValueError):
    pass


class BadLevels(ConfigurationError, ValueError):
    pass


class NotSupermartingale(PropertyFailure):
    pass


class ExtractInconsistent(PropertyFailure):
    pass


class AxiomsFailed(PropertyFailure):
    pass


# Payoff language / configuration
class ParseError(ConfigurationError):
    """Syntax error in a payoff expression, located by byte offset."""

    def __init__(self, offset: int, expected: Iterable[str], found: str = "") -> None:
        self.offset = int(offset)
        self.expected = tuple(sorted(set(expected)))
        self.found = found
        shown = found if found else "end of input"
        super().__init__(
            f"parse error at offset {self.offset}: found {shown!r}, "
            f"expected one of {', '.join(self.expected)}"
        )


class UnknownIdentifier(ConfigurationError):
    def __init__(self, name: str, offset: Optional[int] = None) -> None:
        self.name = name
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"unknown identifier {name!r}{where}")


class ArityMismatch(ConfigurationError):
    def __init__(self, name: str, got: int, expected: str) -> None:
        self.name = name
        self.got = got
        super().__init__(f"{name}() takes {expected} argument(s), got {got}")


class ConfigError(ConfigurationError):
    pass


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(exc, GevalError):
        return exc.exit_code
    return EXIT_NUMERICAL_ERROR
