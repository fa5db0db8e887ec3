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

from .axioms import AxiomCheck, AxiomReport, axiom_suite, expectation_suite, lifted_domination_check
from .base import (
    ConcatenatedEvaluation,
    DriverEvaluation,
    Evaluation,
    LiftedEvaluation,
    LinearExpectation,
    TableEvaluation,
    concatenate,
    from_driver,
    lift_with_dividend,
)
from .stopping import extend_to_stopping


def apply(E: Evaluation, s: int, t: int, X):
    """E_{s,t}[X]."""
    return E.apply(s, t, X)


__all__ = [
    "AxiomCheck",
    "AxiomReport",
    "ConcatenatedEvaluation",
    "DriverEvaluation",
    "Evaluation",
    "LiftedEvaluation",
    "LinearExpectation",
    "TableEvaluation",
    "apply",
    "axiom_suite",
    "concatenate",
    "expectation_suite",
    "extend_to_stopping",
    "from_driver",
    "lift_with_dividend",
    "lifted_domination_check",
]
