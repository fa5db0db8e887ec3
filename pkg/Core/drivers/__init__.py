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

from .base import Driver, DriverFn, TabulatedDriver
from .registry import available_builtins, builtin, get_factory, register, unregister
from . import builtins as _builtins  # noqa: F401  (registers the builtin drivers)
from .transforms import PairGrid, estimate_lipschitz, lipschitz_grid, reflect, shift_by_dividend

__all__ = [
    "Driver",
    "DriverFn",
    "TabulatedDriver",
    "available_builtins",
    "builtin",
    "get_factory",
    "register",
    "unregister",
    "PairGrid",
    "estimate_lipschitz",
    "lipschitz_grid",
    "reflect",
    "shift_by_dividend",
]
