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

import json

import numpy as np
import pytest
from hypothesis import settings

from .lattice_support import make_lattice

settings.register_profile("geval", max_examples=20, deadline=None)
settings.load_profile("geval")


@pytest.fixture()
def lat4():
    """d = 1, N = 4, T = 1 (16 leaves)."""
    return make_lattice(4)


@pytest.fixture()
def lat8():
    """d = 1, N = 8, T = 1/8 so that dt = 1/64."""
    return make_lattice(8, T=0.125)


@pytest.fixture()
def lat2d():
    """d = 2, N = 3 (64 leaves)."""
    return make_lattice(3, d=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20250101)


@pytest.fixture()
def scenario_file(tmp_path):
    """Write a scenario document and return its path."""

    def write(data: dict, name: str = "scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write
