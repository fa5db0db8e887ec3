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
Tests for Core.allversion - versions recorded in report headers
"""

import numpy as np

from Core import __version__
from Core.allversion import (
    LIBRARIES,
    VersionInfo,
    get_all_versions,
    get_core_version,
    get_numpy_version,
    get_system_version,
    get_version_string,
    get_versions_dict,
    library_version,
)


class TestVersionInfo:
    def test_str_and_dict(self):
        info = VersionInfo("Test", "1.0.0", "core")
        assert str(info) == "Test v1.0.0"
        assert info.to_dict() == {"name": "Test", "version": "1.0.0", "type": "core"}

    def test_default_type_is_library(self):
        assert VersionInfo("NumPy", "2.0").type == "library"


class TestVersionGetters:
    """Version lookups"""

    def test_core_version_matches_package(self):
        assert get_core_version() == __version__

    def test_numpy_version(self):
        assert get_numpy_version() == np.__version__

    def test_missing_library(self):
        assert library_version("no_such_module_for_geval") == "unknown"

    def test_system_version_mentions_python(self):
        assert get_system_version().startswith("Python ")

    def test_all_versions_keys(self):
        """Core, every tracked library and the system"""
        assert set(get_all_versions()) == {"core", "system", *LIBRARIES}
        assert get_versions_dict()["core"] == __version__

    def test_version_string(self):
        text = get_version_string()
        assert text.splitlines()[0] == "geval Version Information:"
        assert "NumPy" in text
