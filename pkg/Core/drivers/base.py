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
Générateurs g(k, noeud, y, z).

Un Driver est appelé de façon vectorisée sur une tranche:
    g(k, nodes, y, z) -> array (n,)
avec nodes les indices des noeuds au temps k (n,), y (n,) et z (n, d).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import BadParams, InvalidSpec, LatticeMismatch

DriverFn = Callable[[int, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class Driver:
    """Generator with a declared Lipschitz constant and structural flags."""

    def __init__(
        self,
        func: DriverFn,
        mu: float,
        *,
        flag_zero_at_origin: bool = False,
        flag_zero_at_z0: bool = False,
        label: str = "driver",
        path_dependent: bool = False,
        source: Optional[dict[str, Any]] = None,
    ) -> None:
        try:
            mu = float(mu)
        except (TypeError, ValueError) as exc:
            raise BadParams(f"mu must be a real number: {mu!r}") from exc
        if not math.isfinite(mu) or mu < 0:
            raise BadParams(f"mu must be finite and >= 0, got {mu}")
        if flag_zero_at_z0 and not flag_zero_at_origin:
            raise BadParams("g(.,y,0) = 0 implies g(.,0,0) = 0")
        self._func = func
        self.mu = mu
        self.flag_zero_at_origin = bool(flag_zero_at_origin)
        self.flag_zero_at_z0 = bool(flag_zero_at_z0)
        self.label = label
        self.path_dependent = bool(path_dependent)
        self.source = source

    def __repr__(self) -> str:
        return f"Driver({self.label}, mu={self.mu})"

    def __call__(self, k: int, nodes: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(y.shape[0], -1)
        out = np.asarray(self._func(int(k), np.asarray(nodes), y, z), dtype=float)
        return np.broadcast_to(out, y.shape).copy()

    def at(self, k: int, node: int, y: float, z: Union[float, Sequence[float]]) -> float:
        """Scalar evaluation at one node."""
        zz = np.atleast_1d(np.asarray(z, dtype=float)).reshape(1, -1)
        return float(self(k, np.array([node]), np.array([float(y)]), zz)[0])

    def describe(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "mu": self.mu,
            "flag_zero_at_origin": self.flag_zero_at_origin,
            "flag_zero_at_z0": self.flag_zero_at_z0,
            "path_dependent": self.path_dependent,
        }


def _axis(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise InvalidSpec(f"axis {name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidSpec(f"axis {name} has non-finite entries")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise InvalidSpec(f"axis {name} must be strictly increasing")
    return arr


class TabulatedDriver(Driver):
    """Driver sampled on a grid (time index, y, z_1..z_d).

    Multilinear interpolation inside the grid, inputs clamped to its boundary.
    Singleton axes are held constant.
    """

    def __init__(
        self,
        time_axis: Sequence[float],
        y_axis: Sequence[float],
        z_axes: Sequence[Sequence[float]],
        values: Any,
        *,
        mu: Optional[float] = None,
        label: str = "tabulated",
        flag_zero_at_origin: bool = False,
        flag_zero_at_z0: bool = False,
        dispersion: Any = None,
    ) -> None:
        if len(z_axes) == 0:
            raise InvalidSpec("a tabulated driver needs at least one z axis")
        self.time_axis = _axis(time_axis, "t")
        self.y_axis = _axis(y_axis, "y")
        self.z_axes = tuple(_axis(a, f"z{j + 1}") for j, a in enumerate(z_axes))
        self.axes = (self.time_axis, self.y_axis, *self.z_axes)
        shape = tuple(a.size for a in self.axes)
        table = np.asarray(values, dtype=float)
        if table.size != int(np.prod(shape)):
            raise InvalidSpec(f"table has {table.size} values, grid needs shape {shape}")
        table = table.reshape(shape)
        if not np.all(np.isfinite(table)):
            raise InvalidSpec("tabulated driver values must be finite")
        self.values = table
        self.dispersion = None if dispersion is None else np.asarray(dispersion, dtype=float).reshape(shape)
        self._active = [i for i, a in enumerate(self.axes) if a.size > 1]
        self._interp: Optional[RegularGridInterpolator] = None
        if self._active:
            self._interp = RegularGridInterpolator(
                tuple(self.axes[i] for i in self._active),
                table.reshape([self.axes[i].size for i in self._active]),
                method="linear",
                bounds_error=False,
                fill_value=None,
            )
        if mu is None:
            q_y, q_z = self.grid_quotients()
            mu = max(q_y, math.sqrt(self.dimension) * q_z)
        super().__init__(
            self._evaluate,
            mu,
            flag_zero_at_origin=flag_zero_at_origin,
            flag_zero_at_z0=flag_zero_at_z0,
            label=label,
        )

    @property
    def dimension(self) -> int:
        return len(self.z_axes)

    def _evaluate(self, k: int, nodes: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        n = y.shape[0]
        if z.shape[1] != self.dimension:
            raise LatticeMismatch(f"driver tabulated for d={self.dimension}, called with d={z.shape[1]}")
        if self._interp is None:
            return np.full(n, float(self.values.flat[0]))
        cols = [np.full(n, float(k)), y, *(z[:, j] for j in range(self.dimension))]
        pts = np.column_stack([np.clip(cols[i], self.axes[i][0], self.axes[i][-1]) for i in self._active])
        return self._interp(pts)

    def grid_quotients(self) -> tuple[float, float]:
        """Largest difference quotients along the y axis and along the z axes."""

        def along(axis_index: int) -> float:
            ax = self.axes[axis_index]
            if ax.size < 2:
                return 0.0
            diffs = np.abs(np.diff(self.values, axis=axis_index))
            steps = np.diff(ax).reshape([-1 if i == axis_index else 1 for i in range(self.values.ndim)])
            return float(np.max(diffs / steps))

        q_y = along(1)
        q_z = max(along(2 + j) for j in range(self.dimension))
        return q_y, q_z

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": "tabulated",
            "label": self.label,
            "mu": self.mu,
            "flag_zero_at_origin": self.flag_zero_at_origin,
            "flag_zero_at_z0": self.flag_zero_at_z0,
            "time_axis": self.time_axis.tolist(),
            "y_axis": self.y_axis.tolist(),
            "z_axes": [a.tolist() for a in self.z_axes],
            "values": self.values.tolist(),
        }
        if self.dispersion is not None:
            out["dispersion"] = self.dispersion.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TabulatedDriver":
        try:
            return cls(
                data["time_axis"],
                data["y_axis"],
                data["z_axes"],
                data["values"],
                mu=data.get("mu"),
                label=data.get("label", "tabulated"),
                flag_zero_at_origin=bool(data.get("flag_zero_at_origin", False)),
                flag_zero_at_z0=bool(data.get("flag_zero_at_z0", False)),
                dispersion=data.get("dispersion"),
            )
        except KeyError as exc:
            raise InvalidSpec(f"tabulated driver document misses {exc}") from exc

    def save(self, path: Union[str, Path]) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2), encoding="utf-8")
        return p

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TabulatedDriver":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))
