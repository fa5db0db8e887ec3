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
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from ..errors import DegenerateGrid, InvalidSpec, NotAStoppingTime
from ..lattice import AdaptedProcess, StoppingTime, is_stopping_time
from .base import Driver

_logger = logging.getLogger("geval.drivers")


def reflect(g: Driver) -> Driver:
    """g_*(k, y, z) = -g(k, -y, -z)."""
    return Driver(
        lambda k, nodes, y, z: -g(k, nodes, -y, -z),
        g.mu,
        flag_zero_at_origin=g.flag_zero_at_origin,
        flag_zero_at_z0=g.flag_zero_at_z0,
        label=f"reflect({g.label})",
        path_dependent=g.path_dependent,
    )


def shift_by_dividend(g: Driver, K: AdaptedProcess, tau: Union[int, StoppingTime]) -> Driver:
    """Driver of Y + K: gbar(k, y, z) = g(k, y - K_k, z) on {k <= tau}, 0 after."""
    lat = K.lattice
    if isinstance(tau, StoppingTime):
        if not is_stopping_time(tau):
            raise NotAStoppingTime("shift_by_dividend needs a stopping time")
        horizon = tau
    else:
        horizon = lat.check_time(tau)

    def func(k: int, nodes: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        shift = K[k].values[nodes]
        if isinstance(horizon, StoppingTime):
            alive = horizon.first_leaf(k)[nodes] >= k
        else:
            alive = np.full(y.shape, k <= horizon)
        return np.where(alive, g(k, nodes, y - shift, z), 0.0)

    unshifted = all(rv.sup_norm() == 0.0 for rv in K)
    return Driver(
        func,
        g.mu,
        flag_zero_at_origin=g.flag_zero_at_origin and unshifted,
        flag_zero_at_z0=g.flag_zero_at_z0,
        label=f"shift({g.label})",
        path_dependent=True,
    )


@dataclass(frozen=True)
class PairGrid:
    """Pairs of driver arguments (k, node, y, z) / (k, node, y2, z2)."""

    k: np.ndarray
    nodes: np.ndarray
    y: np.ndarray
    z: np.ndarray
    y2: np.ndarray
    z2: np.ndarray

    def __len__(self) -> int:
        return int(self.k.shape[0])

    @classmethod
    def from_tuples(cls, pairs: Iterable[Sequence]) -> "PairGrid":
        rows = list(pairs)
        if not rows:
            raise DegenerateGrid("empty sample grid")
        k, nodes, y, z, y2, z2 = zip(*rows)
        zz = np.array([np.atleast_1d(v) for v in z], dtype=float)
        zz2 = np.array([np.atleast_1d(v) for v in z2], dtype=float)
        return cls(np.array(k, dtype=int), np.array(nodes, dtype=int), np.array(y, dtype=float), zz, np.array(y2, dtype=float), zz2)


def lipschitz_grid(
    times: Sequence[int],
    y_values: Sequence[float],
    z_values: Sequence[float],
    dimension: int = 1,
    node: int = 0,
) -> PairGrid:
    """Axis-aligned neighbour pairs on a (t, y, z) product grid."""
    ys = np.asarray(y_values, dtype=float)
    zs = np.asarray(z_values, dtype=float)
    if ys.size < 1 or zs.size < 1:
        raise InvalidSpec("lipschitz_grid needs nonempty y and z values")
    rows = []
    for k in times:
        for i, y in enumerate(ys):
            for zv in zs:
                z = np.full(dimension, zv)
                if i + 1 < ys.size:
                    rows.append((k, node, y, z, ys[i + 1], z))
                for j in range(dimension):
                    later = zs[zs > zv]
                    if later.size:
                        z2 = z.copy()
                        z2[j] = later[0]
                        rows.append((k, node, y, z, y, z2))
    return PairGrid.from_tuples(rows)


def estimate_lipschitz(g: Driver, sample_grid: Union[PairGrid, Iterable[Sequence]]) -> float:
    """Largest |g(a) - g(b)| / (|dy| + |dz|) over the sampled pairs."""
    grid = sample_grid if isinstance(sample_grid, PairGrid) else PairGrid.from_tuples(sample_grid)
    den = np.abs(grid.y - grid.y2) + np.linalg.norm(grid.z - grid.z2, axis=1)
    valid = den > 0
    if not np.any(valid):
        raise DegenerateGrid("all sampled pairs coincide")
    num = np.empty(len(grid))
    for k in np.unique(grid.k):
        idx = grid.k == k
        a = g(int(k), grid.nodes[idx], grid.y[idx], grid.z[idx])
        b = g(int(k), grid.nodes[idx], grid.y2[idx], grid.z2[idx])
        num[idx] = np.abs(a - b)
    estimate = float(np.max(num[valid] / den[valid]))
    if estimate > g.mu * (1 + 1e-9):
        _logger.warning("%s: observed Lipschitz ratio %.6g exceeds declared mu %.6g", g.label, estimate, g.mu)
    return estimate
