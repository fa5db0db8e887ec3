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
Arbre de chemins browniens (filtration discrète).

Un noeud au temps k est un mot de longueur k sur l'alphabet des 2^d branches.
Les noeuds sont indexés en big-endian: enfant = parent * 2^d + branche, le
premier pas étant le chiffre de poids fort. Le bit j (en partant du poids fort)
d'une branche vaut 1 si la coordonnée j monte de +sqrt(dt).

Les tranches (valeurs par noeud d'un temps donné) sont des ``numpy.ndarray``
en lecture seule; l'arbre n'est jamais matérialisé en entier, seules les
tranches demandées le sont.
"""

from __future__ import annotations

import logging
import math
import numbers
import threading
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional, Sequence, Union

import numpy as np
import psutil

from .errors import (
    CapacityExceeded,
    InvalidSpec,
    LatticeMismatch,
    NotAStoppingTime,
    NotMeasurable,
    TimeOrder,
)

_logger = logging.getLogger("geval.lattice")

DEFAULT_MAX_LOG2_NODES = 24

Scalar = Union[int, float]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LatticeSpec:
    """Horizon T, number of steps N and Brownian dimension d."""

    horizon_T: float
    steps_N: int
    dimension_d: int = 1

    def __post_init__(self) -> None:
        try:
            T = float(self.horizon_T)
        except (TypeError, ValueError) as exc:
            raise InvalidSpec(f"horizon_T must be a real number: {self.horizon_T!r}") from exc
        if not math.isfinite(T) or T <= 0:
            raise InvalidSpec(f"horizon_T must be > 0, got {self.horizon_T!r}")
        for name in ("steps_N", "dimension_d"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
                raise InvalidSpec(f"{name} must be a positive integer, got {value!r}")
        object.__setattr__(self, "horizon_T", T)
        object.__setattr__(self, "steps_N", int(self.steps_N))
        object.__setattr__(self, "dimension_d", int(self.dimension_d))

    @property
    def dt(self) -> float:
        return self.horizon_T / self.steps_N

    @property
    def dB_magnitude(self) -> float:
        return math.sqrt(self.dt)

    def to_dict(self) -> dict[str, Any]:
        return {"T": self.horizon_T, "N": self.steps_N, "d": self.dimension_d}


class PathLattice:
    """Non-recombining 2^d-ary scenario tree with uniform branch weights."""

    def __init__(self, spec: LatticeSpec, max_log2_nodes: int = DEFAULT_MAX_LOG2_NODES) -> None:
        self.spec = spec
        self.max_log2_nodes = int(max_log2_nodes)
        d = spec.dimension_d
        self.branching = 2**d
        bits = (np.arange(self.branching)[:, None] >> np.arange(d - 1, -1, -1)) & 1
        self.signs = _readonly((2 * bits - 1).astype(np.int64))
        self.increments = _readonly(self.signs * spec.dB_magnitude)
        self.branch_weights = _readonly(np.full(self.branching, 1.0 / self.branching))
        self._counts: list[np.ndarray] = [np.zeros((1, d), dtype=np.int64)]
        self._counts_lock = threading.Lock()

    # Shape
    @property
    def T(self) -> float:
        return self.spec.horizon_T

    @property
    def N(self) -> int:
        return self.spec.steps_N

    @property
    def d(self) -> int:
        return self.spec.dimension_d

    @property
    def dt(self) -> float:
        return self.spec.dt

    @property
    def sqrt_dt(self) -> float:
        return self.spec.dB_magnitude

    def __repr__(self) -> str:
        return f"PathLattice(T={self.T}, N={self.N}, d={self.d})"

    def compatible(self, other: "PathLattice") -> bool:
        return self is other or self.spec == other.spec

    def check_time(self, k: int) -> int:
        if isinstance(k, bool) or not isinstance(k, numbers.Integral):
            raise TimeOrder(f"time index must be an integer, got {k!r}")
        if not 0 <= k <= self.N:
            raise TimeOrder(f"time index {k} outside [0, {self.N}]")
        if self.d * k > self.max_log2_nodes:
            raise CapacityExceeded(
                f"slice {k} holds 2^{self.d * k} nodes, above the cap 2^{self.max_log2_nodes}"
            )
        return int(k)

    def n_nodes(self, k: int) -> int:
        return self.branching ** self.check_time(k)

    def time(self, k: int) -> float:
        return k * self.dt

    # Brownian walk
    def walk_counts(self, k: int) -> np.ndarray:
        """Integer sums of the branch signs along each time-k path, shape (n_k, d)."""
        k = self.check_time(k)
        with self._counts_lock:
            while len(self._counts) <= k:
                prev = self._counts[-1]
                nxt = np.repeat(prev, self.branching, axis=0) + np.tile(self.signs, (prev.shape[0], 1))
                self._counts.append(_readonly(nxt))
        return self._counts[k]

    def walk(self, k: int) -> np.ndarray:
        """B_k at every time-k node, shape (n_k, d)."""
        return self.walk_counts(k) * self.sqrt_dt

    def step_increments(self, k: int) -> np.ndarray:
        """Increment of step k -> k+1 at every time-(k+1) node, shape (n_{k+1}, d)."""
        self.check_time(k + 1)
        return np.tile(self.increments, (self.branching**k, 1))

    def brownian(self, k: int, coord: int = 0) -> "RandomVariable":
        if not 0 <= coord < self.d:
            raise InvalidSpec(f"coordinate {coord} outside [0, {self.d})")
        return RandomVariable(self, k, self.walk(k)[:, coord])

    # Slice algebra
    def average_children(self, values: np.ndarray, levels: int = 1) -> np.ndarray:
        """Weighted average over the descendants ``levels`` steps below.

        Pairwise halving, so equal children average to themselves exactly.
        """
        out = np.asarray(values, dtype=float)
        for _ in range(levels * self.d):
            out = 0.5 * (out[0::2] + out[1::2])
        return out

    def broadcast(self, values: np.ndarray, levels: int) -> np.ndarray:
        """Lift a slice ``levels`` steps forward (constant on each subtree)."""
        if levels == 0:
            return np.asarray(values)
        return np.repeat(values, self.branching**levels, axis=0)

    def project(self, values: np.ndarray, levels: int) -> np.ndarray:
        """Value of the first descendant leaf ``levels`` steps below each node."""
        arr = np.asarray(values)
        if levels == 0:
            return arr
        return arr.reshape(-1, self.branching**levels, *arr.shape[1:])[:, 0]

    def martingale_coefficients(self, children: np.ndarray) -> tuple[np.ndarray, float]:
        """Representation coefficients z of a time-(k+1) slice given F_k.

        Least squares of V - E_k[V] on the increment coordinates; exact for d = 1
        since the sign columns are orthogonal. Returns (z of shape (n_k, d),
        max projection residual).
        """
        B = self.branching
        V = np.asarray(children, dtype=float).reshape(-1, B)
        z = (V @ self.signs) / (B * self.sqrt_dt)
        if self.d == 1:
            return z, 0.0
        mean = V.mean(axis=1, keepdims=True)
        fitted = mean + (z @ self.signs.T) * self.sqrt_dt
        return z, float(np.max(np.abs(V - fitted), initial=0.0))


def build_lattice(
    spec: LatticeSpec,
    *,
    max_log2_nodes: int = DEFAULT_MAX_LOG2_NODES,
    allow_large: bool = False,
) -> PathLattice:
    """Build the path lattice of ``spec``.

    ``allow_large`` accepts horizons whose leaf level exceeds the cap; slices
    above the cap still raise CapacityExceeded when they are materialized.
    """
    if not isinstance(spec, LatticeSpec):
        raise InvalidSpec("build_lattice expects a LatticeSpec")
    depth = spec.dimension_d * spec.steps_N
    if depth > max_log2_nodes:
        if not allow_large:
            raise CapacityExceeded(
                f"2^{depth} leaves exceed the cap 2^{max_log2_nodes}; "
                "reduce N or d, or pass allow_large"
            )
        _logger.info("lattice with 2^%d leaves: slices above 2^%d stay unmaterialized", depth, max_log2_nodes)
    else:
        need = 4 * 8 * (2**depth)
        try:
            avail = psutil.virtual_memory().available
            if need > 0.5 * avail:
                _logger.warning(
                    "full leaf level needs ~%.1f MiB, more than half of available memory (%.1f MiB)",
                    need / 2**20,
                    avail / 2**20,
                )
        except Exception as exc:
            _logger.debug("memory check skipped: %s", exc)
    return PathLattice(spec, max_log2_nodes=max(max_log2_nodes, 0))


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """F_k-measurable quantity: one value per time-k node.

    ``values`` has shape (n_k,) or (n_k, d) for vector quantities.
    """

    lattice: PathLattice
    time_index: int
    values: np.ndarray

    def __post_init__(self) -> None:
        k = self.lattice.check_time(self.time_index)
        arr = np.array(self.values, dtype=float)
        n = self.lattice.n_nodes(k)
        if arr.ndim == 0:
            arr = np.full(n, float(arr))
        if arr.ndim not in (1, 2) or arr.shape[0] != n:
            raise LatticeMismatch(f"expected {n} values at time {k}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidSpec(f"non-finite value in random variable at time {k}")
        object.__setattr__(self, "time_index", k)
        object.__setattr__(self, "values", _readonly(arr))

    @classmethod
    def constant(cls, lattice: PathLattice, k: int, c: float) -> "RandomVariable":
        return cls(lattice, k, np.full(lattice.n_nodes(k), float(c)))

    @classmethod
    def from_function(
        cls, lattice: PathLattice, k: int, fn: Callable[[np.ndarray], np.ndarray]
    ) -> "RandomVariable":
        """Build from a function of the walk B_k (array of shape (n_k, d))."""
        return cls(lattice, k, np.asarray(fn(lattice.walk(k)), dtype=float))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f"RandomVariable(t={self.time_index}, n={len(self)})"

    # Time moves
    def at(self, t: int) -> "RandomVariable":
        """The same variable seen at a later time t (constant on subtrees)."""
        t = self.lattice.check_time(t)
        if t < self.time_index:
            return self.project(t)
        if t == self.time_index:
            return self
        return RandomVariable(self.lattice, t, self.lattice.broadcast(self.values, t - self.time_index))

    broadcast_to = at

    def is_measurable_at(self, k: int, atol: float = 0.0) -> bool:
        k = self.lattice.check_time(k)
        if k >= self.time_index:
            return True
        blocks = self.values.reshape(self.lattice.n_nodes(k), -1, *self.values.shape[1:])
        return bool(np.all(np.ptp(blocks, axis=1) <= atol))

    def project(self, k: int, atol: float = 1e-12) -> "RandomVariable":
        """Re-index at an earlier time k; requires F_k-measurability."""
        if not self.is_measurable_at(k, atol=atol * (1.0 + self.sup_norm())):
            raise NotMeasurable(f"variable at time {self.time_index} is not F_{k}-measurable")
        return RandomVariable(self.lattice, k, self.lattice.project(self.values, self.time_index - k))

    def cond_expect(self, s: int) -> "RandomVariable":
        return cond_expect(self, s)

    # Reductions
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))

    def mean(self) -> float:
        return float(self.lattice.average_children(self.values, self.time_index)[0])

    def min(self) -> float:
        return float(np.min(self.values))

    def max(self) -> float:
        return float(np.max(self.values))

    def max_abs_diff(self, other: "RandomVariable") -> float:
        a, b = _align(self, other)
        return float(np.max(np.abs(a.values - b.values), initial=0.0))

    def to_list(self) -> list:
        return self.values.tolist()

    # Arithmetic
    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "RandomVariable":
        return RandomVariable(self.lattice, self.time_index, fn(self.values))

    def where(self, mask: np.ndarray, other: Union["RandomVariable", Scalar]) -> "RandomVariable":
        a, b = _align(self, other)
        return RandomVariable(a.lattice, a.time_index, np.where(mask, a.values, b.values))

    def maximum(self, other: Union["RandomVariable", Scalar]) -> "RandomVariable":
        return self._binary(other, np.maximum)

    def minimum(self, other: Union["RandomVariable", Scalar]) -> "RandomVariable":
        return self._binary(other, np.minimum)

    def _binary(self, other: Any, op: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "RandomVariable":
        if isinstance(other, RandomVariable):
            a, b = _align(self, other)
            return RandomVariable(a.lattice, a.time_index, op(a.values, b.values))
        if isinstance(other, (numbers.Real, np.ndarray)):
            return RandomVariable(self.lattice, self.time_index, op(self.values, other))
        return NotImplemented

    def __add__(self, other: Any) -> "RandomVariable":
        return self._binary(other, np.add)

    def __radd__(self, other: Any) -> "RandomVariable":
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other: Any) -> "RandomVariable":
        return self._binary(other, np.subtract)

    def __rsub__(self, other: Any) -> "RandomVariable":
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other: Any) -> "RandomVariable":
        return self._binary(other, np.multiply)

    def __rmul__(self, other: Any) -> "RandomVariable":
        return self._binary(other, lambda a, b: b * a)

    def __truediv__(self, other: Any) -> "RandomVariable":
        return self._binary(other, np.divide)

    def __neg__(self) -> "RandomVariable":
        return RandomVariable(self.lattice, self.time_index, -self.values)

    def __abs__(self) -> "RandomVariable":
        return RandomVariable(self.lattice, self.time_index, np.abs(self.values))


def _check_lattice(a: PathLattice, b: PathLattice) -> None:
    if not a.compatible(b):
        raise LatticeMismatch(f"{a!r} and {b!r} differ")


def _align(a: RandomVariable, b: Union[RandomVariable, Scalar]) -> tuple[RandomVariable, RandomVariable]:
    """Bring two variables to the later of their two times."""
    if not isinstance(b, RandomVariable):
        return a, RandomVariable.constant(a.lattice, a.time_index, float(b))
    _check_lattice(a.lattice, b.lattice)
    t = max(a.time_index, b.time_index)
    return a.at(t), b.at(t)


def cond_expect(X: RandomVariable, s: int, lattice: Optional[PathLattice] = None) -> RandomVariable:
    """E[X | F_s] for X at time t >= s."""
    if lattice is not None:
        _check_lattice(lattice, X.lattice)
    lat = X.lattice
    lat.check_time(s)
    if s > X.time_index:
        raise TimeOrder(f"cannot condition a time-{X.time_index} variable on F_{s}")
    return RandomVariable(lat, s, lat.average_children(X.values, X.time_index - s))


class AdaptedProcess:
    """Sequence of random variables Y_k, k = start..stop, Y_k at time k."""

    def __init__(self, components: Sequence[RandomVariable]) -> None:
        comps = list(components)
        if not comps:
            raise InvalidSpec("an adapted process needs at least one component")
        lat = comps[0].lattice
        start = comps[0].time_index
        for i, rv in enumerate(comps):
            _check_lattice(lat, rv.lattice)
            if rv.time_index != start + i:
                raise InvalidSpec(f"component {i} has time index {rv.time_index}, expected {start + i}")
        self.lattice = lat
        self.start = start
        self._components = tuple(comps)

    @property
    def stop(self) -> int:
        return self.start + len(self._components) - 1

    @classmethod
    def from_function(
        cls,
        lattice: PathLattice,
        fn: Callable[[int, np.ndarray], np.ndarray],
        start: int = 0,
        stop: Optional[int] = None,
    ) -> "AdaptedProcess":
        """Y_k = fn(k, B_k) with B_k of shape (n_k, d)."""
        stop = lattice.N if stop is None else stop
        return cls([RandomVariable(lattice, k, np.asarray(fn(k, lattice.walk(k)), dtype=float)) for k in range(start, stop + 1)])

    @classmethod
    def deterministic(
        cls, lattice: PathLattice, fn: Callable[[int], float], start: int = 0, stop: Optional[int] = None
    ) -> "AdaptedProcess":
        stop = lattice.N if stop is None else stop
        return cls([RandomVariable.constant(lattice, k, fn(k)) for k in range(start, stop + 1)])

    @classmethod
    def constant(cls, lattice: PathLattice, c: float, start: int = 0, stop: Optional[int] = None) -> "AdaptedProcess":
        return cls.deterministic(lattice, lambda _k: c, start, stop)

    @classmethod
    def zeros(cls, lattice: PathLattice, start: int = 0, stop: Optional[int] = None) -> "AdaptedProcess":
        return cls.constant(lattice, 0.0, start, stop)

    @classmethod
    def brownian(cls, lattice: PathLattice, coord: int = 0, stop: Optional[int] = None) -> "AdaptedProcess":
        stop = lattice.N if stop is None else stop
        return cls([lattice.brownian(k, coord) for k in range(0, stop + 1)])

    @classmethod
    def cumulative(cls, increments: Sequence[RandomVariable], start: int = 0, initial: float = 0.0) -> "AdaptedProcess":
        """Predictable sum: A_start = initial, A_{k+1} = A_k + inc_k with inc_k F_k-measurable."""
        if not increments:
            raise InvalidSpec("cumulative needs at least one increment")
        lat = increments[0].lattice
        comps = [RandomVariable.constant(lat, start, initial)]
        for i, inc in enumerate(increments):
            k = start + i
            if inc.time_index != k:
                raise InvalidSpec(f"increment {i} must sit at time {k}, got {inc.time_index}")
            comps.append((comps[-1] + inc).at(k + 1))
        return cls(comps)

    def __len__(self) -> int:
        return len(self._components)

    def __iter__(self) -> Iterator[RandomVariable]:
        return iter(self._components)

    def __getitem__(self, k: int) -> RandomVariable:
        if not self.start <= k <= self.stop:
            raise TimeOrder(f"time {k} outside the process range [{self.start}, {self.stop}]")
        return self._components[k - self.start]

    def __repr__(self) -> str:
        return f"AdaptedProcess([{self.start}, {self.stop}])"

    def times(self) -> range:
        return range(self.start, self.stop + 1)

    def restrict(self, start: int, stop: int) -> "AdaptedProcess":
        return AdaptedProcess([self[k] for k in range(start, stop + 1)])

    def increments(self) -> list[RandomVariable]:
        """Y_{k+1} - Y_k at time k+1, for k = start..stop-1."""
        return [self[k + 1] - self[k] for k in range(self.start, self.stop)]

    def is_nondecreasing(self, tol: float = 1e-12) -> bool:
        return all(inc.min() >= -tol for inc in self.increments())

    def _common(self, other: "AdaptedProcess") -> range:
        _check_lattice(self.lattice, other.lattice)
        lo, hi = max(self.start, other.start), min(self.stop, other.stop)
        if lo > hi:
            raise TimeOrder("processes have disjoint time ranges")
        return range(lo, hi + 1)

    def _combine(self, other: Any, op: Callable[[RandomVariable, Any], RandomVariable]) -> "AdaptedProcess":
        if isinstance(other, AdaptedProcess):
            return AdaptedProcess([op(self[k], other[k]) for k in self._common(other)])
        return AdaptedProcess([op(rv, other) for rv in self._components])

    def __add__(self, other: Any) -> "AdaptedProcess":
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other: Any) -> "AdaptedProcess":
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, other: Any) -> "AdaptedProcess":
        return self._combine(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self) -> "AdaptedProcess":
        return AdaptedProcess([-rv for rv in self._components])

    def sup_norm(self) -> float:
        return max(rv.sup_norm() for rv in self._components)

    def max_abs_diff(self, other: "AdaptedProcess") -> float:
        return max(self[k].max_abs_diff(other[k]) for k in self._common(other))

    def min_diff(self, other: "AdaptedProcess") -> float:
        """min over nodes of self - other."""
        return min(float(np.min(self[k].values - other[k].values)) for k in self._common(other))

    def to_dict(self) -> dict[str, Any]:
        return {"start": self.start, "values": [rv.to_list() for rv in self._components]}

    def rows(self) -> Iterator[tuple[int, int, float]]:
        for rv in self._components:
            for node, value in enumerate(rv.values.reshape(len(rv), -1)[:, 0]):
                yield rv.time_index, node, float(value)


class StoppingTime:
    """Integer-valued leaf variable with {tau = k} a union of time-k atoms."""

    def __init__(self, lattice: PathLattice, values: Any, *, validate: bool = True) -> None:
        arr = np.asarray(values.values if isinstance(values, RandomVariable) else values)
        n = lattice.n_nodes(lattice.N)
        if arr.shape != (n,):
            raise LatticeMismatch(f"stopping time needs {n} leaf values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or not np.all(np.equal(np.round(arr), arr)):
            raise NotAStoppingTime("stopping time values must be integers")
        ints = arr.astype(np.int64)
        if ints.min() < 0 or ints.max() > lattice.N:
            raise NotAStoppingTime(f"stopping time values must lie in [0, {lattice.N}]")
        self.lattice = lattice
        self.values = _readonly(ints)
        if validate and not _atom_scan(lattice, ints):
            raise NotAStoppingTime("{tau = k} is not determined by the first k steps")

    @classmethod
    def constant(cls, lattice: PathLattice, k: int) -> "StoppingTime":
        k = lattice.check_time(k)
        return cls(lattice, np.full(lattice.n_nodes(lattice.N), k), validate=False)

    def __repr__(self) -> str:
        return f"StoppingTime(min={self.min()}, max={self.max()})"

    def min(self) -> int:
        return int(self.values.min())

    def max(self) -> int:
        return int(self.values.max())

    @property
    def is_deterministic(self) -> bool:
        return self.min() == self.max()

    def first_leaf(self, k: int) -> np.ndarray:
        """tau read on the first leaf below each time-k node."""
        return self.lattice.project(self.values, self.lattice.N - k)

    def stopped_by(self, k: int) -> np.ndarray:
        """Mask of time-k nodes on which tau <= k (an F_k event)."""
        return self.first_leaf(k) <= k

    def precedes(self, other: "StoppingTime") -> bool:
        _check_lattice(self.lattice, other.lattice)
        return bool(np.all(self.values <= other.values))

    def as_random_variable(self) -> RandomVariable:
        return RandomVariable(self.lattice, self.lattice.N, self.values.astype(float))


def _atom_scan(lattice: PathLattice, values: np.ndarray) -> bool:
    for k in range(lattice.N + 1):
        ind = (values == k).reshape(lattice.branching**k, -1)
        if not np.array_equal(ind.all(axis=1), ind.any(axis=1)):
            return False
    return True


def is_stopping_time(tau: Any, lattice: Optional[PathLattice] = None) -> bool:
    """True iff every {tau = k} is a union of time-k atoms."""
    if isinstance(tau, StoppingTime):
        return _atom_scan(tau.lattice, tau.values)
    if isinstance(tau, RandomVariable):
        lattice = tau.lattice
        if tau.time_index != lattice.N:
            tau = tau.at(lattice.N)
        values = tau.values
    else:
        if lattice is None:
            raise InvalidSpec("is_stopping_time needs a lattice for raw arrays")
        values = np.asarray(tau, dtype=float)
    if values.shape != (lattice.n_nodes(lattice.N),):
        return False
    if not np.all(np.isfinite(values)) or not np.all(np.round(values) == values):
        return False
    ints = values.astype(np.int64)
    if ints.min() < 0 or ints.max() > lattice.N:
        return False
    return _atom_scan(lattice, ints)


def as_stopping_time(lattice: PathLattice, tau: Union[int, StoppingTime]) -> StoppingTime:
    if isinstance(tau, StoppingTime):
        _check_lattice(lattice, tau.lattice)
        return tau
    return StoppingTime.constant(lattice, tau)


def stopped_value(Y: AdaptedProcess, tau: Union[int, StoppingTime]) -> RandomVariable:
    """Leaf variable Y_{tau(w)}(w)."""
    lat = Y.lattice
    if not isinstance(tau, StoppingTime):
        return Y[lat.check_time(tau)].at(lat.N)
    _check_lattice(lat, tau.lattice)
    if not is_stopping_time(tau):
        raise NotAStoppingTime("stopped_value needs a stopping time")
    out = np.empty(lat.n_nodes(lat.N))
    for k in np.unique(tau.values):
        mask = tau.values == k
        out[mask] = Y[int(k)].at(lat.N).values[mask]
    return RandomVariable(lat, lat.N, out)


def is_measurable_at_stopping(X: RandomVariable, tau: StoppingTime, atol: float = 1e-12) -> bool:
    """X is F_tau-measurable: constant on the time-k atoms of {tau = k}."""
    lat = X.lattice
    leaves = X.at(lat.N).values
    scale = atol * (1.0 + float(np.max(np.abs(leaves), initial=0.0)))
    for k in np.unique(tau.values):
        k = int(k)
        rows = (tau.values == k).reshape(lat.branching**k, -1)[:, 0]
        blocks = leaves.reshape(lat.branching**k, -1)[rows]
        if blocks.size and np.max(np.ptp(blocks, axis=1)) > scale:
            return False
    return True


def hitting_time(Y: AdaptedProcess, level: float, *, above: bool = True) -> StoppingTime:
    """First k with Y_k >= level (or <= level when ``above`` is False), else N."""
    return _first_time(Y, lambda v: v >= level if above else v <= level)


def first_exit(Y: AdaptedProcess, low: float, high: float) -> StoppingTime:
    """First k with Y_k <= low or Y_k >= high, else N."""
    return _first_time(Y, lambda v: (v <= low) | (v >= high))


def _first_time(Y: AdaptedProcess, hit_fn: Callable[[np.ndarray], np.ndarray]) -> StoppingTime:
    lat = Y.lattice
    n = lat.n_nodes(lat.N)
    tau = np.full(n, lat.N, dtype=np.int64)
    pending = np.ones(n, dtype=bool)
    for k in Y.times():
        hit = hit_fn(Y[k].at(lat.N).values) & pending
        tau[hit] = k
        pending &= ~hit
    return StoppingTime(lat, tau, validate=False)
