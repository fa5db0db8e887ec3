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
Évaluations non linéaires E_{s,t}[.] sur l'arbre.

Chaque implémentation fournit l'opérateur à un pas step(k, X) (X au temps k+1);
apply(s, t, X) compose les pas de t vers s, sauf quand une implémentation
dispose d'un chemin direct (solveur BSDE, espérance conditionnelle).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence

import numpy as np

from ..bsde_engine import SolverConfig, backward_step, check_step, evaluate
from ..drivers import Driver
from ..errors import BadPartition, LatticeMismatch, TimeOrder
from ..lattice import AdaptedProcess, PathLattice, RandomVariable, cond_expect

# A one-step table map: children values (n_k, B) -> values at time k (n_k,)
StepMap = Callable[[np.ndarray], np.ndarray]


class Evaluation(ABC):
    """F_t-consistent evaluation with a declared domination constant ``mu``."""

    provenance: str = "Evaluation"

    def __init__(self, lattice: PathLattice, mu: Optional[float] = None) -> None:
        self.lattice = lattice
        self.mu = None if mu is None else float(mu)

    def __repr__(self) -> str:
        return f"{self.provenance}(mu={self.mu})"

    @abstractmethod
    def step(self, k: int, X: RandomVariable) -> RandomVariable:
        """E_{k,k+1}[X] for X at time k+1."""

    def _prepare(self, s: int, t: int, X: RandomVariable) -> tuple[int, int, RandomVariable]:
        if not self.lattice.compatible(X.lattice):
            raise LatticeMismatch("claim lives on another lattice")
        s, t = self.lattice.check_time(s), self.lattice.check_time(t)
        if s > t:
            raise TimeOrder(f"apply needs s <= t, got s={s}, t={t}")
        return s, t, X.at(t)

    def apply(self, s: int, t: int, X: RandomVariable) -> RandomVariable:
        s, t, Y = self._prepare(s, t, X)
        for k in range(t - 1, s - 1, -1):
            Y = self.step(k, Y)
        return Y

    def describe(self) -> dict:
        return {"provenance": self.provenance, "mu": self.mu}


class DriverEvaluation(Evaluation):
    """E^g computed by the BSDE engine."""

    provenance = "FromDriver"

    def __init__(self, g: Driver, lattice: PathLattice, cfg: Optional[SolverConfig] = None) -> None:
        super().__init__(lattice, g.mu)
        self.g = g
        self.cfg = cfg or SolverConfig()
        check_step(g, lattice.dt, lattice.d, self.cfg)

    def __repr__(self) -> str:
        return f"FromDriver({self.g.label})"

    def step(self, k: int, X: RandomVariable) -> RandomVariable:
        y, _z, _it, _res, _proj = backward_step(self.g, k, X.at(k + 1).values, self.lattice, self.cfg)
        return RandomVariable(self.lattice, k, y)

    def apply(self, s: int, t: int, X: RandomVariable) -> RandomVariable:
        s, t, Y = self._prepare(s, t, X)
        return evaluate(self.g, s, t, Y, None, self.cfg)

    def describe(self) -> dict:
        return {**super().describe(), "driver": self.g.describe()}


class LinearExpectation(Evaluation):
    """Conditional expectation, i.e. E^g with g = 0."""

    provenance = "LinearExpectation"

    def __init__(self, lattice: PathLattice) -> None:
        super().__init__(lattice, 0.0)

    def step(self, k: int, X: RandomVariable) -> RandomVariable:
        return cond_expect(X.at(k + 1), k)

    def apply(self, s: int, t: int, X: RandomVariable) -> RandomVariable:
        s, t, Y = self._prepare(s, t, X)
        return cond_expect(Y, s)


class TableEvaluation(Evaluation):
    """Black-box evaluation given by its one-step maps."""

    provenance = "BlackBoxTable"

    def __init__(self, lattice: PathLattice, maps: Sequence[StepMap], mu: Optional[float] = None) -> None:
        super().__init__(lattice, mu)
        if len(maps) != lattice.N:
            raise LatticeMismatch(f"need {lattice.N} one-step maps, got {len(maps)}")
        self._maps = tuple(maps)

    @classmethod
    def from_evaluation(cls, E: Evaluation, mu: Optional[float] = None) -> "TableEvaluation":
        """Freeze the one-step operators of E."""
        lat = E.lattice

        def freeze(k: int) -> StepMap:
            return lambda children: E.step(k, RandomVariable(lat, k + 1, children.reshape(-1))).values

        return cls(lat, [freeze(k) for k in range(lat.N)], mu=E.mu if mu is None else mu)

    def step(self, k: int, X: RandomVariable) -> RandomVariable:
        lat = self.lattice
        children = X.at(k + 1).values.reshape(lat.n_nodes(k), lat.branching)
        return RandomVariable(lat, k, np.asarray(self._maps[k](children), dtype=float))

    def invert_node(self, k: int, node: int) -> "TableEvaluation":
        """Copy whose step k returns the negated value at ``node``."""
        lat = self.lattice
        lat.check_time(k)
        original = self._maps[k]

        def inverted(children: np.ndarray) -> np.ndarray:
            out = np.array(original(children), dtype=float)
            out[node] = -out[node]
            return out

        maps = list(self._maps)
        maps[k] = inverted
        return TableEvaluation(lat, maps, mu=self.mu)


class LiftedEvaluation(Evaluation):
    """E[X; K]: one step is E_{k,k+1}[X + K_{k+1} - K_k]."""

    provenance = "Lifted"

    def __init__(self, base: Evaluation, K: AdaptedProcess) -> None:
        if not base.lattice.compatible(K.lattice):
            raise LatticeMismatch("dividend lives on another lattice")
        super().__init__(base.lattice, base.mu)
        self.base = base
        self.K = K

    def __repr__(self) -> str:
        return f"Lifted({self.base!r})"

    def step(self, k: int, X: RandomVariable) -> RandomVariable:
        return self.base.step(k, X.at(k + 1) + self.K[k + 1] - self.K[k])

    def apply(self, s: int, t: int, X: RandomVariable) -> RandomVariable:
        if isinstance(self.base, DriverEvaluation):
            s, t, Y = self._prepare(s, t, X)
            return evaluate(self.base.g, s, t, Y, self.K.restrict(s, t), self.base.cfg)
        return super().apply(s, t, X)


class ConcatenatedEvaluation(Evaluation):
    """Evaluation built from pieces on consecutive intervals of [0, N]."""

    provenance = "Concatenated"

    def __init__(self, segments: Sequence[tuple[Evaluation, tuple[int, int]]]) -> None:
        if not segments:
            raise BadPartition("no segments")
        lat = segments[0][0].lattice
        bounds = []
        for E, (a, b) in segments:
            if not lat.compatible(E.lattice):
                raise BadPartition("segments live on different lattices")
            bounds.append((int(a), int(b)))
        if bounds[0][0] != 0 or bounds[-1][1] != lat.N:
            raise BadPartition(f"intervals must cover [0, {lat.N}], got {bounds}")
        for (a, b), (c, _d) in zip(bounds, bounds[1:] + [(bounds[-1][1], None)]):
            if a >= b or b != c:
                raise BadPartition(f"intervals do not partition [0, {lat.N}]: {bounds}")
        mus = [E.mu for E, _ in segments]
        super().__init__(lat, None if any(m is None for m in mus) else max(mus))
        self.segments = [(E, bounds[i]) for i, (E, _) in enumerate(segments)]

    def __repr__(self) -> str:
        parts = ", ".join(f"{E!r}@{a}-{b}" for E, (a, b) in self.segments)
        return f"Concatenated([{parts}])"

    def step(self, k: int, X: RandomVariable) -> RandomVariable:
        for E, (a, b) in self.segments:
            if a <= k < b:
                return E.step(k, X)
        raise TimeOrder(f"no segment contains step {k}")

    def apply(self, s: int, t: int, X: RandomVariable) -> RandomVariable:
        s, t, Y = self._prepare(s, t, X)
        for E, (a, b) in reversed(self.segments):
            lo, hi = max(s, a), min(t, b)
            if lo < hi:
                Y = E.apply(lo, hi, Y)
        return Y


def lift_with_dividend(E: Evaluation, K: AdaptedProcess) -> Evaluation:
    """E[.; K]; a null dividend gives E back."""
    if not E.lattice.compatible(K.lattice):
        raise LatticeMismatch("dividend lives on another lattice")
    if K.sup_norm() == 0.0:
        return E
    return LiftedEvaluation(E, K)


def concatenate(segments: Sequence[tuple[Evaluation, tuple[int, int]]]) -> ConcatenatedEvaluation:
    return ConcatenatedEvaluation(segments)


def from_driver(g: Driver, lattice: PathLattice, cfg: Optional[SolverConfig] = None) -> DriverEvaluation:
    return DriverEvaluation(g, lattice, cfg)
