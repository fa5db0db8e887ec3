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
Martingales non linéaires: classification, décomposition de Doob-Meyer
(directe et par pénalisation), extraction du couple (g, z), inégalité des
montées et arrêt optionnel.

Convention: l'accroissement A_{k+1} - A_k est F_k-mesurable (A prévisible).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from .bsde_engine import SolverConfig, evaluate
from .drivers import Driver, builtin
from .errors import (
    BadLevels,
    ExtractInconsistent,
    InvalidSpec,
    LatticeMismatch,
    NoConvergence,
    NotSupermartingale,
    RootBracketFailure,
)
from .evaluation import DriverEvaluation, Evaluation, extend_to_stopping, lift_with_dividend
from .lattice import AdaptedProcess, RandomVariable, StoppingTime, stopped_value

_logger = logging.getLogger("geval.martingale")

SLACK = 1e-9
DECOMPOSITION_TOL = 1e-8
BISECTION_STEPS = 60
DEFAULT_SCHEDULE = (1, 2, 4, 8, 16, 32, 64, 128, 256)

MARTINGALE = "martingale"
SUPERMARTINGALE = "supermartingale"
SUBMARTINGALE = "submartingale"
NONE = "none"

Time = Union[int, StoppingTime]


# Classification
@dataclass(frozen=True)
class Classification:
    kind: str
    defect: float
    super_defect: float
    sub_defect: float
    witness: Optional[dict[str, int]] = None

    @property
    def is_supermartingale(self) -> bool:
        return self.kind in (MARTINGALE, SUPERMARTINGALE)

    @property
    def is_submartingale(self) -> bool:
        return self.kind in (MARTINGALE, SUBMARTINGALE)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "defect": self.defect,
            "super_defect": self.super_defect,
            "sub_defect": self.sub_defect,
            "witness": self.witness,
        }


def _lifted(E: Evaluation, K: Optional[AdaptedProcess]) -> Evaluation:
    return E if K is None else lift_with_dividend(E, K)


def classify(
    E: Evaluation,
    K: Optional[AdaptedProcess],
    Y: AdaptedProcess,
    slack: float = SLACK,
) -> Classification:
    """Compare E_{k,k+1}[Y_{k+1}; K] with Y_k at every node."""
    if not E.lattice.compatible(Y.lattice):
        raise LatticeMismatch("process lives on another lattice")
    lifted = _lifted(E, K)
    up = down = 0.0
    witness = None
    worst = -1.0
    for k in range(Y.start, Y.stop):
        diff = lifted.step(k, Y[k + 1]).values - Y[k].values
        up = max(up, float(diff.max()))
        down = max(down, float(-diff.min()))
        node = int(np.argmax(np.abs(diff)))
        if abs(diff[node]) > worst:
            worst = float(abs(diff[node]))
            witness = {"k": k, "node": node}
    if up <= slack and down <= slack:
        kind = MARTINGALE
    elif up <= slack:
        kind = SUPERMARTINGALE
    elif down <= slack:
        kind = SUBMARTINGALE
    else:
        kind = NONE
    return Classification(kind=kind, defect=max(up, down), super_defect=up, sub_defect=down, witness=witness)


# Doob-Meyer
@dataclass(frozen=True)
class Decomposition:
    A: AdaptedProcess
    increments: list[RandomVariable]
    residual: float

    def to_dict(self) -> dict[str, Any]:
        return {"residual": self.residual, "A": self.A.to_dict()}


def _residual(E: Evaluation, Y: AdaptedProcess, A: AdaptedProcess) -> float:
    """max_t |E_{t,T}[Y_T; A] - Y_t| along one backward pass."""
    lifted = lift_with_dividend(E, A)
    y = Y[Y.stop]
    worst = 0.0
    for k in range(Y.stop - 1, Y.start - 1, -1):
        y = lifted.step(k, y)
        worst = max(worst, y.max_abs_diff(Y[k]))
    return worst


def _bisect(
    fn, lo: np.ndarray, hi: np.ndarray, steps: int = BISECTION_STEPS
) -> np.ndarray:
    """Root of a nondecreasing nodewise function on [lo, hi] (fn(lo) <= 0 <= fn(hi))."""
    lo, hi = lo.copy(), hi.copy()
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = fn(mid) < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def doob_meyer_direct(
    E: Evaluation,
    Y: AdaptedProcess,
    *,
    tol: float = DECOMPOSITION_TOL,
    slack: float = SLACK,
) -> Decomposition:
    """Predictable A with Y an E[.; A]-martingale, one nodewise root-find per step."""
    cls = classify(E, None, Y, slack)
    if not cls.is_supermartingale:
        raise NotSupermartingale(f"process is a {cls.kind} (defect {cls.defect:.3g})")
    lat = Y.lattice
    mu = E.mu if E.mu is not None else 1.0
    horizon = lat.time(Y.stop) - lat.time(Y.start)
    increments = []
    for k in range(Y.start, Y.stop):
        Yk = Y[k].values
        nxt = Y[k + 1]

        def defect(c: np.ndarray) -> np.ndarray:
            shifted = nxt + RandomVariable(lat, k, c).at(k + 1)
            return E.step(k, shifted).values - Yk

        at_zero = defect(np.zeros_like(Yk))
        gap = np.maximum(-at_zero, 0.0)
        hi = gap * math.exp(mu * horizon) + 1.0
        if np.any(defect(hi) < -slack):
            raise RootBracketFailure(f"step {k}: E[Y + c] stays below Y at the bracket end")
        c = _bisect(defect, np.zeros_like(Yk), hi)
        c = np.where(at_zero >= 0, 0.0, c)
        increments.append(RandomVariable(lat, k, c))
    A = AdaptedProcess.cumulative(increments, start=Y.start)
    residual = _residual(E, Y, A)
    if residual > tol:
        _logger.warning("doob_meyer_direct: residual %.3g above %.3g", residual, tol)
    return Decomposition(A=A, increments=increments, residual=residual)


@dataclass(frozen=True)
class PenaltyRecord:
    n: int
    y: AdaptedProcess
    A: AdaptedProcess
    gap: float
    below: bool

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "gap": self.gap, "below": self.below, "A_final_max": self.A[self.A.stop].max()}


@dataclass
class PenalizationTrace:
    schedule: tuple[int, ...]
    records: list[PenaltyRecord] = field(default_factory=list)
    monotone: bool = True
    direct: Optional[Decomposition] = None
    direct_gap: Optional[float] = None

    @property
    def sandwich(self) -> bool:
        return all(r.below for r in self.records)

    @property
    def gaps(self) -> list[float]:
        return [r.gap for r in self.records]

    def to_dict(self) -> dict[str, Any]:
        return {
            "schedule": list(self.schedule),
            "records": [r.to_dict() for r in self.records],
            "monotone": self.monotone,
            "sandwich": self.sandwich,
            "direct_gap": self.direct_gap,
        }


def _check_schedule(schedule: Sequence[int]) -> tuple[int, ...]:
    sched = tuple(int(n) for n in schedule)
    if not sched or sched[0] < 1 or any(b <= a for a, b in zip(sched, sched[1:])):
        raise InvalidSpec(f"schedule must be strictly increasing positive integers, got {list(schedule)}")
    return sched


def _penalized(E: Evaluation, Y: AdaptedProcess, n: int) -> tuple[AdaptedProcess, AdaptedProcess]:
    lat = Y.lattice
    dt = lat.dt
    ys = {Y.stop: Y[Y.stop]}
    incs: dict[int, RandomVariable] = {}
    for k in range(Y.stop - 1, Y.start - 1, -1):
        Yk = Y[k].values
        nxt = ys[k + 1]

        def h(y: np.ndarray) -> np.ndarray:
            penalty = RandomVariable(lat, k, n * (Yk - y) * dt).at(k + 1)
            return y - E.step(k, nxt + penalty).values

        lo = np.minimum(E.step(k, nxt).values, Yk)
        hi = Yk.copy()
        if np.any(h(hi) < -SLACK) or np.any(h(lo) > SLACK):
            raise NoConvergence(f"penalized step {k} (n={n}): root not bracketed")
        y = _bisect(h, lo, hi)
        ys[k] = RandomVariable(lat, k, y)
        incs[k] = RandomVariable(lat, k, n * (Yk - y) * dt)
    y_proc = AdaptedProcess([ys[k] for k in Y.times()])
    A = AdaptedProcess.cumulative([incs[k] for k in range(Y.start, Y.stop)], start=Y.start)
    return y_proc, A


def doob_meyer_penalized(
    E: Evaluation,
    Y: AdaptedProcess,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    *,
    compare: bool = True,
    slack: float = SLACK,
) -> PenalizationTrace:
    """y^n_k = E_{k,k+1}[y^n_{k+1} + n (Y_k - y^n_k) dt] for each n of the schedule."""
    sched = _check_schedule(schedule)
    cls = classify(E, None, Y, slack)
    if not cls.is_supermartingale:
        raise NotSupermartingale(f"process is a {cls.kind} (defect {cls.defect:.3g})")
    trace = PenalizationTrace(schedule=sched)
    previous: Optional[AdaptedProcess] = None
    for n in sched:
        y, A = _penalized(E, Y, n)
        gap = Y.max_abs_diff(y)
        below = Y.min_diff(y) >= -slack
        trace.records.append(PenaltyRecord(n=n, y=y, A=A, gap=gap, below=below))
        if previous is not None and y.min_diff(previous) < -slack:
            trace.monotone = False
        previous = y
        _logger.debug("penalization n=%d: gap %.3g", n, gap)
    if compare:
        trace.direct = doob_meyer_direct(E, Y, slack=slack)
        trace.direct_gap = trace.records[-1].A.max_abs_diff(trace.direct.A)
    return trace


# Representation (g, z)
@dataclass(frozen=True)
class RepresentationPair:
    Y: AdaptedProcess
    g_proc: AdaptedProcess
    z_proc: AdaptedProcess
    bound_violation: Optional[float] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "g": self.g_proc.to_dict(),
            "z": self.z_proc.to_dict(),
            "bound_violation": self.bound_violation,
        }


def extract_representation(
    E: Evaluation,
    K: Optional[AdaptedProcess],
    X: RandomVariable,
    *,
    start: int = 0,
    strict: bool = True,
    slack: float = SLACK,
) -> RepresentationPair:
    """g_k = (Y_k - E_k[Y_{k+1} + K_{k+1} - K_k]) / dt and z_k from Y_{k+1} + K_{k+1}."""
    lat = X.lattice
    t = X.time_index
    if start >= t:
        raise InvalidSpec(f"extraction needs start < {t}, got {start}")
    lifted = _lifted(E, K)
    ys = {t: X}
    for k in range(t - 1, start - 1, -1):
        ys[k] = lifted.step(k, ys[k + 1])
    g_list, z_list = [], []
    for k in range(start, t):
        W = ys[k + 1].values
        if K is not None:
            W = W + K[k + 1].values - lat.broadcast(K[k].values, 1)
        g_list.append(RandomVariable(lat, k, (ys[k].values - lat.average_children(W)) / lat.dt))
        z, _ = lat.martingale_coefficients(W)
        z_list.append(RandomVariable(lat, k, z))
    pair = RepresentationPair(
        Y=AdaptedProcess([ys[k] for k in range(start, t + 1)]),
        g_proc=AdaptedProcess(g_list),
        z_proc=AdaptedProcess(z_list),
    )
    if E.mu is None:
        return pair
    violation = 0.0
    for k in range(start, t):
        bound = E.mu * (np.abs(ys[k].values) + np.linalg.norm(pair.z_proc[k].values, axis=1))
        violation = max(violation, float(np.max(np.abs(pair.g_proc[k].values) - bound)))
    if violation > slack:
        message = f"|g| exceeds mu(|y| + |z|) by {violation:.3g}"
        if strict:
            raise ExtractInconsistent(message)
        _logger.warning("extract_representation: %s", message)
    return RepresentationPair(Y=pair.Y, g_proc=pair.g_proc, z_proc=pair.z_proc, bound_violation=max(violation, 0.0))


def pair_difference_violation(
    first: RepresentationPair,
    second: RepresentationPair,
    mu: float,
) -> float:
    """Worst excess of |g - g'| over mu(|Y - Y'| + |z - z'|)."""
    worst = -math.inf
    for k in first.g_proc.times():
        dg = np.abs(first.g_proc[k].values - second.g_proc[k].values)
        dy = np.abs(first.Y[k].values - second.Y[k].values)
        dz = np.linalg.norm(first.z_proc[k].values - second.z_proc[k].values, axis=1)
        worst = max(worst, float(np.max(dg - mu * (dy + dz))))
    return max(worst, 0.0)


# Difference of lifted evaluations
@dataclass(frozen=True)
class DifferenceReport:
    upper: Classification
    lower: Classification

    @property
    def passed(self) -> bool:
        return self.upper.is_submartingale and self.lower.is_supermartingale

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "upper": self.upper.to_dict(), "lower": self.lower.to_dict()}


def difference_check(
    E: Evaluation,
    X: RandomVariable,
    K: Optional[AdaptedProcess],
    X2: RandomVariable,
    K2: Optional[AdaptedProcess],
    mu: Optional[float] = None,
    slack: float = SLACK,
) -> DifferenceReport:
    """E[X;K] - E[X';K'] is an E^{g_mu}[.;K-K']-sub- and E^{-g_mu}[.;K-K']-supermartingale."""
    lat = E.lattice
    mu = E.mu if mu is None else mu
    if mu is None:
        raise InvalidSpec("difference_check needs a domination constant")
    t = max(X.time_index, X2.time_index)
    zero = AdaptedProcess.zeros(lat)
    Ka = zero if K is None else K
    Kb = zero if K2 is None else K2
    first, second = _lifted(E, K), _lifted(E, K2)
    y1, y2 = {t: X.at(t)}, {t: X2.at(t)}
    for k in range(t - 1, -1, -1):
        y1[k] = first.step(k, y1[k + 1])
        y2[k] = second.step(k, y2[k + 1])
    D = AdaptedProcess([y1[k] - y2[k] for k in range(t + 1)])
    dK = (Ka - Kb).restrict(0, t)
    upper = DriverEvaluation(builtin("g_mu", {"mu": mu}, dimension=lat.d), lat)
    lower = DriverEvaluation(builtin("neg_g_mu", {"mu": mu}, dimension=lat.d), lat)
    return DifferenceReport(upper=classify(upper, dK, D, slack), lower=classify(lower, dK, D, slack))


# Upcrossings
@dataclass(frozen=True)
class UpcrossReport:
    a: float
    b: float
    counts: RandomVariable
    lhs_values: np.ndarray
    rhs_values: np.ndarray

    @property
    def lhs(self) -> float:
        return float(self.lhs_values[0])

    @property
    def rhs(self) -> float:
        return float(self.rhs_values[0])

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs_values <= self.rhs_values + SLACK))

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "max_count": self.counts.max(),
        }


def count_upcrossings(Y: AdaptedProcess, a: float, b: float) -> RandomVariable:
    """Number of completed passages from <= a to >= b along each path, at time Y.stop."""
    if a >= b:
        raise BadLevels(f"need a < b, got a={a}, b={b}")
    end = Y.stop
    n = Y.lattice.n_nodes(end)
    armed = np.zeros(n, dtype=bool)
    counts = np.zeros(n)
    for k in Y.times():
        v = Y[k].at(end).values
        done = armed & (v >= b)
        counts += done
        armed = (armed & ~done) | (v <= a)
    return RandomVariable(Y.lattice, end, counts)


def upcrossing_check(
    Y: AdaptedProcess,
    a: float,
    b: float,
    g: Driver,
    cfg: Optional[SolverConfig] = None,
) -> UpcrossReport:
    """E^{-mu}[U_a^b] against e^{2 mu T}/(b-a) {E^mu[(Y_T-a)^-] + E^mu[sum e^{mu t}|g0| dt] + |a| mu T}."""
    if a >= b:
        raise BadLevels(f"need a < b, got a={a}, b={b}")
    lat = Y.lattice
    cls = classify(DriverEvaluation(g, lat, cfg), None, Y)
    if not cls.is_supermartingale:
        raise NotSupermartingale(f"process is a {cls.kind} under {g.label}")
    mu = g.mu
    s, t = Y.start, Y.stop
    T = lat.time(t) - lat.time(s)
    upper = builtin("kappa_abs_z", {"kappa": mu}, dimension=lat.d)
    lower = builtin("neg_kappa_abs_z", {"kappa": mu}, dimension=lat.d)

    U = count_upcrossings(Y, a, b)
    lhs = evaluate(lower, s, t, U, None, cfg)
    neg_part = (Y[t] - a).map(lambda v: np.maximum(-v, 0.0))
    source = RandomVariable.constant(lat, t, 0.0)
    for k in range(s, t):
        g0 = g(k, np.arange(lat.n_nodes(k)), np.zeros(lat.n_nodes(k)), np.zeros((lat.n_nodes(k), lat.d)))
        weight = math.exp(mu * lat.time(k)) * lat.dt
        source = source + RandomVariable(lat, k, np.abs(g0) * weight)
    bracket = evaluate(upper, s, t, neg_part, None, cfg) + evaluate(upper, s, t, source, None, cfg)
    rhs = (bracket + abs(a) * mu * T) * (math.exp(2 * mu * T) / (b - a))
    return UpcrossReport(a=a, b=b, counts=U, lhs_values=lhs.values, rhs_values=rhs.values)


# Optional stopping
@dataclass(frozen=True)
class OptionalStoppingReport:
    kind: str
    violation: float

    @property
    def passed(self) -> bool:
        return self.violation <= SLACK

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "violation": self.violation, "passed": self.passed}


def optional_stopping_check(
    E: Evaluation,
    Y: AdaptedProcess,
    sigma: Time,
    tau: Time,
    slack: float = SLACK,
) -> OptionalStoppingReport:
    """E_{sigma,tau}[Y_tau] against Y_sigma in the direction given by the classification."""
    lat = Y.lattice
    cls = classify(E, None, Y, slack)
    Y_tau = stopped_value(Y, tau)
    lhs = extend_to_stopping(E, sigma, tau, Y_tau).at(lat.N).values
    rhs = stopped_value(Y, sigma).values
    diff = lhs - rhs
    if cls.kind == MARTINGALE:
        violation = float(np.max(np.abs(diff)))
    elif cls.kind == SUPERMARTINGALE:
        violation = max(float(diff.max()), 0.0)
    elif cls.kind == SUBMARTINGALE:
        violation = max(float(-diff.min()), 0.0)
    else:
        violation = math.inf
    return OptionalStoppingReport(kind=cls.kind, violation=violation)
