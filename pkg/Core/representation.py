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
Reconstruction d'un générateur à partir d'une évaluation boîte noire, sondes
ponctuelles, et BSDE dirigées par une évaluation abstraite (point fixe).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .bsde_engine import SolverConfig, evaluate, source_dividend
from .drivers import Driver, TabulatedDriver
from .errors import AxiomsFailed, BadParams, InvalidSpec, NoConvergence, TimeOrder, UnknownBuiltin
from .evaluation import AxiomReport, Evaluation, lift_with_dividend
from .lattice import AdaptedProcess, RandomVariable
from .martingale_lab import classify, doob_meyer_direct, extract_representation
from .parallel import map_ordered

_logger = logging.getLogger("geval.representation")

METHODS = ("one_step", "test_process")
DEFAULT_WINDOW = 2
ROUNDTRIP_THRESHOLD = 0.05


# Probes
@dataclass(frozen=True)
class ProbeResult:
    values: np.ndarray

    @property
    def value(self) -> float:
        return float(self.values[0])

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def dispersion(self) -> float:
        return float(np.ptp(self.values))

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "mean": self.mean, "dispersion": self.dispersion}


def _probe_time(E: Evaluation, t: int) -> int:
    t = E.lattice.check_time(t)
    if t >= E.lattice.N:
        raise TimeOrder(f"probe time must be < {E.lattice.N}, got {t}")
    return t


def _vector(p: Any, d: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.size == 1:
        arr = np.full(d, float(arr[0]))
    if arr.shape != (d,):
        raise BadParams(f"expected a scalar or a {d}-vector, got {p!r}")
    return arr


def probe_constant_z(E: Evaluation, t: int, z_bar: Any) -> ProbeResult:
    """(T - t)^{-1} E_{t,T}[z.(B_T - B_t)] at every time-t node."""
    lat = E.lattice
    t = _probe_time(E, t)
    z = _vector(z_bar, lat.d)
    N = lat.N
    increment = lat.walk(N) - lat.broadcast(lat.walk(t), N - t)
    claim = RandomVariable(lat, N, increment @ z)
    return ProbeResult(E.apply(t, N, claim).values / (lat.T - lat.time(t)))


def probe_infinitesimal(E: Evaluation, t: int, y: float, p: Any) -> ProbeResult:
    """(E_{t,t+1}[y + p.dB_t] - y) / dt at every time-t node."""
    lat = E.lattice
    t = _probe_time(E, t)
    pv = _vector(p, lat.d)
    claim = RandomVariable(lat, t + 1, float(y) + lat.step_increments(t) @ pv)
    return ProbeResult((E.apply(t, t + 1, claim).values - float(y)) / lat.dt)


# Reconstruction grid
@dataclass(frozen=True)
class ProbeGrid:
    times: tuple[int, ...]
    y_values: tuple[float, ...]
    z_axes: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        for name, axis in (("times", self.times), ("y_values", self.y_values), *(("z", a) for a in self.z_axes)):
            if len(axis) == 0:
                raise InvalidSpec(f"grid axis {name} is empty")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise InvalidSpec(f"grid axis {name} must be strictly increasing")
        if not self.z_axes:
            raise InvalidSpec("grid needs at least one z axis")

    @classmethod
    def build(cls, times: Sequence[int], y_values: Sequence[float], z_values: Sequence[float], dimension: int = 1) -> "ProbeGrid":
        zs = tuple(float(v) for v in z_values)
        return cls(tuple(int(k) for k in times), tuple(float(v) for v in y_values), tuple(zs for _ in range(dimension)))

    @property
    def dimension(self) -> int:
        return len(self.z_axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return (len(self.times), len(self.y_values), *(len(a) for a in self.z_axes))

    def cells(self) -> list[tuple[int, float, np.ndarray]]:
        return [
            (k, y, np.asarray(z, dtype=float))
            for k, y, z in itertools.product(self.times, self.y_values, itertools.product(*self.z_axes))
        ]


def forward_test_process(E: Evaluation, t: int, y: float, z: np.ndarray, window: int, mu: float) -> AdaptedProcess:
    """Y_t = y, Y_{k+1} = Y_k - mu(|Y_k| + |z|) dt + z.dB_k on [t, t + window]."""
    lat = E.lattice
    stop = min(t + window, lat.N)
    comps = [RandomVariable.constant(lat, t, y)]
    for k in range(t, stop):
        prev = comps[-1]
        nxt = prev.values - mu * (np.abs(prev.values) + np.linalg.norm(z)) * lat.dt
        comps.append(RandomVariable(lat, k + 1, lat.broadcast(nxt, 1) + lat.step_increments(k) @ z))
    return AdaptedProcess(comps)


def _cell_one_step(E: Evaluation, cell: tuple[int, float, np.ndarray]) -> tuple[float, float]:
    k, y, z = cell
    res = probe_infinitesimal(E, k, y, z)
    return res.mean, res.dispersion


def _cell_test_process(
    E: Evaluation, cell: tuple[int, float, np.ndarray], window: int, mu: float
) -> tuple[float, float]:
    k, y, z = cell
    Y = forward_test_process(E, k, y, z, window, mu)
    cls = classify(E, None, Y)
    if not cls.is_supermartingale:
        raise AxiomsFailed(
            f"test process at (t={k}, y={y}, z={z.tolist()}) is a {cls.kind} (defect {cls.defect:.3g}); "
            "the declared mu does not dominate the evaluation"
        )
    dec = doob_meyer_direct(E, Y)
    pair = extract_representation(E, dec.A, Y[Y.stop], start=k, strict=False)
    values = pair.g_proc[k].values
    return float(np.mean(values)), float(np.ptp(values))


def reconstruct_driver(
    E: Evaluation,
    grid: ProbeGrid,
    method: str = "one_step",
    *,
    window: int = DEFAULT_WINDOW,
    mu: Optional[float] = None,
    axioms: Optional[AxiomReport] = None,
    threads: Optional[int] = None,
) -> TabulatedDriver:
    """Tabulate g(t, y, z) over the grid from probes of E."""
    if method not in METHODS:
        raise InvalidSpec(f"method must be one of {METHODS}, got {method!r}")
    if axioms is not None and not axioms.passed:
        raise AxiomsFailed(f"evaluation fails {axioms.failures()}")
    lat = E.lattice
    if grid.dimension != lat.d:
        raise InvalidSpec(f"grid has {grid.dimension} z axes, lattice dimension is {lat.d}")
    for k in grid.times:
        _probe_time(E, k)
    declared = mu if mu is not None else E.mu
    if method == "test_process":
        if declared is None:
            raise AxiomsFailed("the test-process method needs a declared domination constant")
        if int(window) < 1:
            raise InvalidSpec("window must be >= 1")
        # capacity check on the deepest slice
        lat.check_time(min(max(grid.times) + int(window), lat.N))
        results = map_ordered(lambda c: _cell_test_process(E, c, int(window), float(declared)), grid.cells(), threads)
    else:
        lat.check_time(max(grid.times) + 1)
        results = map_ordered(lambda c: _cell_one_step(E, c), grid.cells(), threads)
    values = np.array([v for v, _ in results]).reshape(grid.shape)
    spread = np.array([s for _, s in results]).reshape(grid.shape)
    _logger.info("reconstructed %d cell(s) with %s, max dispersion %.3g", len(results), method, float(spread.max()))
    g_hat = TabulatedDriver(
        grid.times,
        grid.y_values,
        grid.z_axes,
        values,
        mu=declared,
        label=f"recovered({method})",
        dispersion=spread,
    )
    report = lemma_checks(g_hat)
    if report.zero_ok:
        g_hat.flag_zero_at_origin = True
    return g_hat


@dataclass(frozen=True)
class LemmaReport:
    lipschitz: float
    lipschitz_ok: bool
    zero_value: Optional[float]
    zero_ok: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "lipschitz": self.lipschitz,
            "lipschitz_ok": self.lipschitz_ok,
            "zero_value": self.zero_value,
            "zero_ok": self.zero_ok,
        }


def lemma_checks(g_hat: TabulatedDriver, mu: Optional[float] = None, *, ratio: float = 0.05, zero_tol: float = 1e-8) -> LemmaReport:
    """Grid Lipschitz constant within mu(1 + ratio) and |g(t, 0, 0)| <= zero_tol."""
    mu = g_hat.mu if mu is None else mu
    q_y, q_z = g_hat.grid_quotients()
    lip = max(q_y, q_z)
    zero_value: Optional[float] = None
    if 0.0 in g_hat.y_axis and all(0.0 in a for a in g_hat.z_axes):
        zeros = [
            abs(g_hat.at(int(k), 0, 0.0, np.zeros(g_hat.dimension)))
            for k in g_hat.time_axis
        ]
        zero_value = max(zeros)
    return LemmaReport(
        lipschitz=lip,
        lipschitz_ok=lip <= mu * (1 + ratio) + 1e-12,
        zero_value=zero_value,
        zero_ok=zero_value is not None and zero_value <= zero_tol,
    )


# Round trip
@dataclass(frozen=True)
class RoundtripReport:
    diffs: list[float]
    threshold: float

    @property
    def max_diff(self) -> float:
        return max(self.diffs, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_diff <= self.threshold

    def to_dict(self) -> dict[str, Any]:
        return {"max_diff": self.max_diff, "threshold": self.threshold, "passed": self.passed, "n_claims": len(self.diffs)}


Claim = tuple[int, int, RandomVariable]


def verify_roundtrip(
    E: Evaluation,
    g_hat: Driver,
    claims: Sequence[Claim],
    K_list: Optional[Sequence[Optional[AdaptedProcess]]] = None,
    *,
    threshold: float = ROUNDTRIP_THRESHOLD,
    cfg: Optional[SolverConfig] = None,
) -> RoundtripReport:
    """max |E_{s,t}[X; K] - E^{g_hat}_{s,t}[X; K]| over the claims."""
    ks = list(K_list) if K_list is not None else [None] * len(claims)
    if len(ks) != len(claims):
        raise InvalidSpec("K_list and claims differ in length")
    diffs = []
    for (s, t, X), K in zip(claims, ks):
        lifted = E if K is None else lift_with_dividend(E, K)
        ours = lifted.apply(s, t, X)
        theirs = evaluate(g_hat, s, t, X.at(t), None if K is None else K.restrict(s, t), cfg)
        diffs.append(ours.max_abs_diff(theirs))
    return RoundtripReport(diffs=diffs, threshold=float(threshold))


@dataclass(frozen=True)
class SourcedDriver:
    """Reconstructed driver of E[.; -K0] together with K0, so that E = E^{driver}[.; K0]."""

    driver: TabulatedDriver
    K0: AdaptedProcess


def reconstruct_with_source(
    E: Evaluation,
    grid: ProbeGrid,
    *,
    K0: Optional[AdaptedProcess] = None,
    g0: Optional[AdaptedProcess] = None,
    method: str = "one_step",
    **options: Any,
) -> SourcedDriver:
    """Recovery for evaluations with E[0] != 0, shifting the source out first."""
    if (K0 is None) == (g0 is None):
        raise InvalidSpec("give exactly one of K0 and g0")
    K = source_dividend(g0) if g0 is not None else K0
    shifted = lift_with_dividend(E, -K)
    return SourcedDriver(driver=reconstruct_driver(shifted, grid, method, **options), K0=K)


# BSDE under an abstract evaluation
SourceFn = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


def source_function(name: str, params: Optional[dict[str, Any]] = None) -> tuple[SourceFn, float]:
    """Builtin f(k, node, y) with its Lipschitz constant in y."""
    p = dict(params or {})
    try:
        if name == "zero":
            return (lambda k, nodes, y: np.zeros_like(y)), 0.0
        if name == "linear":
            a, b = float(p.get("a", 0.0)), float(p.get("b", 0.0))
            return (lambda k, nodes, y: a * y + b), abs(a)
        if name == "abs":
            c = float(p["c"])
            return (lambda k, nodes, y: c * np.abs(y)), abs(c)
        if name == "clip":
            c, lo, hi = float(p["c"]), float(p.get("low", -1.0)), float(p.get("high", 1.0))
            if lo > hi:
                raise BadParams("clip needs low <= high")
            return (lambda k, nodes, y: c * np.clip(y, lo, hi)), abs(c)
    except KeyError as exc:
        raise BadParams(f"source {name!r} misses parameter {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise BadParams(f"source {name!r}: {exc}") from exc
    raise UnknownBuiltin(f"source function {name!r} is not one of zero, linear, abs, clip")


@dataclass
class FixedPointTrace:
    C: float
    beta: float
    distances: list[float] = field(default_factory=list)
    sup_changes: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    K: Optional[AdaptedProcess] = None

    @property
    def iterations(self) -> int:
        return len(self.sup_changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "C": self.C,
            "beta": self.beta,
            "iterations": self.iterations,
            "distances": self.distances,
            "sup_changes": self.sup_changes,
            "ratios": self.ratios,
        }


def _dividend_of(lat, fn: SourceFn, Y: AdaptedProcess, phi: Optional[AdaptedProcess]) -> AdaptedProcess:
    incs = []
    for k in range(lat.N):
        nodes = np.arange(lat.n_nodes(k))
        rate = np.asarray(fn(k, nodes, Y[k].values), dtype=float)
        if phi is not None:
            rate = rate + phi[k].values
        incs.append(RandomVariable(lat, k, rate * lat.dt))
    return AdaptedProcess.cumulative(incs)


def solve_bsde_under_E(
    E: Evaluation,
    f: SourceFn,
    X: RandomVariable,
    c: float,
    *,
    phi: Optional[AdaptedProcess] = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[AdaptedProcess, FixedPointTrace]:
    """Fixed point Y_t = E_{t,T}[X; K(Y)], K(Y)_k = sum_{j<k} (f(j, Y_j) + phi_j) dt."""
    lat = E.lattice
    N, dt = lat.N, lat.dt
    if c < 0:
        raise BadParams("the Lipschitz constant c must be >= 0")
    if phi is not None and min(rv.min() for rv in phi) < 0:
        raise InvalidSpec("phi must be nonnegative")
    mu = E.mu or 0.0
    beta = 2 * mu**2 + 2 * mu + 2
    C = c**2 * math.exp(beta * lat.T)
    weights = [math.exp(2 * C * (lat.time(k) - lat.T)) for k in range(N + 1)]
    XN = X.at(N)
    scale = 1.0 + XN.sup_norm()
    floor = (1e-13 * scale) ** 2 * sum(weights) * dt

    trace = FixedPointTrace(C=C, beta=beta)
    Y = AdaptedProcess.zeros(lat)
    for _ in range(int(max_iter)):
        K = _dividend_of(lat, f, Y, phi)
        lifted = lift_with_dividend(E, K)
        comps = {N: XN}
        for k in range(N - 1, -1, -1):
            comps[k] = lifted.step(k, comps[k + 1])
        new = AdaptedProcess([comps[k] for k in range(N + 1)])
        diff = new - Y
        dist = sum(w * (diff[k] * diff[k]).mean() * dt for k, w in enumerate(weights))
        change = diff.sup_norm()
        if trace.distances and trace.distances[-1] > 1e6 * floor:
            trace.ratios.append(dist / trace.distances[-1])
        trace.distances.append(dist)
        trace.sup_changes.append(change)
        Y = new
        if change <= tol * scale:
            trace.K = _dividend_of(lat, f, Y, phi)
            _logger.debug("solve_bsde_under_E: %d iteration(s)", trace.iterations)
            return Y, trace
    raise NoConvergence(f"fixed point not reached after {max_iter} iterations (last change {change:.3g})")


@dataclass(frozen=True)
class ComparisonReport:
    min_diff: float

    @property
    def holds(self) -> bool:
        return self.min_diff >= -1e-9

    def to_dict(self) -> dict[str, Any]:
        return {"min_diff": self.min_diff, "holds": self.holds}


def fixpoint_comparison(
    E: Evaluation,
    f: SourceFn,
    c: float,
    X: RandomVariable,
    X2: RandomVariable,
    phi: Optional[AdaptedProcess] = None,
    **options: Any,
) -> ComparisonReport:
    """Y' - Y for Y' solved with (X', f + phi) and Y with (X, f); X' >= X and phi >= 0 give Y' >= Y."""
    Y, _ = solve_bsde_under_E(E, f, X, c, **options)
    Y2, _ = solve_bsde_under_E(E, f, X2, c, phi=phi, **options)
    return ComparisonReport(min_diff=Y2.min_diff(Y))
