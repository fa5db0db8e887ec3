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
Résolution rétrograde des BSDE sur l'arbre.

Pas implicite au noeud k (avant tau):
    Y_k = E_k[Y_{k+1} + K_{k+1}] - K_k + g(k, noeud, Y_k, Z_k) dt
où Z_k sont les coefficients de représentation de Y_{k+1} + K_{k+1}.
Sur {tau <= k}: Y_k = X, Z_k = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.stats import norm

from .drivers import Driver, builtin
from .errors import (
    BadParams,
    InvalidSpec,
    MonotonicityViolated,
    NoConvergence,
    NotAStoppingTime,
    NotMeasurable,
    StepTooLarge,
    StoppingOrder,
    TimeOrder,
)
from .lattice import (
    AdaptedProcess,
    LatticeSpec,
    PathLattice,
    RandomVariable,
    StoppingTime,
    as_stopping_time,
    is_measurable_at_stopping,
    is_stopping_time,
    stopped_value,
)

_logger = logging.getLogger("geval.bsde")

SCHEMES = ("implicit", "explicit")

Time = Union[int, StoppingTime]


@dataclass(frozen=True)
class SolverConfig:
    fixed_point_tol: float = 1e-12
    max_fixed_point_iters: int = 100
    monotonicity_guard: bool = True
    scheme: str = "implicit"
    damping: float = 1.0

    def __post_init__(self) -> None:
        if not self.fixed_point_tol > 0:
            raise InvalidSpec("fixed_point_tol must be > 0")
        if int(self.max_fixed_point_iters) < 1:
            raise InvalidSpec("max_fixed_point_iters must be >= 1")
        if self.scheme not in SCHEMES:
            raise InvalidSpec(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 < self.damping <= 1:
            raise InvalidSpec("damping must lie in (0, 1]")


@dataclass
class SolverDiagnostics:
    iterations: dict[int, np.ndarray] = field(default_factory=dict)
    max_iterations: int = 0
    max_residual: float = 0.0
    projection_residual: float = 0.0
    sweep_changes: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "max_iterations": self.max_iterations,
            "max_residual": self.max_residual,
            "projection_residual": self.projection_residual,
        }
        if self.sweep_changes:
            out["sweeps"] = len(self.sweep_changes)
        return out


@dataclass(frozen=True)
class BSDESolution:
    Y: AdaptedProcess
    Z: AdaptedProcess
    diagnostics: SolverDiagnostics

    @property
    def Y0(self) -> float:
        return float(self.Y[self.Y.start].values[0])


def check_step(g: Driver, dt: float, d: int, cfg: SolverConfig) -> None:
    if g.mu * dt >= 1:
        raise StepTooLarge(f"mu*dt = {g.mu * dt:.4g} >= 1: the implicit step is not solvable")
    if cfg.monotonicity_guard and g.mu * math.sqrt(d * dt) > 0.5 + 1e-15:
        raise MonotonicityViolated(
            f"mu*sqrt(d*dt) = {g.mu * math.sqrt(d * dt):.4g} > 0.5; refine the grid or disable the guard"
        )


def _solve_step(
    g: Driver,
    k: int,
    nodes: np.ndarray,
    base: np.ndarray,
    z: np.ndarray,
    dt: float,
    cfg: SolverConfig,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve y = base + g(k, nodes, y, z) dt node by node (vectorised)."""
    n = base.shape[0]
    if n == 0:
        return base.copy(), np.zeros(0, dtype=np.int64), 0.0
    if cfg.scheme == "explicit":
        y = base + g(k, nodes, base, z) * dt
        return y, np.zeros(n, dtype=np.int64), 0.0
    y = base.copy()
    iters = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    tol = cfg.fixed_point_tol * (1.0 + np.abs(base))
    w = cfg.damping
    for m in range(1, int(cfg.max_fixed_point_iters) + 1):
        target = base + g(k, nodes, y, z) * dt
        y_new = target if w == 1.0 else (1.0 - w) * y + w * target
        newly = ~done & (np.abs(y_new - y) <= tol)
        y = y_new
        iters[newly] = m
        done |= newly
        if done.all():
            break
    else:
        raise NoConvergence(
            f"step {k}: fixed point not reached on {int((~done).sum())} node(s) "
            f"after {cfg.max_fixed_point_iters} iterations"
        )
    residual = float(np.max(np.abs(y - base - g(k, nodes, y, z) * dt)))
    return y, iters, residual


def backward_step(
    g: Driver,
    k: int,
    W: np.ndarray,
    lattice: PathLattice,
    cfg: Optional[SolverConfig] = None,
    alive: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, float]:
    """One backward step from the time-(k+1) slice W (dividend included).

    Returns (y, z, iterations, residual, projection residual); nodes outside
    ``alive`` keep y = E_k[W] and are left to the caller.
    """
    cfg = cfg or SolverConfig()
    ce = lattice.average_children(W)
    z, proj = lattice.martingale_coefficients(W)
    y = ce.copy()
    iters = np.zeros(ce.shape[0], dtype=np.int64)
    idx = np.arange(ce.shape[0]) if alive is None else np.flatnonzero(alive)
    y_sub, it_sub, residual = _solve_step(g, k, idx, ce[idx], z[idx], lattice.dt, cfg)
    y[idx] = y_sub
    iters[idx] = it_sub
    return y, z, iters, residual, proj


def _dividend_values(K: Optional[AdaptedProcess], k: int) -> Union[np.ndarray, float]:
    return 0.0 if K is None else K[k].values


def solve_bsde(
    g: Driver,
    tau: Time,
    X: RandomVariable,
    K: Optional[AdaptedProcess] = None,
    cfg: Optional[SolverConfig] = None,
    *,
    start: int = 0,
) -> BSDESolution:
    """Backward induction for (Y, Z) with terminal X at tau and dividend K."""
    cfg = cfg or SolverConfig()
    lat = X.lattice
    check_step(g, lat.dt, lat.d, cfg)
    stop: Optional[StoppingTime] = None
    if isinstance(tau, StoppingTime):
        if not lat.compatible(tau.lattice):
            raise NotAStoppingTime("stopping time lives on another lattice")
        if not is_stopping_time(tau):
            raise NotAStoppingTime("tau is not a stopping time")
        if not is_measurable_at_stopping(X, tau):
            raise NotMeasurable("terminal value is not F_tau-measurable")
        stop = tau
        t_end = tau.max()
        leaves = X.at(lat.N).values
        terminal = lat.project(leaves, lat.N - t_end)
    else:
        t_end = lat.check_time(tau)
        if X.time_index > t_end:
            X = X.project(t_end)
        terminal = X.at(t_end).values
        leaves = None
    lat.check_time(start)
    if start > t_end:
        raise TimeOrder(f"start {start} after terminal time {t_end}")
    if K is not None:
        if not lat.compatible(K.lattice):
            raise TimeOrder("dividend process lives on another lattice")
        if K.start > start or K.stop < t_end:
            raise TimeOrder(f"dividend covers [{K.start}, {K.stop}], need [{start}, {t_end}]")

    diag = SolverDiagnostics()
    Y_vals: dict[int, np.ndarray] = {t_end: np.asarray(terminal, dtype=float)}
    Z_vals: dict[int, np.ndarray] = {t_end: np.zeros((len(terminal), lat.d))}
    for k in range(t_end - 1, start - 1, -1):
        W = Y_vals[k + 1] + _dividend_values(K, k + 1)
        if K is not None:
            W = W - lat.broadcast(K[k].values, 1)
        alive = None if stop is None else ~stop.stopped_by(k)
        y, z, iters, residual, proj = backward_step(g, k, W, lat, cfg, alive)
        if stop is not None and leaves is not None:
            frozen = ~alive
            y[frozen] = lat.project(leaves, lat.N - k)[frozen]
            z[frozen] = 0.0
        Y_vals[k], Z_vals[k] = y, z
        diag.iterations[k] = iters
        diag.max_iterations = max(diag.max_iterations, int(iters.max(initial=0)))
        diag.max_residual = max(diag.max_residual, residual)
        diag.projection_residual = max(diag.projection_residual, proj)
    _logger.debug(
        "solve_bsde %s on [%d, %d]: %d max iterations, residual %.3g",
        g.label,
        start,
        t_end,
        diag.max_iterations,
        diag.max_residual,
    )
    times = range(start, t_end + 1)
    return BSDESolution(
        Y=AdaptedProcess([RandomVariable(lat, k, Y_vals[k]) for k in times]),
        Z=AdaptedProcess([RandomVariable(lat, k, Z_vals[k]) for k in times]),
        diagnostics=diag,
    )


def evaluate(
    g: Driver,
    sigma: Time,
    tau: Time,
    X: RandomVariable,
    K: Optional[AdaptedProcess] = None,
    cfg: Optional[SolverConfig] = None,
) -> RandomVariable:
    """E^g_{sigma,tau}[X; K].

    An integer sigma gives a variable at time sigma; a StoppingTime sigma gives
    the stopped value at the leaves.
    """
    lat = X.lattice
    if isinstance(sigma, StoppingTime) or isinstance(tau, StoppingTime):
        s_st = as_stopping_time(lat, sigma)
        t_st = as_stopping_time(lat, tau)
        if not (is_stopping_time(s_st) and is_stopping_time(t_st)):
            raise NotAStoppingTime("evaluate needs stopping times")
        if not s_st.precedes(t_st):
            raise StoppingOrder("sigma > tau on some path")
        sol = solve_bsde(g, tau, X, K, cfg, start=s_st.min())
        if isinstance(sigma, StoppingTime):
            return stopped_value(sol.Y, sigma)
        return sol.Y[sigma]
    s, t = lat.check_time(sigma), lat.check_time(tau)
    if s > t:
        raise StoppingOrder(f"sigma = {s} > tau = {t}")
    return solve_bsde(g, t, X, K, cfg, start=s).Y[s]


def picard_solve(
    g: Driver,
    X: RandomVariable,
    K: Optional[AdaptedProcess] = None,
    tol: float = 1e-12,
    *,
    max_sweeps: Optional[int] = None,
) -> BSDESolution:
    """Global Jacobi sweeps y^{m+1}_k = E_k[y^m_{k+1} + dK] + g(y^m_k, z^m_k) dt, tau = N."""
    lat = X.lattice
    N, dt = lat.N, lat.dt
    if g.mu * dt >= 1:
        raise StepTooLarge(f"mu*dt = {g.mu * dt:.4g} >= 1")
    X = X.at(N)
    cap = 4 * N + 100 if max_sweeps is None else int(max_sweeps)

    def dK(k: int) -> Union[np.ndarray, float]:
        if K is None:
            return 0.0
        return K[k + 1].values - lat.broadcast(K[k].values, 1)

    terminal = X.values + _dividend_values(K, N)
    y = [lat.average_children(terminal, N - k) - _dividend_values(K, k) for k in range(N)]
    y.append(X.values.copy())
    scale = max(1.0, X.sup_norm())
    diag = SolverDiagnostics()
    for sweep in range(1, cap + 1):
        new = []
        for k in range(N):
            W = y[k + 1] + dK(k)
            z, _ = lat.martingale_coefficients(W)
            nodes = np.arange(lat.n_nodes(k))
            new.append(lat.average_children(W) + g(k, nodes, y[k], z) * dt)
        new.append(y[N])
        change = max(float(np.max(np.abs(a - b))) for a, b in zip(new, y))
        y = new
        diag.sweep_changes.append(change)
        if change <= tol * scale:
            break
    else:
        raise NoConvergence(f"picard_solve: no convergence after {cap} sweeps (last change {change:.3g})")

    Z = []
    for k in range(N):
        W = y[k + 1] + dK(k)
        z, proj = lat.martingale_coefficients(W)
        nodes = np.arange(lat.n_nodes(k))
        res = float(np.max(np.abs(y[k] - lat.average_children(W) - g(k, nodes, y[k], z) * dt)))
        diag.max_residual = max(diag.max_residual, res)
        diag.projection_residual = max(diag.projection_residual, proj)
        diag.iterations[k] = np.full(lat.n_nodes(k), sweep, dtype=np.int64)
        Z.append(z)
    Z.append(np.zeros((len(y[N]), lat.d)))
    diag.max_iterations = sweep
    _logger.debug("picard_solve %s: %d sweeps", g.label, sweep)
    return BSDESolution(
        Y=AdaptedProcess([RandomVariable(lat, k, y[k]) for k in range(N + 1)]),
        Z=AdaptedProcess([RandomVariable(lat, k, Z[k]) for k in range(N + 1)]),
        diagnostics=diag,
    )


@dataclass(frozen=True)
class MarkovSolution:
    """Solution of the recombined recursion; level j at time k has j up-moves."""

    Y0: float
    Z0: float
    levels: Optional[list[np.ndarray]]
    diagnostics: SolverDiagnostics


def solve_markovian(
    g: Driver,
    spec: LatticeSpec,
    terminal: Union[Callable[[np.ndarray], np.ndarray], np.ndarray],
    *,
    dividend: Optional[Callable[[int, np.ndarray], np.ndarray]] = None,
    cfg: Optional[SolverConfig] = None,
    keep_levels: bool = False,
) -> MarkovSolution:
    """Same implicit scheme as solve_bsde, for d = 1 and claims of B_N.

    The value at a node only depends on its number of up-moves when the driver
    ignores the path, the claim is a function of B_N and the dividend a
    function of (k, B_k), so the recursion runs on k + 1 levels per slice.
    """
    cfg = cfg or SolverConfig()
    if spec.dimension_d != 1:
        raise InvalidSpec("the recombined solver handles d = 1 only")
    if g.path_dependent:
        raise InvalidSpec(f"driver {g.label} depends on the path")
    N, dt, s = spec.steps_N, spec.dt, spec.dB_magnitude
    check_step(g, dt, 1, cfg)

    def walk(k: int) -> np.ndarray:
        return (2 * np.arange(k + 1) - k) * s

    def div(k: int) -> Union[np.ndarray, float]:
        return 0.0 if dividend is None else np.asarray(dividend(k, walk(k)), dtype=float)

    if callable(terminal):
        y = np.asarray(terminal(walk(N)), dtype=float)
    else:
        y = np.asarray(terminal, dtype=float)
    if y.shape != (N + 1,) or not np.all(np.isfinite(y)):
        raise InvalidSpec(f"terminal values must be {N + 1} finite numbers")
    levels = [y] if keep_levels else None
    diag = SolverDiagnostics()
    z = np.zeros((1, 1))
    for k in range(N - 1, -1, -1):
        nxt = y + div(k + 1)
        here = div(k)
        up, down = nxt[1:] - here, nxt[:-1] - here
        base = 0.5 * (up + down)
        z = ((up - down) / (2.0 * s)).reshape(-1, 1)
        y, iters, residual = _solve_step(g, k, np.arange(k + 1), base, z, dt, cfg)
        diag.max_iterations = max(diag.max_iterations, int(iters.max(initial=0)))
        diag.max_residual = max(diag.max_residual, residual)
        if levels is not None:
            levels.append(y)
    if levels is not None:
        levels.reverse()
    return MarkovSolution(Y0=float(y[0]), Z0=float(z[0, 0]), levels=levels, diagnostics=diag)


def black_scholes_price(S0: float, K: float, r: float, sigma: float, T: float, kind: str = "call") -> float:
    """Closed-form European price."""
    if S0 <= 0 or K <= 0 or sigma <= 0 or T <= 0:
        raise BadParams("S0, K, sigma and T must be > 0")
    d1 = (math.log(S0 / K) + (r + 0.5 * sigma**2) * T) / (sigma * math.sqrt(T))
    d2 = d1 - sigma * math.sqrt(T)
    if kind == "call":
        return float(S0 * norm.cdf(d1) - K * math.exp(-r * T) * norm.cdf(d2))
    if kind == "put":
        return float(K * math.exp(-r * T) * norm.cdf(-d2) - S0 * norm.cdf(-d1))
    raise BadParams(f"kind must be 'call' or 'put', got {kind!r}")


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    beta: float
    t: int

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-9

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "beta": self.beta, "t": self.t, "holds": self.holds}


def source_dividend(g0: AdaptedProcess) -> AdaptedProcess:
    """K_k = sum_{j<k} g0_j dt (left Riemann sum, predictable)."""
    lat = g0.lattice
    return AdaptedProcess.cumulative([g0[j] * lat.dt for j in range(g0.start, lat.N)], start=g0.start)


def apriori_bound_report(
    mu: float,
    X: RandomVariable,
    g0: Optional[AdaptedProcess] = None,
    t: int = 0,
    cfg: Optional[SolverConfig] = None,
) -> BoundReport:
    """Both sides of the beta-weighted L2 bound for E^{g_mu}_{t,T}[X; int g0]."""
    lat = X.lattice
    beta = 2 * mu**2 + 2 * mu + 2
    K = None if g0 is None else source_dividend(g0)
    sol = solve_bsde(builtin("g_mu", {"mu": mu}, dimension=lat.d), lat.N, X, K, cfg, start=t)
    lhs = (sol.Y[t] * sol.Y[t]).mean()
    X_N = X.at(lat.N)
    rhs = (X_N * X_N).mean() * math.exp(beta * (lat.T - t * lat.dt))
    if g0 is not None:
        for j in range(t, lat.N):
            rhs += math.exp(beta * (j - t) * lat.dt) * (g0[j] * g0[j]).mean() * lat.dt
    return BoundReport(lhs=float(lhs), rhs=float(rhs), beta=beta, t=t)


@dataclass(frozen=True)
class StabilityReport:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs


def stability_ratio(
    g: Driver,
    X: RandomVariable,
    K: Optional[AdaptedProcess],
    X2: RandomVariable,
    K2: Optional[AdaptedProcess],
    cfg: Optional[SolverConfig] = None,
) -> StabilityReport:
    """sup_k E|dY_k|^2 + E sum |dZ_k|^2 dt against E|dX|^2 + E(total variation of dK)^2."""
    lat = X.lattice
    a = solve_bsde(g, lat.N, X, K, cfg)
    b = solve_bsde(g, lat.N, X2, K2, cfg)
    dY = max(((a.Y[k] - b.Y[k]) * (a.Y[k] - b.Y[k])).mean() for k in range(lat.N + 1))
    dZ = sum(
        float(np.mean(np.sum((a.Z[k].values - b.Z[k].values) ** 2, axis=1))) * lat.dt for k in range(lat.N)
    )
    dX = X.at(lat.N) - X2.at(lat.N)
    rhs = (dX * dX).mean()
    if K is not None or K2 is not None:
        zero = AdaptedProcess.zeros(lat)
        diff = (K if K is not None else zero) - (K2 if K2 is not None else zero)
        var = RandomVariable.constant(lat, lat.N, 0.0)
        for inc in diff.increments():
            var = var + abs(inc)
        rhs += (var * var).mean()
    return StabilityReport(lhs=float(dY + dZ), rhs=float(rhs))
