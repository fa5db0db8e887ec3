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
Interface en ligne de commande.

    geval <commande> --config <fichier> [--out <fichier>] [--seed N] [--threads N]

Commandes: solve, evaluate, verify-axioms, decompose, recover, fixpoint,
probe, report. Code de sortie: 0 succès, 1 propriété non vérifiée,
2 erreur de configuration, 3 échec numérique.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, TextIO, Union

import numpy as np

from . import __version__, set_log_level
from .bsde_engine import (
    SolverConfig,
    apriori_bound_report,
    picard_solve,
    solve_bsde,
    solve_markovian,
)
from .drivers import Driver, TabulatedDriver, builtin
from .errors import (
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    EXIT_PROPERTY_FAILURE,
    ConfigError,
    GevalError,
    InvalidSpec,
    NotMeasurable,
    exit_code_for,
)
from .evaluation import (
    Evaluation,
    LinearExpectation,
    axiom_suite,
    expectation_suite,
    extend_to_stopping,
    from_driver,
    lift_with_dividend,
)
from .lattice import (
    AdaptedProcess,
    LatticeSpec,
    PathLattice,
    RandomVariable,
    StoppingTime,
    build_lattice,
    first_exit,
    hitting_time,
    stopped_value,
)
from .martingale_lab import (
    classify,
    doob_meyer_direct,
    doob_meyer_penalized,
    optional_stopping_check,
)
from .parallel import resolve_threads
from .payoff import (
    Expr,
    MarketParams,
    claim_on_lattice,
    claim_on_levels,
    claim_variables,
    format_payoff,
    parse_payoff,
    uses_path_dependence,
)
from .reporting import build_report, text_summary, write_process_csv, write_report
from .representation import (
    ProbeGrid,
    lemma_checks,
    probe_constant_z,
    probe_infinitesimal,
    reconstruct_driver,
    solve_bsde_under_E,
    source_function,
    verify_roundtrip,
)
from .scenario_config import (
    get_driver_options,
    get_evaluation_options,
    get_lattice_options,
    get_market_options,
    get_section,
    get_solver_options,
    get_tolerances,
    load_scenario_config,
    merge_config,
)

_logger = logging.getLogger("geval.cli")

COMMANDS = ("solve", "evaluate", "verify-axioms", "decompose", "recover", "fixpoint", "probe", "report")

Time = Union[int, StoppingTime]


@dataclass
class RunContext:
    """Everything a command needs: merged config, seed, thread count and lazily built objects."""

    config: dict[str, Any]
    seed: int
    threads: int
    _lattice: Optional[PathLattice] = field(default=None, repr=False)
    _driver: Optional[Driver] = field(default=None, repr=False)

    @property
    def spec(self) -> LatticeSpec:
        opts = get_lattice_options(self.config)
        return LatticeSpec(float(opts["T"]), int(opts["N"]), int(opts["d"]))

    @property
    def max_log2_nodes(self) -> int:
        return int(get_lattice_options(self.config)["max_log2_nodes"])

    @property
    def lattice(self) -> PathLattice:
        if self._lattice is None:
            self._lattice = build_lattice(self.spec, max_log2_nodes=self.max_log2_nodes)
        return self._lattice

    @property
    def market(self) -> MarketParams:
        m = get_market_options(self.config)
        return MarketParams(S0=float(m["S0"]), nu=float(m["nu"]), sigma=float(m["sigma"]))

    @property
    def solver(self) -> SolverConfig:
        opts = get_solver_options(self.config)
        return SolverConfig(
            fixed_point_tol=float(opts["fixed_point_tol"]),
            max_fixed_point_iters=int(opts["max_fixed_point_iters"]),
            monotonicity_guard=bool(opts["monotonicity_guard"]),
            scheme=str(opts["scheme"]),
            damping=float(opts["damping"]),
        )

    @property
    def slack(self) -> float:
        return float(get_tolerances(self.config)["slack"])

    @property
    def driver(self) -> Driver:
        if self._driver is None:
            opts = get_driver_options(self.config)
            if opts.get("file"):
                try:
                    self._driver = TabulatedDriver.load(opts["file"])
                except OSError as exc:
                    raise ConfigError(f"cannot read driver file {opts['file']}: {exc}") from exc
            else:
                self._driver = builtin(opts["name"], opts.get("params") or {}, dimension=self.spec.dimension_d)
        return self._driver

    def evaluation(self) -> Evaluation:
        opts = get_evaluation_options(self.config)
        if opts.get("source") == "cond_expect":
            E: Evaluation = LinearExpectation(self.lattice)
        else:
            E = from_driver(self.driver, self.lattice, self.solver)
        if opts.get("mu") is not None:
            E.mu = float(opts["mu"])
        return E

    def claim(self) -> Expr:
        return parse_payoff(self.config["claim"], dimension=self.spec.dimension_d)

    def claim_time(self) -> int:
        t = self.config.get("claim_time")
        return self.spec.steps_N if t is None else int(t)

    def claim_process(self, node: Optional[Expr] = None, stop: Optional[int] = None) -> AdaptedProcess:
        lat = self.lattice
        node = self.claim() if node is None else node
        stop = lat.N if stop is None else stop
        return AdaptedProcess([claim_on_lattice(node, lat, k, self.market) for k in range(stop + 1)])

    def dividend(self) -> Optional[AdaptedProcess]:
        div = self.config.get("dividend")
        if not div:
            return None
        lat = self.lattice
        K = AdaptedProcess.zeros(lat)
        if div.get("expression"):
            node = parse_payoff(div["expression"], variables=claim_variables(lat.d, dividend=True))
            K = K + self.claim_process(node)
        if div.get("rate") is not None:
            rate = float(div["rate"])
            K = K + AdaptedProcess.deterministic(lat, lambda k: rate * lat.time(k))
        return K

    def time(self, value: Any) -> Time:
        """Grid index, null (horizon) or a stopping time of the first Brownian coordinate."""
        lat = self.lattice
        if value is None:
            return lat.N
        if isinstance(value, int):
            return lat.check_time(value)
        B = AdaptedProcess.brownian(lat)
        if "hitting" in value:
            h = value["hitting"]
            return hitting_time(B, float(h["level"]), above=bool(h.get("above", True)))
        fe = value["first_exit"]
        return first_exit(B, float(fe["low"]), float(fe["high"]))


CommandResult = tuple[dict[str, Any], bool, Optional[AdaptedProcess]]


def _lifted(E: Evaluation, K: Optional[AdaptedProcess]) -> Evaluation:
    return E if K is None else lift_with_dividend(E, K)


def _rv_summary(X: RandomVariable) -> dict[str, Any]:
    return {"time_index": X.time_index, "min": X.min(), "max": X.max(), "mean": X.mean(), "values": X.values}


def _use_markov(ctx: RunContext) -> bool:
    mode = get_solver_options(ctx.config)["markov_reduction"]
    if mode == "never":
        return False
    spec = ctx.spec
    return mode == "always" or spec.dimension_d * spec.steps_N > ctx.max_log2_nodes


def _solve_markov(ctx: RunContext) -> dict[str, Any]:
    spec = ctx.spec
    if ctx.config.get("claim_time") not in (None, spec.steps_N):
        raise InvalidSpec("the recombined solver prices claims at the horizon only")
    node = ctx.claim()
    if uses_path_dependence(node):
        raise NotMeasurable("running extrema are not functions of the terminal level")
    if get_evaluation_options(ctx.config).get("source") == "cond_expect":
        g = builtin("zero", dimension=spec.dimension_d)
    else:
        g = ctx.driver
    market, T = ctx.market, spec.horizon_T
    div = ctx.config.get("dividend") or {}
    div_node = None
    if div.get("expression"):
        div_node = parse_payoff(div["expression"], variables=claim_variables(1, dividend=True))
        if uses_path_dependence(div_node):
            raise NotMeasurable("dividend depends on the path")
    rate = div.get("rate")

    def dividend(k: int, levels: np.ndarray) -> np.ndarray:
        t = k * spec.dt
        out = np.zeros_like(levels)
        if div_node is not None:
            out = out + claim_on_levels(div_node, levels, t, T, market)
        if rate is not None:
            out = out + float(rate) * t
        return out

    sol = solve_markovian(
        g,
        spec,
        lambda levels: claim_on_levels(node, levels, T, T, market),
        dividend=dividend if div else None,
        cfg=ctx.solver,
    )
    _logger.info("recombined solve on %d steps: Y0 = %.10g", spec.steps_N, sol.Y0)
    return {"method": "markov", "Y0": sol.Y0, "Z0": sol.Z0, "diagnostics": sol.diagnostics.to_dict()}


def _value_process(ctx: RunContext, E: Evaluation, K: Optional[AdaptedProcess]) -> AdaptedProcess:
    """Y_k = E_{k,t}[X; K] for k <= t, t the claim time."""
    t = ctx.claim_time()
    lifted = _lifted(E, K)
    comps = {t: claim_on_lattice(ctx.claim(), ctx.lattice, t, ctx.market)}
    for k in range(t - 1, -1, -1):
        comps[k] = lifted.step(k, comps[k + 1])
    return AdaptedProcess([comps[k] for k in range(t + 1)])


def cmd_solve(ctx: RunContext) -> CommandResult:
    body: dict[str, Any] = {"lattice": ctx.spec.to_dict(), "claim": format_payoff(ctx.claim())}
    if _use_markov(ctx):
        body.update(_solve_markov(ctx))
        return body, True, None
    lat = ctx.lattice
    K = ctx.dividend()
    if get_evaluation_options(ctx.config).get("source") == "cond_expect":
        Y = _value_process(ctx, ctx.evaluation(), K)
        body.update({"method": "cond_expect", "Y0": float(Y[0].values[0])})
        return body, True, Y
    t = ctx.claim_time()
    X = claim_on_lattice(ctx.claim(), lat, t, ctx.market)
    g = ctx.driver
    opts = get_solver_options(ctx.config)
    if opts.get("picard"):
        if t != lat.N:
            raise InvalidSpec("picard sweeps run to the horizon only")
        sol = picard_solve(g, X, K, float(opts["fixed_point_tol"]))
        method = "picard"
    else:
        sol = solve_bsde(g, t, X, K, ctx.solver)
        method = "backward"
    body.update({"method": method, "driver": g.describe(), "Y0": sol.Y0, "diagnostics": sol.diagnostics.to_dict()})
    return body, True, sol.Y


def cmd_evaluate(ctx: RunContext) -> CommandResult:
    stopping = get_section(ctx.config, "stopping")
    if _use_markov(ctx):
        if stopping.get("sigma") not in (0,) or stopping.get("tau") is not None:
            raise InvalidSpec("the recombined solver evaluates E_{0,N} only")
        return cmd_solve(ctx)
    lat = ctx.lattice
    E = _lifted(ctx.evaluation(), ctx.dividend())
    sigma, tau = ctx.time(stopping.get("sigma")), ctx.time(stopping.get("tau"))
    body: dict[str, Any] = {"claim": format_payoff(ctx.claim()), "evaluation": E.describe()}
    if isinstance(sigma, StoppingTime) or isinstance(tau, StoppingTime):
        X = stopped_value(ctx.claim_process(), tau)
        result = extend_to_stopping(E, sigma, tau, X)
        body["sigma"] = sigma if isinstance(sigma, int) else sigma.values
        body["tau"] = tau if isinstance(tau, int) else tau.values
    else:
        t_claim = ctx.claim_time() if ctx.config.get("claim_time") is not None else tau
        X = claim_on_lattice(ctx.claim(), lat, min(t_claim, tau), ctx.market)
        result = E.apply(sigma, tau, X)
        body.update({"sigma": sigma, "tau": tau})
    body["result"] = _rv_summary(result)
    return body, True, None


def cmd_verify_axioms(ctx: RunContext) -> CommandResult:
    E = ctx.evaluation()
    samples, mu = int(ctx.config["samples"]), get_evaluation_options(ctx.config).get("mu")
    report = axiom_suite(E, samples, ctx.seed, slack=ctx.slack, mu=mu, threads=ctx.threads)
    body: dict[str, Any] = {"evaluation": E.describe(), "axioms": report}
    passed = report.passed
    zero_at_z0 = get_evaluation_options(ctx.config).get("source") == "cond_expect" or ctx.driver.flag_zero_at_z0
    if zero_at_z0:
        expectation = expectation_suite(E, samples, ctx.seed, slack=ctx.slack)
        body["expectation"] = expectation
        passed = passed and expectation.passed
    if not passed:
        _logger.warning("axiom check failed:\n%s", report.summary())
    return body, passed, None


def cmd_decompose(ctx: RunContext) -> CommandResult:
    opts = get_section(ctx.config, "decompose")
    lat = ctx.lattice
    node = parse_payoff(opts["process"], variables=claim_variables(lat.d, dividend=True))
    Y = ctx.claim_process(node)
    E = ctx.evaluation()
    method = opts["method"]
    tol = float(get_tolerances(ctx.config)["decomposition"])
    body: dict[str, Any] = {"process": format_payoff(node), "method": method}
    passed = True
    A: Optional[AdaptedProcess] = None
    if method == "direct":
        dec = doob_meyer_direct(E, Y, tol=tol, slack=ctx.slack)
        body["direct"] = dec
        A = dec.A
    else:
        trace = doob_meyer_penalized(E, Y, opts["schedule"], compare=method == "both", slack=ctx.slack)
        body["penalized"] = trace
        passed = trace.monotone and trace.sandwich
        A = trace.records[-1].A
        if trace.direct is not None:
            body["direct"] = trace.direct
            A = trace.direct.A
    return body, passed, A


def _random_claims(lat: PathLattice, rng: np.random.Generator, n: int) -> list[tuple[int, int, RandomVariable]]:
    """c0 + c1 B1_t + c2 |B1_t| with coefficients in [-1, 1] and s < t."""
    claims = []
    for _ in range(n):
        t = int(rng.integers(1, lat.N + 1))
        s = int(rng.integers(0, t))
        c0, c1, c2 = rng.uniform(-1.0, 1.0, size=3)
        b = lat.walk(t)[:, 0]
        claims.append((s, t, RandomVariable(lat, t, c0 + c1 * b + c2 * np.abs(b))))
    return claims


def cmd_recover(ctx: RunContext) -> CommandResult:
    opts = get_section(ctx.config, "recover")
    E = ctx.evaluation()
    grid = ProbeGrid.build(opts["times"], opts["y"], opts["z"], dimension=ctx.spec.dimension_d)
    g_hat = reconstruct_driver(
        E, grid, opts["method"], window=int(opts["window"]), mu=E.mu, threads=ctx.threads
    )
    lemma = lemma_checks(g_hat)
    body: dict[str, Any] = {"method": opts["method"], "grid_shape": list(grid.shape), "lemma": lemma}
    passed = lemma.lipschitz_ok
    n_claims = int(opts.get("claims") or 0)
    if n_claims:
        rng = np.random.default_rng(ctx.seed)
        threshold = float(get_tolerances(ctx.config)["roundtrip"])
        roundtrip = verify_roundtrip(E, g_hat, _random_claims(ctx.lattice, rng, n_claims), threshold=threshold)
        body["roundtrip"] = roundtrip
        passed = passed and roundtrip.passed
    if opts.get("output"):
        body["output"] = str(g_hat.save(opts["output"]))
    else:
        body["driver"] = g_hat.to_dict()
    return body, passed, None


def cmd_fixpoint(ctx: RunContext) -> CommandResult:
    opts = get_section(ctx.config, "fixpoint")
    E = ctx.evaluation()
    f, lip = source_function(opts["f"]["name"], opts["f"].get("params") or {})
    c = lip if opts.get("c") is None else float(opts["c"])
    X = claim_on_lattice(ctx.claim(), ctx.lattice, ctx.lattice.N, ctx.market)
    Y, trace = solve_bsde_under_E(E, f, X, c, tol=float(opts["tol"]), max_iter=int(opts["max_iter"]))
    cls = classify(E, trace.K, Y, float(get_tolerances(ctx.config)["decomposition"]))
    body = {"Y0": float(Y[0].values[0]), "trace": trace, "classification": cls}
    return body, cls.kind == "martingale", Y


def cmd_probe(ctx: RunContext) -> CommandResult:
    opts = get_section(ctx.config, "probe")
    E = ctx.evaluation()
    if opts["kind"] == "constant_z":
        res = probe_constant_z(E, int(opts["t"]), opts["z"])
    else:
        res = probe_infinitesimal(E, int(opts["t"]), float(opts["y"]), opts["z"])
    return {"kind": opts["kind"], "t": opts["t"], "probe": res}, True, None


def cmd_report(ctx: RunContext) -> CommandResult:
    """Value process of the claim with its a-priori bound and optional-stopping diagnostics."""
    E = ctx.evaluation()
    K = ctx.dividend()
    Y = _value_process(ctx, E, K)
    X = Y[Y.stop]
    stopping = get_section(ctx.config, "stopping")
    sigma, tau = ctx.time(stopping.get("sigma")), ctx.time(stopping.get("tau"))
    if isinstance(tau, int):
        tau = min(tau, Y.stop)
    mu = E.mu if E.mu is not None else 0.0
    bound = apriori_bound_report(mu, X.at(ctx.lattice.N), cfg=ctx.solver) if K is None else None
    cls = classify(E, K, Y, ctx.slack)
    body: dict[str, Any] = {
        "lattice": ctx.spec.to_dict(),
        "evaluation": E.describe(),
        "Y0": float(Y[0].values[0]),
        "classification": cls,
    }
    passed = cls.kind == "martingale"
    if bound is not None:
        body["apriori_bound"] = bound
        passed = passed and bound.holds
    if K is None and Y.stop == ctx.lattice.N:
        stop_report = optional_stopping_check(E, Y, sigma, tau, ctx.slack)
        body["optional_stopping"] = stop_report
        passed = passed and stop_report.passed
    return body, passed, Y


HANDLERS: dict[str, Callable[[RunContext], CommandResult]] = {
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "verify-axioms": cmd_verify_axioms,
    "decompose": cmd_decompose,
    "recover": cmd_recover,
    "fixpoint": cmd_fixpoint,
    "probe": cmd_probe,
    "report": cmd_report,
}


def run_command(
    name: str,
    config: dict[str, Any],
    *,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    out: Optional[str] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    """Run one command on a merged config; returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        if name not in HANDLERS:
            raise ConfigError(f"unknown command {name!r} (known: {', '.join(COMMANDS)})")
        config = dict(config)
        if seed is not None:
            config["seed"] = int(seed)
        config = merge_config(config)
        ctx = RunContext(
            config=config,
            seed=int(config["seed"]),
            threads=resolve_threads(threads, config.get("threads")),
        )
        _logger.debug("%s: seed %d, %d thread(s)", name, ctx.seed, ctx.threads)
        body, passed, process = HANDLERS[name](ctx)
        report = build_report(name, config, ctx.seed, body)
        report["passed"] = bool(passed)
        target = out or config["output"].get("path")
        write_report(report, target, stdout)
        csv_path = config["report"].get("csv")
        if csv_path and process is not None:
            write_process_csv(process, csv_path)
        if config["report"].get("text", True):
            (stdout if target else stderr).write(text_summary(report))
    except GevalError as exc:
        code = exit_code_for(exc)
        _logger.error("%s: %s", type(exc).__name__, exc)
        return code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        _logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL_ERROR
    return EXIT_OK if passed else EXIT_PROPERTY_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geval", description="g-evaluations on a Brownian path lattice")
    parser.add_argument("--version", action="version", version=f"geval {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="scenario file (JSON); defaults apply when omitted")
    parser.add_argument("--out", help="write the JSON report here instead of standard output")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--threads", type=int, help="worker threads (GEVAL_THREADS takes precedence)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_log_level(logging.DEBUG)
    elif args.quiet:
        set_log_level(logging.WARNING)
    if args.seed is not None and args.seed < 0:
        _logger.error("seed must be >= 0")
        return exit_code_for(ConfigError("negative seed"))
    try:
        config = load_scenario_config(args.config)
    except GevalError as exc:
        _logger.error("%s: %s", type(exc).__name__, exc)
        return exit_code_for(exc)
    return run_command(args.command, config, seed=args.seed, threads=args.threads, out=args.out)


__all__ = ["COMMANDS", "RunContext", "build_parser", "main", "run_command"]
