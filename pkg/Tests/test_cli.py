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
Tests for Core.cli - commands, reports and exit codes
"""

import io
import json

import pytest

from Core.cli import COMMANDS, build_parser, main, run_command
from Core.errors import EXIT_CONFIG_ERROR, EXIT_NUMERICAL_ERROR, EXIT_OK, EXIT_PROPERTY_FAILURE
from Core.parallel import THREADS_ENV

SMALL = {"lattice": {"T": 1.0, "N": 3}, "report": {"text": False}}


def _run(command, config, **kwargs):
    out, err = io.StringIO(), io.StringIO()
    code = run_command(command, {**SMALL, **config}, stdout=out, stderr=err, **kwargs)
    report = json.loads(out.getvalue()) if out.getvalue() else None
    return code, report


@pytest.fixture(autouse=True)
def _no_thread_env(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


class TestSolve:
    def test_zero_driver_brownian_claim(self):
        """E[B_T] = 0"""
        code, report = _run("solve", {"driver": {"name": "zero"}, "claim": "B1"})
        assert code == EXIT_OK
        assert report["passed"] is True
        assert report["command"] == "solve"
        assert report["body"]["method"] == "backward"
        assert report["body"]["Y0"] == pytest.approx(0.0, abs=1e-12)

    def test_constant_claim_under_g_mu(self):
        """X = 1 under g_mu: each implicit step divides by 1 - mu dt"""
        code, report = _run("solve", {"driver": {"name": "g_mu", "params": {"mu": 0.5}}, "claim": "1"})
        assert code == EXIT_OK
        assert report["body"]["Y0"] == pytest.approx((1.0 / (1.0 - 0.5 / 3)) ** 3, rel=1e-10)

    def test_conditional_expectation_source(self):
        code, report = _run("solve", {"evaluation": {"source": "cond_expect"}, "claim": "B1 * B1"})
        assert code == EXIT_OK
        assert report["body"]["method"] == "cond_expect"
        assert report["body"]["Y0"] == pytest.approx(1.0)

    def test_recombined_solver(self):
        code, report = _run(
            "solve",
            {"lattice": {"T": 1.0, "N": 64}, "solver": {"markov_reduction": "always"}, "claim": "B1 * B1"},
        )
        assert code == EXIT_OK
        assert report["body"]["method"] == "markov"
        assert report["body"]["Y0"] == pytest.approx(1.0, abs=1e-9)

    def test_recombined_solver_rejects_path_dependence(self):
        code, _ = _run("solve", {"solver": {"markov_reduction": "always"}, "claim": "RUNMAX_S"})
        assert code == EXIT_CONFIG_ERROR

    def test_csv_dump(self, tmp_path):
        path = tmp_path / "Y.csv"
        code, _ = _run("solve", {"report": {"text": False, "csv": str(path)}})
        assert code == EXIT_OK
        assert path.read_text(encoding="utf-8").splitlines()[0] == "time_index,node_index,value"

    def test_deterministic(self):
        config = {"driver": {"name": "g_mu", "params": {"mu": 0.5}}, "claim": "max(S - 100, 0)"}
        first = run_command("solve", {**SMALL, **config}, stdout=(a := io.StringIO()), stderr=io.StringIO())
        second = run_command("solve", {**SMALL, **config}, stdout=(b := io.StringIO()), stderr=io.StringIO())
        assert first == second == EXIT_OK
        assert a.getvalue() == b.getvalue()


class TestOtherCommands:
    def test_evaluate_between_times(self):
        code, report = _run("evaluate", {"claim": "B1", "stopping": {"sigma": 1, "tau": 3}})
        assert code == EXIT_OK
        result = report["body"]["result"]
        assert result["time_index"] == 1
        assert len(result["values"]) == 2

    def test_evaluate_at_hitting_time(self):
        code, report = _run("evaluate", {"claim": "B1", "stopping": {"tau": {"hitting": {"level": 0.5}}}})
        assert code == EXIT_OK
        assert report["body"]["result"]["values"][0] == pytest.approx(0.0, abs=1e-12)

    def test_verify_axioms_thread_independent(self):
        config = {"driver": {"name": "g_mu", "params": {"mu": 0.5}}, "samples": 5, "seed": 4}
        one = run_command("verify-axioms", {**SMALL, **config}, threads=1, stdout=(a := io.StringIO()), stderr=io.StringIO())
        many = run_command("verify-axioms", {**SMALL, **config}, threads=3, stdout=(b := io.StringIO()), stderr=io.StringIO())
        assert one == many == EXIT_OK
        assert a.getvalue() == b.getvalue()

    def test_decompose_direct(self):
        code, report = _run("decompose", {"decompose": {"process": "-t", "method": "direct"}})
        assert code == EXIT_OK
        assert "direct" in report["body"]

    def test_probe(self):
        code, report = _run("probe", {"driver": {"name": "kappa_abs_z", "params": {"kappa": 0.3}}})
        assert code == EXIT_OK
        assert report["body"]["kind"] == "constant_z"

    def test_seed_override_recorded(self):
        code, report = _run("probe", {}, seed=9)
        assert code == EXIT_OK
        assert report["header"]["seed"] == 9


class TestExitCodes:
    def test_config_error(self):
        assert _run("solve", {"lattice": {"N": 0}})[0] == EXIT_CONFIG_ERROR

    def test_unknown_command(self):
        assert _run("price", {})[0] == EXIT_CONFIG_ERROR

    def test_parse_error(self):
        assert _run("solve", {"claim": "max(S, )"})[0] == EXIT_CONFIG_ERROR

    def test_unknown_driver(self):
        assert _run("solve", {"driver": {"name": "nope"}})[0] == EXIT_CONFIG_ERROR

    def test_property_failure(self):
        """An increasing process is not a supermartingale"""
        code, _ = _run("decompose", {"decompose": {"process": "t", "method": "direct"}})
        assert code == EXIT_PROPERTY_FAILURE

    def test_numerical_failure(self):
        """mu * dt >= 1"""
        code, _ = _run("solve", {"lattice": {"T": 1.0, "N": 1}, "driver": {"name": "g_mu", "params": {"mu": 2.0}}})
        assert code == EXIT_NUMERICAL_ERROR


class TestMain:
    def test_parser_lists_commands(self):
        args = build_parser().parse_args(["recover", "--seed", "3"])
        assert args.command == "recover" and args.seed == 3
        assert "verify-axioms" in COMMANDS

    def test_main_writes_report(self, scenario_file, tmp_path):
        path = scenario_file({"lattice": {"N": 2}, "claim": "B1 + 1"})
        out = tmp_path / "report.json"
        assert main(["solve", "--config", str(path), "--out", str(out), "--quiet"]) == EXIT_OK
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["body"]["Y0"] == pytest.approx(1.0)

    def test_main_missing_config(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "absent.json"), "--quiet"]) == EXIT_CONFIG_ERROR

    def test_main_negative_seed(self):
        assert main(["solve", "--seed", "-1", "--quiet"]) == EXIT_CONFIG_ERROR
