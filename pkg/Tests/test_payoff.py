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
Tests for Core.payoff - payoff language parsing, formatting and evaluation on the lattice
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from Core.errors import ArityMismatch, ConfigurationError, InvalidSpec, ParseError, UnknownIdentifier
from Core.payoff import (
    BinOp,
    Call,
    MarketParams,
    Neg,
    Num,
    Var,
    claim_on_lattice,
    claim_on_levels,
    claim_variables,
    format_payoff,
    free_variables,
    parse_payoff,
    uses_path_dependence,
)


class TestParse:
    """Grammar, precedence and error locations"""

    def test_precedence(self):
        node = parse_payoff("1 + 2 * B1")
        assert node == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Var("B1")))

    def test_unary_minus_and_calls(self):
        node = parse_payoff("-max(S - 100, 0)")
        assert node == Neg(Call("max", (BinOp("-", Var("S"), Num(100.0)), Num(0.0))))

    def test_left_associative(self):
        assert parse_payoff("8 / 4 / 2") == BinOp("/", BinOp("/", Num(8.0), Num(4.0)), Num(2.0))

    def test_scientific_literals(self):
        assert parse_payoff("1.5e-3") == Num(0.0015)
        assert parse_payoff(".5") == Num(0.5)

    def test_missing_argument_offset(self):
        with pytest.raises(ParseError) as info:
            parse_payoff("max(S, )")
        assert info.value.offset == 7
        assert info.value.found == ")"

    def test_trailing_token(self):
        with pytest.raises(ParseError) as info:
            parse_payoff("1 2")
        assert info.value.offset == 2

    def test_offsets_count_bytes(self):
        """A non-breaking space takes two bytes"""
        with pytest.raises(ParseError) as info:
            parse_payoff("\u00a01 +")
        assert info.value.offset == 5
        assert "end of input" in str(info.value)

    def test_bad_character(self):
        with pytest.raises(ParseError) as info:
            parse_payoff("1 + $")
        assert info.value.offset == 4

    def test_empty(self):
        with pytest.raises(ParseError):
            parse_payoff("   ")

    def test_function_needs_parenthesis(self):
        with pytest.raises(ParseError) as info:
            parse_payoff("max + 1")
        assert "(" in info.value.expected

    def test_unknown_identifiers(self):
        with pytest.raises(UnknownIdentifier) as info:
            parse_payoff("1 + Q")
        assert info.value.offset == 4
        with pytest.raises(UnknownIdentifier):
            parse_payoff("sqrt(B1)")
        # B2 only exists in dimension 2
        with pytest.raises(UnknownIdentifier):
            parse_payoff("B2")
        assert parse_payoff("B2", dimension=2) == Var("B2")

    @pytest.mark.parametrize("text,got", [("abs(1, 2)", 2), ("max(1)", 1), ("log(1, 2, 3)", 3)])
    def test_arity(self, text, got):
        with pytest.raises(ArityMismatch) as info:
            parse_payoff(text)
        assert info.value.got == got

    def test_nesting_limit(self):
        parse_payoff("(" * 50 + "1" + ")" * 50)
        with pytest.raises(ParseError):
            parse_payoff("(" * 150 + "1" + ")" * 150)
        with pytest.raises(ParseError):
            parse_payoff("-" * 150 + "1")

    def test_dividend_time_variable(self):
        with pytest.raises(UnknownIdentifier):
            parse_payoff("t")
        assert parse_payoff("0.1 * t", variables=claim_variables(dividend=True)) == BinOp("*", Num(0.1), Var("t"))

    @given(st.text(max_size=40))
    def test_fuzz_never_crashes(self, text):
        """Arbitrary input either parses or raises a configuration error"""
        try:
            parse_payoff(text)
        except ConfigurationError:
            pass


class TestFormat:
    @pytest.mark.parametrize(
        "text",
        ["max(S - 100, 0)", "-B1 * 2 + exp(-0.5 * T)", "min(RUNMAX_S, 120, S / 2)", "log(abs(B1) + 1e-05)"],
    )
    def test_round_trip(self, text):
        node = parse_payoff(text)
        assert parse_payoff(format_payoff(node)) == node

    def test_overflowing_literal_rejected(self):
        with pytest.raises(InvalidSpec) as info:
            parse_payoff("B1 + 1e999")
        assert "offset 5" in str(info.value)
        node = parse_payoff("1e308 * B1")
        assert parse_payoff(format_payoff(node)) == node

    def test_fully_parenthesised(self):
        assert format_payoff(parse_payoff("1 + 2 * B1")) == "(1.0 + (2.0 * B1))"

    def test_free_variables(self):
        node = parse_payoff("max(RUNMAX_S - S, 0) + B1")
        assert free_variables(node) == {"RUNMAX_S", "S", "B1"}
        assert uses_path_dependence(node)
        assert not uses_path_dependence(parse_payoff("S + T"))


class TestClaims:
    """Evaluation on lattice nodes and walk levels"""

    def test_call_on_lattice(self, lat4):
        X = claim_on_lattice(parse_payoff("max(B1, 0)"), lat4, 4)
        assert X.time_index == 4
        assert X.values[15] == pytest.approx(4 * lat4.sqrt_dt)
        assert X.values[0] == 0.0

    def test_constant_claim_broadcasts(self, lat4):
        X = claim_on_lattice(parse_payoff("T + 1"), lat4, 2)
        assert X.values.shape == (4,)
        assert np.all(X.values == 2.0)

    def test_price_process(self, lat4):
        market = MarketParams(S0=50.0, nu=0.1, sigma=0.3)
        X = claim_on_lattice(parse_payoff("S"), lat4, 4, market)
        b = lat4.walk(4)[:, 0]
        assert np.allclose(X.values, 50.0 * np.exp(0.1 + 0.3 * b))
        assert claim_on_lattice(parse_payoff("S"), lat4, 0).values[0] == pytest.approx(100.0)

    def test_running_extrema(self, lat4):
        node = parse_payoff("RUNMAX_S - RUNMIN_S")
        X = claim_on_lattice(node, lat4, 4)
        top = MarketParams().price(1.0, 4 * lat4.sqrt_dt)
        assert X.values[15] == pytest.approx(top - 100.0)
        assert claim_on_lattice(parse_payoff("RUNMAX_S"), lat4, 4).values[0] == pytest.approx(100.0)

    def test_log_is_floored(self, lat4):
        X = claim_on_lattice(parse_payoff("log(0 * B1)"), lat4, 1)
        assert np.all(np.isfinite(X.values))

    def test_division_by_zero_rejected(self, lat4):
        with pytest.raises(InvalidSpec):
            claim_on_lattice(parse_payoff("1 / B1"), lat4, 2)

    def test_second_coordinate(self, lat2d):
        X = claim_on_lattice(parse_payoff("B2", dimension=2), lat2d, 3)
        assert np.allclose(X.values, lat2d.walk(3)[:, 1])

    def test_on_levels(self):
        levels = np.array([-1.0, 0.0, 1.0])
        node = parse_payoff("max(B1, 0) + t", variables=claim_variables(1, dividend=True))
        out = claim_on_levels(node, levels, 0.5, 1.0)
        assert out.tolist() == [0.5, 0.5, 1.5]

    def test_levels_reject_path_dependence(self):
        with pytest.raises(InvalidSpec):
            claim_on_levels(parse_payoff("RUNMAX_S"), np.zeros(3), 0.0, 1.0)
        with pytest.raises(InvalidSpec):
            claim_on_levels(parse_payoff("B2", dimension=2), np.zeros(3), 0.0, 1.0)
