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
Tests for Core.lattice - path tree, slices, processes and stopping times
"""

import logging

import numpy as np
import psutil
import pytest
from hypothesis import given
from hypothesis import strategies as st

from Core.errors import (
    CapacityExceeded,
    InvalidSpec,
    LatticeMismatch,
    NotAStoppingTime,
    NotMeasurable,
    TimeOrder,
)
from Core.lattice import (
    AdaptedProcess,
    LatticeSpec,
    RandomVariable,
    StoppingTime,
    build_lattice,
    cond_expect,
    first_exit,
    hitting_time,
    is_measurable_at_stopping,
    is_stopping_time,
    stopped_value,
)

from .lattice_support import make_lattice, random_claim


class TestLatticeSpec:
    """Validation of (T, N, d)"""

    @pytest.mark.parametrize("T,N,d", [(0.0, 4, 1), (-1.0, 4, 1), (1.0, 0, 1), (1.0, 4, 0), (1.0, True, 1), (1.0, 2.5, 1)])
    def test_invalid_spec(self, T, N, d):
        """Non-positive horizon or non-integer counts are rejected"""
        with pytest.raises(InvalidSpec):
            LatticeSpec(T, N, d)

    def test_dt_and_increment(self):
        """dt = T/N and |dB| = sqrt(dt)"""
        spec = LatticeSpec(2.0, 8)
        assert spec.dt == 0.25
        assert spec.dB_magnitude == 0.5

    def test_capacity(self):
        """Trees above the cap need allow_large, and their deep slices still refuse"""
        with pytest.raises(CapacityExceeded):
            build_lattice(LatticeSpec(1.0, 30))
        lat = build_lattice(LatticeSpec(1.0, 30), allow_large=True)
        assert lat.n_nodes(3) == 8
        with pytest.raises(CapacityExceeded):
            lat.n_nodes(30)

    def test_capacity_counts_dimension(self):
        """The cap bounds d * N"""
        with pytest.raises(CapacityExceeded):
            build_lattice(LatticeSpec(1.0, 9, 3), max_log2_nodes=26)

    def test_memory_query_failure_is_logged(self, monkeypatch, caplog):
        """An unavailable memory query only leaves a debug record"""

        def broken():
            raise OSError("no /proc/meminfo")

        monkeypatch.setattr(psutil, "virtual_memory", broken)
        with caplog.at_level(logging.DEBUG, logger="geval.lattice"):
            lat = build_lattice(LatticeSpec(1.0, 4))
        assert lat.n_nodes(4) == 16
        assert "memory check skipped" in caplog.text


class TestWalk:
    """Brownian walk on the tree"""

    def test_node_counts(self, lat2d):
        """n_k = 2^(d k)"""
        assert [lat2d.n_nodes(k) for k in range(4)] == [1, 4, 16, 64]

    def test_big_endian_children(self, lat4):
        """Child = parent * 2 + branch; first leaf is the all-down path"""
        w = lat4.walk(4)[:, 0]
        s = lat4.sqrt_dt
        assert w[0] == pytest.approx(-4 * s)
        assert w[-1] == pytest.approx(4 * s)
        parents = lat4.walk(3)[:, 0]
        assert np.allclose(w[0::2], parents - s)
        assert np.allclose(w[1::2], parents + s)

    def test_walk_is_martingale(self, lat2d):
        """E[B_N | F_k] = B_k coordinatewise"""
        for k in range(lat2d.N + 1):
            for j in range(2):
                ce = cond_expect(lat2d.brownian(lat2d.N, j), k)
                assert np.allclose(ce.values, lat2d.walk(k)[:, j], atol=1e-12)

    def test_martingale_coefficients_of_walk(self, lat2d):
        """The increment of B_j has coefficient e_j, exact projection"""
        for k in range(lat2d.N):
            children = lat2d.walk(k + 1) @ np.array([2.0, -1.0])
            z, residual = lat2d.martingale_coefficients(children)
            assert np.allclose(z, [[2.0, -1.0]] * lat2d.n_nodes(k))
            assert residual < 1e-12

    def test_quadratic_variation(self, lat4):
        """E[B_N^2] = T"""
        b = lat4.brownian(lat4.N)
        assert (b * b).mean() == pytest.approx(lat4.T)


class TestRandomVariable:
    """Slices, time moves and arithmetic"""

    def test_shape_checked(self, lat4):
        """Wrong length raises LatticeMismatch, non-finite values InvalidSpec"""
        with pytest.raises(LatticeMismatch):
            RandomVariable(lat4, 2, np.zeros(3))
        with pytest.raises(InvalidSpec):
            RandomVariable(lat4, 1, [0.0, np.nan])

    def test_values_are_read_only(self, lat4):
        """Slices cannot be mutated in place"""
        X = RandomVariable.constant(lat4, 1, 2.0)
        with pytest.raises(ValueError):
            X.values[0] = 1.0

    def test_at_then_project(self, lat4, rng):
        """Lifting to a later time then projecting back returns the variable"""
        X = random_claim(lat4, 2, rng)
        assert np.array_equal(X.at(4).project(2).values, X.values)

    def test_project_requires_measurability(self, lat4):
        """B_4 is not F_2-measurable"""
        with pytest.raises(NotMeasurable):
            lat4.brownian(4).project(2)

    def test_arithmetic_aligns_to_later_time(self, lat4):
        """X_s + Y_t lives at max(s, t)"""
        Z = lat4.brownian(1) + lat4.brownian(3)
        assert Z.time_index == 3
        assert np.allclose(Z.values, lat4.walk(1)[:, 0].repeat(4) + lat4.walk(3)[:, 0])

    def test_lattice_mismatch(self, lat4):
        """Variables of different lattices do not mix"""
        other = make_lattice(5)
        with pytest.raises(LatticeMismatch):
            _ = lat4.brownian(1) + other.brownian(1)

    def test_cond_expect_time_order(self, lat4):
        """Cannot condition on a later sigma-field"""
        with pytest.raises(TimeOrder):
            cond_expect(lat4.brownian(1), 2)

    @given(seed=st.integers(0, 2**32 - 1), s=st.integers(0, 4), r=st.integers(0, 4))
    def test_tower_property(self, seed, s, r):
        """E[E[X | F_s] | F_r] = E[X | F_min(r, s)]"""
        lat = make_lattice(4)
        X = random_claim(lat, 4, np.random.default_rng(seed))
        lo = min(r, s)
        lhs = cond_expect(cond_expect(X, s), lo)
        assert lhs.max_abs_diff(cond_expect(X, lo)) < 1e-13

    def test_mean_of_constant_is_exact(self, lat4):
        """Pairwise averaging keeps constants bit for bit"""
        X = RandomVariable.constant(lat4, 4, 0.1)
        assert X.mean() == 0.1
        assert np.all(cond_expect(X, 0).values == 0.1)


class TestAdaptedProcess:
    """Processes indexed by time"""

    def test_components_must_be_consecutive(self, lat4):
        """Time indices follow start, start+1, ..."""
        with pytest.raises(InvalidSpec):
            AdaptedProcess([lat4.brownian(0), lat4.brownian(2)])

    def test_cumulative_and_increments(self, lat4):
        """cumulative sums predictable increments; increments undo it"""
        incs = [RandomVariable.constant(lat4, k, 0.5) for k in range(4)]
        A = AdaptedProcess.cumulative(incs)
        assert A.start == 0 and A.stop == 4
        assert A[4].values[0] == pytest.approx(2.0)
        assert all(np.allclose(inc.values, 0.5) for inc in A.increments())
        assert A.is_nondecreasing()

    def test_brownian_process(self, lat4):
        """B_k as a process"""
        B = AdaptedProcess.brownian(lat4)
        assert len(B) == 5
        assert np.array_equal(B[3].values, lat4.walk(3)[:, 0])

    def test_restrict_and_norms(self, lat4):
        """restrict keeps a window; sup_norm and min_diff read every slice"""
        B = AdaptedProcess.brownian(lat4)
        window = B.restrict(1, 3)
        assert list(window.times()) == [1, 2, 3]
        assert window.sup_norm() == pytest.approx(3 * lat4.sqrt_dt)
        assert (B + 1.0).min_diff(B) == pytest.approx(1.0)

    def test_rows(self, lat4):
        """rows yields (time_index, node_index, value) in order"""
        rows = list(AdaptedProcess.constant(lat4, 1.5, stop=1).rows())
        assert rows == [(0, 0, 1.5), (1, 0, 1.5), (1, 1, 1.5)]


class TestStoppingTimes:
    """Stopping times and stopped values"""

    def test_constant_is_stopping_time(self, lat4):
        """Deterministic times are stopping times"""
        tau = StoppingTime.constant(lat4, 2)
        assert is_stopping_time(tau)
        assert tau.is_deterministic

    def test_non_adapted_time_rejected(self, lat4):
        """Stopping at 1 on the first leaf only looks into the future"""
        values = np.full(16, 4)
        values[0] = 1
        assert not is_stopping_time(values, lat4)
        with pytest.raises(NotAStoppingTime):
            StoppingTime(lat4, values)

    def test_out_of_range_values(self, lat4):
        """Values outside [0, N] are not stopping times"""
        with pytest.raises(NotAStoppingTime):
            StoppingTime(lat4, np.full(16, 5))

    def test_hitting_time(self, lat4):
        """First passage of B above one up-step"""
        B = AdaptedProcess.brownian(lat4)
        tau = hitting_time(B, lat4.sqrt_dt - 1e-12)
        assert is_stopping_time(tau)
        # the all-up path hits at step 1, the all-down path never
        assert tau.values[-1] == 1
        assert tau.values[0] == lat4.N

    def test_first_exit_is_stopping_time(self, lat4):
        """Exit from a band around 0"""
        B = AdaptedProcess.brownian(lat4)
        tau = first_exit(B, -1.5 * lat4.sqrt_dt, 1.5 * lat4.sqrt_dt)
        assert is_stopping_time(tau)
        assert tau.min() == 2

    def test_stopped_value(self, lat4):
        """Y_tau at the leaves"""
        B = AdaptedProcess.brownian(lat4)
        tau = hitting_time(B, lat4.sqrt_dt - 1e-12)
        stopped = stopped_value(B, tau)
        assert stopped.time_index == lat4.N
        hit = tau.values < lat4.N
        assert np.allclose(stopped.values[hit], lat4.sqrt_dt)
        assert stopped_value(B, 2).max_abs_diff(B[2]) == 0.0

    def test_measurable_at_stopping(self, lat4):
        """B_tau is F_tau-measurable, B_N is not when tau can be early"""
        B = AdaptedProcess.brownian(lat4)
        tau = hitting_time(B, lat4.sqrt_dt - 1e-12)
        assert is_measurable_at_stopping(stopped_value(B, tau), tau)
        assert not is_measurable_at_stopping(B[4], tau)

    def test_precedes(self, lat4):
        """sigma <= tau pathwise"""
        assert StoppingTime.constant(lat4, 1).precedes(StoppingTime.constant(lat4, 3))
        assert not StoppingTime.constant(lat4, 3).precedes(StoppingTime.constant(lat4, 1))

    def test_stopped_by_is_time_k_event(self, lat4):
        """{tau <= k} read on time-k nodes"""
        tau = hitting_time(AdaptedProcess.brownian(lat4), lat4.sqrt_dt - 1e-12)
        assert tau.stopped_by(1).tolist() == [False, True]
        assert tau.stopped_by(4).all()
