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

from typing import Union

import numpy as np

from ..errors import NotAStoppingTime, NotMeasurable, StoppingOrder
from ..lattice import (
    AdaptedProcess,
    RandomVariable,
    StoppingTime,
    as_stopping_time,
    is_measurable_at_stopping,
    is_stopping_time,
    stopped_value,
)
from .base import Evaluation


def extend_to_stopping(
    E: Evaluation,
    sigma: Union[int, StoppingTime],
    tau: Union[int, StoppingTime],
    X: RandomVariable,
) -> RandomVariable:
    """E_{sigma,tau}[X] from the one-step operators of E.

    Nodes already stopped (tau <= k) keep X; the others take one step of E.
    An integer sigma gives a variable at time sigma, a StoppingTime sigma the
    stopped value at the leaves.
    """
    lat = E.lattice
    s_st = as_stopping_time(lat, sigma)
    t_st = as_stopping_time(lat, tau)
    if not (is_stopping_time(s_st) and is_stopping_time(t_st)):
        raise NotAStoppingTime("extend_to_stopping needs stopping times")
    if not s_st.precedes(t_st):
        raise StoppingOrder("sigma > tau on some path")
    if not is_measurable_at_stopping(X, t_st):
        raise NotMeasurable("claim is not F_tau-measurable")

    leaves = X.at(lat.N).values
    t_end, s_min = t_st.max(), s_st.min()
    Y = {t_end: RandomVariable(lat, t_end, lat.project(leaves, lat.N - t_end))}
    for k in range(t_end - 1, s_min - 1, -1):
        stepped = E.step(k, Y[k + 1]).values
        frozen = lat.project(leaves, lat.N - k)
        Y[k] = RandomVariable(lat, k, np.where(t_st.stopped_by(k), frozen, stepped))
    path = AdaptedProcess([Y[k] for k in range(s_min, t_end + 1)])
    if isinstance(sigma, StoppingTime):
        return stopped_value(path, sigma)
    return path[s_min]
