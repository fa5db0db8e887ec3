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
Générateurs intégrés.

  zero            g = 0
  g_mu            g = mu|y| + mu|z|
  neg_g_mu        g = -mu|y| - mu|z|
  kappa_abs_z     g = kappa|z|
  neg_kappa_abs_z g = -kappa|z|
  black_scholes   g = -r y - theta.z, theta = (b - r)/sigma
  linear          g = a y + b.z + c
"""

from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np

from ..errors import BadParams
from .base import Driver
from .registry import register


def _real(name: str, value: Any, *, nonneg: bool = False) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise BadParams(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(v):
        raise BadParams(f"{name} must be finite, got {v}")
    if nonneg and v < 0:
        raise BadParams(f"{name} must be >= 0, got {v}")
    return v


def _vector(name: str, value: Any, dimension: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(dimension, float(arr[0]))
    if arr.shape != (dimension,):
        raise BadParams(f"{name} must be a scalar or a {dimension}-vector")
    if not np.all(np.isfinite(arr)):
        raise BadParams(f"{name} must be finite")
    return arr


def _norm(z: np.ndarray) -> np.ndarray:
    return np.linalg.norm(z, axis=1)


@register("zero")
def zero(*, dimension: int = 1) -> Driver:
    return Driver(
        lambda k, nodes, y, z: np.zeros_like(y),
        0.0,
        flag_zero_at_origin=True,
        flag_zero_at_z0=True,
        label="zero",
    )


@register("g_mu")
def g_mu(mu: float, *, dimension: int = 1) -> Driver:
    m = _real("mu", mu, nonneg=True)
    return Driver(
        lambda k, nodes, y, z: m * (np.abs(y) + _norm(z)),
        m,
        flag_zero_at_origin=True,
        label=f"g_mu({m})",
    )


@register("neg_g_mu")
def neg_g_mu(mu: float, *, dimension: int = 1) -> Driver:
    m = _real("mu", mu, nonneg=True)
    return Driver(
        lambda k, nodes, y, z: -m * (np.abs(y) + _norm(z)),
        m,
        flag_zero_at_origin=True,
        label=f"neg_g_mu({m})",
    )


@register("kappa_abs_z")
def kappa_abs_z(kappa: float, *, dimension: int = 1) -> Driver:
    kp = _real("kappa", kappa, nonneg=True)
    return Driver(
        lambda k, nodes, y, z: kp * _norm(z),
        kp,
        flag_zero_at_origin=True,
        flag_zero_at_z0=True,
        label=f"kappa_abs_z({kp})",
    )


@register("neg_kappa_abs_z")
def neg_kappa_abs_z(kappa: float, *, dimension: int = 1) -> Driver:
    kp = _real("kappa", kappa, nonneg=True)
    return Driver(
        lambda k, nodes, y, z: -kp * _norm(z),
        kp,
        flag_zero_at_origin=True,
        flag_zero_at_z0=True,
        label=f"neg_kappa_abs_z({kp})",
    )


@register("black_scholes")
def black_scholes(
    r: float,
    theta: Any = None,
    *,
    b: Optional[float] = None,
    sigma: Any = None,
    dimension: int = 1,
) -> Driver:
    """Linear pricing driver. theta is given directly or as (b - r)/sigma."""
    rate = _real("r", r)
    if theta is None:
        if b is None or sigma is None:
            raise BadParams("black_scholes needs theta, or b and sigma")
        vol = _vector("sigma", sigma, dimension)
        if np.any(vol == 0):
            raise BadParams("sigma must be nonzero")
        th = (_vector("b", b, dimension) - rate) / vol
    else:
        th = _vector("theta", theta, dimension)
    vanishes = rate == 0 and not np.any(th)
    # Both flags only when the driver is identically zero.
    return Driver(
        lambda k, nodes, y, z: -rate * y - z @ th,
        max(abs(rate), float(np.linalg.norm(th))),
        flag_zero_at_origin=vanishes,
        flag_zero_at_z0=vanishes,
        label=f"black_scholes(r={rate}, theta={th.tolist()})",
    )


@register("linear")
def linear(a: float, b: Any = 0.0, c: float = 0.0, *, dimension: int = 1) -> Driver:
    av = _real("a", a)
    bv = _vector("b", b, dimension)
    cv = _real("c", c)
    return Driver(
        lambda k, nodes, y, z: av * y + z @ bv + cv,
        max(abs(av), float(np.linalg.norm(bv))),
        flag_zero_at_origin=cv == 0,
        flag_zero_at_z0=av == 0 and cv == 0,
        label=f"linear(a={av}, b={bv.tolist()}, c={cv})",
    )
