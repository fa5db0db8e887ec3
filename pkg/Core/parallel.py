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

"""Parallélisme des tâches indépendantes (cellules de grille, échantillons d'axiomes)."""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

THREADS_ENV = "GEVAL_THREADS"

_logger = logging.getLogger("geval.parallel")

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(option: Optional[int] = None, configured: Optional[int] = None) -> int:
    """Thread count: environment, then command-line option, then config, then cpu_count - 1."""
    try:
        par_env = int(os.environ.get(THREADS_ENV, "0"))
    except Exception:
        par_env = 0
    try:
        par_opt = int(option or 0)
    except Exception:
        par_opt = 0
    try:
        par_cfg = int(configured or 0)
    except Exception:
        par_cfg = 0
    try:
        cpu_def = max(1, (mp.cpu_count() or 2) - 1)
    except Exception:
        cpu_def = 2
    threads = par_env or par_opt or par_cfg or cpu_def
    return max(1, threads)


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> list[R]:
    """Apply fn to every item; results keep the input order whatever the thread count."""
    work = list(items)
    n = resolve_threads(threads) if threads is None else max(1, int(threads))
    if n == 1 or len(work) <= 1:
        return [fn(item) for item in work]
    _logger.debug("map_ordered: %d task(s) on %d thread(s)", len(work), n)
    with ThreadPoolExecutor(max_workers=min(n, len(work))) as pool:
        return list(pool.map(fn, work))
