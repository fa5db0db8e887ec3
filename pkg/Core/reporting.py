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
Report emission: JSON documents with a reproducibility header, CSV dumps of
adapted processes and a short human-readable summary.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
from pathlib import Path
from typing import Any, Optional, TextIO, Union

import numpy as np

from . import __version__
from .allversion import get_versions_dict
from .lattice import AdaptedProcess, RandomVariable
from .scenario_config import canonical_json

CSV_COLUMNS = ("time_index", "node_index", "value")


def config_hash(config: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def report_header(config: dict[str, Any], seed: int) -> dict[str, Any]:
    return {
        "version": __version__,
        "seed": int(seed),
        "config_hash": config_hash(config),
        "libraries": {k: v for k, v in get_versions_dict().items() if k != "system"},
    }


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types for reports (numpy scalars/arrays, dataclasses, processes)."""
    if isinstance(obj, AdaptedProcess):
        return obj.to_dict()
    if isinstance(obj, RandomVariable):
        return {"time_index": obj.time_index, "values": obj.to_list()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        to_dict = getattr(obj, "to_dict", None)
        if callable(to_dict):
            return to_jsonable(to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def build_report(command: str, config: dict[str, Any], seed: int, body: dict[str, Any]) -> dict[str, Any]:
    return {"header": report_header(config, seed), "command": command, "body": to_jsonable(body)}


def dumps_report(report: dict[str, Any]) -> str:
    """Byte-stable JSON: sorted keys, fixed separators."""
    return json.dumps(report, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def write_report(report: dict[str, Any], path: Union[str, Path, None], stream: Optional[TextIO] = None) -> None:
    text = dumps_report(report)
    if path is None:
        if stream is not None:
            stream.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def process_csv(Y: AdaptedProcess) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for k, node, value in Y.rows():
        writer.writerow((k, node, repr(float(value))))
    return buf.getvalue()


def write_process_csv(Y: AdaptedProcess, path: Union[str, Path]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(process_csv(Y), encoding="utf-8")
    return p


def _flatten(prefix: str, value: Any, out: list[str]) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    elif isinstance(value, list) and len(value) > 8:
        out.append(f"{prefix}: [{len(value)} items]")
    else:
        out.append(f"{prefix}: {value}")


def text_summary(report: dict[str, Any]) -> str:
    """Human-readable lines: header then body leaves (long lists elided)."""
    header = report["header"]
    lines = [
        f"geval {header['version']} - {report['command']}",
        f"seed {header['seed']}  config {header['config_hash'][:12]}",
    ]
    body_lines: list[str] = []
    _flatten("", report.get("body", {}), body_lines)
    lines.extend("  " + line for line in body_lines)
    return "\n".join(lines) + "\n"
