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
geval - batch entry point

Sets UTF-8 streams, keeps a crash log under logs/ (faulthandler plus the
traceback of any uncaught exception) and maps SIGINT/SIGTERM to 128 + signum
before handing the arguments to Core.cli.
"""

import faulthandler
import os
import platform
import signal
import sys
import traceback
from pathlib import Path
from typing import Optional, TextIO

ROOT_DIR = Path(__file__).resolve().parent
if str(ROOT_DIR) not in sys.path[:1]:
    sys.path.insert(0, str(ROOT_DIR))

from Core.cli import main as cli_main  # noqa: E402
from Core.errors import EXIT_NUMERICAL_ERROR  # noqa: E402

CRASH_LOG = ROOT_DIR / "logs" / "crash.log"

_crash_stream: Optional[TextIO] = None


def _utf8_streams() -> None:
    os.environ.setdefault("PYTHONUTF8", "1")
    os.environ.setdefault("PYTHONIOENCODING", "utf-8")
    for stream in (sys.stdout, sys.stderr):
        try:
            stream.reconfigure(encoding="utf-8", errors="replace")  # type: ignore[union-attr]
        except (AttributeError, ValueError):
            pass


def _open_crash_log() -> None:
    global _crash_stream
    try:
        CRASH_LOG.parent.mkdir(parents=True, exist_ok=True)
        _crash_stream = open(CRASH_LOG, "a", encoding="utf-8", errors="ignore")
        faulthandler.enable(_crash_stream)
    except OSError:
        faulthandler.enable()


def _excepthook(etype, value, tb) -> None:
    text = (
        f"\n--- geval crash ({platform.platform()}, Python {platform.python_version()}) ---\n"
        + "".join(traceback.format_exception(etype, value, tb))
    )
    sys.__stderr__.write(text)
    if _crash_stream is not None:
        _crash_stream.write(text)
        _crash_stream.flush()
    # uncaught errors count as numerical failures for the exit code
    os._exit(EXIT_NUMERICAL_ERROR)


def _on_signal(signum, _frame) -> None:
    sys.exit(128 + int(signum))


def run(argv: list[str]) -> int:
    _utf8_streams()
    _open_crash_log()
    sys.excepthook = _excepthook
    for name in ("SIGINT", "SIGTERM"):
        sig = getattr(signal, name, None)
        if sig is not None:
            signal.signal(sig, _on_signal)
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
