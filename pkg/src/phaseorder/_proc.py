"""Subprocess execution with hard wall-clock limits.

Children run in their own session so that a timeout kills the whole process
group, including grandchildren spawned by wrapper scripts.
"""

from __future__ import annotations

import os
import signal
import subprocess
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

# Upper bound on the time between the deadline and the child being reaped.
KILL_GRACE = 0.5


@dataclass
class ProcResult:
    argv: list[str]
    returncode: int | None
    stdout: str
    stderr: str
    elapsed: float
    timed_out: bool = False

    @property
    def ok(self) -> bool:
        return not self.timed_out and self.returncode == 0


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def run(
    argv: Sequence[str],
    timeout: float | None,
    cwd: str | os.PathLike | None = None,
    env: Mapping[str, str] | None = None,
) -> ProcResult:
    argv = [str(a) for a in argv]
    t0 = time.monotonic()
    proc = subprocess.Popen(
        argv,
        cwd=cwd,
        env=dict(env) if env is not None else None,
        stdin=subprocess.DEVNULL,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        errors="replace",
        start_new_session=True,
    )
    try:
        out, err = proc.communicate(timeout=timeout)
        timed_out = False
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        try:
            out, err = proc.communicate(timeout=KILL_GRACE)
        except subprocess.TimeoutExpired:
            # A grandchild escaped the group and still holds the pipes.
            proc.kill()
            out, err = "", ""
            proc.wait()
        timed_out = True
    return ProcResult(argv, proc.returncode, out or "", err or "", time.monotonic() - t0, timed_out)


def excerpt(text: str, limit: int = 2000) -> str:
    text = text.strip()
    return text if len(text) <= limit else "..." + text[-limit:]
