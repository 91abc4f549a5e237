"""Subprocess plumbing for driver and CLI tests."""

import json
import os
import shutil
import subprocess
import sys
from pathlib import Path


def make_nb_file(path: Path, *sources: str) -> Path:
    doc = {
        "cells": [
            {"cell_type": "code", "source": s, "metadata": {}} for s in sources
        ],
        "metadata": {},
        "nbformat": 4,
        "nbformat_minor": 5,
    }
    path.write_text(json.dumps(doc))
    return path


def run_driver(nb_path: Path, env_extra: dict = None) -> tuple:
    """(exit_code, events, stderr) from a driver subprocess."""
    env = {k: v for k, v in os.environ.items() if not k.startswith("NBTEST_")}
    env.update(env_extra or {})
    proc = subprocess.run(
        [sys.executable, "-m", "nbtest.driver", str(nb_path)],
        capture_output=True, text=True, env=env, timeout=120,
    )
    events = [json.loads(l) for l in proc.stdout.splitlines() if l.strip()]
    return proc.returncode, events, proc.stderr


NBTEST_CLI = shutil.which("nbtest")


def run_cli(args: list, cwd: Path) -> subprocess.CompletedProcess:
    assert NBTEST_CLI, "nbtest console script not on PATH"
    return subprocess.run(
        [NBTEST_CLI, *args], cwd=cwd, capture_output=True, text=True, timeout=590,
    )
