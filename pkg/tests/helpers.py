"""Notebook builders and protocol stubs shared across the test modules.

Kept out of conftest.py so tests can import them by a stable module name.
"""

import json
import sys
import textwrap
from pathlib import Path

from nbtestkit.notebook import Notebook, parse_notebook


def nb_json(sources, minor=5) -> str:
    """sources: list of (cell_type, source_str_or_list)."""
    cells = []
    for kind, src in sources:
        cell = {"cell_type": kind, "metadata": {}, "source": src}
        if kind == "code":
            cell["outputs"] = []
            cell["execution_count"] = None
        cells.append(cell)
    return json.dumps(
        {"nbformat": 4, "nbformat_minor": minor, "metadata": {}, "cells": cells}
    )


def make_nb(sources, minor=5) -> Notebook:
    return parse_notebook(nb_json(sources, minor=minor))


def code_nb(*sources) -> Notebook:
    return make_nb([("code", s) for s in sources])


SIX_CELL_SOURCES = [
    (
        "code",
        "import pandas as pd\n"
        "from sklearn.model_selection import train_test_split\n"
        "from sklearn.linear_model import LogisticRegression\n"
        "from sklearn.metrics import accuracy_score\n"
        "import numpy as np",
    ),
    ("code", 'df = pd.read_csv("train.csv")'),
    ("markdown", "## Split\nhold out a fifth for testing"),
    (
        "code",
        "X_train, X_test, y_train, y_test = train_test_split(\n"
        '    df[["a", "b"]], df["y"], test_size=0.2, random_state=42\n'
        ")",
    ),
    (
        "code",
        "np.random.seed(7)\n"
        "model = LogisticRegression(max_iter=200)\n"
        "model.fit(X_train, y_train)",
    ),
    (
        "code",
        "preds = model.predict(X_test)\n"
        "print(accuracy_score(y_test, preds))\n"
        "(preds == y_test).mean()",
    ),
]


def write_stub(tmp_path: Path, name: str, body: str) -> list:
    path = tmp_path / name
    path.write_text(textwrap.dedent(body), encoding="utf-8")
    return [sys.executable, str(path)]
