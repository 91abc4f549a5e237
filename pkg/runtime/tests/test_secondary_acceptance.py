"""End-to-end acceptance for the notebook runtime.

Drives the installed nbtest CLI against three small but real ML
notebooks: generate assertions, re-run them, and score mutants. Each
test prints one PASS/FAIL line. Generation artifacts are shared
session-wide because N=30 torch runs are the expensive part.
"""

import json
import os
import re
import subprocess
import sys
import time

import numpy as np
import pytest

from support import make_nb_file, run_cli


MUTANT_LINE = re.compile(r"^\s+(\S+)\s+(killed|survived)\s+kill_fraction=([\d.]+)", re.M)
KINDS_LINE = re.compile(r"kills by property kind: (.+)")


def parse_mutants(out: str) -> dict:
    return {
        m.group(1): (m.group(2), float(m.group(3)))
        for m in MUTANT_LINE.finditer(out)
    }


def parse_kinds(out: str) -> dict:
    m = KINDS_LINE.search(out)
    if not m:
        return {}
    return {
        k: int(v) for k, v in
        (part.split("=") for part in m.group(1).strip().split(", "))
    }


def report(capsys, num: int, label: str, failures: list):
    status = "PASS" if not failures else "FAIL"
    with capsys.disabled():
        print(f"[secondary {num}] {label}: {status}")
    assert not failures, f"secondary criterion {num}: " + "; ".join(failures)


def check(failures: list, ok: bool, detail: str):
    if not ok:
        failures.append(detail)


@pytest.fixture(scope="session")
def timings():
    return {}


def gen_notebook(workdir, name, timings) -> None:
    t0 = time.perf_counter()
    proc = run_cli(["gen", f"{name}.ipynb", "--iterations", "30"], cwd=workdir)
    timings[f"{name}_gen"] = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr + proc.stdout
    assert (workdir / f"{name}.nbtest.ipynb").exists()


@pytest.fixture(scope="session")
def toy_classifier(tmp_path_factory, timings):
    """150-row CSV, logistic regression, library and hand-rolled accuracy."""
    workdir = tmp_path_factory.mktemp("clf")
    rng = np.random.default_rng(42)
    n = 150
    feats = {f"f{i}": rng.normal(0, 1, n) for i in range(1, 10)}
    score = feats["f1"] + 0.5 * feats["f2"] - 0.25 * feats["f3"]
    label = (score + rng.normal(0, 0.4, n) > 0).astype(int)
    cols = list(feats) + ["label"]
    rows = [",".join(cols)]
    for i in range(n):
        rows.append(",".join(f"{feats[c][i]:.4f}" for c in feats) + f",{label[i]}")
    (workdir / "train.csv").write_text("\n".join(rows) + "\n")

    make_nb_file(
        workdir / "clf.ipynb",
        "import pandas as pd\n"
        "from sklearn.linear_model import LogisticRegression\n"
        "from sklearn.metrics import accuracy_score\n"
        "from sklearn.model_selection import train_test_split",
        "df = pd.read_csv('train.csv')",
        "features = [c for c in df.columns if c != 'label']\n"
        "X_train, X_test, y_train, y_test = train_test_split(df[features], df['label'], random_state=0)",
        "model = LogisticRegression(max_iter=500)\nmodel.fit(X_train, y_train)",
        "y_pred = model.predict(X_test)\n"
        "acc = accuracy_score(y_test, y_pred)\n"
        "print(acc)\n"
        "manual_acc = (y_pred == y_test.values).mean()",
    )
    gen_notebook(workdir, "clf", timings)
    return workdir


@pytest.fixture(scope="session")
def toy_torch(tmp_path_factory, timings):
    """Tiny torch regression with a Sequential the mutator can thin out."""
    workdir = tmp_path_factory.mktemp("reg")
    rng = np.random.default_rng(7)
    x = rng.uniform(-2, 2, 80)
    y = 2.0 * x + 1.0 + rng.normal(0, 0.1, 80)
    (workdir / "points.csv").write_text(
        "x,y\n" + "\n".join(f"{a:.5f},{b:.5f}" for a, b in zip(x, y)) + "\n"
    )

    make_nb_file(
        workdir / "reg.ipynb",
        "import pandas as pd\nimport torch\nfrom torch import nn\n"
        "from sklearn.metrics import mean_squared_error",
        "torch.manual_seed(0)",
        "df = pd.read_csv('points.csv')",
        "X = torch.tensor(df[['x']].values, dtype=torch.float32)\n"
        "y = torch.tensor(df[['y']].values, dtype=torch.float32)",
        "model = nn.Sequential(nn.Linear(1, 8), nn.ReLU(), nn.Dropout(p=0.1), nn.Linear(8, 1))",
        "opt = torch.optim.SGD(model.parameters(), lr=0.05)\n"
        "loss_fn = nn.MSELoss()\n"
        "for epoch in range(60):\n"
        "    opt.zero_grad()\n"
        "    loss = loss_fn(model(X), y)\n"
        "    loss.backward()\n"
        "    opt.step()",
        "model.eval()\n"
        "preds = model(X).detach().numpy()\n"
        "mse = mean_squared_error(y.numpy(), preds)\n"
        "print(mse)",
    )
    gen_notebook(workdir, "reg", timings)
    return workdir


@pytest.fixture(scope="session")
def toy_metric_only(tmp_path_factory, timings):
    """No training at all: fixed predictions, fully deterministic."""
    workdir = tmp_path_factory.mktemp("metric")
    rng = np.random.default_rng(3)
    y_true = rng.integers(0, 2, 60)
    flip = rng.random(60) < 0.15
    y_pred = np.where(flip, 1 - y_true, y_true)
    (workdir / "preds.csv").write_text(
        "y_true,y_pred\n" + "\n".join(f"{a},{b}" for a, b in zip(y_true, y_pred)) + "\n"
    )

    make_nb_file(
        workdir / "metric.ipynb",
        "import pandas as pd\nfrom sklearn.metrics import accuracy_score",
        "df = pd.read_csv('preds.csv')",
        "acc = accuracy_score(df['y_true'], df['y_pred'])\nprint(acc)",
    )
    gen_notebook(workdir, "metric", timings)
    return workdir


def run_generated(workdir, name) -> dict:
    report_path = workdir / f"{name}.report.json"
    proc = run_cli(
        ["run", f"{name}.nbtest.ipynb", "--runs", "30",
         "--format", "json", "--report", report_path.name],
        cwd=workdir,
    )
    data = json.loads(report_path.read_text())
    data["_exit"] = proc.returncode
    return data


def table_property_counts(manifest: dict) -> dict:
    """property_id -> sorted assertion kinds, for table-shaped properties."""
    by_prop = {}
    for spec in manifest["assertions"]:
        by_prop.setdefault(spec["property_id"], []).append(spec["kind"])
    return {
        pid: sorted(kinds) for pid, kinds in by_prop.items()
        if "ColumnNames" in kinds
    }


TABLE_BUNDLE = sorted(["Shape", "ColumnNames", "ColumnTypes", "DfMean", "DfVar"])


def test_secondary_1_end_to_end(
    toy_classifier, toy_torch, toy_metric_only, timings, capsys
):
    failures = []
    for workdir, name, table_props in [
        (toy_classifier, "clf", 3),   # df, X_train, X_test
        (toy_torch, "reg", 1),        # df
        (toy_metric_only, "metric", 1),
    ]:
        t0 = time.perf_counter()
        data = run_generated(workdir, name)
        timings[f"{name}_run"] = time.perf_counter() - t0

        check(failures, data["_exit"] == 0, f"{name}: run exit {data['_exit']}")
        summary = data["summary"]
        check(failures, summary["passed"] == summary["total"] and summary["total"] > 0,
              f"{name}: {summary['passed']}/{summary['total']} passed")
        rates = {a["test_id"]: a["pass_rate"] for a in data["assertions"]}
        check(failures, all(r == 1.0 for r in rates.values()),
              f"{name}: pass rates {rates}")

        manifest = json.loads((workdir / f"{name}.nbtest.json").read_text())
        tables = table_property_counts(manifest)
        check(failures, len(tables) == table_props,
              f"{name}: {len(tables)} table properties, wanted {table_props}")
        for pid, kinds in tables.items():
            check(failures, kinds == TABLE_BUNDLE,
                  f"{name}: {pid} has bundle {kinds}")

    manifest = json.loads((toy_metric_only / "metric.nbtest.json").read_text())
    atols = {s["atol"] for s in manifest["assertions"]}
    check(failures, atols <= {None, 0.0},
          f"metric-only notebook should be exact, atols {atols}")

    total = sum(timings.values())
    check(failures, total < 600, f"gen+run took {total:.0f}s, budget 600s")
    report(capsys, 1, "three notebooks generate and re-run clean", failures)


def test_secondary_2_data_mutants_killed(toy_classifier, capsys):
    failures = []
    proc = run_cli(
        ["mutate", "clf.nbtest.ipynb", "--runs", "10",
         "--manifest", "clf.nbtest.json", "--operators", "AddNulls,AddOutliers"],
        cwd=toy_classifier,
    )
    check(failures, proc.returncode == 0, f"mutate exit {proc.returncode}: {proc.stderr}")
    mutants = parse_mutants(proc.stdout)
    for mid in ("AddNulls-0", "AddOutliers-0"):
        outcome, fraction = mutants.get(mid, ("missing", 0.0))
        check(failures, outcome == "killed" and fraction >= 0.9,
              f"{mid}: {outcome} kill_fraction={fraction}")
    kinds = parse_kinds(proc.stdout)
    check(failures, kinds.get("Dataset", 0) >= 18,
          f"Dataset assertions killed {kinds.get('Dataset', 0)}/20 runs")
    report(capsys, 2, "data corruption killed by dataset assertions", failures)


def test_secondary_3_layer_removal_killed(toy_torch, capsys):
    failures = []
    proc = run_cli(
        ["mutate", "reg.nbtest.ipynb", "--runs", "5",
         "--manifest", "reg.nbtest.json", "--operators", "RemoveLayers"],
        cwd=toy_torch,
    )
    check(failures, proc.returncode == 0, f"mutate exit {proc.returncode}: {proc.stderr}")
    mutants = parse_mutants(proc.stdout)
    check(failures, len(mutants) == 2, f"expected ReLU and Dropout mutants, got {mutants}")
    for mid, (outcome, fraction) in mutants.items():
        check(failures, outcome == "killed" and fraction == 1.0,
              f"{mid}: {outcome} kill_fraction={fraction}")
    kinds = parse_kinds(proc.stdout)
    check(failures, kinds.get("ModelArch", 0) == 5 * len(mutants),
          f"layer assertions killed {kinds.get('ModelArch', 0)} of {5 * len(mutants)} runs")
    report(capsys, 3, "layer removal killed by architecture assertions", failures)


def test_secondary_4_seed_change_survives(toy_classifier, capsys):
    failures = []
    proc = run_cli(
        ["mutate", "clf.nbtest.ipynb", "--runs", "10",
         "--manifest", "clf.nbtest.json", "--operators", "ModifyHyperparams"],
        cwd=toy_classifier,
    )
    check(failures, proc.returncode == 0, f"mutate exit {proc.returncode}: {proc.stderr}")
    mutants = parse_mutants(proc.stdout)
    seed_only = [m for m in mutants if m.startswith("ModifyHyperparams")]
    check(failures, len(seed_only) >= 1, f"no hyperparameter mutants in {mutants}")
    # random_state is the only literal kwarg the splitter carries, so the
    # first mutant is a pure seed change and the bands must absorb it
    outcome, fraction = mutants[seed_only[0]]
    check(failures, outcome == "survived" and fraction == 0.0,
          f"{seed_only[0]}: {outcome} kill_fraction={fraction}")
    report(capsys, 4, "seed-only hyperparameter change survives", failures)


SENTINEL_BODY = """
import random
import numpy as np
random.seed(5)
np.random.seed(5)
vals = [random.random() for _ in range(3)] + [float(np.random.random())]
total = sum(vals) * 3.5
{extra}
print(repr(vals))
print(repr(total))
print(repr(random.random()))
"""

NBTEST_EXTRA = """
import nbtest
total = nbtest.probe('p0', 'ModelPerf', total)
nbtest.assert_allclose(total, 0.0, atol=0.0, test_id='0_0')
nbtest.assert_true(False, test_id='0_1')
nbtest.assert_model_layers(total, [], test_id='0_2')
"""


def test_secondary_5_noop_when_disabled(tmp_path, capsys):
    failures = []
    plain = tmp_path / "plain.py"
    wrapped = tmp_path / "wrapped.py"
    plain.write_text(SENTINEL_BODY.format(extra=""))
    wrapped.write_text(SENTINEL_BODY.format(extra=NBTEST_EXTRA))

    env = {k: v for k, v in os.environ.items() if not k.startswith("NBTEST_")}
    outs = []
    for script in (plain, wrapped):
        proc = subprocess.run(
            [sys.executable, str(script)], capture_output=True, text=True, env=env,
        )
        check(failures, proc.returncode == 0, f"{script.name} exit {proc.returncode}")
        outs.append(proc.stdout)
    check(failures, outs[0] == outs[1],
          f"outputs diverge:\n{outs[0]!r}\nvs\n{outs[1]!r}")
    report(capsys, 5, "disabled runtime is observationally absent", failures)
