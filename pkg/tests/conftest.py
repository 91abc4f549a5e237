import pytest

from nbtestkit.notebook import Notebook

from helpers import SIX_CELL_SOURCES, make_nb, write_stub


@pytest.fixture
def six_cell_nb() -> Notebook:
    return make_nb(SIX_CELL_SOURCES)


@pytest.fixture(scope="session")
def catalog():
    from nbtestkit.catalog import load_catalog

    return load_catalog()


# ---------------------------------------------------------------------------
# stub executors: tiny scripts that speak the event protocol


@pytest.fixture
def ok_executor(tmp_path):
    """Emits one scalar probe per property id listed in probe_ids.txt (or p0),
    with the run seed as the value, then a passing assert and done."""
    return write_stub(
        tmp_path,
        "ok_exec.py",
        '''
        import json, os, sys
        seed = int(os.environ.get("NBTEST_SEED", "0"))
        print(json.dumps({"ev": "cell_start", "cell": 0}))
        ids = ["p0"]
        if os.path.exists("probe_ids.txt"):
            ids = open("probe_ids.txt").read().split()
        for pid in ids:
            print(json.dumps({"ev": "probe", "id": pid, "kind": "ModelPerf",
                              "payload": {"value": float(seed)}}))
        if os.environ.get("NBTEST_ASSERTS") == "1":
            print(json.dumps({"ev": "assert", "test_id": "0_0", "status": "pass", "msg": None}))
        with open("ran.txt", "w") as f:
            f.write(str(seed))
        print(json.dumps({"ev": "done"}))
        ''',
    )


@pytest.fixture
def sleepy_executor(tmp_path):
    return write_stub(
        tmp_path,
        "sleepy_exec.py",
        """
        import time
        time.sleep(120)
        """,
    )


@pytest.fixture
def noisy_executor(tmp_path):
    return write_stub(
        tmp_path,
        "noisy_exec.py",
        """
        print("this is not an event")
        """,
    )


@pytest.fixture
def cell_error_executor(tmp_path):
    return write_stub(
        tmp_path,
        "cell_error_exec.py",
        '''
        import json
        print(json.dumps({"ev": "cell_start", "cell": 0}))
        print(json.dumps({"ev": "assert", "test_id": "0_0", "status": "pass", "msg": None}))
        print(json.dumps({"ev": "cell_start", "cell": 1}))
        print(json.dumps({"ev": "cell_error", "cell": 1, "msg": "NameError: nope"}))
        print(json.dumps({"ev": "done"}))
        ''',
    )


@pytest.fixture
def no_done_executor(tmp_path):
    return write_stub(
        tmp_path,
        "no_done_exec.py",
        '''
        import json
        print(json.dumps({"ev": "cell_start", "cell": 0}))
        ''',
    )
