import json

import pytest

import nbtest


@pytest.fixture
def events(monkeypatch):
    """Capture emitted events as parsed dicts via an in-process sink."""
    collected = []
    nbtest.set_sink(lambda line: collected.append(json.loads(line)))
    yield collected
    nbtest.set_sink(None)


@pytest.fixture
def asserts_on(monkeypatch):
    monkeypatch.setenv("NBTEST_ASSERTS", "1")
