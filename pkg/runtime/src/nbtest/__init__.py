"""Notebook-side runtime: value probes and tolerance assertions.

Instrumented and generated notebooks import this module. Everything in
here is observational by design: probes summarize values onto an event
stream and hand them back untouched, assertions evaluate only when
NBTEST_ASSERTS is switched on, and no call ever raises into user code.
A notebook that imports nbtest but never enables it behaves exactly as
if the import were absent.
"""

import json
import math
import os
import random
import sys
import warnings

import numpy as np

__version__ = "0.1.0"

_TRUTHY = {"1", "true", "yes", "on"}

# mirrored by the generator's catalog; stripped from model hyperparams
_SEED_PARAM_NAMES = {"random_state", "seed", "random_seed"}

_sink = None


def set_sink(fn) -> None:
    """Route events to ``fn(line)`` instead of NBTEST_EVENT_PATH."""
    global _sink
    _sink = fn


def _emit(event: dict) -> None:
    try:
        line = json.dumps(event, allow_nan=False)
    except (TypeError, ValueError):
        return
    if _sink is not None:
        try:
            _sink(line)
        except Exception:
            pass
        return
    path = os.environ.get("NBTEST_EVENT_PATH")
    if not path:
        return
    try:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    except OSError:
        pass


def _asserts_on() -> bool:
    return os.environ.get("NBTEST_ASSERTS", "").strip().lower() in _TRUTHY


def _jsonable(v):
    """Fold a value into JSON-safe shape: numpy scalars to Python, tuples
    to lists, non-finite floats to None, everything else to repr."""
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, str)) or v is None:
        return v
    if isinstance(v, float):
        # np.float64 passes isinstance(v, float); coerce to the plain type
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return repr(v)


def _in_mro(value, module_prefix: str, class_name=None) -> bool:
    for cls in type(value).__mro__:
        mod = cls.__module__ or ""
        if mod == module_prefix or mod.startswith(module_prefix + "."):
            if class_name is None or cls.__name__ == class_name:
                return True
    return False


def _nan_stats(values) -> tuple:
    """(mean, variance) over an array, NaN-skipping, population variance.
    None for empty or all-NaN input."""
    arr = np.asarray(values, dtype="float64")
    if arr.size == 0:
        return None, None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # all-NaN slices warn
        mean = np.nanmean(arr)
        var = np.nanvar(arr)
    return (
        float(mean) if math.isfinite(mean) else None,
        float(var) if math.isfinite(var) else None,
    )


def _summarize_table(df) -> dict:
    numeric = df.select_dtypes(include="number")
    if numeric.shape[1]:
        mean, var = _nan_stats(numeric.to_numpy(dtype="float64"))
    else:
        mean, var = None, None
    return {
        "shape": [int(x) for x in df.shape],
        "column_names": [str(c) for c in df.columns],
        "column_types": [str(t) for t in df.dtypes],
        "numeric_mean": mean,
        "numeric_variance": var,
    }


def _to_ndarray(value) -> np.ndarray:
    if isinstance(value, np.ndarray):
        return value
    if _in_mro(value, "torch", "Tensor"):
        return value.detach().cpu().numpy()
    return np.asarray(value)


def _summarize_array(value) -> dict:
    arr = _to_ndarray(value)
    shape = [int(x) for x in arr.shape]
    try:
        mean, var = _nan_stats(arr)
    except (TypeError, ValueError):
        mean, var = None, None
    return {"shape": shape, "mean": mean, "variance": var}


def _torch_layers(module) -> list:
    children = list(module.children()) or [module]
    out = []
    for child in children:
        params = sum(int(p.numel()) for p in child.parameters())
        out.append([type(child).__name__, None, params])
    return out


def _keras_layers(model) -> list:
    out = []
    for layer in model.layers:
        try:
            shape = _jsonable(list(layer.output.shape))
        except Exception:
            shape = None
        try:
            params = int(layer.count_params())
        except Exception:
            params = 0
        out.append([type(layer).__name__, shape, params])
    return out


def _summarize_model(value) -> dict:
    if _in_mro(value, "torch.nn", "Module"):
        return {"layers": _torch_layers(value), "hyperparams": {}}
    if _is_keras_model(value):
        return {"layers": _keras_layers(value), "hyperparams": {}}
    params = {}
    try:
        raw = value.get_params(deep=False)
    except Exception:
        raw = {}
    for key in sorted(raw):
        if key in _SEED_PARAM_NAMES:
            continue
        params[key] = _jsonable(raw[key])
    return {"layers": [[type(value).__name__, None, 0]], "hyperparams": params}


def _is_keras_model(value) -> bool:
    if not hasattr(value, "layers"):
        return False
    return any("keras" in (cls.__module__ or "") for cls in type(value).__mro__)


def _is_model(value) -> bool:
    if _in_mro(value, "torch.nn", "Module") or _is_keras_model(value):
        return True
    return _in_mro(value, "sklearn") and hasattr(value, "get_params")


def summarize(value) -> tuple:
    """(variant, payload) for a probed value. Never raises: summarization
    failures come back as the error variant."""
    try:
        if _in_mro(value, "pandas", "DataFrame"):
            return "table", _summarize_table(value)
        if _in_mro(value, "pandas", "Series"):
            return "array", _summarize_array(value)
        if isinstance(value, np.ndarray) or _in_mro(value, "torch", "Tensor"):
            return "array", _summarize_array(value)
        if _is_model(value):
            return "model", _summarize_model(value)
        return "scalar", {"value": _jsonable(value)}
    except Exception as exc:
        return "error", {"message": f"{type(exc).__name__}: {exc}"}


def probe(property_id: str, property_kind: str, value):
    """Record a summary of ``value`` and return it unchanged, so probes can
    wrap expressions in place."""
    try:
        variant, payload = summarize(value)
        _emit({"ev": "probe", "id": property_id, "kind": variant, "payload": payload})
    except Exception:
        pass
    return value


def seed_all(seed: int) -> None:
    """Seed the RNG families a notebook commonly touches. torch/tensorflow
    are only seeded when already imported; explicit seed calls inside the
    notebook are rewritten by the generator instead."""
    seed = int(seed)
    random.seed(seed)
    np.random.seed(seed % 2**32)
    if "torch" in sys.modules:
        try:
            sys.modules["torch"].manual_seed(seed)
        except Exception:
            pass
    if "tensorflow" in sys.modules:
        try:
            sys.modules["tensorflow"].random.set_seed(seed)
        except Exception:
            pass


def _report(test_id: str, ok: bool, msg: str) -> None:
    _emit({
        "ev": "assert",
        "test_id": test_id,
        "status": "pass" if ok else "fail",
        "msg": None if ok else msg,
    })


def _report_error(test_id: str, exc: BaseException) -> None:
    _emit({
        "ev": "assert",
        "test_id": test_id,
        "status": "error",
        "msg": f"{type(exc).__name__}: {exc}",
    })


def assert_allclose(actual, expected, atol=0.0, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        ok = abs(float(actual) - float(expected)) <= float(atol)
        _report(test_id, ok, f"{actual!r} is not within {atol!r} of {expected!r}")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_equal(actual, expected, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        ok = _jsonable(actual) == expected
        _report(test_id, ok, f"{actual!r} != {expected!r}")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_true(value, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        _report(test_id, bool(value), f"{value!r} is not true")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_false(value, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        _report(test_id, not bool(value), f"{value!r} is not false")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_shape(value, expected, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        actual = tuple(int(x) for x in value.shape)
        ok = actual == tuple(expected)
        _report(test_id, ok, f"shape {actual!r} != {tuple(expected)!r}")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_column_names(df, expected, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        actual = [str(c) for c in df.columns]
        _report(test_id, actual == list(expected), f"columns {actual!r} != {list(expected)!r}")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_column_types(df, expected, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        actual = [str(t) for t in df.dtypes]
        _report(test_id, actual == list(expected), f"dtypes {actual!r} != {list(expected)!r}")
    except Exception as exc:
        _report_error(test_id, exc)


def _numeric_summary(value) -> tuple:
    variant, payload = summarize(value)
    if variant == "table":
        return payload["numeric_mean"], payload["numeric_variance"]
    if variant == "array":
        return payload["mean"], payload["variance"]
    raise TypeError(f"no numeric summary for {type(value).__name__}")


def assert_df_mean(value, expected, atol=0.0, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        mean, _ = _numeric_summary(value)
        ok = abs(float(mean) - float(expected)) <= float(atol)
        _report(test_id, ok, f"mean {mean!r} is not within {atol!r} of {expected!r}")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_df_var(value, expected, atol=0.0, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        _, var = _numeric_summary(value)
        ok = abs(float(var) - float(expected)) <= float(atol)
        _report(test_id, ok, f"variance {var!r} is not within {atol!r} of {expected!r}")
    except Exception as exc:
        _report_error(test_id, exc)


def assert_model_layers(model, expected, test_id: str = "") -> None:
    if not _asserts_on():
        return
    try:
        variant, payload = summarize(model)
        if variant != "model":
            raise TypeError(f"{type(model).__name__} is not a model")
        actual = payload["layers"]
        _report(test_id, actual == expected, f"layers {actual!r} != {expected!r}")
    except Exception as exc:
        _report_error(test_id, exc)
