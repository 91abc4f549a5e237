"""Execute a notebook file cell by cell, streaming runtime events.

Usage: python -m nbtest.driver notebook.ipynb

Events go to the real stdout one JSON object per line; whatever the
notebook prints is swallowed so it cannot corrupt the stream. Cell
errors are reported and execution continues with the next cell, the
way notebook UIs behave. Exit status is 0 only when every cell ran
clean.
"""

import io
import json
import os
import re
import sys

import nbtest

_MAGIC = re.compile(r"^\s*(%|!)")


def mask_magics(source: str) -> str:
    # line count preserved so tracebacks still point at the right cell line
    lines = source.split("\n")
    return "\n".join("# " + l if _MAGIC.match(l) else l for l in lines)


def run(nb_path: str) -> int:
    with open(nb_path, encoding="utf-8") as fh:
        doc = json.load(fh)

    real_stdout = sys.stdout

    def emit_line(line: str) -> None:
        real_stdout.write(line + "\n")
        real_stdout.flush()

    nbtest.set_sink(emit_line)

    seed = os.environ.get("NBTEST_SEED")
    if seed:
        try:
            nbtest.seed_all(int(seed))
        except ValueError:
            pass

    namespace = {"__name__": "__main__"}
    failed = False
    sys.stdout = io.StringIO()
    try:
        for index, cell in enumerate(doc.get("cells", [])):
            if cell.get("cell_type") != "code":
                continue
            source = cell.get("source", "")
            if isinstance(source, list):
                source = "".join(source)
            nbtest._emit({"ev": "cell_start", "cell": index})
            try:
                code = compile(mask_magics(source), f"<cell {index}>", "exec")
                exec(code, namespace)
            except BaseException as exc:
                failed = True
                nbtest._emit({
                    "ev": "cell_error",
                    "cell": index,
                    "msg": f"{type(exc).__name__}: {exc}",
                })
    finally:
        sys.stdout = real_stdout
        nbtest._emit({"ev": "done"})
    return 1 if failed else 0


def main(argv=None) -> int:
    argv = sys.argv if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m nbtest.driver <notebook.ipynb>", file=sys.stderr)
        return 2
    return run(argv[1])


if __name__ == "__main__":
    sys.exit(main())
