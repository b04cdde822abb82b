"""Report envelope and serializers shared by the CLI commands."""

from __future__ import annotations

import csv
import io
import json
import time
from typing import Any, Sequence

from . import __version__
from .constants import constants_table


def make_report(command: str, inputs: dict, outputs: dict) -> dict:
    return {
        "command": command,
        "inputs": inputs,
        "outputs": outputs,
        "versions": {"toolkit": __version__, "constants": constants_table().fingerprint()},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def _default(obj: Any):
    if isinstance(obj, tuple):
        return list(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    # numpy scalars
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def to_json(report: dict) -> str:
    # float repr round-trips; ints stay exact
    return json.dumps(report, indent=2, default=_default, allow_nan=True)


def sci4(x: float) -> str:
    """Four significant digits in ``3.969e9`` style."""
    mant, exp = f"{x:.3e}".split("e")
    return f"{mant}e{int(exp)}"


def table_csv(row_labels: Sequence[str], col_labels: Sequence[str], cells: Sequence[Sequence[float]], corner: str = "est") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([corner, *col_labels])
    for label, row in zip(row_labels, cells):
        w.writerow([label, *(sci4(v) for v in row)])
    return buf.getvalue()
