"""Report emission: line-delimited JSON records and a CSV trend table.

Payloads hold the resolved config, seed, records and per-trial rows, never
wall-clock data, so identical runs produce identical bytes.  The timestamp
only appears in file names.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .experiments import RunReport

OUT_ENV = "QLCLAB_OUT"
CSV_COLUMNS = ("n", "metric", "value", "stderr", "seed")


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _line(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False)


def records_text(rep: RunReport) -> str:
    lines = [_line({"type": "header", "command": rep.command, "seed": rep.seed,
                    "config": rep.config})]
    lines += [_line(dict(r, type="record")) for r in rep.records]
    lines += [_line(dict(r, type="row")) for r in rep.rows]
    return "\n".join(lines) + "\n"


def csv_text(rep: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for n, metric, value, stderr in rep.trend_rows():
        w.writerow([n, metric, repr(float(value)), "" if stderr == "" else repr(float(stderr)), rep.seed])
    return buf.getvalue()


def summary_text(rep: RunReport) -> str:
    out = [f"{rep.command} (seed {rep.seed})"]
    for r in rep.records:
        parts = []
        for k, v in r.items():
            if isinstance(v, float):
                parts.append(f"{k}={v:.6g}")
            elif isinstance(v, (int, str, bool)) or v is None:
                parts.append(f"{k}={v}")
        out.append("  " + " ".join(parts))
    return "\n".join(out) + "\n"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "reports"))


def write_report(rep: RunReport, out_dir: Optional[os.PathLike] = None,
                 stamp: Optional[str] = None) -> Tuple[Path, Path]:
    """Write ``<command>-<timestamp>-<seed>.jsonl`` and ``.csv``; return both paths."""
    d = Path(out_dir) if out_dir is not None else default_out_dir()
    d.mkdir(parents=True, exist_ok=True)
    stamp = stamp or time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    base = d / f"{rep.command}-{stamp}-{rep.seed}"
    jpath, cpath = base.with_suffix(".jsonl"), base.with_suffix(".csv")
    jpath.write_text(records_text(rep))
    cpath.write_text(csv_text(rep))
    return jpath, cpath
