"""CSV / JSON / NDJSON emission with lossless floats.

Every float is written with 17 significant digits, which round-trips any
IEEE double exactly. CSV files are UTF-8, comma separated, with a header.
"""

import csv
import json
import math

import numpy as np

__all__ = [
    "format_float",
    "dumps_json",
    "write_json",
    "write_csv",
    "read_csv",
    "distribution_rows",
    "write_distribution_csv",
    "write_ndjson",
]

DISTRIBUTION_HEADER = ["x", "density", "atom_flag", "weight"]


def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ","
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        # JSON has no NaN or infinity
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[" + pad + sep.join(_encode(v, indent, level + 1) for v in seq) + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent=2):
    """JSON text with floats at 17 significant digits."""
    return _encode(obj, indent, 0)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(obj))
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    """Header and rows (as strings) of a CSV file."""
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def distribution_rows(obj):
    """Rows ``(x, density, atom_flag, weight)`` for a MixedDistribution or EnsembleStats.

    Bins are reported at their centres with their probability mass as
    ``weight``; atoms follow with ``atom_flag = 1`` and zero density.
    """
    edges = obj.edges
    centers = 0.5 * (edges[1:] + edges[:-1])
    width = edges[1] - edges[0]
    rows = [(float(c), float(d), 0, float(d * width)) for c, d in zip(centers, obj.density)]
    for loc, wt in zip(getattr(obj, "atom_locations", ()), getattr(obj, "atom_weights", ())):
        rows.append((float(loc), 0.0, 1, float(wt)))
    return rows


def write_distribution_csv(path, obj):
    write_csv(path, DISTRIBUTION_HEADER, distribution_rows(obj))


def write_ndjson(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_json(rec, indent=0))
            fh.write("\n")
