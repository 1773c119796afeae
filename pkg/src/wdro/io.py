"""CSV ingestion and JSON report serialization."""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import MissingColumn, NonNumericCell, ParseError, SchemaViolation

REPORT_SCHEMA_VERSION = 1


@dataclass
class Dataset:
    """Feature matrix plus optional response, attribute and label columns."""

    X: np.ndarray
    columns: list
    response: np.ndarray = None
    attribute: np.ndarray = None
    label: np.ndarray = None
    roles: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[0]

    def regression_rows(self):
        """Rows ``[X, y]`` as used by the regression model."""
        if self.response is None:
            raise MissingColumn("this command needs --response")
        return np.column_stack([self.X, self.response])


def _number(text, row, col):
    try:
        v = float(text)
    except ValueError:
        raise NonNumericCell("row %d, column %r: %r is not a number" % (row, col, text)) from None
    if not math.isfinite(v):
        raise NonNumericCell("row %d, column %r: %r is not finite" % (row, col, text))
    return v


def read_matrix(path):
    """Header and float matrix of a comma-separated file (rows numbered from 1 after the header)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as e:
        raise ParseError("%s is not UTF-8: %s" % (path, e)) from None
    except csv.Error as e:
        raise ParseError("%s: %s" % (path, e)) from None
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError("%s is empty" % path)
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names in header")
    body = rows[1:]
    if not body:
        raise ParseError("%s has a header but no data rows" % path)
    out = np.empty((len(body), len(header)))
    for i, r in enumerate(body, start=1):
        if len(r) != len(header):
            raise ParseError("row %d has %d fields, expected %d" % (i, len(r), len(header)))
        for j, cell in enumerate(r):
            out[i - 1, j] = _number(cell.strip(), i, header[j])
    return header, out


def _column(header, name):
    if name not in header:
        raise MissingColumn("column %r not in header %s" % (name, header))
    return header.index(name)


def load_dataset(path, response=None, attribute=None, label=None):
    """Load a CSV; named role columns are split off, every other column is a feature."""
    header, M = read_matrix(path)
    roles = {"response": response, "attribute": attribute, "label": label}
    idx = {k: _column(header, v) for k, v in roles.items() if v is not None}
    feats = [j for j in range(len(header)) if j not in idx.values()]
    ds = Dataset(M[:, feats], [header[j] for j in feats],
                 roles={k: v for k, v in roles.items() if v is not None})
    for k, j in idx.items():
        setattr(ds, k, M[:, j].copy())
    for k in ("attribute", "label"):
        v = getattr(ds, k)
        if v is not None and not np.isin(v, (0.0, 1.0)).all():
            bad = int(np.flatnonzero(~np.isin(v, (0.0, 1.0)))[0]) + 1
            raise SchemaViolation("%s column %r must be 0/1 (row %d)" % (k, roles[k], bad))
    return ds


def _plain(obj):
    """Convert numpy containers and scalars to plain Python for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


class _Float17(float):
    def __repr__(self):
        if math.isnan(self):
            return "NaN"
        if math.isinf(self):
            return "Infinity" if self > 0 else "-Infinity"
        return "%.17g" % self


def _wrap(obj):
    if isinstance(obj, dict):
        return {k: _wrap(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_wrap(v) for v in obj]
    if isinstance(obj, float):
        return _Float17(obj)
    return obj


class _Encoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        # the C encoder formats floats with float.__repr__; force the Python path
        return json.encoder._make_iterencode(
            {}, self.default, json.encoder.py_encode_basestring_ascii, self.indent,
            repr, self.key_separator, self.item_separator, self.sort_keys,
            self.skipkeys, _one_shot)(o, 0)


def dumps(obj):
    """JSON text with every float written to 17 significant digits and sorted keys."""
    return json.dumps(_wrap(_plain(obj)), cls=_Encoder, indent=2, sort_keys=True)


def loads(text):
    return json.loads(text)


def write_csv(path, rows):
    """Per-replication table; floats to 17 significant digits."""
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow(["%.17g" % r[k] if isinstance(r[k], float) else r[k] for k in keys])
