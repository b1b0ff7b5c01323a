"""Deterministic CSV/JSON artifact writers.

Every file starts with a comment header carrying the artifact version and a
hash of the generating configuration, so outputs are diffable and traceable.
Floats are serialized with repr (shortest round-trip), which makes reruns
with identical inputs byte-identical.
"""

import hashlib
import json
import os

from . import __version__


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _header_lines(config):
    return [
        "# artifact_version=%s" % __version__,
        "# config_hash=%s" % config_hash(config),
    ]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows, config):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    lines = _header_lines(config)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, payload, config):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {
        "artifact_version": __version__,
        "config_hash": config_hash(config),
        "data": payload,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    import numpy as np

    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError("not JSON serializable: %r" % type(obj))
