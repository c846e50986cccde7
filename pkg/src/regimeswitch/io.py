"""
File formats.

* Series CSV: header ``y[,w1,w2,...]``, one observation per row. Other
  columns (for example ``regime`` written by ``simulate``) are ignored.
* Model JSON: ``{"family": {"name": ..., <options>}, "n_regimes": M,
  "mask": [[true, ...], ...]}``.
* Theta JSON: ``{"parameters": {name: value, ...}}`` using the reported
  parameter names; a full ``"transition"`` matrix may be given instead of
  the ``p_ij`` entries.

Outputs are written atomically (temporary file in the target directory,
then ``os.replace``).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile

import numpy as np

from .errors import DimensionError
from .model import Distribution, ModelSpec, PointMass, SeriesData, Theta

__all__ = [
    "read_series_csv",
    "series_csv",
    "load_json",
    "dumps_json",
    "write_atomic",
    "load_model",
    "load_theta",
    "theta_to_json",
    "load_fit",
]


def write_atomic(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    # json writes floats with repr, the shortest string that round-trips
    return json.dumps(obj, indent=2) + "\n"


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def read_series_csv(path) -> SeriesData:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [row for row in reader if row]
    if "y" not in header:
        raise DimensionError("series CSV needs a 'y' column")
    iy = header.index("y")
    iw = [k for k, h in enumerate(header) if h.startswith("w") and h[1:].isdigit()]
    y = np.array([float(row[iy]) for row in rows])
    w = np.array([[float(row[k]) for k in iw] for row in rows]) if iw else None
    return SeriesData(y, w)


def series_csv(data: SeriesData, regimes=None) -> str:
    cols = ["y"]
    if data.w is not None:
        cols += [f"w{k + 1}" for k in range(data.w.shape[1])]
    if regimes is not None:
        cols.append("regime")
    lines = [",".join(cols)]
    for t, y in enumerate(data.y):
        row = [repr(float(y))]
        if data.w is not None:
            row += [repr(float(x)) for x in data.w[t]]
        if regimes is not None:
            row.append(str(int(regimes[t]) + 1))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def load_model(path) -> ModelSpec:
    return ModelSpec.from_json(load_json(path))


def theta_from_doc(spec: ModelSpec, doc: dict) -> Theta:
    params = doc.get("parameters", doc)
    if params and isinstance(next(iter(params.values())), dict):
        params = {k: v["Estimate"] for k, v in params.items()}
    theta = spec.theta_from_dict(params, doc.get("transition"))
    spec.check_theta(theta)
    return theta


def load_theta(spec: ModelSpec, path) -> Theta:
    return theta_from_doc(spec, load_json(path))


def theta_to_json(spec: ModelSpec, theta: Theta) -> dict:
    return {
        "parameters": dict(zip(spec.param_names(), spec.theta_vector(theta).tolist())),
        "transition": theta.transition.tolist(),
    }


def load_fit(path):
    """Model, estimate and initial law stored in a fit JSON document."""
    doc = load_json(path)
    spec = ModelSpec.from_json(doc["model"])
    theta = theta_from_doc(spec, doc)
    init = doc["init"]
    if init["type"] == "point_mass":
        init = PointMass(int(init["state"]))
    else:
        xi = np.clip(np.array(init["xi"], dtype=float), 0.0, None)
        init = Distribution(xi / xi.sum())
    return spec, theta, init
