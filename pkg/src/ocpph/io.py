"""Sample files, model files and curve tables."""

import csv
import json
import math

import numpy as np

from .cutpoint import OcpErlangSpec, OneCutPoint, expand_ocp_erlang
from .data import Dataset
from .errors import DegenerateDataError, DomainError, InvalidInputError, TailUnderflowError
from .gof import ecdf, empirical_cum_hazard, kde_density, kernel_hazard
from .phasetype import ErlangSpec, PhaseType, erlang_rep

FORMAT_VERSION = 1
KINDS = ("ph-erlang", "ocp-erlang", "ph-general", "ocp-general")

MODEL_COLUMNS = ("x", "pdf", "cdf", "reliability", "hazard", "cum_hazard")
EMPIRICAL_COLUMNS = ("ecdf", "emp_cum_hazard", "kde", "kernel_hazard")


class ModelFormatError(InvalidInputError):
    pass


class SampleFormatError(InvalidInputError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def read_samples(path):
    """Read one nonnegative decimal per line; '#' lines and blanks are skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                value = float(line)
            except ValueError:
                raise SampleFormatError(lineno, f"cannot parse {line!r} as a number") from None
            if not math.isfinite(value):
                raise SampleFormatError(lineno, f"value {line!r} is not finite")
            if value < 0:
                raise SampleFormatError(lineno, f"negative value {line!r}")
            values.append(value)
    if not values:
        raise DegenerateDataError(f"{path}: no observations")
    return Dataset(values)


def write_samples(path, values):
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(values, dtype=float):
            fh.write(f"{float(v)!r}\n")


# -- models -------------------------------------------------------------------


def model_kind(model):
    if isinstance(model, ErlangSpec):
        return "ph-erlang"
    if isinstance(model, OcpErlangSpec):
        return "ocp-erlang"
    if isinstance(model, PhaseType):
        return "ph-erlang" if model.erlang is not None else "ph-general"
    if isinstance(model, OneCutPoint):
        return "ocp-erlang" if model.erlang is not None else "ocp-general"
    raise ModelFormatError(f"cannot serialize {type(model).__name__}")


def _matrix(a):
    return [[float(v) for v in row] for row in np.asarray(a)]


def model_to_dict(model):
    if isinstance(model, PhaseType) and model.erlang is not None:
        model = model.erlang
    if isinstance(model, OneCutPoint) and model.erlang is not None:
        model = model.erlang
    kind = model_kind(model)
    if kind == "ph-erlang":
        params = {"phases": model.phases, "rate": model.rate}
    elif kind == "ocp-erlang":
        params = {
            "cut_point": model.cut_point, "phases": model.phases,
            "rate1": model.rate1, "rate2": model.rate2,
        }
    elif kind == "ph-general":
        params = {"alpha": [float(v) for v in model.alpha], "T": _matrix(model.T)}
    else:
        params = {
            "cut_point": model.cut_point,
            "alpha": [float(v) for v in model.alpha],
            "T1": _matrix(model.T1),
            "T2": _matrix(model.T2),
        }
    return {"format_version": FORMAT_VERSION, "kind": kind, "parameters": params}


_FIELDS = {
    "ph-erlang": {"phases", "rate"},
    "ocp-erlang": {"cut_point", "phases", "rate1", "rate2"},
    "ph-general": {"alpha", "T"},
    "ocp-general": {"cut_point", "alpha", "T1", "T2"},
}


def model_from_dict(doc):
    """Inverse of :func:`model_to_dict`.

    Erlang kinds give :class:`ErlangSpec` / :class:`OcpErlangSpec`; general
    kinds give validated :class:`PhaseType` / :class:`OneCutPoint`.
    """
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}")
    params = doc.get("parameters")
    if not isinstance(params, dict) or set(params) != _FIELDS[kind]:
        raise ModelFormatError(f"{kind} needs exactly the parameters {sorted(_FIELDS[kind])}")
    if kind == "ph-erlang":
        return ErlangSpec(params["phases"], params["rate"])
    if kind == "ocp-erlang":
        return OcpErlangSpec(params["cut_point"], params["phases"], params["rate1"], params["rate2"])
    if kind == "ph-general":
        return PhaseType(params["alpha"], params["T"])
    return OneCutPoint(params["cut_point"], params["alpha"], params["T1"], params["T2"])


def dumps_model(model):
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def loads_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(doc)


def write_model(path, model):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def read_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())


def as_distribution(model):
    """Evaluate-ready distribution object for a parsed model."""
    if isinstance(model, ErlangSpec):
        return erlang_rep(model)
    if isinstance(model, OcpErlangSpec):
        return expand_ocp_erlang(model)
    if isinstance(model, (PhaseType, OneCutPoint)):
        return model
    raise ModelFormatError(f"not a model: {type(model).__name__}")


# -- curves ---------------------------------------------------------------------


def _safe(fn, x):
    try:
        return fn(x)
    except TailUnderflowError:
        out = np.empty(np.shape(x))
        for i, xi in enumerate(x):
            try:
                out[i] = fn(xi)
            except TailUnderflowError:
                out[i] = np.nan
        return out


def curves_table(model, x, data=None):
    """Model curves (and empirical overlays when `data` is given) on a grid.

    Returns a dict of column name to array, in output column order.
    """
    dist = as_distribution(model)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise InvalidInputError("grid must be a non-empty 1-d array")
    if np.any(x < 0):
        raise DomainError("curve grid must be nonnegative")
    if np.any(np.diff(x) <= 0):
        raise InvalidInputError("curve grid must be strictly increasing")
    reliability = dist.reliability(x)
    cols = {
        "x": x,
        "pdf": dist.pdf(x),
        "cdf": 1.0 - reliability,
        "reliability": reliability,
        "hazard": _safe(dist.hazard, x),
        "cum_hazard": _safe(dist.cum_hazard, x),
    }
    if data is not None:
        data = Dataset.coerce(data)
        cols["ecdf"] = ecdf(data, x)
        cols["emp_cum_hazard"] = empirical_cum_hazard(data, x)
        cols["kde"] = kde_density(data, x)
        cols["kernel_hazard"] = kernel_hazard(data, x)
    return cols


def write_curves(path_or_file, cols):
    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        names = list(cols)
        writer.writerow(names)
        for row in zip(*(cols[c] for c in names)):
            writer.writerow([repr(float(v)) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            emit(fh)


def read_curves(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, i] for i, name in enumerate(header)}


__all__ = [
    "FORMAT_VERSION",
    "KINDS",
    "ModelFormatError",
    "SampleFormatError",
    "read_samples",
    "write_samples",
    "model_to_dict",
    "model_from_dict",
    "dumps_model",
    "loads_model",
    "write_model",
    "read_model",
    "as_distribution",
    "curves_table",
    "write_curves",
    "read_curves",
]
