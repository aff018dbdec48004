"""File formats: JSON model documents and line-delimited path records."""

from __future__ import annotations

import json
from pathlib import Path as FilePath

import numpy as np

from .exceptions import ValidationError
from .model import ModelParams, Path, validate_model, validate_path
from .simulate import SimulatedPath


def model_to_dict(model: ModelParams) -> dict:
    return {
        "p": model.p,
        "M": model.M,
        "alpha": model.alpha.tolist(),
        "phi": model.phi.tolist(),
        "Q": model.Q.tolist(),
    }


def model_from_dict(doc: dict) -> ModelParams:
    try:
        model = ModelParams(
            alpha=np.array(doc["alpha"], dtype=float),
            phi=np.array(doc["phi"], dtype=float),
            Q=np.array(doc["Q"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed model document: {exc}") from exc
    if "p" in doc and int(doc["p"]) != model.p:
        raise ValidationError(f"declared p={doc['p']} but alpha has length {model.p}")
    if "M" in doc and int(doc["M"]) != model.M:
        raise ValidationError(f"declared M={doc['M']} but phi has {model.M} columns")
    return validate_model(model)


def write_model(model: ModelParams, path: str | FilePath) -> None:
    FilePath(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def read_model(path: str | FilePath) -> ModelParams:
    return model_from_dict(json.loads(FilePath(path).read_text()))


def path_to_record(path: Path, regimes=None) -> dict:
    # json emits shortest round-trip decimal for floats, so times survive
    # a write/read cycle bit-exactly
    rec = {
        "id": int(path.id),
        "times": [float(t) for t in path.times],
        "states": [int(s) for s in path.states],
        "horizon": float(path.horizon),
    }
    reg = regimes if regimes is not None else path.regimes
    if reg is not None:
        rec["regimes"] = [int(r) for r in np.atleast_1d(reg)]
    return rec


def record_to_path(rec: dict) -> Path:
    try:
        return Path(
            id=int(rec["id"]),
            times=np.array([float(t) for t in rec["times"]]),
            states=np.array(rec["states"], dtype=int),
            horizon=float(rec["horizon"]),
            regimes=np.array(rec["regimes"], dtype=int) if "regimes" in rec else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed path record: {exc}") from exc


def write_paths(paths: list[Path] | list[SimulatedPath], out: str | FilePath) -> None:
    with open(out, "w") as fh:
        for item in paths:
            if isinstance(item, SimulatedPath):
                rec = path_to_record(item.path, regimes=item.regimes)
            else:
                rec = path_to_record(item)
            fh.write(json.dumps(rec) + "\n")


def read_paths(src: str | FilePath) -> list[Path]:
    paths = []
    with open(src) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {line_no}: invalid JSON: {exc}") from exc
            paths.append(record_to_path(rec))
    return paths


def validate_paths(paths: list[Path], p: int) -> list[Path]:
    for path in paths:
        validate_path(path, p)
    return paths


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_report(doc: dict, out: str | FilePath) -> None:
    FilePath(out).write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")
