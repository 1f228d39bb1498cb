"""Run files (JSONL), checksummed model files and JSON configs."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from .classifiers import (LogisticSlipClassifier, SMOSlipClassifier, SlipClassifier,
                          ThresholdSlipClassifier)
from .data import LabeledRun, SensorStream
from .features import FEATURE_LAYOUT, N_PINS

RUN_SCHEMA = "slipdetect.run"
RUN_VERSION = 1
MODEL_FORMAT = "slipdetect.model"
MODEL_VERSION = 1


class FormatError(ValueError):
    """A file does not follow the expected layout."""


class UnsupportedVersionError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class KindMismatchError(FormatError):
    pass


def to_plain(obj):
    """Recursively convert numpy containers and scalars to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


# ---------------------------------------------------------------- runs

def run_records(run: LabeledRun):
    """Header first, then frame and height records in time order."""
    meta = to_plain(run.metadata)
    config = {k: meta.get(k) for k in ("kind", "profile", "retract_speed", "release_rate",
                                       "shares", "mass_g", "static_s")}
    yield {"schema": RUN_SCHEMA, "version": RUN_VERSION, "run_id": run.run_id,
           "seed": meta.get("seed"), "config_hash": config_hash(config), "metadata": meta}
    events = []
    for frame in run.iter_frames():
        events.append((frame.timestamp, 0, frame.sensor_id,
                       {"t_ms": frame.timestamp, "sensor": frame.sensor_id,
                        "pins": frame.pins.tolist()}))
    for t, z in zip(run.height_t_ms.tolist(), run.height_mm.tolist()):
        events.append((t, 1, 0, {"t_ms": t, "height_mm": z}))
    events.sort(key=lambda e: e[:3])
    for e in events:
        yield e[3]


def write_run(run: LabeledRun, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for rec in run_records(run):
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return path


def read_run(path) -> LabeledRun:
    path = Path(path)
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty run file")
    try:
        recs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    head = recs[0]
    if head.get("schema") != RUN_SCHEMA:
        raise FormatError(f"{path}: first record must be the {RUN_SCHEMA} header")
    if head.get("version") != RUN_VERSION:
        raise UnsupportedVersionError(f"{path}: run schema version {head.get('version')}")
    frames = {}
    ht, hz = [], []
    for i, rec in enumerate(recs[1:], start=2):
        if "pins" in rec:
            pins = rec["pins"]
            if len(pins) != N_PINS:
                raise FormatError(f"{path}:{i}: expected {N_PINS} pins, got {len(pins)}")
            frames.setdefault(int(rec["sensor"]), []).append((int(rec["t_ms"]), pins))
        elif "height_mm" in rec:
            ht.append(int(rec["t_ms"]))
            hz.append(float(rec["height_mm"]))
        else:
            raise FormatError(f"{path}:{i}: unknown record")
    streams = {}
    for sid, items in frames.items():
        t = [it[0] for it in items]
        if any(b < a for a, b in zip(t, t[1:])):
            raise FormatError(f"{path}: sensor {sid} timestamps decrease")
        try:
            streams[sid] = SensorStream(sid, t, np.array([it[1] for it in items], dtype=float))
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return LabeledRun(head.get("run_id", path.stem), streams, ht, hz, head.get("metadata", {}))


def write_runs(runs: Iterable[LabeledRun], out_dir) -> List[Path]:
    out = Path(out_dir)
    return [write_run(r, out / f"{r.run_id}.jsonl") for r in runs]


def read_runs(path) -> List[LabeledRun]:
    """One run file, or every ``*.jsonl`` in a directory (sorted by name)."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.jsonl"))
        if not files:
            raise FormatError(f"{path}: no .jsonl run files")
        return [read_run(f) for f in files]
    if not path.exists():
        raise FileNotFoundError(path)
    return [read_run(path)]


# ---------------------------------------------------------------- models

def layout_fingerprint() -> str:
    return hashlib.sha256(FEATURE_LAYOUT.encode()).hexdigest()[:16]


def model_payload(model: SlipClassifier, training: Optional[dict] = None) -> dict:
    if isinstance(model, ThresholdSlipClassifier):
        state = {"threshold": model.threshold_}
    elif isinstance(model, LogisticSlipClassifier):
        state = {"theta": model.theta_, "converged": model.converged_,
                 "n_iter": model.n_iter_}
    elif isinstance(model, SMOSlipClassifier):
        state = {"support_vectors": model.support_vectors_, "dual_coef": model.dual_coef_,
                 "intercept": model.intercept_, "converged": model.converged_,
                 "n_iter": getattr(model, "n_iter_", None),
                 "kkt_gap": getattr(model, "kkt_gap_", None)}
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return to_plain({"kind": model.kind, "params": model.get_params(), "state": state,
                   "n_features": model.n_features_in_, "feature_layout": FEATURE_LAYOUT,
                   "layout_fingerprint": layout_fingerprint(), "training": training or {}})


def model_from_payload(payload: dict) -> SlipClassifier:
    kind, params, state = payload["kind"], payload["params"], payload["state"]
    if payload.get("feature_layout") != FEATURE_LAYOUT:
        raise FormatError(f"model built for feature layout {payload.get('feature_layout')!r}")
    if kind == "threshold":
        model = ThresholdSlipClassifier(**params)
        model.threshold_ = float(state["threshold"])
    elif kind == "logreg":
        model = LogisticSlipClassifier(**params)
        model.theta_ = np.asarray(state["theta"], dtype=float)
        model.converged_ = bool(state["converged"])
        model.n_iter_ = state["n_iter"]
    elif kind == "svm":
        p = dict(params)
        model = SMOSlipClassifier.from_support_vectors(
            np.asarray(state["support_vectors"], dtype=float).reshape(-1, payload["n_features"]),
            state["dual_coef"], state["intercept"], **p)
        model.converged_ = bool(state["converged"])
        model.n_iter_ = state.get("n_iter")
        model.kkt_gap_ = state.get("kkt_gap")
    else:
        raise FormatError(f"unknown model kind {kind!r}")
    model.classes_ = np.array([0, 1])
    model.n_features_in_ = int(payload["n_features"])
    model.feature_layout_ = FEATURE_LAYOUT
    model.training_ = payload.get("training", {})
    return model


def save_model(model: SlipClassifier, path, training: Optional[dict] = None) -> Path:
    payload = model_payload(model, training)
    body = canonical_json(payload)
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION,
           "checksum": hashlib.sha256(body.encode()).hexdigest(), "payload": payload}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    os.replace(tmp, path)
    return path


def load_model(path, expected_kind: Optional[str] = None) -> SlipClassifier:
    """Load a model file; raises on truncation, tampering, version or kind mismatch."""
    raw = Path(path).read_text()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ChecksumError(f"{path}: model file is truncated or corrupt") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"{path}: model version {doc.get('version')}, supported {MODEL_VERSION}")
    payload = doc.get("payload")
    if hashlib.sha256(canonical_json(payload).encode()).hexdigest() != doc.get("checksum"):
        raise ChecksumError(f"{path}: checksum mismatch")
    if expected_kind is not None and payload.get("kind") != expected_kind:
        raise KindMismatchError(f"{path}: holds a {payload.get('kind')} model, "
                                f"expected {expected_kind}")
    return model_from_payload(payload)


# ---------------------------------------------------------------- config

def load_config(path) -> dict:
    """JSON object of defaults; keys map to the CLI option names."""
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON config ({exc})") from exc
    if not isinstance(cfg, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    return cfg


def write_jsonl(records: Iterable[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(to_plain(rec), separators=(",", ":")) + "\n")
    return path
