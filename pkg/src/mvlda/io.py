"""On-disk formats.

Epoch bundle
    A JSON manifest plus a raw payload of ``n*K*J`` little-endian float64
    values, trial-major, each trial stored row by row (``vec_t``).
Epoch CSV
    Long format with header ``trial,row,col,value,label`` (0-based row/col).
Model file
    A JSON document with the fitted factors, bases and eigenvalues. Floats
    are written in shortest round-trip form, so reloading is exact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .covariance import EpochSet, FlipFlopConfig, SeparableCovariance
from .discriminant import DiscriminantModel
from .errors import BundleFormatError, ValidationError
from .linalg import spd_factorize
from .wavelet import CoefficientMask, WaveletConfig

BUNDLE_FORMAT = "mvlda-epochs"
MODEL_FORMAT = "mvlda-model"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = "<f8"
CSV_HEADER = ("trial", "row", "col", "value", "label")


def _dump_json(obj, path: Path) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def payload_path(manifest_path) -> Path:
    return Path(manifest_path).with_suffix(".f64")


def write_bundle(epochs: EpochSet, path) -> Path:
    """Write ``epochs`` as ``<path>`` (manifest) and ``<path stem>.f64`` (payload)."""
    path = Path(path)
    payload = payload_path(path)
    if payload == path:
        raise ValidationError("manifest path must not end in .f64")
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": FORMAT_VERSION,
        "n": epochs.n,
        "K": epochs.K,
        "J": epochs.J,
        "labels": [int(c) for c in epochs.labels],
        "channel_names": list(epochs.channel_names) if epochs.channel_names else None,
        "row_names": list(epochs.row_names) if epochs.row_names else None,
        "sample_rate_hz": epochs.sample_rate_hz,
        "generator_info": epochs.generator_info,
        "payload": payload.name,
        "dtype": PAYLOAD_DTYPE,
    }
    payload.write_bytes(np.ascontiguousarray(epochs.trials, dtype=PAYLOAD_DTYPE).tobytes())
    _dump_json(manifest, path)
    return path


def read_bundle(path) -> EpochSet:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("format") != BUNDLE_FORMAT:
        raise BundleFormatError(f"{path} is not an epoch bundle manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise BundleFormatError(f"unsupported bundle version {manifest.get('version')}")
    try:
        n, k, j = (int(manifest[key]) for key in ("n", "K", "J"))
        labels = manifest["labels"]
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleFormatError(f"manifest is missing n/K/J/labels: {exc}") from exc
    if len(labels) != n:
        raise BundleFormatError(f"manifest lists {len(labels)} labels for n={n} trials")
    payload = path.parent / manifest.get("payload", payload_path(path).name)
    try:
        raw = payload.read_bytes()
    except OSError as exc:
        raise BundleFormatError(f"cannot read payload {payload}: {exc}") from exc
    expected = n * k * j * 8
    if len(raw) != expected:
        raise BundleFormatError(
            f"payload size mismatch: expected {expected} bytes, got {len(raw)}"
        )
    trials = np.frombuffer(raw, dtype=PAYLOAD_DTYPE).astype(float).reshape(n, k, j)
    return EpochSet(trials, labels, manifest.get("channel_names"), manifest.get("row_names"),
                    manifest.get("sample_rate_hz"), manifest.get("generator_info"))


def read_epochs_csv(path) -> EpochSet:
    """Parse the long CSV format; trials are ordered by their id."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = tuple(s.strip() for s in fh.readline().strip().split(","))
        if header != CSV_HEADER:
            raise BundleFormatError(f"expected CSV header {','.join(CSV_HEADER)}, got {header}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise BundleFormatError(f"malformed CSV {path}: {exc}") from exc
    if data.size == 0:
        raise BundleFormatError("CSV has no data rows")
    ids = data[:, :3]
    if np.any(ids != np.round(ids)) or np.any(data[:, 1:3] < 0):
        raise BundleFormatError("trial/row/col must be non-negative integers")
    trial_ids, trial_idx = np.unique(data[:, 0].astype(np.int64), return_inverse=True)
    rows = data[:, 1].astype(np.int64)
    cols = data[:, 2].astype(np.int64)
    n, k, j = trial_ids.size, int(rows.max()) + 1, int(cols.max()) + 1
    if data.shape[0] != n * k * j:
        raise BundleFormatError(
            f"expected {n * k * j} rows for {n} trials of {k}x{j}, got {data.shape[0]}"
        )
    trials = np.full((n, k, j), np.nan)
    seen = np.zeros((n, k, j), dtype=bool)
    seen[trial_idx, rows, cols] = True
    if not seen.all():
        raise BundleFormatError("CSV has duplicate or missing (trial, row, col) entries")
    values = data[:, 3]
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValidationError(
            f"non-finite value at trial {trial_ids[trial_idx[i]]}, row {rows[i]}, col {cols[i]}"
        )
    trials[trial_idx, rows, cols] = values
    labels = np.zeros(n, dtype=np.int64)
    labels[trial_idx] = data[:, 4].astype(np.int64)
    per_trial = np.zeros(n, dtype=bool)
    np.logical_or.at(per_trial, trial_idx, data[:, 4] != labels[trial_idx])
    if per_trial.any():
        raise BundleFormatError(
            f"trial {trial_ids[np.flatnonzero(per_trial)[0]]} has inconsistent labels"
        )
    return EpochSet(trials, labels)


def write_epochs_csv(epochs: EpochSet, path) -> None:
    n, k, j = epochs.trials.shape
    t, r, c = np.meshgrid(np.arange(n), np.arange(k), np.arange(j), indexing="ij")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for ti, ri, ci, v in zip(t.ravel(), r.ravel(), c.ravel(), epochs.trials.ravel()):
            fh.write(f"{ti},{ri},{ci},{v:.17g},{epochs.labels[ti]}\n")


def load_epochs(path) -> EpochSet:
    """Read an epoch bundle manifest, or a long-format CSV when ``path`` ends in ``.csv``."""
    if Path(path).suffix.lower() == ".csv":
        return read_epochs_csv(path)
    return read_bundle(path)


@dataclass(frozen=True, eq=False)
class ModelFile:
    """Everything needed to project new data and redraw the figures."""

    model: DiscriminantModel
    covariance: SeparableCovariance
    flip_flop: FlipFlopConfig = FlipFlopConfig()
    rank_tol: Optional[float] = None
    wavelet: Optional[WaveletConfig] = None
    mask: Optional[CoefficientMask] = None
    baseline_samples: int = 0
    channel_names: Optional[tuple] = None
    row_names: Optional[tuple] = None
    sample_rate_hz: Optional[float] = None
    time_offset_ms: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        m, cov = self.model, self.covariance
        doc = {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "K": m.K,
            "J": m.J,
            "Q": m.Q,
            "n1": m.n1,
            "n2": m.n2,
            "lambda": m.lam.tolist(),
            "U": m.u.tolist(),
            "V": m.v.tolist(),
            "mean1": m.mean1.tolist(),
            "mean2": m.mean2.tolist(),
            "S_L": m.s_l.tolist(),
            "S_R": m.s_r.tolist(),
            "rank_tol": self.rank_tol,
            "flip_flop": {
                "tol": self.flip_flop.tol,
                "max_iter": self.flip_flop.max_iter,
                "ridge": self.flip_flop.ridge,
                "floor_ratio": self.flip_flop.floor_ratio,
                "iterations": cov.iterations,
                "converged": bool(cov.converged),
                # null when the covariance was supplied rather than estimated
                "fixed_point_residual": (cov.fixed_point_residual
                                         if np.isfinite(cov.fixed_point_residual) else None),
            },
            "channel_names": list(self.channel_names) if self.channel_names else None,
            "row_names": list(self.row_names) if self.row_names else None,
            "sample_rate_hz": self.sample_rate_hz,
            "time_offset_ms": self.time_offset_ms,
            "baseline_samples": self.baseline_samples,
            "wavelet": None,
            "extra": self.extra,
        }
        if self.wavelet is not None:
            doc["wavelet"] = {
                "config": self.wavelet.to_dict(),
                "mask": {
                    "total_len": self.mask.total_len,
                    "kept_indices": self.mask.kept_indices.tolist(),
                    "statistic": self.mask.statistic.tolist(),
                    "threshold": self.mask.threshold,
                },
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelFile":
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != FORMAT_VERSION:
            raise BundleFormatError("not a supported model file")
        k, j, q = doc["K"], doc["J"], doc["Q"]
        ff = doc["flip_flop"]
        config = FlipFlopConfig(ff["tol"], ff["max_iter"], ff["ridge"], ff["floor_ratio"])
        s_l = spd_factorize(np.array(doc["S_L"], dtype=float), config.floor_ratio)
        s_r = spd_factorize(np.array(doc["S_R"], dtype=float), config.floor_ratio)
        residual = ff["fixed_point_residual"]
        cov = SeparableCovariance(s_l, s_r, ff["iterations"], ff["converged"],
                                  float("nan") if residual is None else residual)

        def arr(key, shape):
            a = np.array(doc[key], dtype=float).reshape(shape)
            a.setflags(write=False)
            return a

        model = DiscriminantModel(
            mean1=arr("mean1", (k, j)),
            mean2=arr("mean2", (k, j)),
            metric_m=s_r.inverted(),
            metric_d=s_l.inverted(),
            u=arr("U", (k, q)),
            v=arr("V", (j, q)),
            lam=arr("lambda", (q,)),
            n1=doc["n1"],
            n2=doc["n2"],
        )
        wavelet = mask = None
        if doc.get("wavelet"):
            wavelet = WaveletConfig(**doc["wavelet"]["config"])
            mk = doc["wavelet"]["mask"]
            mask = CoefficientMask(mk["total_len"], mk["kept_indices"], mk["statistic"],
                                   mk["threshold"])
        names = doc.get("channel_names")
        rows = doc.get("row_names")
        return cls(model, cov, config, doc.get("rank_tol"), wavelet, mask,
                   doc.get("baseline_samples", 0),
                   tuple(names) if names else None, tuple(rows) if rows else None,
                   doc.get("sample_rate_hz"), doc.get("time_offset_ms"),
                   doc.get("extra") or {})


def save_model(model_file: ModelFile, path) -> None:
    _dump_json(model_file.to_dict(), Path(path))


def load_model(path) -> ModelFile:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"cannot read model {path}: {exc}") from exc
    try:
        return ModelFile.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise BundleFormatError(f"malformed model file {path}: {exc}") from exc


def write_csv(path, header, rows) -> None:
    """Comma-separated table; floats with 17 significant digits."""

    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def ensure_parent(path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
    return path
