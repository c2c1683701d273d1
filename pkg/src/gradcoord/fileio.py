"""Text file formats: datasets, matrices, models, trace CSV, JSON reports.

All floats are written with shortest round-trip repr, so identical values
serialize to identical bytes and every format round-trips losslessly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataError
from .metrics import AccTriple
from .simulator import DatasetSplit, EpochRecord, Model, StepRecord, TrainTrace

TRACE_HEADER = "step,loss_sup,loss_unsup,gdc,soc,rho_grad,rho_in"


def _fmt(x: float) -> str:
    return repr(float(x))


def _float_row(values) -> str:
    return " ".join(_fmt(v) for v in values)


def write_matrix(path, matrix: np.ndarray) -> None:
    """`rows cols` header line, then one whitespace-separated row per line."""
    arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    lines.extend(_float_row(row) for row in arr)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise DataError(f"{path}: empty matrix file")
    try:
        rows, cols = (int(tok) for tok in text[0].split())
    except ValueError as exc:
        raise DataError(f"{path}: malformed matrix header {text[0]!r}") from exc
    if len(text) - 1 != rows:
        raise DataError(f"{path}: expected {rows} rows, found {len(text) - 1}")
    try:
        data = np.array([[float(tok) for tok in line.split()] for line in text[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric matrix entry") from exc
    if rows and data.shape != (rows, cols):
        raise DataError(f"{path}: row width mismatch, expected {cols} columns")
    return data.reshape(rows, cols)


def write_dataset(path, data: DatasetSplit) -> None:
    """Header `N d_in num_known num_total`, then one sample per line:
    `label split_flag is_known f_1 ... f_d` with split_flag L or U."""
    n = data.labeled_x.shape[0] + data.unlabeled_x.shape[0]
    lines = [f"{n} {data.input_dim} {data.num_known_classes} {data.num_total_classes}"]
    for y, x in zip(data.labeled_y, data.labeled_x):
        lines.append(f"{int(y)} L 1 {_float_row(x)}")
    for y, known, x in zip(data.unlabeled_y, data.unlabeled_is_known, data.unlabeled_x):
        lines.append(f"{int(y)} U {int(known)} {_float_row(x)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path) -> DatasetSplit:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise DataError(f"{path}: empty dataset file")
    try:
        n, d_in, num_known, num_total = (int(tok) for tok in text[0].split())
    except ValueError as exc:
        raise DataError(f"{path}: malformed dataset header {text[0]!r}") from exc
    if len(text) - 1 != n:
        raise DataError(f"{path}: header says {n} samples, found {len(text) - 1}")
    lab_x, lab_y, unl_x, unl_y, unl_known = [], [], [], [], []
    for lineno, line in enumerate(text[1:], start=2):
        parts = line.split()
        if len(parts) != 3 + d_in:
            raise DataError(f"{path}:{lineno}: expected {3 + d_in} fields, got {len(parts)}")
        label, flag, known = int(parts[0]), parts[1], parts[2]
        feats = [float(tok) for tok in parts[3:]]
        if flag == "L":
            lab_x.append(feats)
            lab_y.append(label)
        elif flag == "U":
            unl_x.append(feats)
            unl_y.append(label)
            unl_known.append(bool(int(known)))
        else:
            raise DataError(f"{path}:{lineno}: split flag must be L or U, got {flag!r}")
    return DatasetSplit(
        labeled_x=np.array(lab_x, dtype=np.float64).reshape(len(lab_x), d_in),
        labeled_y=np.array(lab_y, dtype=int),
        unlabeled_x=np.array(unl_x, dtype=np.float64).reshape(len(unl_x), d_in),
        unlabeled_y=np.array(unl_y, dtype=int),
        unlabeled_is_known=np.array(unl_known, dtype=bool),
        num_known_classes=num_known,
        num_total_classes=num_total,
    )


def write_model(path, model: Model) -> None:
    """Header `d_in d K`, then encoder rows, then prototype rows."""
    d_in, d = model.encoder.shape
    k = model.prototypes.shape[0]
    lines = [f"{d_in} {d} {k}"]
    lines.extend(_float_row(row) for row in model.encoder)
    lines.extend(_float_row(row) for row in model.prototypes)
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> Model:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise DataError(f"{path}: empty model file")
    try:
        d_in, d, k = (int(tok) for tok in text[0].split())
    except ValueError as exc:
        raise DataError(f"{path}: malformed model header {text[0]!r}") from exc
    if len(text) - 1 != d_in + k:
        raise DataError(f"{path}: expected {d_in + k} rows, found {len(text) - 1}")
    rows = [[float(tok) for tok in line.split()] for line in text[1:]]
    encoder = np.array(rows[:d_in], dtype=np.float64).reshape(d_in, d)
    protos = np.array(rows[d_in:], dtype=np.float64).reshape(k, d)
    return Model(encoder=encoder, prototypes=protos)


def write_trace_csv(path, trace: TrainTrace) -> None:
    lines = [TRACE_HEADER]
    for rec in trace.steps:
        lines.append(
            f"{rec.step},{_fmt(rec.loss_sup)},{_fmt(rec.loss_unsup)},"
            f"{_fmt(rec.gdc)},{_fmt(rec.soc)},{_fmt(rec.rho_grad)},{_fmt(rec.rho_in)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path) -> list[StepRecord]:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != TRACE_HEADER:
        raise DataError(f"{path}: missing trace header {TRACE_HEADER!r}")
    records = []
    for line in text[1:]:
        parts = line.split(",")
        if len(parts) != 7:
            raise DataError(f"{path}: malformed trace row {line!r}")
        records.append(StepRecord(
            step=int(parts[0]),
            loss_sup=float(parts[1]),
            loss_unsup=float(parts[2]),
            gdc=float(parts[3]),
            soc=float(parts[4]),
            rho_grad=float(parts[5]),
            rho_in=float(parts[6]),
        ))
    return records


def acc_to_dict(acc: AccTriple) -> dict:
    return {"all": acc.all, "old": acc.old, "new": acc.new}


def epochs_to_list(epochs: list[EpochRecord]) -> list[dict]:
    return [
        {"epoch": rec.epoch, "acc": acc_to_dict(rec.acc), "labeled_loss": rec.labeled_loss}
        for rec in epochs
    ]


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON: {exc}") from exc


def matrix_to_vector(arr: np.ndarray, name: str = "matrix") -> np.ndarray:
    vec = np.asarray(arr, dtype=np.float64).ravel()
    if vec.size == 0:
        raise ArgumentError(f"{name} is empty")
    return vec
