"""CSV and JSON formats for responses, panels, parameters and posteriors.

Floats are written with ``repr`` so that text round-trips bit-exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .core import Family, ModelParams, ResponseMatrix
from .errors import DomainError, FormatError
from .synth import ClassifierResponseSet
from .vi import PosteriorSet

FORMAT_VERSION = 1
RESPONSE_HEADER = ["respondent_id", "item_id", "response"]
PAIRS_HEADER = ["respondent_id", "item_id"]


def fmt(x) -> str:
    return repr(float(x))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _read_rows(path, header):
    path = Path(path)
    try:
        f = open(path, newline="")
    except OSError as e:
        raise FormatError(f"cannot open file: {e.strerror}", path) from e
    with f:
        reader = csv.reader(f)
        try:
            first = next(reader)
        except StopIteration:
            raise FormatError("file is empty", path, 1) from None
        if [h.strip() for h in first[:len(header)]] != header:
            raise FormatError(f"expected header {','.join(header)}", path, 1)
        for row in reader:
            if not row:
                continue
            yield reader.line_num, [c.strip() for c in row], first


def _parse_float(text, path, line, column, name):
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"{name} is not a number: {text!r}", path, line, column) from None
    if not math.isfinite(v):
        raise FormatError(f"{name} must be finite", path, line, column)
    return v


def read_responses(path) -> ResponseMatrix:
    """Read ``respondent_id,item_id,response`` rows.

    IDs map to dense indices in first-seen order.
    """
    rid, iid = {}, {}
    r, j, p = [], [], []
    for line, row, _ in _read_rows(path, RESPONSE_HEADER):
        if len(row) != 3:
            raise FormatError(f"expected 3 fields, got {len(row)}", path, line)
        v = _parse_float(row[2], path, line, 3, "response")
        if not (0.0 <= v <= 1.0):
            raise FormatError(f"response {v!r} outside [0, 1]", path, line, 3)
        r.append(rid.setdefault(row[0], len(rid)))
        j.append(iid.setdefault(row[1], len(iid)))
        p.append(v)
    if not p:
        raise FormatError("no observations", path)
    return ResponseMatrix(len(rid), len(iid), r, j, p, respondent_ids=tuple(rid), item_ids=tuple(iid))


def write_responses(data: ResponseMatrix, path) -> None:
    rows = ((data.respondent_ids[a], data.item_ids[b], float(p))
            for a, b, p in zip(data.respondent, data.item, data.response))
    write_csv(path, RESPONSE_HEADER, rows)


def read_pairs(path) -> list[tuple[str, str]]:
    out = []
    for line, row, _ in _read_rows(path, PAIRS_HEADER):
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", path, line)
        out.append((row[0], row[1]))
    return out


def write_json(obj, path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, allow_nan=True)
        f.write("\n")


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"cannot open file: {e.strerror}", path) from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(e.msg, path, e.lineno, e.colno) from None


def params_to_json(params: ModelParams, respondent_ids, item_ids) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "family": params.family.value,
        "respondent_ids": list(respondent_ids),
        "item_ids": list(item_ids),
        "abilities": [float(x) for x in params.abilities],
        "difficulties": [float(x) for x in params.difficulties],
        "discriminations": [float(x) for x in params.discriminations],
    }


def _check_version(obj, path):
    if not isinstance(obj, dict) or obj.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported or missing format_version (expected {FORMAT_VERSION})", path)


def params_from_json(obj, path=None) -> tuple[ModelParams, tuple, tuple]:
    """Returns (params, respondent_ids, item_ids)."""
    _check_version(obj, path)
    try:
        params = ModelParams(Family(obj["family"]), obj["abilities"], obj["difficulties"], obj["discriminations"])
        rids = tuple(obj["respondent_ids"])
        iids = tuple(obj["item_ids"])
    except KeyError as e:
        raise FormatError(f"missing field {e.args[0]!r}", path) from None
    except (ValueError, TypeError) as e:
        raise FormatError(str(e), path) from None
    if len(rids) != params.num_respondents or len(iids) != params.num_items:
        raise FormatError("id lists do not match parameter lengths", path)
    return params, rids, iids


def write_params(params: ModelParams, respondent_ids, item_ids, path) -> None:
    write_json(params_to_json(params, respondent_ids, item_ids), path)


def read_params(path):
    return params_from_json(read_json(path), path)


def posteriors_to_json(q: PosteriorSet, respondent_ids, item_ids) -> dict:
    def fl(a):
        return [float(x) for x in a]

    return {
        "format_version": FORMAT_VERSION,
        "respondent_ids": list(respondent_ids),
        "item_ids": list(item_ids),
        "ability": {"mu": fl(q.ability_mu), "log_sigma": fl(q.ability_log_sigma)},
        "difficulty": {"mu": fl(q.difficulty_mu), "log_sigma": fl(q.difficulty_log_sigma)},
        "discrimination": {"mu": fl(q.discrimination_mu), "log_sigma": fl(q.discrimination_log_sigma)},
        "elbo_trace": [[float(a), float(b)] for a, b in q.elbo_trace],
    }


def read_posteriors(path) -> tuple[PosteriorSet, tuple, tuple]:
    obj = read_json(path)
    _check_version(obj, path)
    try:
        q = PosteriorSet(
            obj["ability"]["mu"], obj["ability"]["log_sigma"],
            obj["difficulty"]["mu"], obj["difficulty"]["log_sigma"],
            obj["discrimination"]["mu"], obj["discrimination"]["log_sigma"],
            elbo_trace=tuple(tuple(x) for x in obj.get("elbo_trace", [])),
        )
        return q, tuple(obj["respondent_ids"]), tuple(obj["item_ids"])
    except KeyError as e:
        raise FormatError(f"missing field {e.args[0]!r}", path) from None
    except (DomainError, TypeError, ValueError) as e:
        raise FormatError(str(e), path) from None


def write_posteriors(q: PosteriorSet, respondent_ids, item_ids, path) -> None:
    write_json(posteriors_to_json(q, respondent_ids, item_ids), path)


def read_panel(path, tolerance: float = 1e-6) -> ClassifierResponseSet:
    """Read ``classifier_id,instance_id,label,p_class0,p_class1[,...]`` rows.

    Each row's probabilities must sum to 1 within ``tolerance``; they are
    then renormalized. Every classifier must cover every instance once.
    """
    path = Path(path)
    cids, iids = {}, {}
    entries = {}
    labels = {}
    K = None
    for line, row, header in _read_rows(path, ["classifier_id", "instance_id", "label"]):
        if K is None:
            K = len(header) - 3
            if K < 2 or header[3:] != [f"p_class{k}" for k in range(K)]:
                raise FormatError("expected probability columns p_class0, p_class1, ...", path, 1)
        if len(row) != K + 3:
            raise FormatError(f"expected {K + 3} fields, got {len(row)}", path, line)
        try:
            y = int(row[2])
        except ValueError:
            raise FormatError(f"label is not an integer: {row[2]!r}", path, line, 3) from None
        if not (0 <= y < K):
            raise FormatError(f"label {y} outside [0, {K})", path, line, 3)
        probs = np.array([_parse_float(t, path, line, 4 + k, f"p_class{k}") for k, t in enumerate(row[3:])])
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > tolerance:
            raise FormatError("class probabilities must be non-negative and sum to 1", path, line)
        ci = cids.setdefault(row[0], len(cids))
        ii = iids.setdefault(row[1], len(iids))
        if labels.setdefault(ii, y) != y:
            raise FormatError(f"instance {row[1]!r} has conflicting labels", path, line, 3)
        if (ci, ii) in entries:
            raise FormatError(f"duplicate row for ({row[0]}, {row[1]})", path, line)
        entries[(ci, ii)] = probs / probs.sum()
    if not entries:
        raise FormatError("no rows", path)
    M, N = len(cids), len(iids)
    if len(entries) != M * N:
        raise FormatError("every classifier must predict every instance", path)
    arr = np.empty((M, N, K))
    for (ci, ii), probs in entries.items():
        arr[ci, ii] = probs
    return ClassifierResponseSet(arr, [labels[i] for i in range(N)], tuple(cids), tuple(iids))


def write_panel(c: ClassifierResponseSet, path) -> None:
    header = ["classifier_id", "instance_id", "label"] + [f"p_class{k}" for k in range(c.num_classes)]
    rows = (
        [c.classifier_ids[i], c.instance_ids[j], int(c.labels[j])] + [float(p) for p in c.probs[i, j]]
        for i in range(c.num_classifiers)
        for j in range(c.num_instances)
    )
    write_csv(path, header, rows)
