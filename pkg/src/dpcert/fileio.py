"""CSV formats, ensemble persistence and run manifests.

All CSV files are RFC-4180 style (CRLF line endings, header row first).
Readers validate shape cell by cell and report the 1-based line number of
anything malformed.

Formats:
    dataset       label,f_0,...,f_{m-1}
    votes         sample_id,count_0,...,count_{L-1}
    scores        sample_id,instance_id,score_0,...,score_{L-1}
    certificates  sample_id,predicted,radius,abstain   (radius empty on abstain)
    curve         radius,certified_accuracy
    truth         sample_id,label

An ensemble is a directory of per-instance ``instance_<i>.npy`` flat
parameter vectors plus a ``manifest.txt`` of key=value training metadata.
"""

import csv
import hashlib
import io
import os
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .accountant import PrivacyParams
from .certify import Certificate, CertifiedAccuracyCurve, Method
from .confidence import ScoreTable, VoteTable
from .training import Dataset, Ensemble, ModelInstance, param_dim


class FormatError(ValueError):
    pass


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_rows(path, expected_width=None):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected a header row") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if expected_width is not None and len(row) != expected_width:
                raise FormatError(
                    f"{path} line {lineno}: expected {expected_width} fields, got {len(row)}")
            rows.append((lineno, row))
    return header, rows


def _cell(path, lineno, raw, kind, name):
    try:
        return kind(raw)
    except ValueError:
        raise FormatError(
            f"{path} line {lineno}: bad {name} value {raw!r}") from None


# -- dataset ----------------------------------------------------------------

def write_dataset(path, data: Dataset):
    header = ["label"] + [f"f_{j}" for j in range(data.n_features)]
    rows = ([int(y)] + [repr(float(v)) for v in x]
            for y, x in zip(data.labels, data.features))
    _write_rows(path, header, rows)


def read_dataset(path, n_classes=None) -> Dataset:
    header, rows = _read_rows(path)
    if not header or header[0] != "label":
        raise FormatError(f"{path}: first header field must be 'label'")
    width = len(header)
    feats, labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise FormatError(
                f"{path} line {lineno}: expected {width} fields, got {len(row)}")
        labels.append(_cell(path, lineno, row[0], int, "label"))
        feats.append([_cell(path, lineno, v, float, "feature") for v in row[1:]])
    if not rows:
        raise FormatError(f"{path}: dataset has no rows")
    if n_classes is None:
        n_classes = max(labels) + 1
    return Dataset(np.asarray(feats), np.asarray(labels), n_classes)


# -- votes / scores ---------------------------------------------------------

def write_votes(path, table: VoteTable):
    L = table.counts.shape[1]
    header = ["sample_id"] + [f"count_{j}" for j in range(L)]
    rows = ([sid] + [int(c) for c in counts]
            for sid, counts in zip(table.sample_ids, table.counts))
    _write_rows(path, header, rows)


def read_votes(path) -> VoteTable:
    header, rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: vote table has no rows")
    width = len(header)
    ids, counts = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise FormatError(
                f"{path} line {lineno}: expected {width} fields, got {len(row)}")
        ids.append(row[0])
        counts.append([_cell(path, lineno, v, int, "count") for v in row[1:]])
    counts = np.asarray(counts, dtype=np.int64)
    totals = set(counts.sum(axis=1).tolist())
    if len(totals) != 1:
        raise FormatError(f"{path}: rows disagree on the instance count {totals}")
    return VoteTable(tuple(ids), counts, int(totals.pop()))


def write_scores(path, table: ScoreTable):
    L = table.scores.shape[2]
    header = ["sample_id", "instance_id"] + [f"score_{j}" for j in range(L)]
    rows = ([sid, inst] + [repr(float(v)) for v in row]
            for sid, block in zip(table.sample_ids, table.scores)
            for inst, row in enumerate(block))
    _write_rows(path, header, rows)


def read_scores(path) -> ScoreTable:
    header, rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: score table has no rows")
    width = len(header)
    by_sample = {}
    order = []
    for lineno, row in rows:
        if len(row) != width:
            raise FormatError(
                f"{path} line {lineno}: expected {width} fields, got {len(row)}")
        sid = row[0]
        _cell(path, lineno, row[1], int, "instance_id")
        vals = [_cell(path, lineno, v, float, "score") for v in row[2:]]
        if sid not in by_sample:
            by_sample[sid] = []
            order.append(sid)
        by_sample[sid].append(vals)
    lengths = {len(v) for v in by_sample.values()}
    if len(lengths) != 1:
        raise FormatError(f"{path}: samples disagree on the instance count")
    scores = np.asarray([by_sample[sid] for sid in order])
    return ScoreTable(tuple(order), scores)


# -- certificates / curve / truth -------------------------------------------

def write_certificates(path, certs):
    header = ["sample_id", "predicted", "radius", "abstain"]
    rows = ([c.sample_id, c.predicted_label,
             "" if c.abstain else c.radius, int(c.abstain)] for c in certs)
    _write_rows(path, header, rows)


def read_certificates(path, eta=0.5, method=Method.RDP_MULTINOMIAL):
    """Certificates from CSV; eta/method are not stored in the file and may
    be supplied for bookkeeping."""
    _, rows = _read_rows(path, expected_width=4)
    certs = []
    for lineno, row in rows:
        abstain = _cell(path, lineno, row[3], int, "abstain")
        if abstain not in (0, 1):
            raise FormatError(f"{path} line {lineno}: abstain must be 0 or 1")
        if abstain:
            radius = None
            if row[2] != "":
                raise FormatError(
                    f"{path} line {lineno}: abstaining rows must leave radius empty")
        else:
            radius = _cell(path, lineno, row[2], int, "radius")
        certs.append(Certificate(row[0],
                                 _cell(path, lineno, row[1], int, "predicted"),
                                 radius, eta, method))
    return certs


def write_curve(path, curve: CertifiedAccuracyCurve):
    _write_rows(path, ["radius", "certified_accuracy"],
                ((r, repr(float(a))) for r, a in zip(curve.radii, curve.accuracy)))


def write_truth(path, sample_ids, labels):
    _write_rows(path, ["sample_id", "label"],
                ((sid, int(lab)) for sid, lab in zip(sample_ids, labels)))


def read_truth(path) -> dict:
    _, rows = _read_rows(path, expected_width=2)
    truth = {}
    for lineno, row in rows:
        truth[row[0]] = _cell(path, lineno, row[1], int, "label")
    return truth


def write_flip_report(path, report):
    _write_rows(path,
                ["sample_id", "certified_radius", "tested_radius", "trials",
                 "flip_count", "neighbor_count"],
                [[report.sample_id,
                  "" if report.certified_radius is None else report.certified_radius,
                  report.tested_radius, report.trials, report.flip_count,
                  report.neighbor_count]])


# -- ensemble directory -------------------------------------------------------

def save_ensemble(directory, ensemble: Ensemble):
    os.makedirs(directory, exist_ok=True)
    meta = {
        "q": repr(ensemble.params.q),
        "sigma": repr(ensemble.params.sigma),
        "steps": ensemble.params.steps,
        "clip": repr(ensemble.params.clip),
        "architecture": ensemble.architecture,
        "seed": ensemble.master_seed,
        "instances": len(ensemble),
        "n_features": ensemble.n_features,
        "n_classes": ensemble.n_classes,
        "hidden": ensemble.hidden,
        "subset_size": "none" if ensemble.subset_size is None else ensemble.subset_size,
        "train_size": "none" if ensemble.train_size is None else ensemble.train_size,
        "lr": repr(ensemble.lr),
        "optimizer": ensemble.optimizer,
        # noise is added to the clipped gradient sum, then the sum is
        # normalised by the expected batch size q*n
        "noise_applied": "sum_before_normalization",
    }
    with open(os.path.join(directory, "manifest.txt"), "w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")
    for i, inst in enumerate(ensemble.instances):
        np.save(os.path.join(directory, f"instance_{i:05d}.npy"),
                inst.parameters)
        with open(os.path.join(directory, f"instance_{i:05d}.seed"), "w",
                  encoding="utf-8") as fh:
            fh.write(f"{inst.seed}\n")


def load_ensemble(directory) -> Ensemble:
    manifest_path = os.path.join(directory, "manifest.txt")
    meta = {}
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{manifest_path} line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            meta[key] = value
    params = PrivacyParams(float(meta["q"]), float(meta["sigma"]),
                           int(meta["steps"]), float(meta["clip"]))
    count = int(meta["instances"])
    instances = []
    for i in range(count):
        vec = np.load(os.path.join(directory, f"instance_{i:05d}.npy"))
        with open(os.path.join(directory, f"instance_{i:05d}.seed"),
                  encoding="utf-8") as fh:
            seed = int(fh.read().strip())
        instances.append(ModelInstance(vec, meta["architecture"], seed))
    subset = meta.get("subset_size", "none")
    train_size = meta.get("train_size", "none")
    return Ensemble(
        instances, params, meta["architecture"], int(meta["n_features"]),
        int(meta["n_classes"]), int(meta["hidden"]), int(meta["seed"]),
        None if subset == "none" else int(subset),
        float(meta.get("lr", 0.01)), meta.get("optimizer", "adam"),
        None if train_size == "none" else int(train_size))


# -- run manifest -------------------------------------------------------------

def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_manifest(path, config_text: str, input_paths: dict,
                       outputs: dict | None = None):
    """Reproducibility record: config snapshot, input digests, tool version
    and a wall-clock stamp (the stamp is the only non-deterministic field)."""
    buf = io.StringIO()
    buf.write(f"tool_version={__version__}\n")
    buf.write(f"timestamp={datetime.now(timezone.utc).isoformat()}\n")
    for name, p in sorted(input_paths.items()):
        buf.write(f"input.{name}.path={p}\n")
        buf.write(f"input.{name}.sha256={sha256_file(p)}\n")
    for name, p in sorted((outputs or {}).items()):
        buf.write(f"output.{name}.path={p}\n")
        buf.write(f"output.{name}.sha256={sha256_file(p)}\n")
    buf.write("config_snapshot_begin\n")
    buf.write(config_text if config_text.endswith("\n") else config_text + "\n")
    buf.write("config_snapshot_end\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
