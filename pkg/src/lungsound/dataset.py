"""Corpus ingestion: filename metadata, diagnosis CSV, stratified splits, and
the binary feature cache.

The corpus layout is a directory of WAV files named
patientid_recordingindex_chestlocation_acquisitionmode_equipment.wav plus a
two-column patient_id,diagnosis CSV. Respiratory-cycle annotation .txt files
sitting next to the audio are recognized and ignored.
"""

from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import audio_io, features
from .errors import (ConfigHashMismatch, DataError, MalformedCsv, MalformedHeader,
                     MalformedName, NoUsableData, UnknownPatient)
from .rng import substream

log = logging.getLogger(__name__)

CLASS_NAMES = ("Bronchiectasis", "Bronchiolitis", "COPD", "Healthy", "Pneumonia", "URTI")
CLASS_IDS = {name: i for i, name in enumerate(CLASS_NAMES)}
UNLABELED = -1  # cache sentinel for records without a usable class

TEST_FRACTION = 0.2


@dataclass(frozen=True)
class RecordingMeta:
    patient_id: int
    recording_index: str
    chest_location: str
    acquisition_mode: str
    equipment: str
    path: str = ""

    @property
    def stem(self) -> str:
        return "_".join([str(self.patient_id), self.recording_index,
                         self.chest_location, self.acquisition_mode, self.equipment])


def parse_filename(stem: str, path: str = "") -> RecordingMeta:
    """Split an underscore-delimited recording stem into its five fields."""
    parts = stem.split("_")
    if len(parts) != 5:
        raise MalformedName(f"{stem!r}: expected 5 underscore-delimited fields, got {len(parts)}")
    try:
        patient_id = int(parts[0])
    except ValueError:
        raise MalformedName(f"{stem!r}: patient id {parts[0]!r} is not an integer") from None
    return RecordingMeta(patient_id, parts[1], parts[2], parts[3], parts[4], path)


def scan_audio_dir(root) -> list:
    """All parseable WAV recordings under root, sorted by stem."""
    metas = []
    for p in sorted(Path(root).iterdir()):
        if p.suffix.lower() != ".wav":
            continue
        metas.append(parse_filename(p.stem, str(p)))
    return metas


def load_diagnoses(csv_path) -> dict:
    """patient_id -> class id, or None for out-of-scope diagnoses.

    Any diagnosis outside the six classes (Asthma, LRTI, ...) maps to None and
    its recordings are dropped later; the count is logged. A non-numeric first
    row is treated as a header.
    """
    mapping = {}
    excluded = 0
    with open(csv_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise MalformedCsv(f"{csv_path}:{lineno + 1}: expected 2 fields, got {len(parts)}")
            try:
                pid = int(parts[0])
            except ValueError:
                if lineno == 0:
                    continue  # header row
                raise MalformedCsv(f"{csv_path}:{lineno + 1}: bad patient id {parts[0]!r}") from None
            cls = CLASS_IDS.get(parts[1])
            if cls is None:
                excluded += 1
            mapping[pid] = cls
    if excluded:
        log.info("diagnosis csv: %d patients with out-of-scope diagnoses excluded", excluded)
    return mapping


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass
class SplitManifest:
    train_labeled: list
    train_unlabeled: list
    test: list
    seed: int
    unlabeled_fraction: float
    stems: dict = field(default_factory=dict)  # recording id -> stem, for audit

    def validate(self) -> None:
        lab, unlab, test = map(set, (self.train_labeled, self.train_unlabeled, self.test))
        if lab & unlab or lab & test or unlab & test:
            raise DataError("split manifest has overlapping subsets")

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.seed,
            "unlabeled_fraction": self.unlabeled_fraction,
            "train_labeled": list(map(int, self.train_labeled)),
            "train_unlabeled": list(map(int, self.train_unlabeled)),
            "test": list(map(int, self.test)),
            "stems": {str(k): v for k, v in self.stems.items()},
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        d = json.loads(text)
        m = cls(train_labeled=d["train_labeled"], train_unlabeled=d["train_unlabeled"],
                test=d["test"], seed=d["seed"], unlabeled_fraction=d["unlabeled_fraction"],
                stems={int(k): v for k, v in d.get("stems", {}).items()})
        m.validate()
        return m

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SplitManifest":
        return cls.from_json(Path(path).read_text())


def make_splits(labels: dict, seed: int, unlabeled_fraction: float,
                stems: dict | None = None, by_patient: bool = False) -> SplitManifest:
    """Per-class stratified split of recording ids.

    `labels` maps recording id -> class id. 20% of each class (nearest
    integer, at least 1 when the class has >= 3 units) goes to test;
    `unlabeled_fraction` of the remainder has its labels withheld for
    training. Deterministic given (labels, seed, fraction).

    The default split unit is the recording. With by_patient=True all
    recordings of one patient travel together (fractions then apply to
    patient counts); this needs `stems` to recover patient ids.
    """
    if not labels:
        raise NoUsableData("no labeled recordings to split")
    if not 0.0 <= unlabeled_fraction < 1.0:
        raise ValueError(f"unlabeled_fraction must be in [0, 1), got {unlabeled_fraction}")
    if by_patient:
        if not stems:
            raise ValueError("by_patient splitting needs recording stems")
        units = {}  # patient id -> (class, [recording ids])
        for rec_id, cls in labels.items():
            pid = parse_filename(stems[rec_id]).patient_id
            units.setdefault(pid, (cls, []))[1].append(rec_id)
    else:
        units = {rec_id: (cls, [rec_id]) for rec_id, cls in labels.items()}

    by_class = {}
    for unit_id, (cls, _) in units.items():
        by_class.setdefault(cls, []).append(unit_id)

    train_labeled, train_unlabeled, test = [], [], []
    for cls in sorted(by_class):
        ids = np.array(sorted(by_class[cls]))
        n = len(ids)
        if n < 3:
            log.warning("class %s has only %d %s; test slice may be empty",
                        CLASS_NAMES[cls] if 0 <= cls < len(CLASS_NAMES) else cls, n,
                        "patients" if by_patient else "recordings")
        order = ids[substream(seed, "split", cls).permutation(n)]
        n_test = _round_half_up(TEST_FRACTION * n)
        if n >= 3:
            n_test = max(1, n_test)
        rest = order[n_test:]
        n_unlab = _round_half_up(unlabeled_fraction * len(rest))
        for unit_id in order[:n_test]:
            test.extend(units[int(unit_id)][1])
        for unit_id in rest[:n_unlab]:
            train_unlabeled.extend(units[int(unit_id)][1])
        for unit_id in rest[n_unlab:]:
            train_labeled.extend(units[int(unit_id)][1])

    manifest = SplitManifest(sorted(map(int, train_labeled)), sorted(map(int, train_unlabeled)),
                             sorted(map(int, test)), seed, unlabeled_fraction,
                             stems=dict(stems or {}))
    manifest.validate()
    return manifest


# -- feature cache ---------------------------------------------------------

_CACHE_MAGIC = b"LSFC"
_CACHE_VERSION = 1
_CACHE_SHAPE = (40, 862)  # the record layout is fixed-shape


def _extract_one(args):
    rec_id, cls, path, cfg = args
    clip = audio_io.load_wav(path)
    clip = audio_io.resample(clip, cfg.sample_rate)
    mat = features.extract_mfcc(clip, cfg).astype("<f4")
    return rec_id, cls, mat


def build_feature_cache(entries, cfg: features.MfccConfig, out_path, jobs: int = 1):
    """Extract features for (recording id, class id, wav path) entries.

    Writes the binary cache (records sorted by recording id) and returns the
    list of per-file failures as (recording id, path, message). Files that
    fail to decode are skipped, not fatal.
    """
    if (cfg.n_coefficients, cfg.target_frames) != _CACHE_SHAPE:
        raise ValueError(f"cache records are fixed at {_CACHE_SHAPE}, "
                         f"config gives ({cfg.n_coefficients}, {cfg.target_frames})")
    work = [(int(rid), int(cls), path, cfg) for rid, cls, path in entries]
    results, failures = [], []
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            for (rid, cls, path, _), outcome in zip(
                    work, pool.imap(_try_extract, work, chunksize=4)):
                if isinstance(outcome, str):
                    failures.append((rid, path, outcome))
                else:
                    results.append(outcome)
    else:
        for item in work:
            outcome = _try_extract(item)
            if isinstance(outcome, str):
                failures.append((item[0], item[2], outcome))
            else:
                results.append(outcome)
    for rid, path, msg in failures:
        log.warning("skipping recording %d (%s): %s", rid, path, msg)
    results.sort(key=lambda r: r[0])

    stems = {rid: Path(path).stem for rid, _, path, _ in work}
    with open(out_path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<H", _CACHE_VERSION))
        fh.write(cfg.hash_bytes())
        fh.write(struct.pack("<I", len(results)))
        for rid, cls, mat in results:
            fh.write(struct.pack("<Ib", rid, cls))
            fh.write(mat.tobytes())
        trailer = {"stems": {str(r[0]): stems.get(r[0], "") for r in results},
                   "failures": [[rid, path, msg] for rid, path, msg in failures]}
        fh.write(json.dumps(trailer).encode())
    return failures


def _try_extract(args):
    try:
        return _extract_one(args)
    except DataError as exc:
        return f"{type(exc).__name__}: {exc}"


class FeatureCache:
    """In-memory view of a cache file: ids, class ids, and feature matrices."""

    def __init__(self, ids, classes, matrices, config_hash, stems=None, path=None,
                 file_sha256=None):
        self.ids = ids
        self.classes = classes
        self.matrices = matrices
        self.config_hash = config_hash
        self.stems = stems or {}
        self.path = path
        self.file_sha256 = file_sha256
        self._index = {int(r): i for i, r in enumerate(ids)}

    def __len__(self):
        return len(self.ids)

    def matrix(self, rec_id: int) -> np.ndarray:
        try:
            return self.matrices[self._index[int(rec_id)]]
        except KeyError:
            raise UnknownPatient(f"recording {rec_id} not present in cache") from None

    def class_of(self, rec_id: int) -> int:
        try:
            return int(self.classes[self._index[int(rec_id)]])
        except KeyError:
            raise UnknownPatient(f"recording {rec_id} not present in cache") from None

    def gather(self, rec_ids) -> np.ndarray:
        return np.stack([self.matrix(r) for r in rec_ids])

    @classmethod
    def load(cls, path, expected_config: features.MfccConfig | None = None) -> "FeatureCache":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != _CACHE_MAGIC:
            raise MalformedHeader(f"{path}: not a feature cache")
        (version,) = struct.unpack_from("<H", data, 4)
        if version != _CACHE_VERSION:
            raise MalformedHeader(f"{path}: unsupported cache version {version}")
        config_hash = data[6:38]
        if expected_config is not None and config_hash != expected_config.hash_bytes():
            raise ConfigHashMismatch(f"{path}: cache was built with a different feature config")
        (count,) = struct.unpack_from("<I", data, 38)
        n_vals = _CACHE_SHAPE[0] * _CACHE_SHAPE[1]
        rec_bytes = 5 + 4 * n_vals
        pos = 42
        ids = np.empty(count, dtype=np.int64)
        classes = np.empty(count, dtype=np.int64)
        matrices = np.empty((count,) + _CACHE_SHAPE, dtype=np.float32)
        for i in range(count):
            rid, cc = struct.unpack_from("<Ib", data, pos)
            ids[i] = rid
            classes[i] = cc
            matrices[i] = np.frombuffer(data[pos + 5:pos + rec_bytes],
                                        dtype="<f4").reshape(_CACHE_SHAPE)
            pos += rec_bytes
        stems = {}
        if pos < len(data):
            trailer = json.loads(data[pos:].decode())
            stems = {int(k): v for k, v in trailer.get("stems", {}).items()}
        return cls(ids, classes, matrices, config_hash, stems, str(path),
                   file_sha256=hashlib.sha256(data).hexdigest())
