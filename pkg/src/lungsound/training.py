"""Training schedules.

Baseline mode is plain supervised training on the labeled split with a
validation slice, early stopping, and best-checkpoint restoration. Semi mode
runs, per epoch: one mixmatch pass over paired labeled/unlabeled batches,
then one co-refinement pass, then one co-refurbishing pass, and after the
loop fine-tunes on the full labeled set with the same validation machinery.
Ablations skip the selected co passes.

All randomness flows from the single config seed through named substreams
keyed by (epoch, pass, batch), so runs replay exactly and independent stages
never perturb each other.
"""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn, ssl
from .dataset import FeatureCache, SplitManifest
from .errors import NonFiniteLoss, NoUsableData
from .rng import substream

log = logging.getLogger(__name__)

# pass ids keying the batch/dropout streams; supervised epochs share the
# mixmatch slot so a fully neutralized semi epoch replays a supervised one
PASS_MAIN = 0
PASS_CO_REFINEMENT = 1
PASS_CO_REFURBISHING = 2

VALID_DROPS = {"co_refinement", "co_refurbishing", "both"}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    refit_epochs: int = 60            # cap for the final supervised fine-tune (semi mode)
    batch_size: int = 16
    mode: str = "baseline"            # "baseline" or "semi"
    ssl: ssl.SslConfig = field(default_factory=ssl.SslConfig)
    learning_rate: float = 1e-3
    seed: int = 0
    early_stop_patience: int = 10
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("need epochs >= 0 and batch_size >= 1")
        if not 0.0 <= self.validation_fraction < 0.5:
            raise ValueError("validation_fraction must be in [0, 0.5)")
        if self.mode not in ("baseline", "semi"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class RunManifest:
    mode: str
    seed: int
    ablation: str | None
    config: dict
    cache_path: str | None
    split_seed: int
    feature_config_hash: str | None = None
    cache_sha256: str | None = None
    epoch_rows: list = field(default_factory=list)
    schedule: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    checkpoint_path: str | None = None
    best_epoch: int | None = None
    final_val_accuracy: float | None = None
    aborted: dict | None = None
    normalizer: dict | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


def one_hot(labels, n_classes: int = nn.N_CLASSES) -> np.ndarray:
    return np.eye(n_classes, dtype=np.float32)[np.asarray(labels, dtype=np.int64)]


@dataclass
class FeatureNormalizer:
    """Per-coefficient standardization fitted on the training pools.

    Raw log-energy cepstra span hundreds of units, which saturates the
    network from the first forward pass; every input is therefore z-scored
    per coefficient row before training and inference. The statistics travel
    with the checkpoint so evaluation applies the identical transform.
    """

    mean: np.ndarray  # (n_coefficients,)
    std: np.ndarray

    @classmethod
    def fit(cls, mats: np.ndarray) -> "FeatureNormalizer":
        mean = mats.mean(axis=(0, 2), dtype=np.float64)
        std = mats.std(axis=(0, 2), dtype=np.float64)
        return cls(mean=mean, std=np.maximum(std, 1e-6))

    def apply(self, mats: np.ndarray) -> np.ndarray:
        return ((mats - self.mean[:, None]) / self.std[:, None]).astype(np.float32)

    def to_meta(self) -> dict:
        return {"norm_mean": self.mean.tolist(), "norm_std": self.std.tolist()}

    @classmethod
    def from_meta(cls, meta: dict) -> "FeatureNormalizer":
        return cls(mean=np.asarray(meta["norm_mean"], dtype=np.float64),
                   std=np.asarray(meta["norm_std"], dtype=np.float64))


def predict_batch(params: nn.ModelParams, xs: np.ndarray, chunk: int = 32) -> np.ndarray:
    """Inference-mode class predictions for a stack of feature matrices."""
    out = []
    for i in range(0, len(xs), chunk):
        probs, _ = nn.forward_batch(params, xs[i:i + chunk], training=False, keep_trace=False)
        out.append(probs.argmax(axis=1))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _accuracy(params, xs, ys) -> float:
    return float((predict_batch(params, xs) == np.asarray(ys)).mean())


def _batches(order: np.ndarray, batch_size: int):
    for i in range(0, len(order), batch_size):
        yield order[i:i + batch_size]


@contextmanager
def _numeric_context(epoch: int, batch: int):
    """Attach the offending epoch/batch to numerical failures."""
    try:
        yield
    except NonFiniteLoss as exc:
        raise NonFiniteLoss(f"epoch {epoch}, batch {batch}: {exc}") from None


def _stratified_validation(ids, classes, fraction, seed):
    """Split ids into (fit, val) keeping per-class proportions."""
    ids = np.asarray(ids)
    if fraction <= 0 or len(ids) == 0:
        return ids, ids[:0]
    fit, val = [], []
    for cls in np.unique(classes):
        members = ids[classes == cls]
        order = members[substream(seed, "val", int(cls)).permutation(len(members))]
        n_val = int(np.floor(fraction * len(members) + 0.5))
        val.extend(order[:n_val])
        fit.extend(order[n_val:])
    return np.array(sorted(fit)), np.array(sorted(val))


def _ramp_weight(cfg: TrainConfig, epoch: int) -> float:
    """Unlabeled-loss weight, ramped linearly over the first epochs."""
    ramp = max(1, int(round(cfg.ssl.ramp_fraction * cfg.epochs)))
    return cfg.ssl.unlabeled_loss_weight * min(1.0, (epoch + 1) / ramp)


def run_supervised_epoch(params, opt_state, xs, ys_onehot, cfg: TrainConfig, epoch: int):
    """One pass of cross-entropy steps over shuffled batches; returns mean loss."""
    order = substream(cfg.seed, "batch", epoch, PASS_MAIN).permutation(len(xs))
    total, n = 0.0, 0
    for b, batch in enumerate(_batches(order, cfg.batch_size)):
        drop_rng = substream(cfg.seed, "dropout", epoch, PASS_MAIN, b)
        with _numeric_context(epoch, b):
            _, _, losses = nn.weighted_gradient_step(
                params, opt_state,
                [(1.0, xs[batch], ys_onehot[batch], "cross_entropy", drop_rng)],
                lr=cfg.learning_rate)
        total += losses[0] * len(batch)
        n += len(batch)
    return total / max(n, 1)


def run_mixmatch_epoch(params, opt_state, xs_lab, ys_onehot, xs_unlab,
                       cfg: TrainConfig, epoch: int):
    """One mixmatch pass: paired labeled/unlabeled batches, mixed and stepped.

    The unlabeled sequence cycles when shorter than the labeled one; epoch
    length is the labeled batch count. Returns mean (supervised, unlabeled)
    loss components.
    """
    lu_eff = _ramp_weight(cfg, epoch)
    order = substream(cfg.seed, "batch", epoch, PASS_MAIN).permutation(len(xs_lab))
    if len(xs_unlab):
        u_order = substream(cfg.seed, "unlabeled", epoch, PASS_MAIN).permutation(len(xs_unlab))
        u_order = np.resize(u_order, len(xs_lab))
    sup_total, unsup_total, n = 0.0, 0.0, 0
    u_pos = 0
    for b, batch in enumerate(_batches(order, cfg.batch_size)):
        rng_aug = substream(cfg.seed, "augment", epoch, b)
        rng_mix = substream(cfg.seed, "mixup", epoch, b)
        drop_rng = substream(cfg.seed, "dropout", epoch, PASS_MAIN, b)
        if len(xs_unlab):
            u_batch_ids = u_order[u_pos:u_pos + len(batch)]
            u_pos += len(batch)
            unlabeled = xs_unlab[u_batch_ids]
        else:
            unlabeled = xs_unlab[:0]
        x_mix, u_mix = ssl.mixmatch(xs_lab[batch], ys_onehot[batch], unlabeled,
                                    params, cfg.ssl, rng_aug, rng_mix)
        terms = [(1.0, np.stack(x_mix.inputs), np.stack(x_mix.targets),
                  "cross_entropy", drop_rng)]
        if len(u_mix) and lu_eff > 0:
            terms.append((lu_eff, np.stack(u_mix.inputs), np.stack(u_mix.targets),
                          "squared_error", drop_rng))
        with _numeric_context(epoch, b):
            _, _, losses = nn.weighted_gradient_step(params, opt_state, terms,
                                                     cfg.learning_rate)
        sup_total += losses[0] * len(batch)
        unsup_total += (losses[1] if len(losses) > 1 else 0.0) * len(batch)
        n += len(batch)
    return sup_total / max(n, 1), unsup_total / max(n, 1)


def _run_co_pass(params, opt_state, xs_lab, ys_onehot, xs_unlab, cfg: TrainConfig,
                 epoch: int, pass_id: int):
    """Shared batch loop for the co-refinement / co-refurbishing passes."""
    order = substream(cfg.seed, "batch", epoch, pass_id).permutation(len(xs_lab))
    if len(xs_unlab):
        u_order = substream(cfg.seed, "unlabeled", epoch, pass_id).permutation(len(xs_unlab))
        u_order = np.resize(u_order, len(xs_lab))
    total, n = 0.0, 0
    u_pos = 0
    for b, batch in enumerate(_batches(order, cfg.batch_size)):
        drop_rng = substream(cfg.seed, "dropout", epoch, pass_id, b)
        if len(xs_unlab):
            unlabeled = xs_unlab[u_order[u_pos:u_pos + len(batch)]]
            u_pos += len(batch)
        else:
            unlabeled = xs_unlab[:0]
        with _numeric_context(epoch, b):
            if pass_id == PASS_CO_REFINEMENT:
                _, _, losses = ssl.co_refinement_step(
                    params, opt_state, xs_lab[batch], ys_onehot[batch], unlabeled,
                    cfg.ssl.refinement_weight, drop_rng, lr=cfg.learning_rate)
            else:
                ref_rng = substream(cfg.seed, "refurbish", epoch, b)
                _, _, losses = ssl.co_refurbishing_step(
                    params, opt_state, xs_lab[batch], ys_onehot[batch], unlabeled,
                    cfg.ssl.refurbish_weight, cfg.ssl.refurbish_fraction,
                    ref_rng, drop_rng, lr=cfg.learning_rate)
        total += losses[0] * len(batch)
        n += len(batch)
    return total / max(n, 1)


class _EarlyStopper:
    """Tracks best validation accuracy; restores the best parameter snapshot."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_acc = -1.0
        self.best_epoch = -1
        self.best_params = None
        self.stale = 0

    def update(self, epoch: int, acc: float, params: nn.ModelParams) -> bool:
        """Record epoch result; True when training should stop."""
        if acc > self.best_acc:
            self.best_acc = acc
            self.best_epoch = epoch
            self.best_params = params.copy()
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def _prepare(cache: FeatureCache, split: SplitManifest):
    """Gather and standardize the training pools.

    The normalizer is always fitted on labeled plus unlabeled training
    features (both are available at train time in every mode) so baseline
    and semi runs see bit-identical inputs.
    """
    split.validate()
    lab_ids = np.asarray(split.train_labeled, dtype=np.int64)
    if len(lab_ids) == 0:
        raise NoUsableData("split has no labeled training recordings")
    xs_lab = cache.gather(lab_ids)
    ys_lab = np.array([cache.class_of(r) for r in lab_ids], dtype=np.int64)
    if (ys_lab < 0).any():
        raise NoUsableData("labeled split contains recordings without a class")
    xs_unlab = (cache.gather(split.train_unlabeled)
                if len(split.train_unlabeled) else xs_lab[:0])
    norm = FeatureNormalizer.fit(np.concatenate([xs_lab, xs_unlab])
                                 if len(xs_unlab) else xs_lab)
    return lab_ids, norm.apply(xs_lab), ys_lab, norm.apply(xs_unlab), norm


def _supervised_phase(params, opt_state, xs_fit, ys_fit, xs_val, ys_val, cfg,
                      max_epochs, epoch_offset, phase, rows, schedule):
    """Supervised epochs with optional validation-based early stopping."""
    onehot = one_hot(ys_fit)
    stopper = _EarlyStopper(cfg.early_stop_patience)
    validate = len(xs_val) > 0
    for e in range(max_epochs):
        epoch = epoch_offset + e
        loss = run_supervised_epoch(params, opt_state, xs_fit, onehot, cfg, epoch)
        row = {"epoch": epoch, "phase": phase, "loss": loss}
        schedule.append({"epoch": epoch, "passes": ["supervised"]})
        if validate:
            acc = _accuracy(params, xs_val, ys_val)
            row["val_accuracy"] = acc
            rows.append(row)
            if stopper.update(epoch, acc, params):
                break
        else:
            rows.append(row)
    if validate and stopper.best_params is not None:
        for dst, src in zip(params.arrays(), stopper.best_params.arrays()):
            dst[:] = src
        return stopper.best_epoch, stopper.best_acc
    return epoch_offset + max_epochs - 1 if max_epochs else None, None


def _finish(manifest, t0, params, out_dir, tag, norm):
    manifest.wall_clock_s = time.monotonic() - t0
    manifest.normalizer = norm.to_meta()
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ckpt = out / f"{tag}.lsnn"
        meta = {"seed": manifest.seed, "mode": manifest.mode,
                "ablation": manifest.ablation, "best_epoch": manifest.best_epoch,
                "config_hash": manifest.feature_config_hash}
        meta.update(norm.to_meta())
        nn.save_checkpoint(ckpt, params, meta)
        manifest.checkpoint_path = str(ckpt)
        manifest.save(out / f"{tag}-manifest.json")
    return params, manifest


def _abort(manifest, t0, out_dir, tag, epoch, exc):
    manifest.aborted = {"epoch": epoch, "error": str(exc)}
    manifest.wall_clock_s = time.monotonic() - t0
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest.save(out / f"{tag}-manifest.json")


def train_baseline(cfg: TrainConfig, cache: FeatureCache, split: SplitManifest,
                   out_dir=None):
    """Supervised training on the labeled split; returns (params, manifest)."""
    t0 = time.monotonic()
    lab_ids, xs_lab, ys_lab, _, norm = _prepare(cache, split)
    fit_ids, val_ids = _stratified_validation(lab_ids, ys_lab, cfg.validation_fraction,
                                              cfg.seed)
    idx = {int(r): i for i, r in enumerate(lab_ids)}
    fit_sel = np.array([idx[int(r)] for r in fit_ids], dtype=np.int64)
    val_sel = np.array([idx[int(r)] for r in val_ids], dtype=np.int64)

    params = nn.init_params(substream(cfg.seed, "init"))
    opt_state = nn.AdamState.for_params(params)
    manifest = RunManifest(mode="baseline", seed=cfg.seed, ablation=None,
                           config=_config_dict(cfg), cache_path=cache.path,
                           split_seed=split.seed,
                           feature_config_hash=cache.config_hash.hex(),
                           cache_sha256=cache.file_sha256)
    tag = f"baseline-seed{cfg.seed}"
    try:
        best_epoch, best_acc = _supervised_phase(
            params, opt_state, xs_lab[fit_sel], ys_lab[fit_sel],
            xs_lab[val_sel], ys_lab[val_sel], cfg, cfg.epochs, 0, "supervised",
            manifest.epoch_rows, manifest.schedule)
    except NonFiniteLoss as exc:
        _abort(manifest, t0, out_dir, tag, len(manifest.epoch_rows), exc)
        raise
    manifest.best_epoch = best_epoch
    manifest.final_val_accuracy = best_acc
    return _finish(manifest, t0, params, out_dir, tag, norm)


def train_semi(cfg: TrainConfig, cache: FeatureCache, split: SplitManifest,
               out_dir=None, drop: str | None = None):
    """Semi-supervised schedule; returns (params, manifest).

    Per epoch: mixmatch pass, then co-refinement, then co-refurbishing (the
    `drop` selector skips co passes); afterwards a supervised fine-tune on the
    labeled split with validation early stopping and a fresh optimizer state.
    """
    if drop is not None and drop not in VALID_DROPS:
        raise ValueError(f"drop must be one of {sorted(VALID_DROPS)}, got {drop!r}")
    dropped = {"co_refinement", "co_refurbishing"} if drop == "both" else {drop} - {None}

    t0 = time.monotonic()
    lab_ids, xs_lab, ys_lab, xs_unlab, norm = _prepare(cache, split)
    fit_ids, val_ids = _stratified_validation(lab_ids, ys_lab, cfg.validation_fraction,
                                              cfg.seed)
    idx = {int(r): i for i, r in enumerate(lab_ids)}
    fit_sel = np.array([idx[int(r)] for r in fit_ids], dtype=np.int64)
    val_sel = np.array([idx[int(r)] for r in val_ids], dtype=np.int64)
    xs_fit, ys_fit = xs_lab[fit_sel], ys_lab[fit_sel]
    xs_val, ys_val = xs_lab[val_sel], ys_lab[val_sel]
    onehot_fit = one_hot(ys_fit)

    params = nn.init_params(substream(cfg.seed, "init"))
    opt_state = nn.AdamState.for_params(params)
    manifest = RunManifest(mode="semi", seed=cfg.seed, ablation=drop,
                           config=_config_dict(cfg), cache_path=cache.path,
                           split_seed=split.seed,
                           feature_config_hash=cache.config_hash.hex(),
                           cache_sha256=cache.file_sha256)
    tag = f"semi{'-drop-' + drop if drop else ''}-seed{cfg.seed}"

    try:
        for e in range(cfg.epochs):
            passes = []
            sup, unsup = run_mixmatch_epoch(params, opt_state, xs_fit, onehot_fit,
                                            xs_unlab, cfg, e)
            passes.append("mixmatch")
            row = {"epoch": e, "phase": "ssl", "mixmatch_ce": sup, "mixmatch_mse": unsup,
                   "unlabeled_weight": _ramp_weight(cfg, e)}
            if "co_refinement" not in dropped:
                row["co_refinement_ce"] = _run_co_pass(params, opt_state, xs_fit, onehot_fit,
                                                       xs_unlab, cfg, e, PASS_CO_REFINEMENT)
                passes.append("co_refinement")
            if "co_refurbishing" not in dropped:
                row["co_refurbishing_ce"] = _run_co_pass(params, opt_state, xs_fit, onehot_fit,
                                                         xs_unlab, cfg, e, PASS_CO_REFURBISHING)
                passes.append("co_refurbishing")
            if len(xs_val):
                row["val_accuracy"] = _accuracy(params, xs_val, ys_val)
            manifest.epoch_rows.append(row)
            manifest.schedule.append({"epoch": e, "passes": passes})
            log.info("ssl epoch %d: %s", e, row)

        if cfg.refit_epochs > 0:
            refit_opt = nn.AdamState.for_params(params)  # fresh optimizer state
            best_epoch, best_acc = _supervised_phase(
                params, refit_opt, xs_fit, ys_fit, xs_val, ys_val, cfg,
                cfg.refit_epochs, cfg.epochs, "refit",
                manifest.epoch_rows, manifest.schedule)
            manifest.best_epoch = best_epoch
            manifest.final_val_accuracy = best_acc
    except NonFiniteLoss as exc:
        _abort(manifest, t0, out_dir, tag, len(manifest.epoch_rows), exc)
        raise
    return _finish(manifest, t0, params, out_dir, tag, norm)


def ablate(cfg: TrainConfig, cache: FeatureCache, split: SplitManifest, drop: str,
           out_dir=None):
    """train_semi with the selected co pass(es) skipped."""
    if drop not in VALID_DROPS:
        raise ValueError(f"drop must be one of {sorted(VALID_DROPS)}, got {drop!r}")
    return train_semi(cfg, cache, split, out_dir=out_dir, drop=drop)


def _config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def evaluate_split(params: nn.ModelParams, cache: FeatureCache, split: SplitManifest,
                   norm: FeatureNormalizer | None = None):
    """(true labels, predicted labels) over the manifest's test recordings.

    `norm` must be the normalizer the model was trained with; when omitted,
    it is refitted on the training pools of the same split, which reproduces
    the training-time statistics exactly.
    """
    if not split.test:
        raise NoUsableData("split has no test recordings")
    if norm is None:
        _, _, _, _, norm = _prepare(cache, split)
    xs = norm.apply(cache.gather(split.test))
    ys = np.array([cache.class_of(r) for r in split.test], dtype=np.int64)
    return ys, predict_batch(params, xs)
