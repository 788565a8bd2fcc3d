"""Training loops for the three model families.

All loops are single-threaded and bit-deterministic given their seed: weight
init, per-epoch shuffling, and every kernel use fixed accumulation orders.
Histories carry one record per completed epoch; the GAN loop additionally
prepends an epoch-0 record evaluated before any update so attenuation
progress is measurable against the starting point.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import models as md
from .autodiff import MemoryBudgetError, Tensor
from .data import Dataset, Sample
from .metrics import Detection, GroundTruth, map50, mask_iou


class MissingLabelError(ValueError):
    """A sample lacks the label kind (mask / pair / boxes) the trainer needs."""


@dataclass
class TrainHistory:
    records: list[dict] = field(default_factory=list)

    def append(self, **record) -> None:
        self.records.append(record)

    def final(self, key: str):
        return self.records[-1][key]

    def series(self, key: str) -> list:
        return [r[key] for r in self.records if key in r]

    def all_finite(self) -> bool:
        return all(
            np.isfinite(v)
            for r in self.records
            for v in r.values()
            if isinstance(v, (int, float))
        )

    def to_csv(self, path: str) -> None:
        if not self.records:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write("")
            return
        keys = list(self.records[0].keys())
        tmp = path + ".tmp"
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            for r in self.records:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        os.replace(tmp, path)


def _to_batch(samples: list[Sample]) -> Tensor:
    return ad.tensor(np.stack([s.image.transpose(2, 0, 1) for s in samples]))


def _mask_batch(samples: list[Sample]) -> np.ndarray:
    return np.stack([s.mask[None].astype(np.float64) for s in samples])


def _pair_batch(samples: list[Sample]) -> Tensor:
    return ad.tensor(np.stack([s.shadow_free.transpose(2, 0, 1) for s in samples]))


def _epoch_batches(n: int, batch: int, rng) -> list[list[int]]:
    order = rng.permutation(n)
    return [list(order[i : i + batch]) for i in range(0, n, batch)]


def check_model_budget(op: str, model, batch: int) -> None:
    """Reject configurations whose activations + parameters + gradients exceed
    the configured memory budget, before any allocation happens."""
    budget = ad.get_memory_budget()
    if budget is None:
        return
    shapes = []
    for layer in model.layer_plan():
        out = layer.get("out")
        if out is not None:
            shapes.append((batch, *out))
    for arr in model.weight_arrays().values():
        shapes.append(arr.shape)
        shapes.append(arr.shape)  # gradient buffer
    needed = ad.estimate_memory(shapes)
    if needed > budget:
        raise MemoryBudgetError(op, needed, budget)


# ---------------------------------------------------------------------------
# segmentation
# ---------------------------------------------------------------------------


@dataclass
class SegTrainResult:
    model: md.EncDecModel
    history: TrainHistory
    best_weights: dict
    best_epoch: int


def _mean_val_iou(model: md.EncDecModel, ds: Dataset, batch: int) -> float:
    vals = []
    for i in range(0, len(ds), batch):
        chunk = ds.samples[i : i + batch]
        pred = model.forward(_to_batch(chunk)).data
        for k, s in enumerate(chunk):
            vals.append(mask_iou(pred[k, 0], s.mask))
    return float(np.mean(vals)) if vals else 0.0


def _snapshot(model) -> dict:
    return {k: v.copy() for k, v in model.weight_arrays().items()}


def train_segmentation(train: Dataset, val: Dataset, spec: md.EncDecSpec,
                       epochs: int = 100, lr: float = 0.05, batch: int = 4,
                       seed: int = 0, momentum: float = 0.9,
                       progress=None) -> SegTrainResult:
    """Train the mask network with per-pixel BCE and SGD-with-momentum."""
    for ds_name, ds in (("train", train), ("val", val)):
        for s in ds.samples:
            if s.mask is None:
                raise MissingLabelError(f"{ds_name} sample {s.id!r} has no mask")
    model = md.EncDecModel(spec, seed=seed)
    check_model_budget("train_segmentation", model, batch)
    params = model.parameters()
    opt = ad.sgd_momentum(params, lr=lr, momentum=momentum)
    shuffle_rng = np.random.default_rng([seed, 1])
    history = TrainHistory()
    best_weights = _snapshot(model)
    best_epoch = 0
    best_iou = -1.0
    n = len(train)
    for epoch in range(1, epochs + 1):
        total = 0.0
        for idxs in _epoch_batches(n, batch, shuffle_rng):
            chunk = [train.samples[i] for i in idxs]
            pred = model.forward(_to_batch(chunk))
            loss = ad.bce_loss(pred, _mask_batch(chunk))
            ad.zero_grad(params)
            ad.backward(loss)
            ad.step(params, opt)
            total += float(loss.data) * len(chunk)
        train_loss = total / n
        val_iou = _mean_val_iou(model, val, batch)
        history.append(epoch=epoch, train_loss=train_loss, val_iou=val_iou)
        if val_iou > best_iou:
            best_iou = val_iou
            best_epoch = epoch
            best_weights = _snapshot(model)
        if progress:
            progress(history.records[-1])
    return SegTrainResult(model, history, best_weights, best_epoch)


# ---------------------------------------------------------------------------
# GAN
# ---------------------------------------------------------------------------


@dataclass
class GanTrainResult:
    model: md.GanModel
    history: TrainHistory
    best_weights: dict
    best_epoch: int


def attenuation_score(gen: md.EncDecModel, ds: Dataset, gain: float, batch: int = 4) -> float:
    """Mean luminance lift inside ground-truth shadow regions minus outside."""
    scores = []
    for i in range(0, len(ds), batch):
        chunk = ds.samples[i : i + batch]
        x = _to_batch(chunk)
        m = gen.forward(x)
        out = md.apply_attenuation(x, m, gain)
        lift = (out.data - x.data).mean(axis=1)  # luminance = RGB mean
        for k, s in enumerate(chunk):
            inside = s.mask.astype(bool)
            if inside.any() and (~inside).any():
                scores.append(float(lift[k][inside].mean() - lift[k][~inside].mean()))
    return float(np.mean(scores)) if scores else 0.0


def mean_mask_value(gen: md.EncDecModel, ds: Dataset, batch: int = 4) -> float:
    vals = []
    for i in range(0, len(ds), batch):
        chunk = ds.samples[i : i + batch]
        vals.append(float(gen.forward(_to_batch(chunk)).data.mean()))
    return float(np.mean(vals)) if vals else 0.0


def _gan_eval_losses(model: md.GanModel, ds: Dataset, batch: int) -> tuple[float, float]:
    gain = model.spec.gain
    lam = model.spec.sparsity_weight
    d_total = g_total = 0.0
    n = 0
    for i in range(0, len(ds), batch):
        chunk = ds.samples[i : i + batch]
        x = _to_batch(chunk)
        real = _pair_batch(chunk)
        m = model.generator.forward(x)
        fake = md.apply_attenuation(x, m, gain)
        d_fake = model.discriminator.forward(fake.detach())
        d_real = model.discriminator.forward(real)
        d_loss = float(ad.bce_loss(d_real, 1.0).data) + float(ad.bce_loss(d_fake, 0.0).data)
        d_fake_g = model.discriminator.forward(fake)
        g_loss = float(ad.bce_loss(d_fake_g, 1.0).data) + lam * float(m.data.mean())
        d_total += d_loss * len(chunk)
        g_total += g_loss * len(chunk)
        n += len(chunk)
    return d_total / max(n, 1), g_total / max(n, 1)


def train_gan(train: Dataset, spec: md.GanSpec, epochs: int = 100, lr: float = 2e-3,
              batch: int = 4, seed: int = 0, val: Dataset | None = None,
              progress=None) -> GanTrainResult:
    """Alternating discriminator/generator steps with Adam (beta1 = 0.5).

    The discriminator maximizes log D(shadow-free) + log(1 - D(attenuated));
    the generator minimizes the non-saturating -log D(attenuated) plus the
    sparsity penalty lambda * mean(mask).
    """
    for s in train.samples:
        if s.shadow_free is None:
            raise MissingLabelError(f"train sample {s.id!r} has no shadow-free pair")
    eval_ds = val if val is not None and len(val) else train
    for s in eval_ds.samples:
        if s.mask is None:
            raise MissingLabelError(f"eval sample {s.id!r} has no mask")
    model = md.GanModel(spec, seed=seed)
    check_model_budget("train_gan", model, batch)
    g_params = model.generator.parameters()
    d_params = model.discriminator.parameters()
    g_opt = ad.adam(g_params, lr=lr, beta1=0.5)
    d_opt = ad.adam(d_params, lr=lr, beta1=0.5)
    gain = spec.gain
    lam = spec.sparsity_weight
    shuffle_rng = np.random.default_rng([seed, 1])
    history = TrainHistory()

    d0, g0 = _gan_eval_losses(model, eval_ds, batch)
    score0 = attenuation_score(model.generator, eval_ds, gain, batch)
    history.append(epoch=0, d_loss=d0, g_loss=g0, att_score=score0)
    best_weights = _snapshot(model)
    best_epoch = 0
    best_score = score0

    n = len(train)
    for epoch in range(1, epochs + 1):
        d_total = g_total = 0.0
        for idxs in _epoch_batches(n, batch, shuffle_rng):
            chunk = [train.samples[i] for i in idxs]
            x = _to_batch(chunk)
            real = _pair_batch(chunk)

            m = model.generator.forward(x)
            fake = md.apply_attenuation(x, m, gain)

            # discriminator step on detached fakes
            d_fake = model.discriminator.forward(fake.detach())
            d_real = model.discriminator.forward(real)
            d_loss = ad.add(ad.bce_loss(d_real, 1.0), ad.bce_loss(d_fake, 0.0))
            ad.zero_grad(d_params)
            ad.backward(d_loss)
            ad.step(d_params, d_opt)

            # generator step against the updated discriminator
            d_fake_g = model.discriminator.forward(fake)
            g_loss = ad.add(
                ad.bce_loss(d_fake_g, 1.0), ad.scale(ad.reduce_mean(m), lam)
            )
            ad.zero_grad(g_params + d_params)
            ad.backward(g_loss)
            ad.step(g_params, g_opt)
            ad.zero_grad(g_params + d_params)

            d_total += float(d_loss.data) * len(chunk)
            g_total += float(g_loss.data) * len(chunk)
        score = attenuation_score(model.generator, eval_ds, gain, batch)
        history.append(
            epoch=epoch, d_loss=d_total / n, g_loss=g_total / n, att_score=score
        )
        if score > best_score:
            best_score = score
            best_epoch = epoch
            best_weights = _snapshot(model)
        if progress:
            progress(history.records[-1])
    return GanTrainResult(model, history, best_weights, best_epoch)


# ---------------------------------------------------------------------------
# detector
# ---------------------------------------------------------------------------


@dataclass
class DetTrainResult:
    model: md.DetectorModel
    history: TrainHistory
    best_weights: dict
    best_epoch: int


def dataset_ground_truth(ds: Dataset) -> list[GroundTruth]:
    return [
        GroundTruth(s.id, b.x, b.y, b.w, b.h, b.class_id)
        for s in ds.samples
        for b in s.boxes
    ]


def detect_dataset(model: md.DetectorModel, ds: Dataset, conf_threshold: float = 0.05,
                   nms_iou: float = 0.5, batch: int = 4) -> list[Detection]:
    """Run the detector over a dataset: decode plus per-image NMS."""
    dets: list[Detection] = []
    for i in range(0, len(ds), batch):
        chunk = ds.samples[i : i + batch]
        raw = model.forward(_to_batch(chunk)).data
        decoded = md.decode_predictions(
            model.spec, raw, conf_threshold, image_ids=[s.id for s in chunk]
        )
        dets.extend(md.nms(decoded, nms_iou))
    return dets


def _val_map50(model: md.DetectorModel, ds: Dataset, batch: int) -> float:
    gts = dataset_ground_truth(ds)
    dets = detect_dataset(model, ds, batch=batch)
    if not gts and not dets:
        return 1.0
    if not gts or not dets:
        return 0.0
    return map50(dets, gts)


def train_detector(train: Dataset, val: Dataset, spec: md.DetectorSpec,
                   epochs: int = 100, lr: float = 0.05, batch: int = 4,
                   seed: int = 0, momentum: float = 0.9,
                   progress=None) -> DetTrainResult:
    """Train the grid detector with the composite objectness/box/class loss."""
    size = spec.size
    for s in train.samples:
        for b in s.boxes:
            if b.x < 0 or b.y < 0 or b.x + b.w > size or b.y + b.h > size:
                raise MissingLabelError(f"train sample {s.id!r}: box {b} out of bounds")
    model = md.DetectorModel(spec, seed=seed)
    check_model_budget("train_detector", model, batch)
    params = model.parameters()
    opt = ad.sgd_momentum(params, lr=lr, momentum=momentum)
    shuffle_rng = np.random.default_rng([seed, 1])
    encoded = [md.encode_targets(spec, s.boxes) for s in train.samples]
    history = TrainHistory()
    best_weights = _snapshot(model)
    best_epoch = 0
    best_map = -1.0
    n = len(train)
    for epoch in range(1, epochs + 1):
        total = 0.0
        for idxs in _epoch_batches(n, batch, shuffle_rng):
            chunk = [train.samples[i] for i in idxs]
            targets = np.stack([encoded[i][0] for i in idxs])
            resp = np.stack([encoded[i][1] for i in idxs])
            raw = model.forward(_to_batch(chunk))
            sig = ad.sigmoid(raw)
            loss = md.detector_training_loss(sig, targets, resp)
            ad.zero_grad(params)
            ad.backward(loss)
            ad.step(params, opt)
            total += float(loss.data) * len(chunk)
        train_loss = total / n
        val_map = _val_map50(model, val, batch)
        history.append(epoch=epoch, train_loss=train_loss, val_map50=val_map)
        if val_map > best_map:
            best_map = val_map
            best_epoch = epoch
            best_weights = _snapshot(model)
        if progress:
            progress(history.records[-1])
    return DetTrainResult(model, history, best_weights, best_epoch)
