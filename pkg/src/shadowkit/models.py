"""The three model families: encoder-decoder mask network, GAN shadow
attenuator, and a single-shot grid detector, plus decoding/NMS and JSON
serialization.

Architectures follow the shape contracts in their spec dataclasses:

* encoder-decoder: 3x3 convolutions with a doubling channel ladder ending at
  128 filters, 2x maxpool between encoder stages, nearest-2x upsample before
  each decoder stage, and a 1x1 sigmoid head producing a 1-channel mask the
  size of the input. No skip connections.
* discriminator: stride-2 convolution ladder, flatten, one fully connected
  unit, sigmoid scalar per image.
* detector: stride-2 convolution ladder down to an SxS grid and a 1x1 head
  emitting (tx, ty, tw, th, to, tc_1..tc_C) per cell. Boxes decode with
  sigmoid offsets relative to the cell and sigmoid-scaled width/height.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeMismatchError, Tensor
from .data import Box
from .metrics import Detection, iou


@dataclass(frozen=True)
class EncDecSpec:
    size: int = 64
    channels: tuple[int, ...] = (16, 32, 64, 128)
    kernel: int = 3
    leaky_slope: float = 0.1
    in_channels: int = 3

    def __post_init__(self):
        if self.channels[-1] != 128:
            raise ValueError(
                f"EncDecSpec: last encoder stage must have 128 filters, got {self.channels[-1]}"
            )
        stages = len(self.channels)
        if self.size % (1 << (stages - 1)):
            raise ValueError(
                f"EncDecSpec: size {self.size} not divisible by 2**{stages - 1}"
            )

    @property
    def pad(self) -> int:
        return self.kernel // 2


@dataclass(frozen=True)
class GanSpec:
    generator: EncDecSpec = field(default_factory=EncDecSpec)
    gain: float = 1.0
    sparsity_weight: float = 0.1
    disc_channels: tuple[int, ...] = (16, 32, 64)

    def __post_init__(self):
        if not (0.0 <= self.gain <= 1.0):
            raise ValueError(f"GanSpec: gain must be in [0,1], got {self.gain}")


@dataclass(frozen=True)
class DetectorSpec:
    size: int = 64
    channels: tuple[int, ...] = (16, 32, 64)
    num_classes: int = 1
    kernel: int = 3
    leaky_slope: float = 0.1
    in_channels: int = 3

    def __post_init__(self):
        if self.size % (1 << len(self.channels)):
            raise ValueError(
                f"DetectorSpec: size {self.size} not divisible by 2**{len(self.channels)}"
            )

    @property
    def grid(self) -> int:
        return self.size >> len(self.channels)

    @property
    def head_channels(self) -> int:
        return 5 + self.num_classes


def _he_conv(rng, cout, cin, k):
    std = math.sqrt(2.0 / (cin * k * k))
    return rng.normal(0.0, std, (cout, cin, k, k))


class _ConvStack:
    """Shared parameter bookkeeping for the three models."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}

    def _add(self, name: str, array: np.ndarray) -> Tensor:
        t = ad.parameter(array)
        self.params[name] = t
        return t

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def weight_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.params.items()}

    def load_weights(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.params.items():
            if name not in arrays:
                raise KeyError(f"missing weight {name!r}")
            if arrays[name].shape != t.data.shape:
                raise ShapeMismatchError(
                    f"load_weights[{name}]", t.data.shape, arrays[name].shape
                )
            t.data = np.ascontiguousarray(arrays[name], dtype=np.float64)


class EncDecModel(_ConvStack):
    """Encoder-decoder producing a (0,1) mask with the input's spatial size."""

    family = "encdec"

    def __init__(self, spec: EncDecSpec, seed: int = 0):
        super().__init__()
        self.spec = spec
        rng = np.random.default_rng([seed, 0xE0])
        k = spec.kernel
        cin = spec.in_channels
        for i, cout in enumerate(spec.channels):
            self._add(f"enc.{i}.w", _he_conv(rng, cout, cin, k))
            self._add(f"enc.{i}.b", np.zeros(cout))
            cin = cout
        for i, cout in enumerate(reversed(spec.channels[:-1])):
            self._add(f"dec.{i}.w", _he_conv(rng, cout, cin, k))
            self._add(f"dec.{i}.b", np.zeros(cout))
            cin = cout
        self._add("head.w", _he_conv(rng, 1, cin, 1))
        self._add("head.b", np.zeros(1))

    def forward(self, x: Tensor) -> Tensor:
        spec = self.spec
        expect = (spec.in_channels, spec.size, spec.size)
        if x.data.ndim != 4 or x.data.shape[1:] != expect:
            raise ShapeMismatchError("encdec_forward", ("N",) + expect, tuple(x.data.shape))
        h = x
        n_stages = len(spec.channels)
        for i in range(n_stages):
            h = ad.conv2d(h, self.params[f"enc.{i}.w"], self.params[f"enc.{i}.b"], 1, spec.pad)
            h = ad.leaky_relu(h, spec.leaky_slope)
            if i < n_stages - 1:
                h = ad.maxpool2d(h)
        for i in range(n_stages - 1):
            h = ad.upsample_nearest2x(h)
            h = ad.conv2d(h, self.params[f"dec.{i}.w"], self.params[f"dec.{i}.b"], 1, spec.pad)
            h = ad.leaky_relu(h, spec.leaky_slope)
        h = ad.conv2d(h, self.params["head.w"], self.params["head.b"], 1, 0)
        return ad.sigmoid(h)

    def layer_plan(self) -> list[dict]:
        spec = self.spec
        k = spec.kernel
        plan = []
        size = spec.size
        cin = spec.in_channels
        n_stages = len(spec.channels)
        for i, cout in enumerate(spec.channels):
            plan.append({"name": f"enc.{i}", "kind": "conv", "cin": cin, "k": k,
                         "stride": 1, "pad": spec.pad, "out": [cout, size, size], "bias": True})
            plan.append({"name": f"enc.{i}.act", "kind": "leaky_relu", "out": [cout, size, size]})
            if i < n_stages - 1:
                size //= 2
                plan.append({"name": f"enc.{i}.pool", "kind": "maxpool", "out": [cout, size, size]})
            cin = cout
        for i, cout in enumerate(reversed(spec.channels[:-1])):
            size *= 2
            plan.append({"name": f"dec.{i}.up", "kind": "upsample", "out": [cin, size, size]})
            plan.append({"name": f"dec.{i}", "kind": "conv", "cin": cin, "k": k,
                         "stride": 1, "pad": spec.pad, "out": [cout, size, size], "bias": True})
            plan.append({"name": f"dec.{i}.act", "kind": "leaky_relu", "out": [cout, size, size]})
            cin = cout
        plan.append({"name": "head", "kind": "conv", "cin": cin, "k": 1,
                     "stride": 1, "pad": 0, "out": [1, size, size], "bias": True})
        plan.append({"name": "head.act", "kind": "sigmoid", "out": [1, size, size]})
        return plan


class DiscriminatorModel(_ConvStack):
    """Stride-2 convolution ladder to a single sigmoid score per image."""

    family = "discriminator"

    def __init__(self, size: int = 64, channels=(16, 32, 64), in_channels: int = 3,
                 leaky_slope: float = 0.1, seed: int = 0):
        super().__init__()
        if size % (1 << len(channels)):
            raise ValueError(f"discriminator: size {size} not divisible by 2**{len(channels)}")
        self.size = size
        self.channels = tuple(channels)
        self.in_channels = in_channels
        self.leaky_slope = leaky_slope
        rng = np.random.default_rng([seed, 0xD0])
        cin = in_channels
        for i, cout in enumerate(channels):
            self._add(f"conv.{i}.w", _he_conv(rng, cout, cin, 3))
            self._add(f"conv.{i}.b", np.zeros(cout))
            cin = cout
        feat = channels[-1] * (size >> len(channels)) ** 2
        std = math.sqrt(2.0 / feat)
        self._add("fc.w", rng.normal(0.0, std, (feat, 1)))
        self._add("fc.b", np.zeros(1))
        self._features = feat

    def forward_logits(self, x: Tensor) -> Tensor:
        """Pre-sigmoid score per image; adversarial losses train on this."""
        expect = (self.in_channels, self.size, self.size)
        if x.data.ndim != 4 or x.data.shape[1:] != expect:
            raise ShapeMismatchError(
                "discriminator_forward", ("N",) + expect, tuple(x.data.shape)
            )
        h = x
        for i in range(len(self.channels)):
            h = ad.conv2d(h, self.params[f"conv.{i}.w"], self.params[f"conv.{i}.b"], 2, 1)
            h = ad.leaky_relu(h, self.leaky_slope)
        h = ad.flatten(h)
        return ad.linear(h, self.params["fc.w"], self.params["fc.b"])

    def forward(self, x: Tensor) -> Tensor:
        return ad.sigmoid(self.forward_logits(x))

    def layer_plan(self) -> list[dict]:
        plan = []
        size = self.size
        cin = self.in_channels
        for i, cout in enumerate(self.channels):
            size //= 2
            plan.append({"name": f"conv.{i}", "kind": "conv", "cin": cin, "k": 3,
                         "stride": 2, "pad": 1, "out": [cout, size, size], "bias": True})
            plan.append({"name": f"conv.{i}.act", "kind": "leaky_relu", "out": [cout, size, size]})
            cin = cout
        plan.append({"name": "flatten", "kind": "flatten", "out": [self._features]})
        plan.append({"name": "fc", "kind": "linear", "fin": self._features, "fout": 1})
        plan.append({"name": "fc.act", "kind": "sigmoid", "out": [1]})
        return plan


class DetectorModel(_ConvStack):
    """Single-shot grid detector: backbone ladder plus a 1x1 prediction head."""

    family = "detector"

    def __init__(self, spec: DetectorSpec, seed: int = 0):
        super().__init__()
        self.spec = spec
        rng = np.random.default_rng([seed, 0xDE])
        cin = spec.in_channels
        for i, cout in enumerate(spec.channels):
            self._add(f"conv.{i}.w", _he_conv(rng, cout, cin, spec.kernel))
            self._add(f"conv.{i}.b", np.zeros(cout))
            cin = cout
        self._add("head.w", _he_conv(rng, spec.head_channels, cin, 1))
        self._add("head.b", np.zeros(spec.head_channels))

    def forward(self, x: Tensor) -> Tensor:
        spec = self.spec
        expect = (spec.in_channels, spec.size, spec.size)
        if x.data.ndim != 4 or x.data.shape[1:] != expect:
            raise ShapeMismatchError("detector_forward", ("N",) + expect, tuple(x.data.shape))
        h = x
        for i in range(len(spec.channels)):
            h = ad.conv2d(h, self.params[f"conv.{i}.w"], self.params[f"conv.{i}.b"], 2, 1)
            h = ad.leaky_relu(h, spec.leaky_slope)
        return ad.conv2d(h, self.params["head.w"], self.params["head.b"], 1, 0)

    def layer_plan(self) -> list[dict]:
        spec = self.spec
        plan = []
        size = spec.size
        cin = spec.in_channels
        for i, cout in enumerate(spec.channels):
            size //= 2
            plan.append({"name": f"conv.{i}", "kind": "conv", "cin": cin, "k": spec.kernel,
                         "stride": 2, "pad": 1, "out": [cout, size, size], "bias": True})
            plan.append({"name": f"conv.{i}.act", "kind": "leaky_relu", "out": [cout, size, size]})
            cin = cout
        plan.append({"name": "head", "kind": "conv", "cin": cin, "k": 1, "stride": 1,
                     "pad": 0, "out": [spec.head_channels, size, size], "bias": True})
        return plan


class GanModel:
    """Generator (attenuation mask) plus discriminator, trained adversarially."""

    family = "gan"

    def __init__(self, spec: GanSpec, seed: int = 0):
        self.spec = spec
        self.generator = EncDecModel(spec.generator, seed=seed)
        self.discriminator = DiscriminatorModel(
            size=spec.generator.size,
            channels=spec.disc_channels,
            in_channels=spec.generator.in_channels,
            leaky_slope=spec.generator.leaky_slope,
            seed=seed + 1,
        )

    def parameters(self) -> list[Tensor]:
        return self.generator.parameters() + self.discriminator.parameters()

    def weight_arrays(self) -> dict[str, np.ndarray]:
        out = {f"g.{k}": v for k, v in self.generator.weight_arrays().items()}
        out.update({f"d.{k}": v for k, v in self.discriminator.weight_arrays().items()})
        return out

    def load_weights(self, arrays: dict[str, np.ndarray]) -> None:
        self.generator.load_weights(
            {k[2:]: v for k, v in arrays.items() if k.startswith("g.")}
        )
        self.discriminator.load_weights(
            {k[2:]: v for k, v in arrays.items() if k.startswith("d.")}
        )

    def layer_plan(self) -> list[dict]:
        gen = [{**l, "name": f"g.{l['name']}"} for l in self.generator.layer_plan()]
        dis = [{**l, "name": f"d.{l['name']}"} for l in self.discriminator.layer_plan()]
        return gen + dis


def apply_attenuation(image: Tensor, mask: Tensor, gain: float) -> Tensor:
    """Brighten masked pixels toward white: out = img + gain * M * (1 - img).

    Maps [0,1] inputs to [0,1] outputs for any mask in [0,1] and gain in
    [0,1]; the zero mask is the identity. Differentiable in both image and
    mask (the 1-channel mask broadcasts over RGB).
    """
    if not (0.0 <= gain <= 1.0):
        raise ValueError(f"apply_attenuation: gain must be in [0,1], got {gain}")
    if image.data.ndim != 4 or mask.data.ndim != 4:
        raise ShapeMismatchError(
            "apply_attenuation", "image [N,3,H,W] and mask [N,1,H,W]",
            (tuple(image.data.shape), tuple(mask.data.shape)),
        )
    N, C, H, W = image.data.shape
    if mask.data.shape != (N, 1, H, W):
        raise ShapeMismatchError(
            "apply_attenuation", (N, 1, H, W), tuple(mask.data.shape)
        )
    img = image.data
    m = mask.data
    out_data = img + gain * m * (1.0 - img)

    def grad_fn(dout):
        if mask.requires_grad:
            ad._accumulate(mask, (gain * (1.0 - img) * dout).sum(axis=1, keepdims=True))
        if image.requires_grad:
            ad._accumulate(image, (1.0 - gain * m) * dout)

    rg = image.requires_grad or mask.requires_grad
    return Tensor(out_data, rg, (image, mask), grad_fn, op="apply_attenuation")


# ---------------------------------------------------------------------------
# detector target encoding / decoding
# ---------------------------------------------------------------------------


def encode_targets(spec: DetectorSpec, boxes: list[Box]):
    """Per-cell training targets for one image.

    Returns (targets, responsible): targets is (5+C, S, S) holding the
    sigmoid-space values (tx, ty, tw, th, objectness, classes), responsible a
    boolean (S, S) grid. The cell containing a box center is responsible for
    it; when two boxes share a cell the larger area wins.
    """
    S = spec.grid
    cell = spec.size / S
    targets = np.zeros((spec.head_channels, S, S))
    responsible = np.zeros((S, S), dtype=bool)
    best_area = np.zeros((S, S))
    for b in boxes:
        if b.x < 0 or b.y < 0 or b.x + b.w > spec.size or b.y + b.h > spec.size:
            raise ValueError(f"encode_targets: box {b} outside {spec.size}x{spec.size} image")
        cx = b.x + b.w / 2.0
        cy = b.y + b.h / 2.0
        j = min(int(cx / cell), S - 1)
        i = min(int(cy / cell), S - 1)
        area = b.w * b.h
        if responsible[i, j] and area <= best_area[i, j]:
            continue
        best_area[i, j] = area
        responsible[i, j] = True
        targets[0, i, j] = cx / cell - j
        targets[1, i, j] = cy / cell - i
        targets[2, i, j] = b.w / spec.size
        targets[3, i, j] = b.h / spec.size
        targets[4, i, j] = 1.0
        targets[5:, i, j] = 0.0
        targets[5 + b.class_id, i, j] = 1.0
    return targets, responsible


def decode_predictions(spec: DetectorSpec, raw: np.ndarray, conf_threshold: float,
                       image_ids=None) -> list[Detection]:
    """Decode raw grid outputs into clamped detections with score >= threshold.

    Per cell: cx = (j + sig(tx)) * W/S, cy = (i + sig(ty)) * H/S,
    w = W * sig(tw), h = H * sig(th), score = sig(to) * sig(tc) with the
    best-scoring class per cell.
    """
    if isinstance(raw, Tensor):
        raw = raw.data
    S = spec.grid
    size = spec.size
    if raw.ndim != 4 or raw.shape[1:] != (spec.head_channels, S, S):
        raise ShapeMismatchError(
            "decode_predictions", ("N", spec.head_channels, S, S), tuple(raw.shape)
        )
    if not (0.0 <= conf_threshold <= 1.0):
        raise ValueError(f"decode_predictions: conf_threshold {conf_threshold} outside [0,1]")
    N = raw.shape[0]
    if image_ids is None:
        image_ids = [str(n) for n in range(N)]
    sig = 1.0 / (1.0 + np.exp(-raw))
    cell = size / S
    out = []
    for n in range(N):
        for i in range(S):
            for j in range(S):
                cls_scores = sig[n, 5:, i, j]
                c = int(np.argmax(cls_scores))
                score = float(sig[n, 4, i, j] * cls_scores[c])
                if score < conf_threshold:
                    continue
                cx = (j + sig[n, 0, i, j]) * cell
                cy = (i + sig[n, 1, i, j]) * cell
                w = size * sig[n, 2, i, j]
                h = size * sig[n, 3, i, j]
                x0 = max(0.0, cx - w / 2.0)
                y0 = max(0.0, cy - h / 2.0)
                x1 = min(float(size), cx + w / 2.0)
                y1 = min(float(size), cy + h / 2.0)
                out.append(Detection(image_ids[n], x0, y0, x1 - x0, y1 - y0, score, c))
    return out


def nms(dets: list[Detection], iou_threshold: float = 0.5) -> list[Detection]:
    """Greedy non-maximum suppression within each class, sorted by score."""
    ordered = sorted(dets, key=lambda d: -d.score)
    kept: list[Detection] = []
    for d in ordered:
        suppressed = False
        for k in kept:
            if k.class_id == d.class_id and k.image_id == d.image_id \
                    and iou(k.xywh, d.xywh) >= iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(d)
    return kept


def detector_training_loss(sig: Tensor, targets: np.ndarray, responsible: np.ndarray) -> Tensor:
    """Composite grid loss on sigmoid-activated raw outputs.

    BCE on objectness over all cells (no-object cells weighted 0.5), MSE on
    the four sigmoid-space box coordinates of responsible cells (weight 5),
    BCE on class probabilities of responsible cells.
    """
    p = sig.data
    N, ch, S, _ = p.shape
    if targets.shape != p.shape or responsible.shape != (N, S, S):
        raise ShapeMismatchError(
            "detector_training_loss", (tuple(p.shape), (N, S, S)),
            (tuple(targets.shape), tuple(responsible.shape)),
        )
    eps = ad.LOG_EPS
    pc = np.clip(p, eps, 1.0 - eps)
    resp = responsible.astype(np.float64)
    n_resp = max(resp.sum(), 1.0)
    n_cells = N * S * S

    obj_w = np.where(responsible, 1.0, 0.5)
    obj_t = resp
    bce_obj = -(obj_t * np.log(pc[:, 4]) + (1 - obj_t) * np.log1p(-pc[:, 4]))
    loss_obj = float((obj_w * bce_obj).sum() / n_cells)

    box_diff = (p[:, 0:4] - targets[:, 0:4]) * resp[:, None]
    loss_box = float((box_diff ** 2).sum() / (4.0 * n_resp))

    cls_t = targets[:, 5:]
    bce_cls = -(cls_t * np.log(pc[:, 5:]) + (1 - cls_t) * np.log1p(-pc[:, 5:]))
    n_classes = ch - 5
    loss_cls = float((bce_cls * resp[:, None]).sum() / (n_resp * n_classes))

    total = loss_obj + 5.0 * loss_box + loss_cls

    def grad_fn(dout):
        # BCE terms take their gradient at the clamped value (bounded, never
        # a hard zero), matching bce_loss
        g = np.zeros_like(p)
        g[:, 4] = obj_w * (-(obj_t / pc[:, 4]) + (1 - obj_t) / (1 - pc[:, 4])) / n_cells
        g[:, 0:4] = 5.0 * 2.0 * box_diff / (4.0 * n_resp)
        g[:, 5:] = (-(cls_t / pc[:, 5:]) + (1 - cls_t) / (1 - pc[:, 5:])) * resp[:, None] / (
            n_resp * n_classes
        )
        ad._accumulate(sig, g * float(dout), owned=True)

    return Tensor(np.float64(total), sig.requires_grad, (sig,), grad_fn, op="detector_loss")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _spec_to_dict(model) -> dict:
    if model.family == "encdec":
        s = model.spec
        return {"size": s.size, "channels": list(s.channels), "kernel": s.kernel,
                "leaky_slope": s.leaky_slope, "in_channels": s.in_channels}
    if model.family == "detector":
        s = model.spec
        return {"size": s.size, "channels": list(s.channels), "num_classes": s.num_classes,
                "kernel": s.kernel, "leaky_slope": s.leaky_slope, "in_channels": s.in_channels}
    if model.family == "gan":
        s = model.spec
        return {
            "generator": {"size": s.generator.size, "channels": list(s.generator.channels),
                          "kernel": s.generator.kernel, "leaky_slope": s.generator.leaky_slope,
                          "in_channels": s.generator.in_channels},
            "gain": s.gain,
            "sparsity_weight": s.sparsity_weight,
            "disc_channels": list(s.disc_channels),
        }
    if model.family == "discriminator":
        return {"size": model.size, "channels": list(model.channels),
                "in_channels": model.in_channels, "leaky_slope": model.leaky_slope}
    raise ValueError(f"unknown model family {model.family!r}")


def save_model(model, path: str) -> None:
    """Single JSON document: family, spec fields, and flat row-major weight
    arrays serialized as decimal strings (exact float64 round-trip)."""
    doc = {
        "format": "model.json",
        "version": 1,
        "family": model.family,
        "spec": _spec_to_dict(model),
        "weights": {
            name: [repr(float(v)) for v in arr.ravel()]
            for name, arr in model.weight_arrays().items()
        },
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _build_from_spec(family: str, spec: dict):
    if family == "encdec":
        return EncDecModel(EncDecSpec(
            size=spec["size"], channels=tuple(spec["channels"]), kernel=spec["kernel"],
            leaky_slope=spec["leaky_slope"], in_channels=spec["in_channels"]))
    if family == "detector":
        return DetectorModel(DetectorSpec(
            size=spec["size"], channels=tuple(spec["channels"]),
            num_classes=spec["num_classes"], kernel=spec["kernel"],
            leaky_slope=spec["leaky_slope"], in_channels=spec["in_channels"]))
    if family == "gan":
        g = spec["generator"]
        return GanModel(GanSpec(
            generator=EncDecSpec(size=g["size"], channels=tuple(g["channels"]),
                                 kernel=g["kernel"], leaky_slope=g["leaky_slope"],
                                 in_channels=g["in_channels"]),
            gain=spec["gain"], sparsity_weight=spec["sparsity_weight"],
            disc_channels=tuple(spec["disc_channels"])))
    if family == "discriminator":
        return DiscriminatorModel(size=spec["size"], channels=tuple(spec["channels"]),
                                  in_channels=spec["in_channels"],
                                  leaky_slope=spec["leaky_slope"])
    raise ValueError(f"unknown model family {family!r}")


def load_model(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("family", "spec", "weights"):
        if key not in doc:
            raise ValueError(f"model file {path}: missing key {key!r}")
    model = _build_from_spec(doc["family"], doc["spec"])
    shapes = {name: arr.shape for name, arr in model.weight_arrays().items()}
    arrays = {}
    for name, flat in doc["weights"].items():
        if name not in shapes:
            raise ValueError(f"model file {path}: unexpected weight {name!r}")
        arrays[name] = np.array([float(v) for v in flat]).reshape(shapes[name])
    model.load_weights(arrays)
    return model
