"""Datasets for shadow scenes: synthetic generation, augmentation, split, I/O.

A :class:`Sample` is one scene: an RGB image in [0,1], an optional binary
shadow mask, ground-truth boxes in absolute pixels (x, y, w, h, top-left
origin), and an optional paired shadow-free render of the identical scene.

The synthetic generator draws a green-gradient field with seeded texture
noise, a few dark panel rectangles, and 1-3 convex quadrilateral shadows
applied multiplicatively, so the mask and boxes are exact by construction
and the shadow-free pair is the same scene with the multiplication skipped.
Every randomized operation is a pure function of (inputs, seed).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from PIL import Image

ROTATION_RANGE = (-10.0, 10.0)  # degrees
SCALE_RANGE = (0.9, 1.1)
SHEAR_RANGE = (-0.1, 0.1)

MANIFEST_NAME = "dataset.json"


class DatasetError(Exception):
    pass


class ManifestError(DatasetError):
    pass


class MissingFileError(DatasetError):
    pass


class IdCollisionError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


class DegenerateTransformError(ValueError):
    pass


class Box(NamedTuple):
    x: float
    y: float
    w: float
    h: float
    class_id: int


class WarpParams(NamedTuple):
    rotation_deg: float
    scale: float
    shear: float


@dataclass
class Sample:
    id: str
    image: np.ndarray                      # (H, W, 3) float64 in [0, 1]
    mask: np.ndarray | None = None         # (H, W) uint8 in {0, 1}
    boxes: list[Box] = field(default_factory=list)
    shadow_free: np.ndarray | None = None  # (H, W, 3) float64 in [0, 1]
    source_id: str | None = None
    augmentation: str | None = None

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]


def validate_sample(s: Sample) -> None:
    """Raise DatasetError if a sample violates its invariants."""
    if s.image.ndim != 3 or s.image.shape[2] != 3:
        raise DatasetError(f"sample {s.id}: image must be (H,W,3), got {s.image.shape}")
    if s.image.min() < 0.0 or s.image.max() > 1.0:
        raise DatasetError(f"sample {s.id}: image values outside [0,1]")
    if s.mask is not None:
        if s.mask.shape != s.image.shape[:2]:
            raise DatasetError(
                f"sample {s.id}: mask shape {s.mask.shape} != image {s.image.shape[:2]}"
            )
        vals = np.unique(s.mask)
        if not np.isin(vals, (0, 1)).all():
            raise DatasetError(f"sample {s.id}: mask values must be binary, got {vals}")
    if s.shadow_free is not None and s.shadow_free.shape != s.image.shape:
        raise DatasetError(f"sample {s.id}: shadow_free shape mismatch")
    H, W = s.image.shape[:2]
    for b in s.boxes:
        if b.w <= 0 or b.h <= 0:
            raise DatasetError(f"sample {s.id}: degenerate box {b}")
        if b.x < 0 or b.y < 0 or b.x + b.w > W or b.y + b.h > H:
            raise DatasetError(f"sample {s.id}: box {b} outside {W}x{H} image")


@dataclass
class Dataset:
    image_size: int
    class_names: list[str]
    samples: list[Sample]
    split: dict[str, list[str]] | None = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def by_id(self, sid: str) -> Sample:
        for s in self.samples:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def subset(self, split_name: str) -> "Dataset":
        if self.split is None or split_name not in self.split:
            raise DatasetError(f"dataset has no split named {split_name!r}")
        wanted = set(self.split[split_name])
        return Dataset(
            image_size=self.image_size,
            class_names=list(self.class_names),
            samples=[s for s in self.samples if s.id in wanted],
        )

    def validate(self) -> None:
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise IdCollisionError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)
            validate_sample(s)
        if self.split is not None:
            assigned = [i for ids in self.split.values() for i in ids]
            if len(assigned) != len(set(assigned)):
                raise ManifestError("split sets are not disjoint")
            if set(assigned) != seen:
                raise ManifestError("split sets are not exhaustive over sample ids")


# ---------------------------------------------------------------------------
# synthetic scene generator
# ---------------------------------------------------------------------------

_GREENS = (
    (0.16, 0.42, 0.13),
    (0.22, 0.52, 0.17),
    (0.28, 0.58, 0.21),
    (0.19, 0.47, 0.24),
)


@dataclass(frozen=True)
class SceneConfig:
    size: int = 64
    panel_count: tuple[int, int] = (0, 2)
    shadow_count: tuple[int, int] = (1, 3)
    darkening: tuple[float, float] = (0.35, 0.65)
    shadow_radius: tuple[float, float] = (8.0, 18.0)
    min_center_dist: float = 18.0
    noise_sigma: float = 0.03
    palette: tuple[tuple[float, float, float], ...] = _GREENS
    seed: int = 0

    def __post_init__(self):
        for name in ("panel_count", "shadow_count", "darkening", "shadow_radius"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"SceneConfig.{name}: empty range {(lo, hi)}")
        lo, hi = self.darkening
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError(f"SceneConfig.darkening must lie in (0,1), got {(lo, hi)}")
        if self.seed < 0:
            raise ValueError("SceneConfig.seed must be non-negative")


def _convex_quad(rng, cx, cy, a, b, phi):
    """Four points on a rotated ellipse, in parameter order (hence convex)."""
    thetas = np.array([k * math.pi / 2 + rng.uniform(-0.55, 0.55) for k in range(4)])
    ex = a * np.cos(thetas)
    ey = b * np.sin(thetas)
    xs = cx + ex * math.cos(phi) - ey * math.sin(phi)
    ys = cy + ex * math.sin(phi) + ey * math.cos(phi)
    return np.stack([xs, ys], axis=1)


def _rasterize_convex(points: np.ndarray, size: int) -> np.ndarray:
    """Boolean inside-mask of a convex polygon over pixel centers."""
    yy, xx = np.mgrid[0:size, 0:size]
    px = xx + 0.5
    py = yy + 0.5
    n = len(points)
    # consistent orientation: signed area decides which side is "inside"
    area2 = 0.0
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        area2 += x0 * y1 - x1 * y0
    sign = 1.0 if area2 >= 0 else -1.0
    inside = np.ones((size, size), dtype=bool)
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        cross = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        inside &= sign * cross >= 0.0
    return inside


def synth_scene(config: SceneConfig, index: int) -> Sample:
    """Render scene `index`; deterministic in (config.seed, index)."""
    rng = np.random.default_rng([config.seed, index])
    size = config.size

    # green-gradient field with texture noise
    c0 = np.array(config.palette[rng.integers(len(config.palette))], dtype=np.float64)
    c1 = np.array(config.palette[rng.integers(len(config.palette))], dtype=np.float64)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    proj = xx * math.cos(angle) + yy * math.sin(angle)
    t = (proj - proj.min()) / max(proj.max() - proj.min(), 1e-9)
    base = c0[None, None, :] + t[:, :, None] * (c1 - c0)[None, None, :]
    base += rng.normal(0.0, config.noise_sigma, (size, size))[:, :, None]

    # dark panel rectangles (scene content, not labeled)
    n_panels = int(rng.integers(config.panel_count[0], config.panel_count[1] + 1))
    for _ in range(n_panels):
        pw = int(rng.integers(10, 23))
        ph = int(rng.integers(8, 17))
        px = int(rng.integers(0, max(size - pw, 1)))
        py = int(rng.integers(0, max(size - ph, 1)))
        tone = rng.uniform(0.08, 0.16)
        color = np.array([tone, tone * 1.08, tone * 1.45])
        base[py : py + ph, px : px + pw, :] = color[None, None, :]

    # floor at 0.02 keeps multiplicative shadows strictly darker
    shadow_free = np.clip(base, 0.02, 1.0)

    # convex quadrilateral shadows
    n_shadows = int(rng.integers(config.shadow_count[0], config.shadow_count[1] + 1))
    margin = 10.0
    centers: list[tuple[float, float]] = []
    image = shadow_free.copy()
    mask = np.zeros((size, size), dtype=np.uint8)
    boxes: list[Box] = []
    for _ in range(n_shadows):
        cx = cy = size / 2.0
        for _ in range(40):
            cx = rng.uniform(margin, size - margin)
            cy = rng.uniform(margin, size - margin)
            if all(math.hypot(cx - ox, cy - oy) >= config.min_center_dist for ox, oy in centers):
                break
        centers.append((cx, cy))
        poly_mask = None
        for _ in range(8):
            a = rng.uniform(*config.shadow_radius)
            b = rng.uniform(*config.shadow_radius)
            phi = rng.uniform(0.0, 2.0 * math.pi)
            candidate = _rasterize_convex(_convex_quad(rng, cx, cy, a, b, phi), size)
            if candidate.sum() >= 40:
                poly_mask = candidate
                break
            poly_mask = candidate
        u = rng.uniform(*config.darkening)
        image[poly_mask] *= u
        mask |= poly_mask.astype(np.uint8)
        ys, xs = np.nonzero(poly_mask)
        if len(xs) == 0:
            continue
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ys.min(), ys.max()
        boxes.append(Box(float(x0), float(y0), float(x1 - x0 + 1), float(y1 - y0 + 1), 0))

    return Sample(
        id=f"scene-{index:04d}",
        image=image,
        mask=mask,
        boxes=boxes,
        shadow_free=shadow_free,
    )


def synth_dataset(config: SceneConfig, count: int) -> Dataset:
    samples = [synth_scene(config, i) for i in range(count)]
    return Dataset(image_size=config.size, class_names=["shadow"], samples=samples)


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------


def split_dataset(ds: Dataset, ratios=(8, 1, 1), seed: int = 0):
    """Seeded shuffle then contiguous partition into (train, val, test).

    Sizes are round(n * r_i / sum(r)) for val and test with the remainder
    going to train. The assignment is recorded on `ds.split`.
    """
    if len(ds) == 0:
        raise EmptyDatasetError("split_dataset: dataset is empty")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"split_dataset: ratios must be three positive numbers, got {ratios}")
    n = len(ds)
    total = float(sum(ratios))
    n_val = round(n * ratios[1] / total)
    n_test = round(n * ratios[2] / total)
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValueError(f"split_dataset: ratios {ratios} leave no room for train on n={n}")
    order = np.random.default_rng(seed).permutation(n)
    ids = ds.ids
    shuffled = [ids[i] for i in order]
    assignment = {
        "train": shuffled[:n_train],
        "val": shuffled[n_train : n_train + n_val],
        "test": shuffled[n_train + n_val :],
    }
    ds.split = assignment
    parts = []
    for name in ("train", "val", "test"):
        wanted = set(assignment[name])
        parts.append(
            Dataset(
                image_size=ds.image_size,
                class_names=list(ds.class_names),
                samples=[s for s in ds.samples if s.id in wanted],
            )
        )
    return tuple(parts)


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------


def hflip(s: Sample) -> Sample:
    """Mirror left-right; an exact involution."""
    W = s.width
    return replace(
        s,
        image=s.image[:, ::-1].copy(),
        mask=None if s.mask is None else s.mask[:, ::-1].copy(),
        shadow_free=None if s.shadow_free is None else s.shadow_free[:, ::-1].copy(),
        boxes=[Box(W - b.x - b.w, b.y, b.w, b.h, b.class_id) for b in s.boxes],
    )


def _bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample (H,W,C) at float coords with edge replication."""
    H, W = img.shape[:2]
    xs = np.clip(xs, 0.0, W - 1.0)
    ys = np.clip(ys, 0.0, H - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _nearest(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    H, W = img.shape[:2]
    xi = np.clip(np.round(xs), 0, W - 1).astype(np.int64)
    yi = np.clip(np.round(ys), 0, H - 1).astype(np.int64)
    return img[yi, xi]


def sample_warp_params(seed: int) -> WarpParams:
    rng = np.random.default_rng([seed, 0x77A])
    return WarpParams(
        rotation_deg=float(rng.uniform(*ROTATION_RANGE)),
        scale=float(rng.uniform(*SCALE_RANGE)),
        shear=float(rng.uniform(*SHEAR_RANGE)),
    )


def warp(s: Sample, params: WarpParams | None = None, seed: int = 0) -> Sample:
    """Affine warp about the image center.

    Image and shadow-free pair are bilinear-sampled with edge replication,
    the mask nearest-neighbor; boxes become the clamped axis-aligned hull of
    their four warped corners. Deterministic in (params, seed); params
    outside the documented ranges raise ValueError.
    """
    if params is None:
        params = sample_warp_params(seed)
    for value, (lo, hi), name in (
        (params.rotation_deg, ROTATION_RANGE, "rotation"),
        (params.scale, SCALE_RANGE, "scale"),
        (params.shear, SHEAR_RANGE, "shear"),
    ):
        if not (lo <= value <= hi):
            raise ValueError(f"warp: {name} {value} outside [{lo}, {hi}]")
    theta = math.radians(params.rotation_deg)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    sh = np.array([[1.0, params.shear], [0.0, 1.0]])
    sc = np.array([[params.scale, 0.0], [0.0, params.scale]])
    A = rot @ sh @ sc
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) < 1e-6:
        raise DegenerateTransformError(f"warp: |det|={abs(det):.2e} below 1e-6")
    Ainv = np.linalg.inv(A)

    H, W = s.image.shape[:2]
    cx, cy = (W - 1) / 2.0, (H - 1) / 2.0
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    dx = xx - cx
    dy = yy - cy
    src_x = Ainv[0, 0] * dx + Ainv[0, 1] * dy + cx
    src_y = Ainv[1, 0] * dx + Ainv[1, 1] * dy + cy

    new_boxes = []
    for b in s.boxes:
        corners = np.array(
            [[b.x, b.y], [b.x + b.w, b.y], [b.x, b.y + b.h], [b.x + b.w, b.y + b.h]]
        )
        rel = corners - [cx, cy]
        moved = rel @ A.T + [cx, cy]
        x0 = max(0.0, float(moved[:, 0].min()))
        y0 = max(0.0, float(moved[:, 1].min()))
        x1 = min(float(W), float(moved[:, 0].max()))
        y1 = min(float(H), float(moved[:, 1].max()))
        if x1 - x0 >= 0.5 and y1 - y0 >= 0.5:
            new_boxes.append(Box(x0, y0, x1 - x0, y1 - y0, b.class_id))

    return replace(
        s,
        image=np.clip(_bilinear(s.image, src_y, src_x), 0.0, 1.0),
        mask=None if s.mask is None else _nearest(s.mask, src_y, src_x),
        shadow_free=None
        if s.shadow_free is None
        else np.clip(_bilinear(s.shadow_free, src_y, src_x), 0.0, 1.0),
        boxes=new_boxes,
    )


def add_noise(s: Sample, sigma: float, seed: int = 0) -> Sample:
    """Add clipped per-pixel Gaussian noise to the image channels only."""
    if sigma < 0:
        raise ValueError(f"add_noise: sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return replace(s)
    rng = np.random.default_rng([seed, 0x401])
    noisy = np.clip(s.image + rng.normal(0.0, sigma, s.image.shape), 0.0, 1.0)
    return replace(s, image=noisy)


def resize(s: Sample, target: int) -> Sample:
    """Bilinear image resize (nearest for the mask); boxes scale accordingly."""
    if target < 8:
        raise ValueError(f"resize: target must be >= 8, got {target}")
    H, W = s.image.shape[:2]
    if target == H == W:
        return replace(s)
    ty, tx = np.mgrid[0:target, 0:target].astype(np.float64)
    src_x = (tx + 0.5) * (W / target) - 0.5
    src_y = (ty + 0.5) * (H / target) - 0.5
    sx = target / W
    sy = target / H
    return replace(
        s,
        image=np.clip(_bilinear(s.image, src_y, src_x), 0.0, 1.0),
        mask=None if s.mask is None else _nearest(s.mask, src_y, src_x),
        shadow_free=None
        if s.shadow_free is None
        else np.clip(_bilinear(s.shadow_free, src_y, src_x), 0.0, 1.0),
        boxes=[Box(b.x * sx, b.y * sy, b.w * sx, b.h * sy, b.class_id) for b in s.boxes],
    )


# ---------------------------------------------------------------------------
# on-disk format
# ---------------------------------------------------------------------------


def _write_png(path: str, arr: np.ndarray) -> None:
    if arr.ndim == 2:  # mask: 0 -> 0, 1 -> 255
        img = Image.fromarray((arr * 255).astype(np.uint8), mode="L")
    else:
        img = Image.fromarray(
            np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8), mode="RGB"
        )
    tmp = path + ".tmp"
    img.save(tmp, format="PNG")
    os.replace(tmp, path)


def _read_rgb(path: str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def _read_mask(path: str) -> np.ndarray:
    with Image.open(path) as img:
        return (np.asarray(img.convert("L")) > 127).astype(np.uint8)


def save_dataset(ds: Dataset, path: str) -> None:
    """Write PNG directories plus a dataset.json manifest (atomically)."""
    ds.validate()
    os.makedirs(path, exist_ok=True)
    os.makedirs(os.path.join(path, "images"), exist_ok=True)
    if any(s.mask is not None for s in ds.samples):
        os.makedirs(os.path.join(path, "masks"), exist_ok=True)
    if any(s.shadow_free is not None for s in ds.samples):
        os.makedirs(os.path.join(path, "shadowfree"), exist_ok=True)

    records = []
    for s in ds.samples:
        rec = {"id": s.id, "image": f"images/{s.id}.png"}
        _write_png(os.path.join(path, rec["image"]), s.image)
        if s.mask is not None:
            rec["mask"] = f"masks/{s.id}.png"
            _write_png(os.path.join(path, rec["mask"]), s.mask)
        if s.shadow_free is not None:
            rec["shadow_free"] = f"shadowfree/{s.id}.png"
            _write_png(os.path.join(path, rec["shadow_free"]), s.shadow_free)
        rec["boxes"] = [[b.x, b.y, b.w, b.h, b.class_id] for b in s.boxes]
        if s.source_id is not None:
            rec["source_id"] = s.source_id
        if s.augmentation is not None:
            rec["augmentation"] = s.augmentation
        records.append(rec)

    manifest = {
        "version": 1,
        "image_size": ds.image_size,
        "class_names": ds.class_names,
        "samples": records,
    }
    if ds.split is not None:
        manifest["split"] = ds.split
    tmp = os.path.join(path, MANIFEST_NAME + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, os.path.join(path, MANIFEST_NAME))


def load_dataset(path: str) -> Dataset:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise MissingFileError(f"no manifest at {manifest_path}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest {manifest_path}: {exc}") from exc
    for key in ("version", "image_size", "class_names", "samples"):
        if key not in manifest:
            raise ManifestError(f"manifest {manifest_path} missing key {key!r}")

    samples = []
    seen = set()
    for rec in manifest["samples"]:
        if "id" not in rec or "image" not in rec:
            raise ManifestError(f"sample record missing id/image: {rec}")
        sid = rec["id"]
        if sid in seen:
            raise IdCollisionError(f"duplicate sample id {sid!r} in manifest")
        seen.add(sid)

        def _resolve(rel):
            p = os.path.join(path, rel)
            if not os.path.exists(p):
                raise MissingFileError(f"sample {sid!r}: referenced file missing: {p}")
            return p

        image = _read_rgb(_resolve(rec["image"]))
        mask = _read_mask(_resolve(rec["mask"])) if "mask" in rec else None
        sfree = _read_rgb(_resolve(rec["shadow_free"])) if "shadow_free" in rec else None
        try:
            boxes = [Box(float(b[0]), float(b[1]), float(b[2]), float(b[3]), int(b[4]))
                     for b in rec.get("boxes", [])]
        except (TypeError, IndexError, ValueError) as exc:
            raise ManifestError(f"sample {sid!r}: malformed box list") from exc
        samples.append(
            Sample(
                id=sid,
                image=image,
                mask=mask,
                boxes=boxes,
                shadow_free=sfree,
                source_id=rec.get("source_id"),
                augmentation=rec.get("augmentation"),
            )
        )

    ds = Dataset(
        image_size=int(manifest["image_size"]),
        class_names=list(manifest["class_names"]),
        samples=samples,
        split=manifest.get("split"),
    )
    ds.validate()
    return ds


def dataset_hash(path: str) -> str:
    """Content hash of a saved dataset: manifest bytes plus every referenced file."""
    h = hashlib.sha256()
    manifest_path = os.path.join(path, MANIFEST_NAME)
    with open(manifest_path, "rb") as fh:
        manifest_bytes = fh.read()
    h.update(manifest_bytes)
    manifest = json.loads(manifest_bytes)
    for rec in manifest.get("samples", []):
        for key in ("image", "mask", "shadow_free"):
            if key in rec:
                with open(os.path.join(path, rec[key]), "rb") as fh:
                    h.update(fh.read())
    return h.hexdigest()
