"""Procedural toy face domains and image-folder ingestion.

The two toy styles render the *same* :class:`ToyFaceSpec`, so a source image
and its target-style counterpart share face and eye geometry exactly. That
turns "keeps the structure of the source" into something measurable
(:func:`structure_metric`).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import DataError, InvalidArgument

log = logging.getLogger(__name__)

STYLES = ("source", "target")
KINDS = ("toy_source", "toy_target", "folder")
TARGET_EYE_SCALE = 1.6
SUPERSAMPLE = 4

# (background top, background bottom, skin, iris) as RGB in [0, 1]
PALETTES = (
    ((0.55, 0.70, 0.85), (0.30, 0.45, 0.65), (0.93, 0.78, 0.66), (0.30, 0.20, 0.10)),
    ((0.80, 0.80, 0.75), (0.55, 0.55, 0.50), (0.80, 0.60, 0.45), (0.15, 0.35, 0.20)),
    ((0.40, 0.55, 0.40), (0.20, 0.30, 0.20), (0.98, 0.86, 0.78), (0.20, 0.30, 0.55)),
    ((0.70, 0.55, 0.65), (0.45, 0.30, 0.40), (0.62, 0.44, 0.32), (0.10, 0.08, 0.06)),
)

# uniform sampling ranges, in canvas-normalized units
RANGES = {
    "face_cx": (0.45, 0.55),
    "face_cy": (0.48, 0.55),
    "face_ax": (0.26, 0.34),
    "face_ay": (0.32, 0.40),
    "eye_spacing": (0.35, 0.50),  # fraction of face_ax
    "eye_height": (0.10, 0.30),  # fraction of face_ay above the centre
    "eye_r": (0.035, 0.050),
    "mouth_drop": (0.40, 0.58),  # fraction of face_ay below the centre
    "mouth_w": (0.30, 0.55),  # fraction of face_ax
    "mouth_curve": (-0.05, 0.07),
}


@dataclass(frozen=True)
class ToyFaceSpec:
    face_cx: float
    face_cy: float
    face_ax: float
    face_ay: float
    eye_dx: float
    eye_y: float
    eye_r: float
    mouth_y: float
    mouth_w: float
    mouth_curve: float
    palette: int

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "ToyFaceSpec":
        u = {k: float(rng.uniform(*v)) for k, v in RANGES.items()}
        return cls(
            face_cx=u["face_cx"],
            face_cy=u["face_cy"],
            face_ax=u["face_ax"],
            face_ay=u["face_ay"],
            eye_dx=u["eye_spacing"] * u["face_ax"],
            eye_y=u["face_cy"] - u["eye_height"] * u["face_ay"],
            eye_r=u["eye_r"],
            mouth_y=u["face_cy"] + u["mouth_drop"] * u["face_ay"],
            mouth_w=u["mouth_w"] * u["face_ax"],
            mouth_curve=u["mouth_curve"],
            palette=int(rng.integers(len(PALETTES))),
        )

    @property
    def eye_centers(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        return (self.face_cx - self.eye_dx, self.eye_y), (self.face_cx + self.eye_dx, self.eye_y)

    def keypoints(self, resolution: int) -> Dict[str, Tuple[float, float]]:
        """Ground-truth keypoints in pixel units (x, y), identical for both styles."""
        (lx, ly), (rx, ry) = self.eye_centers
        pts = {
            "face": (self.face_cx, self.face_cy),
            "left_eye": (lx, ly),
            "right_eye": (rx, ry),
            "mouth": (self.face_cx, self.mouth_y),
        }
        return {k: (x * resolution, y * resolution) for k, (x, y) in pts.items()}


def sample_specs(count: int, seed: int) -> List[ToyFaceSpec]:
    rng = np.random.default_rng(seed)
    return [ToyFaceSpec.sample(rng) for _ in range(count)]


def _grid(resolution: int):
    n = resolution * SUPERSAMPLE
    c = (np.arange(n) + 0.5) / n
    return np.meshgrid(c, c, indexing="xy")


def _paint(canvas, mask, color):
    canvas[mask] = color


def render_toy(spec: ToyFaceSpec, style: str, resolution: int) -> np.ndarray:
    """Render one face as float32 ``[3, R, R]`` in ``[-1, 1]``."""
    if style not in STYLES:
        raise InvalidArgument(f"style must be one of {STYLES}")
    x, y = _grid(resolution)
    bg_top, bg_bot, skin, iris = (np.array(c) for c in PALETTES[spec.palette])
    target = style == "target"
    canvas = np.empty(x.shape + (3,))

    q = np.sqrt(((x - spec.face_cx) / spec.face_ax) ** 2 + ((y - spec.face_cy) / spec.face_ay) ** 2)
    face = q <= 1.0
    if target:
        canvas[:] = 0.5 * (bg_top + bg_bot)
        _paint(canvas, face, np.minimum(skin * 1.05, 1.0))
    else:
        t = y[..., None]
        canvas[:] = bg_top * (1 - t) + bg_bot * t
        shade = 1.08 - 0.25 * q[..., None] ** 2
        canvas[face] = np.clip(skin * shade, 0, 1)[face]

    eye_r = spec.eye_r * (TARGET_EYE_SCALE if target else 1.0)
    for ex, ey in spec.eye_centers:
        d = np.hypot(x - ex, y - ey)
        if target:
            _paint(canvas, d <= eye_r * 1.15, (0.05, 0.05, 0.05))
            _paint(canvas, d <= eye_r, (1.0, 1.0, 1.0))
            _paint(canvas, d <= eye_r * 0.7, iris * 0.6)
            _paint(canvas, np.hypot(x - ex + 0.3 * eye_r, y - ey + 0.3 * eye_r) <= eye_r * 0.22, (1.0, 1.0, 1.0))
        else:
            _paint(canvas, d <= eye_r, (0.95, 0.95, 0.95))
            _paint(canvas, d <= eye_r * 0.55, iris)

    half = spec.mouth_w / 2
    dx = x - spec.face_cx
    curve = spec.mouth_y + spec.mouth_curve * (1 - (dx / half) ** 2)
    thick = 0.018 if target else 0.012
    mouth = (np.abs(dx) <= half) & (np.abs(y - curve) <= thick)
    _paint(canvas, mouth, (0.05, 0.02, 0.02) if target else (0.55, 0.20, 0.20))

    if target:
        band = 0.022 / min(spec.face_ax, spec.face_ay)
        _paint(canvas, (q > 1.0) & (q <= 1.0 + band), (0.05, 0.05, 0.05))

    img = canvas.reshape(resolution, SUPERSAMPLE, resolution, SUPERSAMPLE, 3).mean(axis=(1, 3))
    return (img.transpose(2, 0, 1) * 2.0 - 1.0).astype(np.float32)


@dataclass
class DatasetSpec:
    kind: str = "toy_source"
    count: int = 1000
    seed: int = 0
    resolution: int = 32
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"dataset kind must be one of {KINDS}")
        if self.kind == "folder" and not self.path:
            raise DataError("folder dataset needs a path")
        if self.kind != "folder" and self.count < 1:
            raise DataError("dataset count must be >= 1")


@dataclass
class ImageDataset:
    spec: DatasetSpec
    images: torch.Tensor  # [N, 3, R, R] float32 in [-1, 1]
    specs: List[ToyFaceSpec] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    def __len__(self):
        return self.images.shape[0]

    def manifest(self) -> dict:
        out = asdict(self.spec)
        if self.specs:
            out["specs"] = [asdict(s) for s in self.specs]
        if self.files:
            out["files"] = list(self.files)
        return out

    def write_manifest(self, path):
        Path(path).write_text(json.dumps(self.manifest()))


def resize_image(img: Image.Image, resolution: int) -> np.ndarray:
    """Centre square crop + bilinear (antialiased) resize; ``[3, R, R]`` in ``[-1, 1]``."""
    w, h = img.size
    s = min(w, h)
    left, top = (w - s) // 2, (h - s) // 2
    img = img.crop((left, top, left + s, top + s))
    channels = []
    for band in img.split():
        # resize in 32-bit float mode so the result is not re-quantized to 8 bits
        band = band.convert("F")
        if s != resolution:
            band = band.resize((resolution, resolution), Image.BILINEAR)
        channels.append(np.asarray(band, dtype=np.float32))
    return np.stack(channels) / 127.5 - 1.0


def _load_folder(spec: DatasetSpec) -> Tuple[torch.Tensor, List[str]]:
    root = Path(spec.path)
    files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise DataError(f"no PNG files in {root}")
    images, kept, bad = [], [], []
    for p in files:
        try:
            with Image.open(p) as im:
                images.append(resize_image(im.convert("RGB"), spec.resolution))
            kept.append(str(p))
        except Exception as e:  # PIL raises a zoo of exception types
            bad.append(p)
            log.warning("skipping unreadable image %s: %s", p, e)
    if len(bad) > 0.01 * len(files):
        raise DataError(f"{len(bad)} of {len(files)} images unreadable (limit 1%)")
    return torch.from_numpy(np.stack(images)), kept


def open_dataset(spec: DatasetSpec) -> ImageDataset:
    if spec.kind == "folder":
        images, files = _load_folder(spec)
        return ImageDataset(spec, images, files=files)
    specs = sample_specs(spec.count, spec.seed)
    style = "source" if spec.kind == "toy_source" else "target"
    images = np.stack([render_toy(s, style, spec.resolution) for s in specs])
    return ImageDataset(spec, torch.from_numpy(images), specs=specs)


def load_batch(
    dataset: Union[ImageDataset, DatasetSpec], batch: int, rng: np.random.Generator, flip: bool = False
) -> torch.Tensor:
    """Uniformly sample ``batch`` images (with replacement); random horizontal flips if ``flip``."""
    if isinstance(dataset, DatasetSpec):
        dataset = open_dataset(dataset)
    if len(dataset) == 0:
        raise DataError("empty dataset")
    idx = rng.integers(len(dataset), size=batch)
    x = dataset.images[torch.from_numpy(idx)]
    if flip:
        mask = torch.from_numpy(rng.random(batch) < 0.5)
        x = torch.where(mask[:, None, None, None], x.flip(3), x)
    return x


def luminance(images: torch.Tensor) -> torch.Tensor:
    w = torch.tensor([0.299, 0.587, 0.114], dtype=images.dtype, device=images.device)
    return (images * w.view(1, 3, 1, 1)).sum(dim=1, keepdim=True)


def structure_metric(images_a: torch.Tensor, images_b: torch.Tensor) -> float:
    """Mean squared distance between 8x8 area-downsampled luminance maps."""
    if images_a.shape != images_b.shape:
        raise InvalidArgument(f"shape mismatch: {tuple(images_a.shape)} vs {tuple(images_b.shape)}")
    la = F.adaptive_avg_pool2d(luminance(images_a.double()), 8)
    lb = F.adaptive_avg_pool2d(luminance(images_b.double()), 8)
    return float((la - lb).pow(2).mean())


def to_uint8(images: torch.Tensor) -> np.ndarray:
    """``[B,3,H,W]`` in ``[-1,1]`` -> ``[B,H,W,3]`` uint8."""
    x = ((images.detach().cpu().float().clamp(-1, 1) + 1) * 127.5).round()
    return x.permute(0, 2, 3, 1).numpy().astype(np.uint8)


def save_png(image: np.ndarray, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path)
