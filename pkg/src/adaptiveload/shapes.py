"""Latent sequence-length arithmetic and bucket catalogs.

A raw media shape (frames, height, width) maps to a token count after
temporal/spatial compression: one latent frame per ``temporal_factor`` raw
frames (plus the leading frame), and one token per
``height_factor x width_factor`` pixel patch. Still images are frames=1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DuplicateShape, EmptyCatalog, NonDivisibleFrames, NonDivisibleSpatial

__all__ = [
    "MediaShape",
    "LatentGeometry",
    "Bucket",
    "latent_frames",
    "visual_tokens",
    "sequence_length",
    "build_catalog",
]


@dataclass(frozen=True)
class MediaShape:
    frames: int
    height: int
    width: int

    def __post_init__(self):
        if self.frames < 1 or self.height < 1 or self.width < 1:
            raise ValueError(f"media shape must be positive, got {self}")


@dataclass(frozen=True)
class LatentGeometry:
    temporal_factor: int = 8
    width_factor: int = 16
    height_factor: int = 16
    text_tokens: int = 0

    def __post_init__(self):
        if min(self.temporal_factor, self.width_factor, self.height_factor) < 1:
            raise ValueError("compression factors must be >= 1")
        if self.text_tokens < 0:
            raise ValueError("text_tokens must be >= 0")


@dataclass(frozen=True)
class Bucket:
    shape: MediaShape
    seq_len: int
    sample_count: int


def latent_frames(frames: int, temporal_factor: int) -> int:
    """Number of latent frames: (frames - 1) / temporal_factor + 1.

    Frames=1 (a still image) always yields exactly one latent frame.
    """
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    if (frames - 1) % temporal_factor != 0:
        raise NonDivisibleFrames(
            f"frames={frames}: (frames - 1) not divisible by temporal factor {temporal_factor}"
        )
    return (frames - 1) // temporal_factor + 1


def visual_tokens(shape: MediaShape, geom: LatentGeometry) -> int:
    """Latent token count of one sample: latent frames x spatial patch grid."""
    if shape.height % geom.height_factor != 0:
        raise NonDivisibleSpatial(
            f"height {shape.height} not divisible by {geom.height_factor}"
        )
    if shape.width % geom.width_factor != 0:
        raise NonDivisibleSpatial(
            f"width {shape.width} not divisible by {geom.width_factor}"
        )
    lf = latent_frames(shape.frames, geom.temporal_factor)
    return lf * (shape.height // geom.height_factor) * (shape.width // geom.width_factor)


def sequence_length(shape: MediaShape, geom: LatentGeometry) -> int:
    """Logical sequence length: text tokens plus visual latent tokens."""
    return geom.text_tokens + visual_tokens(shape, geom)


def build_catalog(
    shapes: list[tuple[MediaShape, int]], geom: LatentGeometry
) -> list[Bucket]:
    """One bucket per distinct shape, sorted by ascending sequence length.

    Ties on seq_len are broken by (frames, height, width) so the ordering is
    deterministic; bucket identity is the shape, not the length.
    """
    if not shapes:
        raise EmptyCatalog("catalog requires at least one shape")
    seen = set()
    buckets = []
    for shape, count in shapes:
        key = (shape.frames, shape.height, shape.width)
        if key in seen:
            raise DuplicateShape(f"duplicate shape {key}")
        seen.add(key)
        if count < 1:
            raise ValueError(f"sample_count must be >= 1 for shape {key}")
        buckets.append(Bucket(shape, sequence_length(shape, geom), count))
    buckets.sort(key=lambda b: (b.seq_len, b.shape.frames, b.shape.height, b.shape.width))
    return buckets
