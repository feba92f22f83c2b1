"""Scribble-to-mask refinement by Monte Carlo region growing."""

from ._tracegrow import (
    TracegrowError,
    base_score,
    bonus,
    checkpoint_gate,
    decode_mask_png,
    encode_mask_png,
    expected_time,
    final_score,
    iou,
    rasterize,
    refine,
    seed_count,
    to_lab,
)

__all__ = [
    "TracegrowError",
    "base_score",
    "bonus",
    "checkpoint_gate",
    "decode_mask_png",
    "encode_mask_png",
    "expected_time",
    "final_score",
    "iou",
    "rasterize",
    "refine",
    "seed_count",
    "to_lab",
]
