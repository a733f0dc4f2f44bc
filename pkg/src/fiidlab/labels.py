"""Per-vertex iid uniform labels.

A label is 64 random bits; the unit-interval value is bits * 2^-64 (exposed
on the 2^-53 float grid).  Factors that need several independent coins per
vertex derive them by mixing the label with a fixed stream tag, so the
whole colouring stays a deterministic function of (labels, graph).
Comparisons between labels use the raw bits: exact, collision-free up to
the birthday bound of 2^64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import bits_to_unit, derive_rng, splitmix64, tag_to_int


@dataclass
class LabelField:
    seed: int
    bits: np.ndarray  # uint64, shape (n,)

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint64)

    @property
    def n(self) -> int:
        return len(self.bits)

    def uniforms(self) -> np.ndarray:
        return bits_to_unit(self.bits)

    def substream(self, tag: str, index: int = 0) -> np.ndarray:
        """Auxiliary iid Uniform[0,1) coordinates carved from the labels."""
        return bits_to_unit(self.substream_bits(tag, index))

    def substream_bits(self, tag: str, index: int = 0) -> np.ndarray:
        salt = np.uint64(tag_to_int(f"{tag}#{index}"))
        return splitmix64(self.bits ^ salt)

    def resample(self, mask: np.ndarray, rng: np.random.Generator,
                 ) -> "LabelField":
        """Fresh labels where mask is true, original bits elsewhere."""
        new_bits = self.bits.copy()
        k = int(np.count_nonzero(mask))
        if k:
            new_bits[mask] = rng.integers(0, 2**64, size=k, dtype=np.uint64)
        return LabelField(seed=self.seed, bits=new_bits)


def sample_labels(n: int, seed: int, index: int = 0) -> LabelField:
    rng = derive_rng(seed, "labels", index)
    return LabelField(seed=seed, bits=rng.integers(0, 2**64, size=n,
                                                   dtype=np.uint64))
