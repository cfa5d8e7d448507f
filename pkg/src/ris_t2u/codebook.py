"""Hadamard ID codebook and correlation decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import code_length_for


def sylvester_hadamard(n: int) -> np.ndarray:
    """Bipolar (+1/-1) Sylvester Hadamard matrix of order n (a power of two)."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"Hadamard order must be a power of two, got {n}")
    h = np.ones((1, 1), dtype=np.int8)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


def to_bipolar(bits) -> np.ndarray:
    return 2 * np.asarray(bits, dtype=np.int64) - 1


@dataclass(frozen=True)
class HadamardCodebook:
    """Binary Sylvester codebook; row 0 (all ones) is never assigned.

    ``rows`` holds all C binary rows, ``assignment[k]`` is the row of VUE k.
    """

    length: int
    rows: np.ndarray
    assignment: np.ndarray

    @property
    def used_rows(self) -> np.ndarray:
        return np.arange(1, self.length)

    def codeword(self, k: int) -> np.ndarray:
        return self.rows[self.assignment[k]]

    @property
    def assigned_bipolar(self) -> np.ndarray:
        """(K, C) bipolar codewords in VUE order."""
        return to_bipolar(self.rows[self.assignment])

    def correlate(self, bits) -> np.ndarray:
        """Bipolar correlation of hard bits (..., C) with every assigned codeword -> (..., K)."""
        return to_bipolar(bits) @ self.assigned_bipolar.T

    def decode(self, bits, radius: int):
        """Argmax-correlation decoding with an acceptance radius.

        Returns ``(vue_index, score)`` per input row; ``vue_index`` is -1 when the
        best score is below ``C - 2*radius``. Ties go to the lowest index.
        """
        scores = self.correlate(bits)
        best = np.argmax(scores, axis=-1)
        score = np.take_along_axis(scores, best[..., None], axis=-1)[..., 0]
        accept = score >= self.length - 2 * radius
        return np.where(accept, best, -1), score


def build_codebook(num_vues: int) -> HadamardCodebook:
    c = code_length_for(num_vues)
    rows = (sylvester_hadamard(c) > 0).astype(np.int8)
    return HadamardCodebook(c, rows, np.arange(1, num_vues + 1))


def default_decoder_radius(c: int) -> int:
    """Error-correction capability floor(C/2 - 1) used by the analytic code-detection bound."""
    return max(c // 2 - 1, 0)


def classical_decoder_radius(c: int) -> int:
    """Unique-decoding radius floor((d_min - 1)/2) with d_min = C/2."""
    return max((c // 2 - 1) // 2, 0)
