"""Deterministic matrix kernels used by every other module.

All randomness flows through :class:`SeededRng`, which derives an independent,
platform-stable generator for each named sub-stream, so every weight family
(input weights, each reservoir, each inter-layer matrix, ...) is reproducible
in isolation.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMatrixError, NumericalError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeededRng:
    """A (seed, stream) pair naming one reproducible random sequence.

    Identical pairs yield bit-identical sequences across runs and platforms
    (SHA-256 stream hashing -> SeedSequence -> PCG64). Derive one child per
    random object; a stream is a fresh sequence each time ``generator()`` is
    called, so never draw from the same stream twice for different purposes.
    """

    seed: int
    stream: str = ""

    def child(self, name: str) -> "SeededRng":
        """Return the sub-stream ``name`` rooted at this stream."""
        return SeededRng(self.seed, f"{self.stream}/{name}" if self.stream else name)

    def generator(self) -> np.random.Generator:
        """Instantiate the numpy generator for this stream."""
        words = struct.unpack("<8I", hashlib.sha256(self.stream.encode()).digest())
        seq = np.random.SeedSequence([self.seed & _MASK64, *words])
        return np.random.Generator(np.random.PCG64(seq))


def sparse_random_matrix(
    rows: int,
    cols: int,
    density: float,
    low: float,
    high: float,
    rng: SeededRng,
) -> np.ndarray:
    """Random matrix with an exact number of nonzero entries.

    Exactly ``round(density * rows * cols)`` positions, chosen uniformly
    without replacement, receive values uniform in [low, high); the rest are
    zero. The count is exact (not Bernoulli) so connectivity is assertable.
    Draws that land on exactly 0.0 are redrawn to keep the count honest.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix shape must be positive, got {rows}x{cols}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    if not low < high:
        raise ValueError(f"invalid value range [{low}, {high})")

    n_nonzero = int(round(density * rows * cols))
    g = rng.generator()
    flat = np.zeros(rows * cols)
    positions = g.choice(rows * cols, size=n_nonzero, replace=False)
    values = g.uniform(low, high, size=n_nonzero)
    while np.any(values == 0.0):
        zeros = values == 0.0
        values[zeros] = g.uniform(low, high, size=int(zeros.sum()))
    flat[positions] = values
    return flat.reshape(rows, cols)


def pinv(m: np.ndarray, tolerance: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``tolerance * sigma_max`` are treated as zero;
    the default tolerance is ``1e-12 * max(rows, cols)``. Handles the
    ill-posed case where there are fewer samples than hidden units (the
    least-norm solution).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    if tolerance is None:
        tolerance = 1e-12 * max(m.shape)
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    try:
        return np.linalg.pinv(m, rcond=tolerance)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed to converge for {m.shape[0]}x{m.shape[1]} matrix "
            f"(|max|={np.abs(m).max():.3e}): {exc}"
        ) from exc


def spectral_radius(w: np.ndarray) -> float:
    """Largest absolute eigenvalue of a square matrix."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got shape {w.shape}")
    try:
        eigvals = np.linalg.eigvals(w)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigendecomposition failed for {w.shape[0]}x{w.shape[0]} matrix: {exc}"
        ) from exc
    return float(np.max(np.abs(eigvals)))


def scale_to_spectral_radius(w: np.ndarray, target: float) -> np.ndarray:
    """Rescale ``w`` so its spectral radius equals ``target``.

    Raises DegenerateMatrixError for nilpotent/zero matrices, whose radius
    cannot be scaled up from zero.
    """
    if target <= 0:
        raise ValueError(f"target spectral radius must be positive, got {target}")
    current = spectral_radius(w)
    if current == 0.0:
        raise DegenerateMatrixError(
            "matrix has zero spectral radius and cannot be rescaled"
        )
    return w * (target / current)
