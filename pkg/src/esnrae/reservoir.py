"""Reservoir encoders: single- and multi-layer echo state machines.

A network is a stack of M reservoirs of equal size N. Layer 1 is driven by
the K input values plus a constant bias input; layer k > 1 is driven by the
current state of layer k-1 through a dense inter-layer matrix. Each layer
also feeds back on itself through a sparse recurrent matrix scaled to a
spectral radius below 1 (the echo state property). With the recurrent
matrices zeroed the same machinery computes the feed-forward ELM variants.

Weight layout: ``w_in`` is N x (K+1) with the bias in column 0 and the K
input columns after it, so that tying can copy a K x N readout transpose
into ``w_in[:, 1:]`` exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .errors import DegenerateMatrixError, FormatError
from .linalg import SeededRng, scale_to_spectral_radius, sparse_random_matrix, spectral_radius

# Retries per layer when a sparse draw happens to be nilpotent.
_MAX_DEGENERATE_RETRIES = 5

# Reservoir size N and connectivity beta tuned per benchmark dataset.
PRESETS: dict[str, dict[str, float]] = {
    "ecg200": {"n_hidden": 150, "connectivity": 0.1},
    "breastcancer": {"n_hidden": 50, "connectivity": 0.05},
    "coffee": {"n_hidden": 100, "connectivity": 0.1},
    "oliveoil": {"n_hidden": 300, "connectivity": 0.001},
    "earthquakes": {"n_hidden": 600, "connectivity": 0.002},
    "meat": {"n_hidden": 250, "connectivity": 0.01},
    "ecgfivedays": {"n_hidden": 100, "connectivity": 0.04},
}


@dataclass(frozen=True)
class ReservoirConfig:
    """Structural parameters of the encoder."""

    n_hidden: int
    input_dim: int
    connectivity: float = 0.1
    spectral_radius_target: float = 0.9
    n_layers: int = 1
    hidden_activation: str = "tanh"
    output_activation: str = "linear"
    input_scaling: float = 1.0

    def __post_init__(self):
        if self.n_hidden < 1:
            raise ValueError(f"n_hidden must be >= 1, got {self.n_hidden}")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if not 0.0 < self.connectivity <= 1.0:
            raise ValueError(f"connectivity must be in (0, 1], got {self.connectivity}")
        if not 0.0 < self.spectral_radius_target < 1.0:
            raise ValueError(
                "spectral_radius_target must be in (0, 1) for the echo state "
                f"property, got {self.spectral_radius_target}"
            )
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.hidden_activation != "tanh":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation != "linear":
            raise ValueError(f"unsupported output activation {self.output_activation!r}")


@dataclass(frozen=True)
class EsnWeights:
    """All weight matrices of one (possibly multi-layer) encoder.

    ``w[i]`` is the recurrent matrix of layer i (zero for ELM variants),
    ``w_inter[i]`` connects layer i to layer i+1, ``b_e[i]`` is layer i's
    bias vector and ``b_d`` the decoder bias (carried for the decoding map
    but unused by pseudo-inverse readout training).
    """

    w_in: np.ndarray
    w: tuple[np.ndarray, ...]
    w_inter: tuple[np.ndarray, ...]
    b_e: tuple[np.ndarray, ...]
    b_d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(self.w))
        object.__setattr__(self, "w_inter", tuple(self.w_inter))
        object.__setattr__(self, "b_e", tuple(self.b_e))
        n = self.w_in.shape[0]
        m = len(self.w)
        if len(self.w_inter) != m - 1:
            raise ValueError(f"{m} layers need {m - 1} inter-layer matrices")
        if len(self.b_e) != m:
            raise ValueError(f"{m} layers need {m} bias vectors")
        for a in (*self.w, *self.w_inter):
            if a.shape != (n, n):
                raise ValueError(f"layer matrix shape {a.shape} != ({n}, {n})")
        for b in self.b_e:
            if b.shape != (n,):
                raise ValueError(f"bias shape {b.shape} != ({n},)")
        if self.b_d.shape != (self.input_dim,):
            raise ValueError(f"decoder bias shape {self.b_d.shape} != ({self.input_dim},)")

    @property
    def n_hidden(self) -> int:
        return self.w_in.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1] - 1

    @property
    def n_layers(self) -> int:
        return len(self.w)


@dataclass(frozen=True)
class StateTrace:
    """Hidden states collected over a dataset, one column per pattern.

    ``layers[i]`` is the N x p state matrix of layer i; per-layer traces are
    retained so multi-layer networks can be recomputed after tying. ``h`` is
    the final layer, i.e. the feature matrix.
    """

    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a state trace needs at least one layer")

    @property
    def h(self) -> np.ndarray:
        return self.layers[-1]

    @property
    def n_patterns(self) -> int:
        return self.layers[-1].shape[1]


def init_weights(
    cfg: ReservoirConfig,
    rng: SeededRng,
    recurrent: bool = True,
    zero_bias: bool = False,
) -> EsnWeights:
    """Draw a random weight set for the configuration.

    The input map and inter-layer matrices are dense uniform [-1, 1); each
    recurrent matrix is sparse at the configured connectivity and rescaled to
    the spectral radius target. A sparse draw with zero spectral radius is
    regenerated from the next sub-stream (bounded retries). ``recurrent=False``
    zeroes the recurrent matrices, which turns the network into the
    feed-forward ELM variant. ``zero_bias`` suppresses the encoder bias terms
    for the plain-ESN update rule.
    """
    n, k, m = cfg.n_hidden, cfg.input_dim, cfg.n_layers

    w_in = rng.child("win").generator().uniform(-1.0, 1.0, (n, k + 1))
    if cfg.input_scaling != 1.0:
        w_in[:, 1:] *= cfg.input_scaling

    w = []
    for i in range(1, m + 1):
        if not recurrent:
            w.append(np.zeros((n, n)))
            continue
        for attempt in range(_MAX_DEGENERATE_RETRIES + 1):
            stream = f"w{i}" if attempt == 0 else f"w{i}#retry{attempt}"
            candidate = sparse_random_matrix(
                n, n, cfg.connectivity, -1.0, 1.0, rng.child(stream)
            )
            if spectral_radius(candidate) > 0.0:
                w.append(
                    scale_to_spectral_radius(candidate, cfg.spectral_radius_target)
                )
                break
        else:
            raise DegenerateMatrixError(
                f"layer {i}: all {_MAX_DEGENERATE_RETRIES + 1} sparse draws had "
                f"zero spectral radius (n={n}, connectivity={cfg.connectivity})"
            )

    w_inter = [
        rng.child(f"winter{i}").generator().uniform(-1.0, 1.0, (n, n))
        for i in range(1, m)
    ]
    if zero_bias:
        b_e = [np.zeros(n) for _ in range(m)]
        b_d = np.zeros(k)
    else:
        b_e = [
            rng.child(f"be{i}").generator().uniform(-1.0, 1.0, n)
            for i in range(1, m + 1)
        ]
        b_d = rng.child("bd").generator().uniform(-1.0, 1.0, k)
    return EsnWeights(w_in=w_in, w=tuple(w), w_inter=tuple(w_inter), b_e=tuple(b_e), b_d=b_d)


def step(
    weights: EsnWeights,
    x_prev: list[np.ndarray] | tuple[np.ndarray, ...],
    u: np.ndarray,
) -> list[np.ndarray]:
    """Advance every layer by one pattern.

    Layer 1 sees the input (with constant 1 on the bias column) plus its own
    previous state; layer k > 1 sees the *current* state of layer k-1 plus
    its own previous state.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (weights.input_dim,):
        raise ValueError(f"input shape {u.shape} != ({weights.input_dim},)")
    if len(x_prev) != weights.n_layers:
        raise ValueError(f"expected {weights.n_layers} layer states, got {len(x_prev)}")
    n = weights.n_hidden
    states: list[np.ndarray] = []
    for i in range(weights.n_layers):
        prev = np.asarray(x_prev[i], dtype=float)
        if prev.shape != (n,):
            raise ValueError(f"layer {i + 1} state shape {prev.shape} != ({n},)")
        if i == 0:
            drive = weights.w_in[:, 0] + weights.w_in[:, 1:] @ u
        else:
            drive = weights.w_inter[i - 1] @ states[i - 1]
        states.append(np.tanh(drive + weights.w[i] @ prev + weights.b_e[i]))
    return states


def run_collect(
    weights: EsnWeights,
    patterns: np.ndarray,
    reset_policy: str = "carry",
) -> StateTrace:
    """Feed every pattern (one row each) and stack the resulting states.

    Under ``carry`` the state flows from one pattern to the next, so column n
    depends on all patterns up to n; under ``reset`` the state is zeroed
    before each pattern. The initial state is always zero.
    """
    if reset_policy not in ("carry", "reset"):
        raise ValueError(f"reset_policy must be carry|reset, got {reset_policy!r}")
    patterns = np.asarray(patterns, dtype=float)
    if patterns.ndim != 2 or patterns.shape[1] != weights.input_dim:
        raise ValueError(
            f"patterns shape {patterns.shape} incompatible with input dim "
            f"{weights.input_dim}"
        )
    p = patterns.shape[0]
    n, m = weights.n_hidden, weights.n_layers
    traces = [np.empty((n, p)) for _ in range(m)]
    zero = [np.zeros(n) for _ in range(m)]
    state = zero
    for j in range(p):
        if reset_policy == "reset":
            state = zero
        state = step(weights, state, patterns[j])
        for i in range(m):
            traces[i][:, j] = state[i]
    return StateTrace(layers=tuple(traces))


# ---------------------------------------------------------------------------
# Binary weight container.
#
# Layout (all little-endian):
#   magic   8 bytes  b"ESNWGT\x00\x01"
#   u32     layer count M
#   u32     reservoir size N
#   u32     input length K
#   blocks: w_in, w[0..M-1], w_inter[0..M-2], b_e[0..M-1], b_d
# Each block is u32 rows, u32 cols, then rows*cols float64 row-major.
# ---------------------------------------------------------------------------

_MAGIC = b"ESNWGT\x00\x01"


def _write_block(fh: BinaryIO, a: np.ndarray) -> None:
    a2 = np.ascontiguousarray(np.atleast_2d(np.asarray(a, dtype="<f8")))
    fh.write(struct.pack("<II", a2.shape[0], a2.shape[1]))
    fh.write(a2.tobytes())


def _read_block(fh: BinaryIO) -> np.ndarray:
    header = fh.read(8)
    if len(header) != 8:
        raise FormatError("weight container truncated (block header)")
    rows, cols = struct.unpack("<II", header)
    raw = fh.read(rows * cols * 8)
    if len(raw) != rows * cols * 8:
        raise FormatError("weight container truncated (block data)")
    return np.frombuffer(raw, dtype="<f8").astype(float).reshape(rows, cols)


def save_weights(weights: EsnWeights, fh: BinaryIO) -> None:
    """Serialize the weight set to an open binary stream, bit-exactly."""
    fh.write(_MAGIC)
    fh.write(struct.pack("<III", weights.n_layers, weights.n_hidden, weights.input_dim))
    _write_block(fh, weights.w_in)
    for a in weights.w:
        _write_block(fh, a)
    for a in weights.w_inter:
        _write_block(fh, a)
    for b in weights.b_e:
        _write_block(fh, b)
    _write_block(fh, weights.b_d)


def load_weights(fh: BinaryIO) -> EsnWeights:
    """Inverse of :func:`save_weights`."""
    magic = fh.read(len(_MAGIC))
    if magic != _MAGIC:
        raise FormatError(f"not a weight container (magic {magic!r})")
    header = fh.read(12)
    if len(header) != 12:
        raise FormatError("weight container truncated (dimensions)")
    m, n, k = struct.unpack("<III", header)
    w_in = _read_block(fh)
    w = tuple(_read_block(fh) for _ in range(m))
    w_inter = tuple(_read_block(fh) for _ in range(m - 1))
    b_e = tuple(_read_block(fh).reshape(-1) for _ in range(m))
    b_d = _read_block(fh).reshape(-1)
    loaded = EsnWeights(w_in=w_in, w=w, w_inter=w_inter, b_e=b_e, b_d=b_d)
    if loaded.n_hidden != n or loaded.input_dim != k:
        raise FormatError("weight container dimensions disagree with blocks")
    return loaded
