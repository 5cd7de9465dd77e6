"""Data-owner side: encode real-valued data, split it into additive shares,
and hand the halves to the computing parties (in files or in memory)."""

from __future__ import annotations

import numpy as np

from .errors import MagnitudeOverflow
from .fixedpoint import RingConfig, encode
from .sharing import split_raw


def encode_matrix(X, ring: RingConfig) -> np.ndarray:
    """Encode with per-cell overflow reporting."""
    X = np.asarray(X, dtype=np.float64)
    limit = 2.0 ** (ring.lam - ring.frac_bits - 1)
    bad = ~np.isfinite(X) | (np.abs(X) >= limit)
    if np.any(bad):
        where = np.argwhere(bad)[0]
        pos = f"row {where[0]}, col {where[1]}" if X.ndim == 2 else f"index {where[0]}"
        raise MagnitudeOverflow(f"value at {pos} outside the representable range")
    return encode(X, ring)


def ingest_shares(X, t, ring: RingConfig, rng: np.random.Generator):
    """Encode a dataset and split every entry into two additive shares.

    Returns ((X0, t0), (X1, t1)); t may be None for owners who hold no labels
    (vertical partitioning keeps labels with one designated owner).
    """
    X_raw = encode_matrix(X, ring)
    X0, X1 = split_raw(X_raw, rng, ring)
    if t is None:
        return (X0, None), (X1, None)
    t_raw = encode_matrix(np.asarray(t, dtype=np.float64), ring)
    t0, t1 = split_raw(t_raw, rng, ring)
    return (X0, t0), (X1, t1)


def ingest_partitions(owner_datasets, mode: str, ring: RingConfig, seed: int):
    """Each owner ingests with its own randomness; the parties' halves are
    then assembled into the global secret-shared matrix.

    Returns (X0, t0), (X1, t1) for the assembled dataset. Reconstruction is
    bit-identical to ingesting the unpartitioned matrix, whatever the split.
    """
    parts0, parts1 = [], []
    labels0, labels1 = [], []
    for i, (X_i, t_i) in enumerate(owner_datasets):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 90, i]))
        (x0, t0), (x1, t1) = ingest_shares(X_i, t_i, ring, rng)
        parts0.append(x0)
        parts1.append(x1)
        if t0 is not None:
            labels0.append(t0)
            labels1.append(t1)
    axis = 0 if mode == "horizontal" else 1
    X0 = np.concatenate(parts0, axis=axis)
    X1 = np.concatenate(parts1, axis=axis)
    t0 = np.concatenate(labels0)
    t1 = np.concatenate(labels1)
    return (X0, t0), (X1, t1)
