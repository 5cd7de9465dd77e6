"""Additive 2-out-of-2 secret sharing over Z_{2^lam}.

A secret x is split into x0 + x1 = x (mod 2^lam) with x0 uniform, so either
share alone is uniform noise. Linear operations act share-wise with no
communication; products consume one Beaver triple and one opening round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PartyMismatch, SessionMismatch, TripleReuse
from .fixedpoint import DEFAULT_RING, RingConfig


@dataclass
class Share:
    """One party's additive share of a scalar secret."""

    value: np.ndarray  # 0-d unsigned array
    party: int
    session: int = 0

    def __post_init__(self):
        self.value = np.asarray(self.value)


@dataclass
class ShareVector:
    """One party's shares of a vector (or matrix) of secrets.

    values may have any shape; all entries belong to the same party/session.
    """

    values: np.ndarray
    party: int
    session: int = 0

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i) -> "Share":
        return Share(self.values[i], self.party, self.session)


@dataclass
class BeaverTriple:
    """Shares of (u, v, w) with w = u*v; single use."""

    u: Share
    v: Share
    w: Share
    consumed: bool = field(default=False, compare=False)

    def mark_consumed(self):
        if self.consumed:
            raise TripleReuse("multiplication triple used twice")
        self.consumed = True


@dataclass
class TruncationPair:
    """Shares of (r, r >> shift) used to truncate fixed-point products."""

    r: Share
    r_shifted: Share
    shift: int
    consumed: bool = field(default=False, compare=False)

    def mark_consumed(self):
        if self.consumed:
            raise TripleReuse("truncation pair used twice")
        self.consumed = True


@dataclass
class RandomBitShare:
    """Share of a uniform bit (reconstructs to 0 or 1); single use."""

    bit: Share
    consumed: bool = field(default=False, compare=False)

    def mark_consumed(self):
        if self.consumed:
            raise TripleReuse("random bit used twice")
        self.consumed = True


def split_raw(raw: np.ndarray, rng: np.random.Generator, cfg: RingConfig = DEFAULT_RING):
    """Split ring elements into two additive halves; the first half is uniform."""
    raw = np.asarray(raw, dtype=cfg.udtype)
    half0 = rng.integers(0, cfg.modulus, size=raw.shape, dtype=cfg.udtype)
    return half0, raw - half0


def share(x, rng: np.random.Generator, cfg: RingConfig = DEFAULT_RING, session: int = 0):
    """Share a ring element: returns (party0 share, party1 share)."""
    x0, x1 = split_raw(x, rng, cfg)
    return Share(x0, 0, session), Share(x1, 1, session)


def share_vector(raw, rng: np.random.Generator, cfg: RingConfig = DEFAULT_RING, session: int = 0):
    v0, v1 = split_raw(raw, rng, cfg)
    return ShareVector(v0, 0, session), ShareVector(v1, 1, session)


def _check_pair(s0, s1):
    if s0.session != s1.session:
        raise SessionMismatch(f"sessions {s0.session} and {s1.session} do not match")
    if s0.party == s1.party:
        raise PartyMismatch(f"both shares belong to party {s0.party}")


def reconstruct(s0, s1, cfg: RingConfig = DEFAULT_RING) -> np.ndarray:
    """Combine both parties' shares into the public ring value."""
    _check_pair(s0, s1)
    a = np.asarray(getattr(s0, "value", getattr(s0, "values", None)), dtype=cfg.udtype)
    b = np.asarray(getattr(s1, "value", getattr(s1, "values", None)), dtype=cfg.udtype)
    with np.errstate(over="ignore"):
        return np.asarray(a + b)


def local_linear(terms, offset=0, cfg: RingConfig = DEFAULT_RING):
    """Affine combination sum(c_i * s_i) + offset, computed locally.

    Constants are ring elements (plain integers are embedded mod 2^lam). The
    additive offset is applied by party 0 only, so reconstruction yields the
    same affine combination of the secrets.
    """
    if not terms:
        raise ValueError("local_linear needs at least one term")
    party = terms[0][1].party
    session = terms[0][1].session
    acc = None
    with np.errstate(over="ignore"):
        for c, s in terms:
            if s.party != party:
                raise PartyMismatch("local_linear terms span parties")
            if s.session != session:
                raise SessionMismatch("local_linear terms span sessions")
            val = np.asarray(getattr(s, "value", getattr(s, "values", None)),
                             dtype=cfg.udtype)
            term = val * np.asarray(c).astype(np.int64).view(np.uint64).astype(cfg.udtype)
            acc = term if acc is None else acc + term
        if party == 0:
            acc = acc + np.asarray(offset).astype(np.int64).view(np.uint64).astype(cfg.udtype)
    acc = np.asarray(acc)
    cls = Share if acc.ndim == 0 else type(terms[0][1])
    return cls(acc, party, session)


def beaver_mul_step(x: Share, y: Share, t: BeaverTriple, cfg: RingConfig = DEFAULT_RING):
    """Party-local first half of a Beaver multiplication: masked (d, e) shares."""
    t.mark_consumed()
    with np.errstate(over="ignore"):
        d = np.asarray(x.value, dtype=cfg.udtype) - np.asarray(t.u.value, dtype=cfg.udtype)
        e = np.asarray(y.value, dtype=cfg.udtype) - np.asarray(t.v.value, dtype=cfg.udtype)
    return np.asarray(d), np.asarray(e)


def beaver_mul_finish(t: BeaverTriple, d, e, party: int, session: int,
                      cfg: RingConfig = DEFAULT_RING) -> Share:
    """Combine opened d = x-u, e = y-v into a share of x*y.

    z = w + d*v + e*u (+ d*e added by party 0 only).
    """
    d = np.asarray(d, dtype=cfg.udtype)
    e = np.asarray(e, dtype=cfg.udtype)
    with np.errstate(over="ignore"):
        z = (np.asarray(t.w.value, dtype=cfg.udtype)
             + d * np.asarray(t.v.value, dtype=cfg.udtype)
             + e * np.asarray(t.u.value, dtype=cfg.udtype))
        if party == 0:
            z = z + d * e
    return Share(np.asarray(z), party, session)


def beaver_mul_pair(x_pair, y_pair, t_pair, cfg: RingConfig = DEFAULT_RING):
    """Simulate both parties' halves of one Beaver multiplication (for tests
    and the data-owner tooling; the networked path lives in the engine).
    """
    x0, x1 = x_pair
    y0, y1 = y_pair
    t0, t1 = t_pair
    d0, e0 = beaver_mul_step(x0, y0, t0)
    d1, e1 = beaver_mul_step(x1, y1, t1)
    with np.errstate(over="ignore"):
        d = d0 + d1
        e = e0 + e1
    z0 = beaver_mul_finish(t0, d, e, 0, x0.session, cfg)
    z1 = beaver_mul_finish(t1, d, e, 1, x1.session, cfg)
    return z0, z1
