"""Trusted-dealer correlated randomness: Beaver triples, truncation pairs,
and random bit shares, all derived from one session seed.

Every kind of material comes from two PCG64 streams: a *plain* stream that
fixes the secret values and a *split* stream that fixes how they are shared.
Streams are addressed by (kind, parameter) tags and support random access via
PCG64.advance, so a party, the dealer process, and the clear-text mirror all
regenerate byte-identical material regardless of chunking.
"""

from __future__ import annotations

import numpy as np

from .errors import Exhausted
from .fixedpoint import DEFAULT_RING, RingConfig, from_signed, to_signed
from .sharing import BeaverTriple, RandomBitShare, Share, TruncationPair

_KIND_TAGS = {"triple": 1, "trunc": 2, "bit": 3}
_GR_TAG = 4
_INIT_TAG = 5
_PLAIN, _SPLIT = 0, 1

# 64-bit words drawn per item from each stream
_PLAIN_WORDS = {"triple": 2, "trunc": 1, "bit": 1}
_SPLIT_WORDS = {"triple": 3, "trunc": 2, "bit": 1}


def _stream(session_seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([session_seed, *tags])))


def _window(session_seed: int, tags, start_words: int, n_words: int) -> np.ndarray:
    gen = np.random.PCG64(np.random.SeedSequence([session_seed, *tags]))
    gen.advance(start_words)
    return np.random.Generator(gen).integers(0, 2**64, size=n_words, dtype=np.uint64)


def _key(kind: str, shift: int | None) -> tuple:
    return (kind, shift) if kind == "trunc" else (kind,)


class MaterialSource:
    """Generates both parties' halves of any window of dealer material."""

    def __init__(self, session_seed: int, cfg: RingConfig = DEFAULT_RING):
        self.seed = session_seed
        self.cfg = cfg

    def _words(self, kind, shift, which, start, n):
        tags = [_KIND_TAGS[kind], shift if shift is not None else 0, which]
        per = (_PLAIN_WORDS if which == _PLAIN else _SPLIT_WORDS)[kind]
        return _window(self.seed, tags, per * start, per * n).reshape(n, per)

    def _to_ring(self, words):
        return words.astype(self.cfg.udtype)

    def triples(self, start: int, n: int):
        """Returns (u0, v0, w0, u1, v1, w1) for items [start, start+n)."""
        cfg = self.cfg
        plain = self._to_ring(self._words("triple", None, _PLAIN, start, n))
        u, v = plain[:, 0], plain[:, 1]
        w = u * v
        sp = self._to_ring(self._words("triple", None, _SPLIT, start, n))
        u0, v0, w0 = sp[:, 0], sp[:, 1], sp[:, 2]
        return u0, v0, w0, u - u0, v - v0, w - w0

    def trunc_plain(self, shift: int, start: int, n: int):
        """The signed masks r for truncation pairs (what the mirror consumes)."""
        cfg = self.cfg
        words = self._words("trunc", shift, _PLAIN, start, n)[:, 0]
        # r uniform on [-2^(lam-2), 2^(lam-2)) so masked opens never wrap
        r = (words % np.uint64(1 << (cfg.lam - 1))).astype(cfg.udtype)
        return from_signed(to_signed(r, cfg) - (1 << (cfg.lam - 2)), cfg)

    def trunc_pairs(self, shift: int, start: int, n: int):
        """Returns (r0, rs0, r1, rs1) with rs = r arithmetically shifted."""
        cfg = self.cfg
        r = self.trunc_plain(shift, start, n)
        rs = from_signed(to_signed(r, cfg) >> cfg.sdtype(shift), cfg)
        sp = self._to_ring(self._words("trunc", shift, _SPLIT, start, n))
        r0, rs0 = sp[:, 0], sp[:, 1]
        return r0, rs0, r - r0, rs - rs0

    def bits_plain(self, start: int, n: int):
        words = self._words("bit", None, _PLAIN, start, n)[:, 0]
        return (words & np.uint64(1)).astype(self.cfg.udtype)

    def bit_shares(self, start: int, n: int):
        b = self.bits_plain(start, n)
        b0 = self._to_ring(self._words("bit", None, _SPLIT, start, n))[:, 0]
        return b0, b - b0

    def party_bit_stream(self, party: int, start: int, n: int):
        """Party-local uniform bits used for jointly sampled randomness."""
        words = _window(self.seed, [_GR_TAG, party], start, n)
        return (words & np.uint64(1)).astype(self.cfg.udtype)

    def init_rng(self) -> np.random.Generator:
        """Public stream for data-independent public draws (weight init)."""
        return _stream(self.seed, _INIT_TAG)


class MaterialCursor:
    """One party's sequential view over provisioned dealer material."""

    def __init__(self, source: MaterialSource, party: int, counts: dict):
        self.source = source
        self.party = party
        self.counts = dict(counts)
        self.pos: dict = {}

    def _advance(self, key, n):
        cap = self.counts.get(key, 0)
        at = self.pos.get(key, 0)
        if at + n > cap:
            raise Exhausted(f"requested {at + n} of {key!r} but only {cap} provisioned")
        self.pos[key] = at + n
        return at

    def take_triples(self, n: int):
        at = self._advance(("triple",), n)
        u0, v0, w0, u1, v1, w1 = self.source.triples(at, n)
        return (u0, v0, w0) if self.party == 0 else (u1, v1, w1)

    def take_trunc(self, shift: int, n: int):
        at = self._advance(("trunc", shift), n)
        r0, rs0, r1, rs1 = self.source.trunc_pairs(shift, at, n)
        return (r0, rs0) if self.party == 0 else (r1, rs1)

    def take_bits(self, n: int):
        at = self._advance(("bit",), n)
        b0, b1 = self.source.bit_shares(at, n)
        return b0 if self.party == 0 else b1

    def take_local_bits(self, n: int):
        at = self._advance_local(n)
        return self.source.party_bit_stream(self.party, at, n)

    def _advance_local(self, n):
        at = self.pos.get("local_bits", 0)
        self.pos["local_bits"] = at + n
        return at

    def consumed(self) -> dict:
        return dict(self.pos)


class Dealer:
    """Object API over the material source, mirroring the wire-level catalog."""

    def __init__(self, session_seed: int, cfg: RingConfig = DEFAULT_RING,
                 counts: dict | None = None, session: int = 0):
        self.source = MaterialSource(session_seed, cfg)
        self.cfg = cfg
        self.session = session
        self.counts = dict(counts) if counts else {}
        self.pos: dict = {}

    def _advance(self, key, n):
        at = self.pos.get(key, 0)
        if self.counts:
            cap = self.counts.get(key, 0)
            if at + n > cap:
                raise Exhausted(f"requested {at + n} of {key!r} but only {cap} provisioned")
        self.pos[key] = at + n
        return at

    def issue(self, kind: str, count: int, shift: int | None = None):
        """Issue `count` items; returns (party0 list, party1 list)."""
        if kind == "triple":
            at = self._advance(("triple",), count)
            u0, v0, w0, u1, v1, w1 = self.source.triples(at, count)
            p0 = [BeaverTriple(Share(u0[i], 0, self.session), Share(v0[i], 0, self.session),
                               Share(w0[i], 0, self.session)) for i in range(count)]
            p1 = [BeaverTriple(Share(u1[i], 1, self.session), Share(v1[i], 1, self.session),
                               Share(w1[i], 1, self.session)) for i in range(count)]
            return p0, p1
        if kind == "trunc_pair":
            sh = self.cfg.frac_bits if shift is None else shift
            at = self._advance(("trunc", sh), count)
            r0, rs0, r1, rs1 = self.source.trunc_pairs(sh, at, count)
            p0 = [TruncationPair(Share(r0[i], 0, self.session), Share(rs0[i], 0, self.session), sh)
                  for i in range(count)]
            p1 = [TruncationPair(Share(r1[i], 1, self.session), Share(rs1[i], 1, self.session), sh)
                  for i in range(count)]
            return p0, p1
        if kind == "bit":
            at = self._advance(("bit",), count)
            b0, b1 = self.source.bit_shares(at, count)
            p0 = [RandomBitShare(Share(b0[i], 0, self.session)) for i in range(count)]
            p1 = [RandomBitShare(Share(b1[i], 1, self.session)) for i in range(count)]
            return p0, p1
        raise ValueError(f"unknown material kind {kind!r}")


def with_slack(counts: dict, slack: float = 0.10) -> dict:
    """Provisioning counts padded by the configured slack."""
    return {k: v + int(np.ceil(v * slack - 1e-9)) for k, v in counts.items()}
