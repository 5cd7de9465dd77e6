import numpy as np
import pytest
from scipy import stats

from veiltrain.dealer import Dealer
from veiltrain.errors import PartyMismatch, SessionMismatch, TripleReuse
from veiltrain.fixedpoint import RingConfig, decode, encode
from veiltrain.sharing import (BeaverTriple, Share, beaver_mul_pair,
                               beaver_mul_step, local_linear, reconstruct,
                               share, share_vector)

RING = RingConfig()


def test_share_sums_to_secret():
    rng = np.random.default_rng(0)
    s0, s1 = share(np.uint64(42), rng, RING)
    assert (s0.value + s1.value) == 42


def test_share_zero_halves_negate():
    rng = np.random.default_rng(1)
    s0, s1 = share(np.uint64(0), rng, RING)
    assert s0.value + s1.value == 0
    assert s1.value == np.uint64(0) - s0.value


def test_share_first_half_uniform():
    rng = np.random.default_rng(2)
    halves = np.array([share(np.uint64(7), rng, RING)[0].value for _ in range(100_000)])
    counts, _ = np.histogram(halves.astype(np.float64), bins=64,
                             range=(0, float(2**64)))
    assert stats.chisquare(counts).pvalue > 0.01


def test_reconstruct_wraps():
    s0 = Share(np.uint64(2**64 - 5), 0)
    s1 = Share(np.uint64(12), 1)
    assert reconstruct(s0, s1, RING) == 7


def test_reconstruct_round_trip_bulk():
    rng = np.random.default_rng(3)
    secrets = rng.integers(0, 2**64, 10_000, dtype=np.uint64)
    v0, v1 = share_vector(secrets, rng, RING)
    assert np.array_equal(reconstruct(v0, v1, RING), secrets)


def test_reconstruct_session_mismatch():
    s0 = Share(np.uint64(1), 0, session=1)
    s1 = Share(np.uint64(2), 1, session=2)
    with pytest.raises(SessionMismatch):
        reconstruct(s0, s1, RING)


def test_reconstruct_party_mismatch():
    with pytest.raises(PartyMismatch):
        reconstruct(Share(np.uint64(1), 0), Share(np.uint64(2), 0), RING)


def _shared(x, rng, session=0):
    return share(np.uint64(x), rng, RING, session)


def test_local_linear_add():
    rng = np.random.default_rng(4)
    x0, x1 = _shared(30, rng)
    y0, y1 = _shared(12, rng)
    z0 = local_linear([(1, x0), (1, y0)])
    z1 = local_linear([(1, x1), (1, y1)])
    assert reconstruct(z0, z1, RING) == 42


def test_local_linear_scale():
    rng = np.random.default_rng(5)
    x0, x1 = _shared(10, rng)
    z0 = local_linear([(5, x0)])
    z1 = local_linear([(5, x1)])
    assert reconstruct(z0, z1, RING) == 50


def test_local_linear_offset_party0_only():
    rng = np.random.default_rng(6)
    x0, x1 = _shared(10, rng)
    z0 = local_linear([(1, x0)], offset=7)
    z1 = local_linear([(1, x1)], offset=7)
    assert z1.value == x1.value  # party 1 untouched
    assert reconstruct(z0, z1, RING) == 17


def _triple_from_values(u, v, rng):
    w = np.uint64(u) * np.uint64(v)
    u0, u1 = _shared(u, rng)
    v0, v1 = _shared(v, rng)
    w0, w1 = share(w, rng, RING)
    return BeaverTriple(u0, v0, w0), BeaverTriple(u1, v1, w1)


def test_beaver_hand_example():
    # x=3, y=4 with triple (5, 6, 30): d = -2, e = -2, product 12
    rng = np.random.default_rng(7)
    t0, t1 = _triple_from_values(5, 6, rng)
    x = _shared(3, rng)
    y = _shared(4, rng)
    d0, e0 = beaver_mul_step(x[0], y[0], t0)
    d1, e1 = beaver_mul_step(x[1], y[1], t1)
    assert (d0 + d1).view(np.int64) == -2
    assert (e0 + e1).view(np.int64) == -2
    from veiltrain.sharing import beaver_mul_finish
    z0 = beaver_mul_finish(t0, d0 + d1, e0 + e1, 0, 0)
    z1 = beaver_mul_finish(t1, d0 + d1, e0 + e1, 1, 0)
    assert reconstruct(z0, z1, RING) == 12


def test_beaver_zero_operand():
    rng = np.random.default_rng(8)
    for y in (0, 5, 123456):
        t = _triple_from_values(int(rng.integers(1, 100)), int(rng.integers(1, 100)), rng)
        z0, z1 = beaver_mul_pair(_shared(0, rng), _shared(y, rng), t)
        assert reconstruct(z0, z1, RING) == 0


def test_beaver_random_products_exact():
    rng = np.random.default_rng(9)
    xs = rng.integers(0, 2**64, 200, dtype=np.uint64)
    ys = rng.integers(0, 2**64, 200, dtype=np.uint64)
    dealer = Dealer(31, RING)
    t0s, t1s = dealer.issue("triple", 200)
    for x, y, t0, t1 in zip(xs, ys, t0s, t1s):
        z0, z1 = beaver_mul_pair(share(x, rng, RING), share(y, rng, RING), (t0, t1))
        assert int(reconstruct(z0, z1, RING)) == (int(x) * int(y)) % 2**64


def test_beaver_fixed_point_with_truncation():
    rng = np.random.default_rng(10)
    dealer = Dealer(32, RING)
    (t0,), (t1,) = dealer.issue("triple", 1)
    x = share(encode(1.5, RING), rng, RING)
    y = share(encode(2.0, RING), rng, RING)
    z0, z1 = beaver_mul_pair(x, y, (t0, t1))
    (p0,), (p1,) = dealer.issue("trunc_pair", 1)
    # open x*y + r, shift publicly, subtract the shifted mask
    m = reconstruct(Share(z0.value + p0.r.value, 0), Share(z1.value + p1.r.value, 1), RING)
    t_pub = np.uint64(m).view(np.int64) >> RING.frac_bits
    out0 = Share(np.uint64(t_pub).view(np.uint64) - p0.r_shifted.value, 0)
    out1 = Share(np.uint64(0) - p1.r_shifted.value, 1)
    got = decode(reconstruct(out0, out1, RING), RING)
    assert abs(got - 3.0) <= 2**-20


def test_triple_reuse_rejected():
    rng = np.random.default_rng(11)
    t0, t1 = _triple_from_values(3, 4, rng)
    beaver_mul_step(_shared(1, rng)[0], _shared(2, rng)[0], t0)
    with pytest.raises(TripleReuse):
        beaver_mul_step(_shared(1, rng)[0], _shared(2, rng)[0], t0)


def test_distributive_law():
    # beaver_mul composed with local_linear obeys x*(y+z) = x*y + x*z
    rng = np.random.default_rng(12)
    dealer = Dealer(33, RING)
    for _ in range(20):
        x, y, z = (int(v) for v in rng.integers(0, 2**64, 3, dtype=np.uint64))
        xs, ys, zs = _shared(x, rng), _shared(y, rng), _shared(z, rng)
        yz0 = local_linear([(1, ys[0]), (1, zs[0])])
        yz1 = local_linear([(1, ys[1]), (1, zs[1])])
        t = dealer.issue("triple", 3)
        lhs = beaver_mul_pair(xs, (yz0, yz1), (t[0][0], t[1][0]))
        xy = beaver_mul_pair(xs, ys, (t[0][1], t[1][1]))
        xz = beaver_mul_pair(xs, zs, (t[0][2], t[1][2]))
        rhs0 = local_linear([(1, xy[0]), (1, xz[0])])
        rhs1 = local_linear([(1, xy[1]), (1, xz[1])])
        assert reconstruct(lhs[0], lhs[1], RING) == reconstruct(rhs0, rhs1, RING)
