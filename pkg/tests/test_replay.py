import threading

import numpy as np
import pytest
from scipy import stats

from sdpg.checkpoint import load_pool, save_pool
from sdpg.netcore import ShapeError
from sdpg.replay import PoolEmpty, ReplayPool, Transition, batch_from_transitions


def tr(k, obs=2, act=1):
    return Transition(np.full(obs, k, float), np.full(act, -k, float), float(k), np.full(obs, k + 0.5), k % 3 == 0)


def test_push_into_empty_pool():
    pool = ReplayPool(4, 2, 1, seed=0)
    pool.push(tr(1))
    assert len(pool) == 1


def test_fifo_overwrite():
    pool = ReplayPool(2, 2, 1, seed=0)
    for k in (1, 2, 3):
        pool.push(tr(k))
    assert pool.contents().rewards.tolist() == [2.0, 3.0]


def test_fifo_order_matches_insertion_modulo_capacity():
    pool = ReplayPool(7, 2, 1, seed=0)
    for k in range(30):
        pool.push(tr(k))
        expect = list(range(max(0, k - 6), k + 1))
        assert pool.contents().rewards.tolist() == expect


def test_push_rejects_wrong_dims():
    pool = ReplayPool(3, 2, 1)
    with pytest.raises(ShapeError):
        pool.push(tr(1, obs=3))
    with pytest.raises(ShapeError):
        pool.push(tr(1, act=2))


def test_no_reallocation_over_many_pushes():
    cap = 1_000_000
    pool = ReplayPool(cap, 1, 1, seed=0)
    bufs = [pool.states, pool.actions, pool.rewards, pool.next_states, pool.dones]
    ptrs = [b.__array_interface__["data"][0] for b in bufs]
    s = np.zeros(1)
    t = Transition(s, s, 0.0, s, False)
    for _ in range(cap):
        pool.push(t)
    assert len(pool) == cap
    now = [pool.states, pool.actions, pool.rewards, pool.next_states, pool.dones]
    assert all(a is b for a, b in zip(bufs, now))
    assert [b.__array_interface__["data"][0] for b in now] == ptrs


def test_sample_single_item_repeats():
    pool = ReplayPool(5, 2, 1, seed=0)
    pool.push(tr(4))
    b = pool.sample(5)
    assert b.rewards.tolist() == [4.0] * 5 and len(b) == 5


def test_sample_seeded_determinism():
    def run():
        pool = ReplayPool(50, 2, 1, seed=11)
        for k in range(40):
            pool.push(tr(k))
        return pool.sample(16).rewards
    assert np.array_equal(run(), run())


def test_sample_empty_raises():
    with pytest.raises(PoolEmpty):
        ReplayPool(3, 2, 1).sample(2)


def test_sample_uniformity_chi_square():
    pool = ReplayPool(100, 2, 1, seed=3)
    for k in range(100):
        pool.push(tr(k))
    draws = pool.sample(100_000).rewards.astype(int)
    counts = np.bincount(draws, minlength=100)
    assert stats.chisquare(counts).pvalue > 0.01


def test_sample_never_returns_overwritten_items():
    pool = ReplayPool(10, 2, 1, seed=1)
    for k in range(55):
        pool.push(tr(k))
        live = set(range(max(0, k - 9), k + 1))
        assert set(pool.sample(30).rewards.astype(int).tolist()) <= live


def test_batch_rows_are_consistent_transitions():
    pool = ReplayPool(20, 2, 1, seed=2)
    for k in range(20):
        pool.push(tr(k))
    b = pool.sample(64)
    np.testing.assert_array_equal(b.states[:, 0], b.rewards)
    np.testing.assert_array_equal(b.actions[:, 0], -b.rewards)
    np.testing.assert_array_equal(b.dones, b.rewards.astype(int) % 3 == 0)


def test_batch_from_transitions():
    b = batch_from_transitions([tr(1), tr(2)])
    assert b.states.shape == (2, 2) and b.actions.shape == (2, 1) and b.dones.dtype == bool


def test_dump_restore_round_trip(tmp_path):
    pool = ReplayPool(8, 2, 1, seed=5)
    for k in range(13):
        pool.push(tr(k))
    save_pool(pool, tmp_path / "pool.bin")
    back = load_pool(tmp_path / "pool.bin")
    a, b = pool.contents(), back.contents()
    for f in ("states", "actions", "rewards", "next_states", "dones"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    # the sampling stream resumes where it left off
    assert np.array_equal(pool.sample(10).rewards, back.sample(10).rewards)
    pool.push(tr(99))
    back.push(tr(99))
    assert np.array_equal(pool.contents().rewards, back.contents().rewards)


def test_concurrent_writer_and_reader_see_consistent_rows():
    pool = ReplayPool(500, 2, 1, seed=0)
    pool.push(tr(0))
    errors = []

    def writer():
        for k in range(1, 20_000):
            pool.push(tr(k))

    def reader():
        for _ in range(2000):
            b = pool.sample(8)
            if not (np.array_equal(b.states[:, 0], b.rewards) and np.array_equal(b.next_states[:, 0], b.rewards + 0.5)):
                errors.append(b)

    threads = [threading.Thread(target=writer), threading.Thread(target=reader)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
