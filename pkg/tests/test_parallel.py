# ruff: noqa: S101
import numpy as np
import pytest

from surprise.parallel import chunk_bounds, chunked_concat, chunked_map, chunked_sum


def test_chunk_bounds_cover_range():
    assert chunk_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert chunk_bounds(0, 4) == []


def test_chunk_bounds_rejects_bad_size():
    with pytest.raises(ValueError, match="positive"):
        chunk_bounds(10, 0)


def test_chunked_map_keeps_chunk_order():
    assert chunked_map(lambda a, b: (a, b), 7, workers=3, chunk_size=2) == [(0, 2), (2, 4), (4, 6), (6, 7)]


def test_chunked_sum_is_identical_across_worker_counts():
    values = np.random.default_rng(1).normal(size=10_001) * 1e8

    def part(start, stop):
        chunk = values[start:stop]
        return float(chunk.sum()), np.array([chunk.min(), chunk.max()])

    serial = chunked_sum(part, values.size, workers=1, chunk_size=97)
    threaded = chunked_sum(part, values.size, workers=4, chunk_size=97)
    assert serial[0] == threaded[0]
    assert np.array_equal(serial[1], threaded[1])


def test_chunked_concat():
    out = chunked_concat(lambda a, b: np.arange(a, b), 9, workers=2, chunk_size=4)
    assert out.tolist() == list(range(9))
