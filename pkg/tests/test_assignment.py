from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groupmot.assignment import SENTINEL, gated_assignment, hungarian


def brute_force(cost):
    """Exhaustive search over the zero-padded square problem.

    Returns the minimum total and, among minimizers, the assignment whose
    column sequence read row by row is lexicographically smallest.
    """
    C = np.asarray(cost, dtype=float)
    m, n = C.shape
    N = max(m, n)
    P = np.zeros((N, N))
    P[:m, :n] = C
    best = None
    for perm in permutations(range(N)):
        total = sum(P[i, perm[i]] for i in range(N))
        key = (total, perm)
        if best is None or key < best:
            best = key
    total, perm = best
    pairs = [(i, perm[i]) for i in range(m) if perm[i] < n and C[i, perm[i]] < SENTINEL]
    return total, pairs


def cost_of(C, pairs):
    return sum(C[i][j] for i, j in pairs)


def test_fixtures():
    assert hungarian([[1, 2], [2, 1]]) == [(0, 0), (1, 1)]
    assert hungarian([[7]]) == [(0, 0)]
    assert hungarian(np.zeros((0, 3))) == []


def test_tie_break_prefers_low_row_low_col():
    assert hungarian(np.ones((3, 3))) == [(0, 0), (1, 1), (2, 2)]
    assert hungarian([[0, 0], [0, 0], [0, 0]]) == [(0, 0), (1, 1)]
    assert hungarian([[1, 1, 0], [1, 1, 1]]) == [(0, 2), (1, 0)]


def test_sentinel_pairs_are_dropped():
    C = [[SENTINEL, 1.0], [SENTINEL, SENTINEL]]
    assert hungarian(C) == [(0, 1)]


@pytest.mark.parametrize("seed", range(100))
def test_square_5x5_matches_brute_force(seed):
    C = np.random.default_rng(seed).integers(0, 10, (5, 5)).astype(float)
    total, pairs = brute_force(C)
    got = hungarian(C)
    assert cost_of(C, got) == total
    assert got == pairs


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1), st.sampled_from([3, 20, 1000]))
def test_rectangular_matches_brute_force(m, n, seed, hi):
    C = np.random.default_rng(seed).integers(0, hi, (m, n)).astype(float)
    total, pairs = brute_force(C)
    got = hungarian(C)
    assert len(got) == min(m, n)
    assert cost_of(C, got) == pytest.approx(total)
    assert got == pairs


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_gated_equals_sentinel_solve(m, n, seed):
    rng = np.random.default_rng(seed)
    C = rng.random((m, n)).round(2)
    allowed = rng.random((m, n)) < 0.5
    got = gated_assignment(C, allowed)
    ref = hungarian(np.where(allowed, C, SENTINEL))
    assert all(allowed[i, j] for i, j in got)
    assert len(got) == len(ref)
    assert cost_of(C, got) == pytest.approx(cost_of(C, ref))
    assert len({i for i, _ in got}) == len(got) == len({j for _, j in got})


def test_float_costs_optimal():
    rng = np.random.default_rng(5)
    for _ in range(30):
        C = rng.random((4, 4))
        total, _ = brute_force(C)
        assert cost_of(C, hungarian(C)) == pytest.approx(total, abs=1e-12)
