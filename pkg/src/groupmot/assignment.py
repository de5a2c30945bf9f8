"""Minimum-cost linear assignment.

A shortest-augmenting-path Hungarian solver that also returns the optimal
dual potentials. The duals identify every optimal assignment (all of them
live on zero reduced-cost edges), which gives a cheap exact tie-break: among
optimal assignments pick the one whose column sequence, read row by row, is
lexicographically smallest.
"""

from __future__ import annotations

import numpy as np

SENTINEL = 1e6


def _solve_square(C: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(row_to_col, u, v)`` for a square cost matrix."""
    n = C.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j] = row (1-based) matched to column j
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], INF)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            used_idx = np.flatnonzero(used)
            u[p[used_idx]] += delta
            v[used_idx] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _lexicographic_refine(C, r2c, u, v):
    n = C.shape[0]
    scale = max(1.0, float(np.abs(C).max()))
    tight = (C - u[:, None] - v[None, :]) <= 1e-9 * scale
    adj = [np.flatnonzero(tight[i]).tolist() for i in range(n)]
    r2c = r2c.copy()
    c2r = np.empty(n, dtype=int)
    c2r[r2c] = np.arange(n)

    def reroute(row, target, seen, fixed_upto, skip_row):
        # find an alternating path giving `row` some tight column, ending at `target`
        for col in adj[row]:
            if col in seen:
                continue
            seen.add(col)
            if col == target:
                return [col]
            owner = c2r[col]
            if owner <= fixed_upto or owner == skip_row:
                continue
            tail = reroute(owner, target, seen, fixed_upto, skip_row)
            if tail is not None:
                return [col] + tail
        return None

    for i in range(n):
        old = r2c[i]
        for c in adj[i]:
            if c >= old:
                break
            owner = c2r[c]
            if owner < i:
                continue
            path = reroute(owner, old, {c}, i - 1, i)
            if path is None:
                continue
            # rotate the cycle i -> c, owner -> path[0], ...
            rows = [owner] + [c2r[col] for col in path[:-1]]
            for r, col in zip(rows, path):
                r2c[r] = col
            r2c[i] = c
            c2r[r2c] = np.arange(n)
            break
    return r2c


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost assignment of an ``m x n`` matrix.

    Every row or every column (whichever is fewer) is assigned; pairs whose
    cost is at or above :data:`SENTINEL` are gated-out and dropped from the
    result. Ties are broken towards the lowest row index taking the lowest
    column index.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.size == 0:
        return []
    m, n = C.shape
    N = max(m, n)
    padded = np.zeros((N, N))
    padded[:m, :n] = C
    if m == n == 1:
        r2c = np.array([0])
    else:
        r2c, u, v = _solve_square(padded)
        r2c = _lexicographic_refine(padded, r2c, u, v)
    pairs = []
    for r in range(m):
        c = int(r2c[r])
        if c < n and C[r, c] < SENTINEL:
            pairs.append((r, c))
    return pairs


def _components(allowed: np.ndarray) -> list[tuple[list[int], list[int]]]:
    m, n = allowed.shape
    row_seen = np.zeros(m, dtype=bool)
    col_seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(m):
        if row_seen[start] or not allowed[start].any():
            continue
        rows, cols = [], []
        stack = [("r", start)]
        row_seen[start] = True
        while stack:
            kind, idx = stack.pop()
            if kind == "r":
                rows.append(idx)
                for c in np.flatnonzero(allowed[idx] & ~col_seen):
                    col_seen[c] = True
                    stack.append(("c", int(c)))
            else:
                cols.append(idx)
                for r in np.flatnonzero(allowed[:, idx] & ~row_seen):
                    row_seen[r] = True
                    stack.append(("r", int(r)))
        comps.append((sorted(rows), sorted(cols)))
    return comps


def gated_assignment(cost, allowed) -> list[tuple[int, int]]:
    """Solve ``hungarian`` independently on each connected block of ``allowed``.

    Equivalent to one solve with :data:`SENTINEL` on forbidden pairs, but much
    cheaper for the sparse gates typical of frame-to-frame tracking.
    """
    C = np.asarray(cost, dtype=float)
    allowed = np.asarray(allowed, dtype=bool)
    pairs = []
    for rows, cols in _components(allowed):
        sub = np.where(allowed[np.ix_(rows, cols)], C[np.ix_(rows, cols)], SENTINEL)
        for r, c in hungarian(sub):
            pairs.append((rows[r], cols[c]))
    return sorted(pairs)
