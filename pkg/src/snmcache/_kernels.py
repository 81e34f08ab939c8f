"""Compiled LRU replay loops.

Each cache is a doubly linked list threaded through dense per-content
arrays (``prev``/``nxt``), so lookups, move-to-front and eviction are O(1).
Head is the most recently used entry, tail the least.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _unlink(prev, nxt, ends, c):
    p = prev[c]
    n = nxt[c]
    if p != -1:
        nxt[p] = n
    else:
        ends[0] = n
    if n != -1:
        prev[n] = p
    else:
        ends[1] = p
    prev[c] = -1
    nxt[c] = -1


@njit(cache=True)
def _push_front(prev, nxt, ends, c):
    head = ends[0]
    prev[c] = -1
    nxt[c] = head
    if head != -1:
        prev[head] = c
    ends[0] = c
    if ends[1] == -1:
        ends[1] = c


@njit(cache=True)
def _touch(prev, nxt, ends, c):
    if ends[0] != c:
        _unlink(prev, nxt, ends, c)
        _push_front(prev, nxt, ends, c)


@njit(cache=True)
def _insert(prev, nxt, ends, inside, size, capacity, c):
    """Insert `c` at the head, evicting the tail when full; returns the new size."""
    if size >= capacity:
        t = ends[1]
        _unlink(prev, nxt, ends, t)
        inside[t] = False
        size -= 1
    _push_front(prev, nxt, ends, c)
    inside[c] = True
    return size + 1


@njit(cache=True)
def lru_replay(ids, n_contents, capacity, admit):
    """Hit flag of every request replayed through one LRU cache."""
    hits = np.zeros(len(ids), dtype=np.bool_)
    if capacity <= 0:
        return hits
    prev = np.full(n_contents, -1, dtype=np.int32)
    nxt = np.full(n_contents, -1, dtype=np.int32)
    inside = np.zeros(n_contents, dtype=np.bool_)
    ends = np.full(2, -1, dtype=np.int32)
    size = 0
    for i in range(len(ids)):
        c = ids[i]
        if inside[c]:
            hits[i] = True
            _touch(prev, nxt, ends, c)
        elif admit[c]:
            size = _insert(prev, nxt, ends, inside, size, capacity, c)
    return hits


@njit(cache=True)
def tree_replay(ids, start, parent, capacity, admit, n_contents, measured):
    """Replay requests through a tree of LRU caches with leave-copy-everywhere.

    Returns the index of the node that served each request (-1 for the
    repository) and per-node request and hit counts over measured requests.
    """
    n_nodes = len(parent)
    served = np.full(len(ids), -1, dtype=np.int32)
    req = np.zeros(n_nodes, dtype=np.int64)
    hit = np.zeros(n_nodes, dtype=np.int64)
    prev = np.full((n_nodes, n_contents), -1, dtype=np.int32)
    nxt = np.full((n_nodes, n_contents), -1, dtype=np.int32)
    inside = np.zeros((n_nodes, n_contents), dtype=np.bool_)
    ends = np.full((n_nodes, 2), -1, dtype=np.int32)
    size = np.zeros(n_nodes, dtype=np.int64)
    path = np.empty(n_nodes, dtype=np.int64)
    for i in range(len(ids)):
        c = ids[i]
        s = start[i]
        while s != -1 and not inside[s, c]:
            if measured[i]:
                req[s] += 1
            s = parent[s]
        served[i] = s
        if s != -1:
            if measured[i]:
                req[s] += 1
                hit[s] += 1
            _touch(prev[s], nxt[s], ends[s], c)
        if admit[c]:
            # copies go in from just below the serving node down to the leaf
            depth = 0
            x = start[i]
            while x != s:
                path[depth] = x
                depth += 1
                x = parent[x]
            for j in range(depth - 1, -1, -1):
                x = path[j]
                if capacity[x] > 0:
                    size[x] = _insert(prev[x], nxt[x], ends[x], inside[x], size[x], capacity[x], c)
    return served, req, hit
