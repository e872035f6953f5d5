"""Per-slot bandwidth allocation inside one cell."""
from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

Allocation = dict  # user id -> Hz


def allocate_equal(active: Iterable[int], B: float) -> Allocation:
    users = sorted(active)
    if not users:
        return {}
    share = B / len(users)
    return {u: share for u in users}


def allocate_cq(active: Iterable[int], B: float, quality: Mapping[int, float]) -> Allocation:
    """Whole band to the active user with the best channel; lowest id wins ties."""
    users = sorted(active)
    if not users:
        return {}
    best = users[0]
    for u in users[1:]:
        if quality[u] > quality[best]:
            best = u
    return {u: (B if u == best else 0.0) for u in users}


def allocate_cells(active: np.ndarray, cell: np.ndarray, n_cells: int, B: float,
                   quality: np.ndarray | None = None) -> np.ndarray:
    """Bandwidth for every user in the network at once.

    ``active`` and ``cell`` are per-user arrays with users grouped by cell in
    ascending id order. Passing ``quality`` selects channel-quality
    scheduling, otherwise the band is split equally.
    """
    b = np.zeros(active.shape[0])
    n_act = np.bincount(cell[active], minlength=n_cells)
    if quality is None:
        share = np.divide(B, n_act, out=np.zeros(n_cells), where=n_act > 0)
        b[active] = share[cell[active]]
        return b
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return b
    q = quality[idx]
    c = cell[idx]
    # sort by cell, then quality descending, then id ascending; first per cell wins
    order = np.lexsort((idx, -q, c))
    first = np.ones(order.size, dtype=bool)
    first[1:] = c[order][1:] != c[order][:-1]
    b[idx[order[first]]] = B
    return b
