"""Stateless decision rules used by the Harvest node."""

from __future__ import annotations

from typing import Iterable

from ..linkest import NeighborTable, is_d1_neighbor

KEEP = "keep"
YIELD = "yield"


def select_parent(table: NeighborTable, now: int | None = None, max_age: int | None = None,
                  exclude: Iterable[int] = ()) -> int | None:
    """Least-hop D-1 neighbour; ties go to the lower id.

    Peers advertising a full child list are skipped, as are peers not heard
    within ``max_age`` of ``now`` when both are given.
    """
    exclude = set(exclude)
    best = None
    for peer, entry in table:
        if peer in exclude or not entry.accepting or not is_d1_neighbor(entry.est):
            continue
        if now is not None and max_age is not None and now - entry.last_heard > max_age:
            continue
        key = (entry.hops, peer)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def claim_color(available: Iterable[int], rng) -> int:
    choices = sorted(available)
    if not choices:
        raise ValueError("no colour available to claim")
    return rng.choice(choices)


def resolve_conflict(mine: tuple[int, int], theirs: tuple[int, int]) -> str:
    """Earlier claim keeps the colour; equal claims fall back to the lower id.

    Each side is ``(claim_mark, node_id)`` where a smaller mark is an earlier
    claim.
    """
    if mine == theirs:
        raise ValueError(f"conflicting claims cannot be identical: {mine}")
    if mine[1] == theirs[1]:
        raise ValueError(f"node {mine[1]} cannot conflict with itself")
    return KEEP if mine < theirs else YIELD


def compute_sleep(observed_seq: int, owner_total: int | None, period: int,
                  soft_ttl: int) -> int:
    """Sleep until the sampled colour owner should have drained its packets."""
    if owner_total is None:
        return soft_ttl
    return max(1, owner_total - observed_seq) * period
