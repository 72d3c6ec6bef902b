"""Soft-state table of colour owners in a node's distance-2 neighbourhood."""

from __future__ import annotations

from dataclasses import dataclass

CONTESTED = 0xFE
FREE = 0xFF


@dataclass
class ColorEntry:
    owner: int
    claim_seq: int
    last_refreshed: int
    last_direct: int | None = None
    contending: bool = False

    @property
    def rank(self) -> tuple[bool, int]:
        return (self.contending, self.owner)


class ColorSoftState:
    """Colour -> owner map whose entries expire ``ttl`` ms after the last refresh.

    Direct refreshes come from frames sent by the owner itself, indirect ones
    from owner arrays copied out of neighbours' frames.  Only directly heard
    owners are re-advertised, so stale claims cannot echo between neighbours.
    When two owners of one colour are heard directly, the better ranked one
    (colored before contending, then lower id) is kept and advertised, which
    tells the other one it lost.
    """

    def __init__(self, num_colors: int = 4, ttl: int = 3 * 124):
        self.num_colors = num_colors
        self.ttl = ttl
        self.entries: list[ColorEntry | None] = [None] * num_colors

    def fresh(self, color: int, now: int) -> ColorEntry | None:
        e = self.entries[color]
        if e is None or now - e.last_refreshed > self.ttl:
            return None
        return e

    def owner(self, color: int, now: int) -> int | None:
        e = self.fresh(color, now)
        return None if e is None else e.owner

    def _direct(self, e: ColorEntry, now: int) -> bool:
        return e.last_direct is not None and now - e.last_direct <= self.ttl

    def refresh(self, color: int, owner: int, now: int, claim_seq: int = 0,
                direct: bool = True, contending: bool = False) -> None:
        e = self.fresh(color, now)
        if e is not None and e.owner != owner:
            if self._direct(e, now):
                if not direct or (contending, owner) >= e.rank:
                    return
            elif not direct and e.owner == CONTESTED:
                return
            e = None
        if e is None:
            self.entries[color] = ColorEntry(owner, claim_seq, now, now if direct else None, contending)
            return
        e.last_refreshed = now
        if direct:
            e.last_direct = now
            e.contending = contending

    def contest(self, color: int, now: int) -> bool:
        """A collision was heard in ``color``'s slot.  Mark it if no owner is known."""
        if self.fresh(color, now) is not None:
            return False
        self.entries[color] = ColorEntry(CONTESTED, 0, now, now)
        return True

    def forget(self, color: int) -> None:
        self.entries[color] = None

    def advertised(self, now: int, me: int, my_color: int | None) -> tuple[int, ...]:
        """Owner array for outgoing frames: own colour plus directly heard owners."""
        out = []
        for c in range(self.num_colors):
            if c == my_color:
                out.append(me)
                continue
            e = self.entries[c]
            if e is not None and self._direct(e, now):
                out.append(e.owner)
            else:
                out.append(FREE)
        return tuple(out)


def available_colors(soft: ColorSoftState, now: int, me: int | None = None) -> set[int]:
    """Colours that are free locally, or whose owner has gone stale."""
    out = set()
    for c in range(soft.num_colors):
        e = soft.fresh(c, now)
        if e is None or e.owner == me:
            out.add(c)
    return out
