"""Per-node Harvest protocol reactor.

A node lives in one of four phases:

* discovering: listening, estimating links, waiting for a parent and a free
  colour (sleeping when no colour is free and duty cycling is on);
* contending: has picked a colour and a parent, sends beacons in that
  colour's slot using CSMA backoff until the parent admits it;
* colored: admitted, no backoff, one frame per period at its slot boundary;
* done: own packets and all children's packets forwarded, colour released.

The base station is permanently colored with colour 0 and hop count 0.
Every node shares the base station's period grid, so the period index of a
time is the same everywhere once synchronised.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..linkest import NeighborTable, is_d1_neighbor
from ..simnet import BROADCAST, IDLE, SLEEP, Frame, Medium
from .codec import (CONTESTED, FLAG_BEACON, FLAG_CONTEND, FLAG_DATA, FLAG_DONE, MAX_HOPS,
                    NULL_ID, OPEN_SLOT, HarvestMessage, decode, encode, make_payload,
                    read_payload)
from .rules import YIELD, claim_color, compute_sleep, resolve_conflict, select_parent
from .softstate import ColorSoftState, available_colors

DISCOVERING = "discovering"
CONTENDING = "contending"
COLORED = "colored"
DONE = "done"


@dataclass
class HarvestParams:
    colors: int = 4
    concurrency: int = 2
    slot_ms: int = 31
    airtime_ms: int = 23
    buffers: int = 1
    packets: int = 100
    soft_ttl_periods: int = 3
    duty_cycle: bool = True
    backoff_min: int = 1
    backoff_max: int = 16
    linger_periods: int = 6
    min_tenure_periods: int = 40
    confirm_periods: int = 3
    listen_periods: int = 2
    parent_timeout_periods: int = 4
    done_repeats: int = 2
    pending_ttl_periods: int = 2000

    def __post_init__(self):
        if self.colors < self.concurrency + 2:
            raise ValueError("need colors >= concurrency + 2")
        if self.colors != 4:
            raise ValueError("the wire format carries exactly 4 colour owners")
        if self.concurrency > 2:
            raise ValueError("the wire format lists at most 2 children")
        if self.buffers < 1:
            raise ValueError("at least one packet buffer is required")
        if self.airtime_ms > self.slot_ms:
            raise ValueError("a slot must fit one frame")

    @property
    def period(self) -> int:
        return self.colors * self.slot_ms

    @property
    def soft_ttl(self) -> int:
        return self.soft_ttl_periods * self.period


class HarvestNode:
    def __init__(self, nid: int, params: HarvestParams, medium: Medium, rng, packets: int | None = None):
        self.id = nid
        self.p = params
        self.medium = medium
        self.k = medium.k
        self.rng = rng
        self.is_base = nid == 0
        self.table = NeighborTable()
        self.soft = ColorSoftState(params.colors, params.soft_ttl)
        self.own_total = 0 if self.is_base else (params.packets if packets is None else packets)
        self.own_remaining = self.own_total
        self.own_next = 0
        self.buffers: deque[tuple[int, int]] = deque()
        self.children: list[int] = []
        self.child_heard: dict[int, int] = {}
        self.rr = 0
        self.parent: int | None = None
        self.hops = 0 if self.is_base else MAX_HOPS
        self.my_color: int | None = None
        self.claim_time = 0
        self.claim_period = 0
        self.cleared = False
        self.last_parent_ack = 0
        self.synced = self.is_base
        self.phase = DISCOVERING
        self.linger_left: int | None = None
        self.slot_event = None
        self.wake_event = None
        self.awake_since = 0
        self.holdoff_until = 0
        self.max_buffered = 0
        self.max_children = 0
        # neighbours farther out that were heard but not yet seen finish or
        # settle under another parent; a node does not finish while any are fresh
        self.pending: dict[int, int] = {}
        self.done_left = 0
        self.failures = 0
        self.phase_before_release = DISCOVERING
        self.received: list[tuple[int, int]] = []  # base station only
        medium.attach(nid, self)

    # ------------------------------------------------------------------ timing

    @property
    def period(self) -> int:
        return self.p.period

    def current_period(self, now: int) -> int:
        return now // self.period

    def next_slot(self, color: int, after: int) -> int:
        """First boundary of ``color``'s slot at or after ``after``."""
        base = color * self.p.slot_ms
        if after <= base:
            return base
        return base + -(-(after - base) // self.period) * self.period

    def slot_of(self, t: int) -> int:
        return (t % self.period) // self.p.slot_ms

    # ------------------------------------------------------------------ lifecycle

    def start(self) -> None:
        if self.is_base:
            self.phase = COLORED
            self.my_color = 0
            self.claim_period = 0
            self.medium.trace.log(self.k.now, self.id, "color_claim", None, 0, None, "base")
            self.slot_event = self.k.schedule(self.next_slot(0, self.k.now), self.on_slot)
        elif self.own_remaining == 0:
            self._finish("empty")

    @property
    def done(self) -> bool:
        return self.phase == DONE

    # ------------------------------------------------------------------ receive

    def on_collision(self, frame: Frame) -> None:
        """Energy but no decode: with no known owner, flag that slot's colour."""
        if self.phase == DONE or not self.synced:
            return
        self.soft.contest(self.slot_of(frame.tx_start), self.k.now)

    def on_frame(self, frame: Frame) -> None:
        if self.phase == DONE:
            return
        msg = frame.decoded
        if msg is None:
            msg = frame.decoded = decode(frame.payload)
        now = self.k.now
        s = frame.sender
        prev = self.table.peers.get(s)
        restart = prev is not None and (
            prev.color != msg.color_id or (prev.last_seq is not None and msg.seq < prev.last_seq))
        entry = self.table.heard(s, msg.seq, now, hops=msg.hops if msg.hops < MAX_HOPS else None,
                                 restart=restart)
        entry.color = msg.color_id
        origin, oseq, flags = read_payload(msg.payload)
        done_flag = bool(flags & FLAG_DONE)
        contending = bool(flags & FLAG_CONTEND)
        entry.accepting = msg.accepting and not done_flag
        if entry.accepting:
            self.synced = True

        self._track_pending(s, msg, frame.dest, entry, done_flag, contending, now)

        # soft state
        if done_flag:
            if self.soft.owner(msg.color_id, now) == s:
                self.soft.forget(msg.color_id)
        else:
            self.soft.refresh(msg.color_id, s, now, claim_seq=self.current_period(now) - msg.seq,
                              direct=True, contending=contending)
        for c, o in enumerate(msg.color_owners):
            if c == msg.color_id or o == NULL_ID or o == self.id:
                continue
            self.soft.refresh(c, o, now, direct=False)

        if self.my_color is not None and not self.is_base:
            if self._conflicted(s, msg, now, done_flag, contending):
                return

        if s == self.parent and self.phase in (CONTENDING, COLORED):
            if done_flag:
                self._release("parent_done")
                return
            listed = msg.color_owners[self.my_color] == self.id
            if self.id in msg.cleared():
                self.cleared = True
                listed = True
                if self.phase == CONTENDING:
                    self.phase = COLORED
                    self.failures = 0
            if listed:
                self.last_parent_ack = now

        if frame.dest == self.id:
            self._addressed(s, msg, flags, origin, oseq, now, done_flag)

        if self.phase == DISCOVERING:
            self._consider_claim()

    def _track_pending(self, s, msg, dest, entry, done_flag, contending, now) -> None:
        if done_flag or (not contending and dest != self.id):
            self.pending.pop(s, None)
            return
        if s == self.parent or s in self.children:
            return
        if entry.est.value is not None and not is_d1_neighbor(entry.est):
            return
        if msg.hops == MAX_HOPS or msg.hops > self.hops:
            self.pending[s] = now

    def _pending_ttl(self) -> int:
        return self.p.pending_ttl_periods * self.period

    def _waiting_neighbours(self, now: int) -> bool:
        ttl = self._pending_ttl()
        for peer, t in list(self.pending.items()):
            if now - t > ttl:
                del self.pending[peer]
        return bool(self.pending)

    def _conflicted(self, s: int, msg: HarvestMessage, now: int, done_flag: bool,
                    contending: bool) -> bool:
        """Apply the conflict rules for my colour; True if I yielded."""
        c = self.my_color
        if msg.color_id == c and s != self.id and not done_flag:
            if self.phase == CONTENDING:
                return self._release(f"conflict:{s}")
            if contending:
                return False  # a contender always gives way to a colored node
            theirs = (self.current_period(now) - msg.seq, s)
            if resolve_conflict((self.claim_period, self.id), theirs) == YIELD:
                return self._release(f"conflict:{s}")
            return False
        o = msg.color_owners[c]
        if o == NULL_ID or o == self.id or msg.color_id == c:
            return False
        # A neighbour advertises someone else for my colour: it heard both of
        # us (or a collision) and ranked the other claim first.
        return self._release("contested" if o == CONTESTED else f"conflict:{o}")

    def _addressed(self, s, msg, flags, origin, oseq, now, done_flag) -> None:
        if s in self.children:
            self.child_heard[s] = now
        if flags & FLAG_DATA:
            if self.is_base:
                self.received.append((origin, oseq))
            elif len(self.buffers) < self.p.buffers:
                self.buffers.append((origin, oseq))
                self.max_buffered = max(self.max_buffered, len(self.buffers))
                self.linger_left = None
            else:
                self.medium.trace.log(now, self.id, "drop", s, msg.color_id, msg.seq, "data;buffer_full")
        if done_flag:
            self._drop_child(s)
            return
        if s in self.children:
            return
        # contenders ask to join; a colored sender that addresses me but is not
        # listed lost its place (its frames went missing) and is taken back
        self._admit(s, msg.color_id, now)

    def _admit(self, s: int, c: int, now: int) -> None:
        if self.phase != COLORED or len(self.children) >= self.p.concurrency:
            return
        if c == self.my_color:
            return
        if self.parent is not None and self.parent in self.table and self.table[self.parent].color == c:
            return
        if self.soft.owner(c, now) not in (None, s):
            return
        self.children.append(s)
        self.pending.pop(s, None)
        self.child_heard[s] = now
        self.max_children = max(self.max_children, len(self.children))
        self.linger_left = None

    def _drop_child(self, c: int) -> None:
        if c in self.children:
            self.children.remove(c)
        self.child_heard.pop(c, None)

    # ------------------------------------------------------------------ contention

    def _has_work(self) -> bool:
        return self.own_remaining > 0 or bool(self.buffers)

    def _consider_claim(self) -> None:
        now = self.k.now
        if self.medium.asleep(self.id) or not self._has_work() or now < self.holdoff_until:
            return
        if now - self.awake_since < self.period:
            return  # hear a full period of owner arrays first
        avail = available_colors(self.soft, now, self.id)
        if not avail:
            self._doze()
            return
        cand = select_parent(self.table, now, max_age=self.p.soft_ttl)
        if cand is None or not self.synced:
            return
        avail.discard(self.table[cand].color)
        if not avail:
            return
        color = claim_color(avail, self.rng)
        self.parent = cand
        self.hops = min(self.table[cand].hops + 1, MAX_HOPS)
        self.my_color = color
        self.phase = CONTENDING
        self.claim_time = now
        self.claim_period = self.current_period(now)
        self.last_parent_ack = now
        self.cleared = False
        self.linger_left = None
        self.medium.trace.log(now, self.id, "color_claim", cand, color, None, f"hops={self.hops}")
        self.slot_event = self.k.schedule(self.next_slot(color, now + 1), self.on_slot)

    def _release(self, reason: str) -> bool:
        now = self.k.now
        self.phase_before_release = self.phase
        if self.my_color is not None:
            self.medium.trace.log(now, self.id, "color_release", self.parent, self.my_color, None, reason)
        self.k.cancel(self.slot_event)
        self.slot_event = None
        self.my_color = None
        self.parent = None
        self.phase = DISCOVERING
        self.hops = MAX_HOPS
        self.cleared = False
        self.children.clear()
        self.child_heard.clear()
        self.linger_left = None
        self.awake_since = now
        # failed claims back off over a growing random number of periods so
        # hidden contenders stuck on the same colour drift apart
        if self.phase_before_release == CONTENDING:
            self.failures += 1
        self.holdoff_until = now + self.rng.randint(1, 2 << min(self.failures, 4)) * self.period
        if not self._has_work():
            self._finish("drained")
        return True

    def _doze(self) -> None:
        """No colour free: sleep until one should come back."""
        if not self.p.duty_cycle or self.phase != DISCOVERING or self.wake_event is not None:
            return
        now = self.k.now
        if now - self.awake_since < self.p.listen_periods * self.period:
            return
        best = None
        for c in range(self.p.colors):
            e = self.soft.fresh(c, now)
            if e is None:
                continue
            peer = self.table.peers.get(e.owner)
            seen = peer is not None and peer.last_seq is not None and now - peer.last_heard <= self.period
            d = compute_sleep(peer.last_seq if seen else 0, self.p.packets if seen else None,
                              self.period, self.p.soft_ttl)
            best = d if best is None else min(best, d)
        if best is None:
            return
        self.medium.set_radio_mode(self.id, SLEEP)
        self.wake_event = self.k.after(best, self._wake)

    def _wake(self) -> None:
        self.wake_event = None
        if self.phase == DONE:
            return
        self.medium.set_radio_mode(self.id, IDLE)
        self.awake_since = self.k.now
        self.table.resync()

    # ------------------------------------------------------------------ transmit

    def on_slot(self) -> None:
        self.slot_event = None
        if self.phase not in (CONTENDING, COLORED):
            return
        now = self.k.now
        T = self.period
        if not self.is_base:
            if self.phase == CONTENDING and now - self.claim_time > self.p.confirm_periods * T:
                self._release("unconfirmed")
                return
            if now - self.last_parent_ack > self.p.parent_timeout_periods * T:
                self._release("parent_lost")
                return
        for c in list(self.children):
            if now - self.child_heard.get(c, now) > self.p.soft_ttl + T:
                self._drop_child(c)

        data = None
        last_own = False
        if self.phase == COLORED and not self.is_base and self.cleared:
            if self.buffers:
                data = self.buffers.popleft()
            elif self.own_remaining > 0:
                data = (self.id, self.own_next)
                self.own_next += 1
                self.own_remaining -= 1
                last_own = self.own_remaining == 0
        self.cleared = False

        final = False
        if self.done_left > 0:
            self.done_left -= 1
            final = True
        elif self.phase == COLORED and not self.is_base and not self._has_work() and not self.children:
            if self.linger_left is None:
                self.linger_left = self.p.linger_periods
            tenure = self.current_period(now) - self.claim_period
            if self.linger_left <= 0 and tenure >= self.p.min_tenure_periods \
                    and not self._waiting_neighbours(now):
                final = True
                self.done_left = self.p.done_repeats - 1
            elif data is None and self.linger_left > 0:
                self.linger_left -= 1

        if self.is_base:
            cleared = list(self.children)
        elif self.phase == COLORED and self.children:
            free = self.p.buffers - len(self.buffers)
            n = len(self.children)
            cleared = [self.children[(self.rr + i) % n] for i in range(min(free, n))]
            if cleared:
                self.rr = (self.rr + 1) % n
        else:
            cleared = []
        accepting = self.phase == COLORED and len(self.children) < self.p.concurrency and not final
        child_ids = cleared + [OPEN_SLOT if accepting else NULL_ID] * (2 - len(cleared))

        state_flags = (FLAG_DONE if final else 0) | (FLAG_CONTEND if self.phase == CONTENDING else 0)
        if data is not None:
            payload = make_payload(data[0], data[1], FLAG_DATA | state_flags)
            detail = f";to={self.parent};origin={data[0]};oseq={data[1]}" + (";last=1" if last_own else "")
            kind = "data"
        else:
            payload = make_payload(self.id, 0, FLAG_BEACON | state_flags)
            detail = ";final=1" if final else ""
            kind = "beacon"
        if self.phase == CONTENDING:
            detail += ";contend=1"
        seq = (self.current_period(now) - self.claim_period) & 0xFFFF
        msg = HarvestMessage(
            color_id=self.my_color, hops=min(self.hops, MAX_HOPS), child_ids=tuple(child_ids),
            color_owners=self.soft.advertised(now, self.id, self.my_color),
            seq=seq, payload=payload,
        )
        frame = Frame(self.id, BROADCAST if self.is_base else self.parent, encode(msg),
                      tx_duration=self.p.airtime_ms, kind=kind, color=self.my_color,
                      seq=seq, detail=detail)
        frame.decoded = msg

        last_frame = final and self.done_left == 0

        def started(f):
            if last_frame:
                self.k.schedule(f.tx_end, self._finish, "done")

        if self.phase == CONTENDING:
            self.medium.csma_send(frame, on_start=started, window=(self.p.backoff_min, self.p.backoff_max),
                                  deadline=now + self.p.slot_ms)
        else:
            self.medium.csma_send(frame, on_start=started, backoff=False)
        if not last_frame:
            self.slot_event = self.k.schedule(now + T, self.on_slot)

    def _finish(self, reason: str) -> None:
        now = self.k.now
        if self.my_color is not None:
            self.medium.trace.log(now, self.id, "color_release", self.parent, self.my_color, None, reason)
        self.my_color = None
        self.phase = DONE
        self.k.cancel(self.slot_event)
        self.k.cancel(self.wake_event)
        self.wake_event = None
        if self.p.duty_cycle and not self.medium.asleep(self.id):
            self.medium.set_radio_mode(self.id, SLEEP)
