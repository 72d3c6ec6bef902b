"""WMEWMA link estimation and neighbourhood classification."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

ALPHA = 0.6
WINDOW = 30
D1_MIN = 75
CARRIER_MIN = 30
SEQ_SPACE = 1 << 16


@dataclass(frozen=True)
class LinkEstimate:
    """Delivery-percentage estimate for one peer.

    ``value`` is None until the first window closes; the first window primes
    the average with its own mean.
    """

    value: int | None = None
    window_received: int = 0
    window_expected: int = 0
    alpha: float = ALPHA
    window_len: int = WINDOW

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.value is not None and not 0 <= self.value <= 100:
            raise ValueError(f"value out of range: {self.value}")

    @property
    def quality(self) -> int:
        return 0 if self.value is None else self.value


def wmewma_update(est: LinkEstimate) -> LinkEstimate:
    """Fold the current window into the moving average and reset the window."""
    if est.window_expected <= 0:
        return est
    received = min(est.window_received, est.window_expected)
    mean = 100.0 * received / est.window_expected
    if est.value is None:
        new = mean
    else:
        new = est.alpha * est.value + (1.0 - est.alpha) * mean
    value = max(0, min(100, int(round(new))))
    return replace(est, value=value, window_received=0, window_expected=0)


def observe(est: LinkEstimate, expected: int, received: int = 1) -> LinkEstimate:
    """Account for ``expected`` packets of which ``received`` arrived.

    Closes the window (and updates the average) once it holds
    ``window_len`` expected packets.
    """
    est = replace(
        est,
        window_received=est.window_received + received,
        window_expected=est.window_expected + expected,
    )
    if est.window_expected >= est.window_len:
        est = wmewma_update(est)
    return est


def is_d1_neighbor(est: LinkEstimate | int | None) -> bool:
    q = est.quality if isinstance(est, LinkEstimate) else (est or 0)
    return q >= D1_MIN


def is_carrier_detectable(quality: int) -> bool:
    return quality >= CARRIER_MIN


def expected_from_seq(last_seq: int, new_seq: int, space: int = SEQ_SPACE) -> int:
    """Packets expected between two sequence numbers of one sender.

    The gap counts the losses plus the packet just received; arithmetic wraps
    at ``space``.
    """
    gap = (new_seq - last_seq) % space
    if gap == 0:
        raise ValueError("new_seq must differ from last_seq")
    return gap


@dataclass
class PeerEntry:
    est: LinkEstimate = field(default_factory=LinkEstimate)
    hops: int = 63
    last_heard: int = 0
    last_seq: int | None = None
    accepting: bool = True
    color: int | None = None


class NeighborTable:
    """Per-peer link estimates, hop counts and last-heard times.

    Entries exist only for peers heard at least once.
    """

    def __init__(self, alpha: float = ALPHA, window_len: int = WINDOW):
        self.alpha = alpha
        self.window_len = window_len
        self.peers: dict[int, PeerEntry] = {}

    def __contains__(self, peer: int) -> bool:
        return peer in self.peers

    def __getitem__(self, peer: int) -> PeerEntry:
        return self.peers[peer]

    def __iter__(self):
        return iter(self.peers.items())

    def heard(self, peer: int, seq: int, now: int, hops: int | None = None,
              restart: bool = False) -> PeerEntry:
        """Record a received message from ``peer``.

        ``restart`` marks a broken sequence baseline (peer's counter reset, or
        we were asleep); that message counts as a single expected packet.
        """
        entry = self.peers.get(peer)
        if entry is None:
            entry = PeerEntry(est=LinkEstimate(alpha=self.alpha, window_len=self.window_len))
            self.peers[peer] = entry
        if entry.last_seq is None or restart or seq == entry.last_seq:
            expected = 1
        else:
            expected = expected_from_seq(entry.last_seq, seq)
            if expected > self.window_len:
                # bigger than a whole window: treat as a counter restart
                expected = 1
        entry.est = observe(entry.est, expected)
        entry.last_seq = seq
        entry.last_heard = now
        if hops is not None:
            if hops < 0:
                raise ValueError("hop count must be non-negative")
            entry.hops = hops
        return entry

    def resync(self) -> None:
        """Forget sequence baselines, e.g. after the radio slept."""
        for entry in self.peers.values():
            entry.last_seq = None

    def set_quality(self, peer: int, quality: int, hops: int | None = None) -> PeerEntry:
        """Install a fixed estimate (static routing, tests)."""
        entry = self.peers.setdefault(peer, PeerEntry())
        entry.est = LinkEstimate(value=quality, alpha=self.alpha, window_len=self.window_len)
        if hops is not None:
            entry.hops = hops
        return entry
