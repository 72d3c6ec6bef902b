"""Synthetic traces for the colouring oracle.

Each holder transmits once per period in its colour's slot and every audible
neighbour decodes the frame, so claims spread exactly as far as the radio
reaches.  Nothing here runs protocol code.
"""

from harvestsim.simnet import Topology, Trace

T = 124
SLOT = 31


def line_topology(n: int) -> Topology:
    lq = [[100 if i == j else (100 if abs(i - j) == 1 else 0) for j in range(n)] for i in range(n)]
    return Topology([(3.0 * i, 0.0) for i in range(n)], lq)


def grid_topology(rows: int, cols: int) -> Topology:
    pos = [(3.0 * c, 3.0 * r) for r in range(rows) for c in range(cols)]
    n = len(pos)

    def q(i, j):
        if i == j:
            return 100
        (x1, y1), (x2, y2) = pos[i], pos[j]
        return 100 if abs(x1 - x2) + abs(y1 - y2) == 3.0 else 0
    return Topology(pos, [[q(i, j) for j in range(n)] for i in range(n)])


def colour_trace(topo: Topology, holds: list[tuple[int, int, int, int]], end_period: int) -> Trace:
    """``holds`` is (node, colour, first_period, last_period) per claim."""
    tr = Trace("harvest", {"base": 0, "end_ms": end_period * T})
    events = []
    for node, c, p0, p1 in holds:
        events.append((p0 * T, 0, node, "color_claim", 0, c, None, "hops=1"))
        for p in range(p0, p1 + 1):
            t = p * T + c * SLOT + 1
            events.append((t, 1, node, "tx", 255, c, p - p0, "beacon;dur=23"))
            for j in topo.audible[node]:
                events.append((t + 23, 2, j, "rx", node, c, p - p0, "beacon;dur=23"))
        events.append(((p1 + 1) * T, 3, node, "color_release", 0, c, None, "done"))
    for t, _, node, ev, peer, c, seq, detail in sorted(events):
        tr.log(t, node, ev, peer, c, seq, detail)
    return tr


def planted_faults():
    """Twenty (name, topology, trace, offending pair) fixtures."""
    out = []
    line = line_topology(6)
    grid = grid_topology(3, 3)
    k = 0
    for c in range(4):
        for a, b in ((1, 2), (1, 3), (2, 4), (3, 5)):
            holds = [(a, c, 0, 20), (b, c, 3 + k % 4, 25)]
            out.append((f"line-{a}-{b}-c{c}", line, colour_trace(line, holds, 30), (a, b)))
            k += 1
    for a, b, c in ((0, 1, 1), (0, 4, 2), (2, 4, 3), (4, 8, 0)):
        holds = [(a, c, 2, 30), (b, c, 0, 30), (7 if a != 7 and b != 7 else 6, (c + 1) % 4, 0, 30)]
        out.append((f"grid-{a}-{b}-c{c}", grid, colour_trace(grid, holds, 35), (min(a, b), max(a, b))))
    return out
