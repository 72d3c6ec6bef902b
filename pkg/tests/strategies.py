"""Shared hypothesis strategies for wire-format messages."""

from hypothesis import strategies as st

from harvestsim.harvest.codec import (CONTESTED, MAX_HOPS, MAX_NODE_ID, NULL_ID, NUM_COLORS, OPEN_SLOT,
                                      PAYLOAD_BYTES, HarvestMessage)

node_ids = st.integers(0, MAX_NODE_ID)


@st.composite
def harvest_messages(draw):
    color = draw(st.integers(0, NUM_COLORS - 1))
    sender = draw(node_ids)
    owners = [draw(st.one_of(node_ids, st.sampled_from([NULL_ID, CONTESTED]))) for _ in range(NUM_COLORS)]
    owners[color] = sender
    child = st.one_of(node_ids, st.sampled_from([NULL_ID, OPEN_SLOT]))
    return HarvestMessage(
        color_id=color, hops=draw(st.integers(0, MAX_HOPS)),
        child_ids=(draw(child), draw(child)), color_owners=tuple(owners),
        seq=draw(st.integers(0, 0xFFFF)),
        payload=draw(st.binary(min_size=PAYLOAD_BYTES, max_size=PAYLOAD_BYTES)),
    )
