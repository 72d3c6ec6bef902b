"""Harvest: randomized distance-2 slot colouring over CSMA for convergecast."""

from .codec import HarvestMessage, decode, encode
from .node import COLORED, CONTENDING, DISCOVERING, DONE, HarvestNode, HarvestParams
from .rules import claim_color, compute_sleep, resolve_conflict, select_parent
from .softstate import ColorSoftState, available_colors

__all__ = [
    "COLORED", "CONTENDING", "DISCOVERING", "DONE", "ColorSoftState", "HarvestMessage",
    "HarvestNode", "HarvestParams", "available_colors", "claim_color", "compute_sleep",
    "decode", "encode", "resolve_conflict", "select_parent",
]
