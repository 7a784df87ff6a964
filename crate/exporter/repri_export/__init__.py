"""Writes feature containers and dataset indices readable by the repri engine."""

from .container import read_container, write_container, decode, encode
from .downsample import downsample_mask
from .index import read_index, write_index

__all__ = [
    "decode",
    "downsample_mask",
    "encode",
    "read_container",
    "read_index",
    "write_container",
    "write_index",
]
