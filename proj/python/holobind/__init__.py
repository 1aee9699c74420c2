"""Python bindings for holobind: 2D HRR secrets, binding and wire helpers."""

from ._core import (
    HolobindError,
    ari,
    bind,
    cosine,
    decode_tensor,
    encode_tensor,
    hilbert_decode,
    hilbert_encode,
    project,
    request_wire_size,
    sample_secret,
    unbind,
)

__all__ = [
    "HolobindError",
    "ari",
    "bind",
    "cosine",
    "decode_tensor",
    "encode_tensor",
    "hilbert_decode",
    "hilbert_encode",
    "project",
    "request_wire_size",
    "sample_secret",
    "unbind",
]
