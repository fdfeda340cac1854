"""Kernel backend selection.

The compiled extension is preferred; the NumPy implementation is the
fallback. Set SKETCHSEL_BACKEND=ref or =fast to force a choice (forcing
"fast" raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import _ref

_choice = os.environ.get("SKETCHSEL_BACKEND", "")

if _choice == "ref":
    _impl = _ref
elif _choice == "fast":
    from . import _fast as _impl  # noqa: F401  (raises if not built)
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

BACKEND: str = _impl.BACKEND
hash_u64 = _impl.hash_u64
bucket_hash = _impl.bucket_hash
sign_hash = _impl.sign_hash
sketch_add = _impl.sketch_add
sketch_query = _impl.sketch_query
sparse_dot = _impl.sparse_dot
sparse_axpy = _impl.sparse_axpy

__all__ = [
    "BACKEND",
    "hash_u64",
    "bucket_hash",
    "sign_hash",
    "sketch_add",
    "sketch_query",
    "sparse_dot",
    "sparse_axpy",
]
