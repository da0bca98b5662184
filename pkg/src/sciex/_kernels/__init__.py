"""Hot-loop kernels: LCS, edit distance, pairwise Jaccard.

At import time the compiled Cython extension is preferred; setting
SCIEX_PURE=1 (or a failed build) selects the pure-Python fallback. Both
backends are behaviourally identical and covered by the same tests.
"""

from __future__ import annotations

import os

from . import _pure

BACKEND = "pure"

if not os.environ.get("SCIEX_PURE"):
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
else:
    _impl = _pure


def lcs_length(a, b) -> int:
    return _impl.lcs_length(a, b)


def lcs_hit_indices(a, b) -> list[int]:
    return list(_impl.lcs_hit_indices(a, b))


def levenshtein(a: str, b: str) -> int:
    return _impl.levenshtein(a, b)


def jaccard_pairs(docs, threshold: float) -> list[tuple[int, int, float]]:
    return list(_impl.jaccard_pairs(docs, threshold))
