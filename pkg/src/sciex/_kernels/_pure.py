"""Pure-Python reference implementations of the hot kernels.

These are the fallback when the compiled extension is unavailable and the
behavioural reference the extension is tested against. Keep both sides
bit-identical: same DP recurrences, same backtrack tie-breaking.
"""

from __future__ import annotations

from typing import Sequence


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two id sequences."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = [0] * (m + 1)
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[m]


def lcs_hit_indices(a: Sequence[int], b: Sequence[int]) -> list[int]:
    """Indices into `a` of one canonical LCS with `b`, ascending.

    Backtrack preference is fixed (diagonal, then up, then left) so the pure
    and compiled backends pick the same subsequence.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return []
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        ai = a[i - 1]
        row = dp[i]
        prev = dp[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            elif prev[j] >= row[j - 1]:
                row[j] = prev[j]
            else:
                row[j] = row[j - 1]
    hits = []
    i, j = n, m
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1] and dp[i][j] == dp[i - 1][j - 1] + 1:
            hits.append(i - 1)
            i -= 1
            j -= 1
        elif dp[i - 1][j] >= dp[i][j - 1]:
            i -= 1
        else:
            j -= 1
    hits.reverse()
    return hits


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over unicode codepoints."""
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[m]


def jaccard_pairs(
    docs: Sequence[Sequence[int]], threshold: float
) -> list[tuple[int, int, float]]:
    """All document pairs (i < j) with token-set Jaccard >= threshold.

    `docs` holds sorted, duplicate-free token-id sequences. Similarity of two
    empty documents is defined as 1.0.
    """
    sets = [set(d) for d in docs]
    sizes = [len(s) for s in sets]
    out = []
    n = len(sets)
    for i in range(n):
        si = sets[i]
        li = sizes[i]
        for j in range(i + 1, n):
            lj = sizes[j]
            if li == 0 and lj == 0:
                sim = 1.0
            elif li == 0 or lj == 0:
                sim = 0.0
            else:
                inter = len(si & sets[j])
                sim = inter / (li + lj - inter)
            if sim >= threshold:
                out.append((i, j, sim))
    return out
