# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors _pure exactly; see that module for semantics."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def lcs_length(a, b):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] aa = np.asarray(a, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bb = np.asarray(b, dtype=np.int64)
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    if n == 0 or m == 0:
        return 0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur = np.zeros(m + 1, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef long long ai
    for i in range(1, n + 1):
        ai = aa[i - 1]
        for j in range(1, m + 1):
            if ai == bb[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return int(prev[m])


def lcs_hit_indices(a, b):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] aa = np.asarray(a, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bb = np.asarray(b, dtype=np.int64)
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    if n == 0 or m == 0:
        return []
    cdef cnp.ndarray[cnp.int64_t, ndim=2] dp = np.zeros((n + 1, m + 1), dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef long long ai
    for i in range(1, n + 1):
        ai = aa[i - 1]
        for j in range(1, m + 1):
            if ai == bb[j - 1]:
                dp[i, j] = dp[i - 1, j - 1] + 1
            elif dp[i - 1, j] >= dp[i, j - 1]:
                dp[i, j] = dp[i - 1, j]
            else:
                dp[i, j] = dp[i, j - 1]
    hits = []
    i = n
    j = m
    while i > 0 and j > 0:
        if aa[i - 1] == bb[j - 1] and dp[i, j] == dp[i - 1, j - 1] + 1:
            hits.append(i - 1)
            i -= 1
            j -= 1
        elif dp[i - 1, j] >= dp[i, j - 1]:
            i -= 1
        else:
            j -= 1
    hits.reverse()
    return hits


def levenshtein(a, b):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] aa = np.array(
        [ord(c) for c in a], dtype=np.int64
    )
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bb = np.array(
        [ord(c) for c in b], dtype=np.int64
    )
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev = np.arange(m + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur = np.zeros(m + 1, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef long long ai, best, cand
    for i in range(1, n + 1):
        cur[0] = i
        ai = aa[i - 1]
        for j in range(1, m + 1):
            best = prev[j] + 1
            cand = cur[j - 1] + 1
            if cand < best:
                best = cand
            cand = prev[j - 1] + (0 if ai == bb[j - 1] else 1)
            if cand < best:
                best = cand
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[m])


def jaccard_pairs(docs, double threshold):
    """Pairs (i, j, sim) with i < j and Jaccard >= threshold.

    Documents are flattened into one token array plus offsets; token ids
    within a document must be sorted and unique (the caller guarantees it).
    """
    cdef Py_ssize_t n = len(docs)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef Py_ssize_t total = 0
    for i in range(n):
        total += len(docs[i])
        offsets[i + 1] = total
    cdef cnp.ndarray[cnp.int64_t, ndim=1] flat = np.empty(total, dtype=np.int64)
    cdef Py_ssize_t pos = 0
    for i in range(n):
        for tok in docs[i]:
            flat[pos] = tok
            pos += 1
    out = []
    cdef Py_ssize_t ai, aj, ae, be, bj
    cdef long long inter, la, lb
    cdef double sim
    for i in range(n):
        la = offsets[i + 1] - offsets[i]
        for j in range(i + 1, n):
            lb = offsets[j + 1] - offsets[j]
            if la == 0 and lb == 0:
                sim = 1.0
            elif la == 0 or lb == 0:
                sim = 0.0
            else:
                inter = 0
                ai = offsets[i]
                bj = offsets[j]
                ae = offsets[i + 1]
                be = offsets[j + 1]
                while ai < ae and bj < be:
                    if flat[ai] == flat[bj]:
                        inter += 1
                        ai += 1
                        bj += 1
                    elif flat[ai] < flat[bj]:
                        ai += 1
                    else:
                        bj += 1
                sim = inter / <double>(la + lb - inter)
            if sim >= threshold:
                out.append((i, j, sim))
    return out
