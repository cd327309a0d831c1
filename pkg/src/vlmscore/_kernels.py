"""Compiled inner loops for string alignment.

Everything here works on integer code arrays (one element per character or
per token id) so the same kernels serve character- and word-level metrics.
Callers are expected to go through :mod:`vlmscore.textmatch` and
:mod:`vlmscore.ocr_metrics` rather than use these directly.
"""

import numpy as np
from numba import njit

# Code used for the single space that joins super-block members and segments
# of a complete text. Above the Unicode range so it never collides with text.
JOINER = 0x110000
SPACE = 0x20


def encode(text: str) -> np.ndarray:
    """Return the code points of ``text`` as a uint32 array."""
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)


@njit(cache=True)
def lcs_blocks(a, b, min_len):
    """Recursive longest-common-substring decomposition of ``a`` against ``b``.

    Returns an ``(k, 3)`` int64 array of ``(pos_a, pos_b, length)`` rows sorted
    by ``pos_a``. The longest block of each region wins; ties go to the
    earliest start in ``a``, then the earliest start in ``b``. Regions whose
    longest block is shorter than ``min_len`` are abandoned, which also
    discards every shorter block they contain.
    """
    n = a.shape[0]
    m = b.shape[0]
    cap = min(n, m) + 1
    out = np.empty((cap, 3), np.int64)
    cnt = 0
    stack = np.empty((2 * cap + 2, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    stack[0, 3] = m
    sp = 1
    prev = np.zeros(m + 1, np.int64)
    cur = np.zeros(m + 1, np.int64)
    while sp > 0:
        sp -= 1
        alo = stack[sp, 0]
        ahi = stack[sp, 1]
        blo = stack[sp, 2]
        bhi = stack[sp, 3]
        bi = alo
        bj = blo
        bk = 0
        for j in range(blo, bhi + 1):
            prev[j] = 0
        cur[blo] = 0
        for i in range(alo, ahi):
            ai = a[i]
            for j in range(blo, bhi):
                if ai == b[j]:
                    k = prev[j] + 1
                    cur[j + 1] = k
                    # strict '>' keeps the first (earliest-ending, hence
                    # earliest-starting) block among equal lengths
                    if k > bk:
                        bk = k
                        bi = i - k + 1
                        bj = j - k + 1
                else:
                    cur[j + 1] = 0
            for j in range(blo, bhi + 1):
                prev[j] = cur[j]
        if bk == 0 or bk < min_len:
            continue
        out[cnt, 0] = bi
        out[cnt, 1] = bj
        out[cnt, 2] = bk
        cnt += 1
        if alo < bi and blo < bj:
            stack[sp, 0] = alo
            stack[sp, 1] = bi
            stack[sp, 2] = blo
            stack[sp, 3] = bj
            sp += 1
        if bi + bk < ahi and bj + bk < bhi:
            stack[sp, 0] = bi + bk
            stack[sp, 1] = ahi
            stack[sp, 2] = bj + bk
            stack[sp, 3] = bhi
            sp += 1
    res = out[:cnt]
    order = np.argsort(res[:, 0], kind="mergesort")
    return res[order]


@njit(cache=True)
def matched_total(a, b, min_len):
    blocks = lcs_blocks(a, b, min_len)
    total = 0
    for r in range(blocks.shape[0]):
        total += blocks[r, 2]
    return total


@njit(cache=True)
def _precedes(a, b):
    # (length, code points) order, the same order Python uses for (len(s), s)
    if a.shape[0] != b.shape[0]:
        return a.shape[0] < b.shape[0]
    for i in range(a.shape[0]):
        if a[i] != b[i]:
            return a[i] < b[i]
    return True


@njit(cache=True)
def coverage_many(a, pool, offsets, min_len):
    """Coverage of ``a`` against every text packed in ``pool``.

    Text ``t`` occupies ``pool[offsets[t]:offsets[t + 1]]``. Each pair is
    decomposed in canonical order so the score is symmetric.
    """
    k = offsets.shape[0] - 1
    out = np.empty(k, np.float64)
    for t in range(k):
        b = pool[offsets[t]:offsets[t + 1]]
        shorter = min(a.shape[0], b.shape[0])
        if shorter == 0:
            out[t] = 1.0 if a.shape[0] == b.shape[0] else 0.0
        elif _precedes(a, b):
            out[t] = matched_total(a, b, min_len) / shorter
        else:
            out[t] = matched_total(b, a, min_len) / shorter
    return out


@njit(cache=True)
def edit_distance(a, b, joiner):
    """Unit-cost Levenshtein distance with optional free joiners.

    Elements equal to ``joiner`` cost nothing to insert or delete and
    substitute for a space at no cost. Pass ``joiner=-1`` for the plain
    distance.
    """
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m + 1, np.int64)
    cur = np.empty(m + 1, np.int64)
    prev[0] = 0
    for j in range(1, m + 1):
        prev[j] = prev[j - 1] + (0 if b[j - 1] == joiner else 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        del_cost = 0 if ai == joiner else 1
        cur[0] = prev[0] + del_cost
        for j in range(1, m + 1):
            bj = b[j - 1]
            ins_cost = 0 if bj == joiner else 1
            if ai == bj:
                sub = 0
            elif (ai == joiner and (bj == SPACE or bj == joiner)) or (
                bj == joiner and ai == SPACE
            ):
                sub = 0
            else:
                sub = 1
            best = prev[j - 1] + sub
            d = prev[j] + del_cost
            if d < best:
                best = d
            ins = cur[j - 1] + ins_cost
            if ins < best:
                best = ins
            cur[j] = best
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


@njit(cache=True)
def lcs_subsequence(a, b):
    """Length of the longest common subsequence of two code arrays."""
    n = a.shape[0]
    m = b.shape[0]
    prev = np.zeros(m + 1, np.int64)
    cur = np.zeros(m + 1, np.int64)
    for i in range(1, n + 1):
        ai = a[i - 1]
        cur[0] = 0
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


def shingles(codes: np.ndarray, min_len: int) -> np.ndarray:
    """Sorted bigram keys (single characters when ``min_len`` is 1)."""
    if min_len <= 1:
        return np.sort(codes)
    return np.sort(codes[:-1] * (JOINER + 1) + codes[1:])


@njit(cache=True)
def _common(x, y):
    # multiset intersection size of two sorted arrays
    i = 0
    j = 0
    c = 0
    while i < x.shape[0] and j < y.shape[0]:
        if x[i] == y[j]:
            c += 1
            i += 1
            j += 1
        elif x[i] < y[j]:
            i += 1
        else:
            j += 1
    return c


@njit(cache=True)
def best_coverage(a, a_sh, pool, offsets, sh_pool, sh_offsets, min_len, floor):
    """Index and score of the first text with the highest coverage above ``floor``.

    Returns ``(-1, floor)`` when no text beats ``floor``. Texts whose shingle
    bound cannot beat the running best are never decomposed: a matched block
    of length ``l >= min_len`` holds ``l - 1`` shared bigrams, so the matched
    total is at most ``common * min_len / (min_len - 1)``.
    """
    scale = 1.0 if min_len <= 1 else min_len / (min_len - 1.0)
    best = floor
    best_t = -1
    for t in range(offsets.shape[0] - 1):
        b = pool[offsets[t]:offsets[t + 1]]
        shorter = min(a.shape[0], b.shape[0])
        if shorter == 0:
            score = 1.0 if a.shape[0] == b.shape[0] else 0.0
        else:
            common = _common(a_sh, sh_pool[sh_offsets[t]:sh_offsets[t + 1]])
            if min(common * scale, shorter) / shorter <= best + 1e-12:
                continue
            if _precedes(a, b):
                score = matched_total(a, b, min_len) / shorter
            else:
                score = matched_total(b, a, min_len) / shorter
        if score > best:
            best = score
            best_t = t
    return best_t, best
