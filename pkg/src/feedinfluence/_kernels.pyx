# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chronological sweeps. Mirrors _pykernels exactly."""
import numpy as np

from libc.math cimport floor
from libc.stdint cimport int64_t, uint8_t

cdef enum:
    CI = 0
    PP = 1
    EE = 2
    MIX = 3


cdef inline bint _ring_has(const int64_t[::1] buf, const int64_t[::1] fill, Py_ssize_t ch,
                           int m, int64_t it) nogil:
    cdef Py_ssize_t k, n = fill[ch]
    cdef Py_ssize_t base = ch * m
    if n > m:
        n = m
    for k in range(n):
        if buf[base + k] == it:
            return True
    return False


def feed_sweep(const double[::1] t, const int64_t[::1] actor, const int64_t[::1] item,
               const uint8_t[::1] push, const int64_t[::1] query,
               const int64_t[::1] fan_ptr, const int64_t[::1] fan_chan,
               Py_ssize_t n_query, int n_per_query, int m, bint latest_per_member):
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t n_chan = n_query * n_per_query
    cdef Py_ssize_t n_slot = fan_chan.shape[0]
    hits_a = np.zeros(n_chan, dtype=np.int64)
    nq_a = np.zeros(n_query, dtype=np.int64)
    cdef int64_t[::1] hits = hits_a
    cdef int64_t[::1] nq = nq_a

    # full-chronological rings
    cdef int64_t[::1] buf
    cdef int64_t[::1] fill
    cdef int64_t[::1] pos
    # latest-per-member move-to-front lists
    cdef int64_t[::1] head
    cdef int64_t[::1] nxt
    cdef int64_t[::1] prv
    cdef int64_t[::1] slot_item
    cdef uint8_t[::1] active

    if latest_per_member:
        head = np.full(max(n_chan, 1), -1, dtype=np.int64)
        nxt = np.full(max(n_slot, 1), -1, dtype=np.int64)
        prv = np.full(max(n_slot, 1), -1, dtype=np.int64)
        slot_item = np.zeros(max(n_slot, 1), dtype=np.int64)
        active = np.zeros(max(n_slot, 1), dtype=np.uint8)
    else:
        buf = np.zeros(max(n_chan * m, 1), dtype=np.int64)
        fill = np.zeros(max(n_chan, 1), dtype=np.int64)
        pos = np.zeros(max(n_chan, 1), dtype=np.int64)

    cdef Py_ssize_t i = 0, j, e, c, s, ch, k, base
    cdef int64_t q, it, a, cur
    cdef bint found
    with nogil:
        while i < n:
            j = i + 1
            while j < n and t[j] == t[i]:
                j += 1
            for e in range(i, j):
                q = query[e]
                if q < 0:
                    continue
                nq[q] += 1
                it = item[e]
                base = q * n_per_query
                for c in range(n_per_query):
                    ch = base + c
                    if latest_per_member:
                        found = False
                        cur = head[ch]
                        k = 0
                        while cur >= 0 and k < m:
                            if slot_item[cur] == it:
                                found = True
                                break
                            cur = nxt[cur]
                            k += 1
                    else:
                        found = _ring_has(buf, fill, ch, m, it)
                    if found:
                        hits[ch] += 1
            for e in range(i, j):
                if not push[e]:
                    continue
                a = actor[e]
                it = item[e]
                for s in range(fan_ptr[a], fan_ptr[a + 1]):
                    ch = fan_chan[s]
                    if latest_per_member:
                        if active[s]:
                            if prv[s] >= 0:
                                nxt[prv[s]] = nxt[s]
                            else:
                                head[ch] = nxt[s]
                            if nxt[s] >= 0:
                                prv[nxt[s]] = prv[s]
                        slot_item[s] = it
                        prv[s] = -1
                        nxt[s] = head[ch]
                        if head[ch] >= 0:
                            prv[head[ch]] = s
                        head[ch] = s
                        active[s] = 1
                    else:
                        buf[ch * m + pos[ch]] = it
                        pos[ch] += 1
                        if pos[ch] == m:
                            pos[ch] = 0
                        if fill[ch] < m:
                            fill[ch] += 1
            i = j
    return hits_a, nq_a


def synth_generate(const double[::1] t, const int64_t[::1] actor, const int64_t[::1] item,
                   const uint8_t[::1] regen, const double[::1] u_mix, const double[::1] u_pick,
                   const int64_t[::1] fan_ptr, const int64_t[::1] fan_chan,
                   Py_ssize_t n_users, int m, int process, double p_copy, int64_t n_items):
    cdef Py_ssize_t n = t.shape[0]
    out_a = np.array(item, dtype=np.int64, copy=True)
    fb_a = np.zeros(n, dtype=np.uint8)
    cp_a = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] out = out_a
    cdef uint8_t[::1] fallback = fb_a
    cdef uint8_t[::1] copied = cp_a
    cdef int64_t[::1] buf = np.zeros(max(2 * n_users * m, 1), dtype=np.int64)
    cdef int64_t[::1] fill = np.zeros(max(2 * n_users, 1), dtype=np.int64)
    cdef int64_t[::1] pos = np.zeros(max(2 * n_users, 1), dtype=np.int64)
    cdef int64_t[::1] pop = np.zeros(max(n, 1), dtype=np.int64)
    cdef int64_t[::1] distinct = np.zeros(max(m, 1), dtype=np.int64)
    cdef Py_ssize_t n_pop = 0
    cdef Py_ssize_t i = 0, j, e, s, ch, k, d, nd, cnt, p
    cdef int64_t a, it
    cdef bint dup
    with nogil:
        while i < n:
            j = i + 1
            while j < n and t[j] == t[i]:
                j += 1
            for e in range(i, j):
                if not regen[e]:
                    continue
                a = actor[e]
                nd = 0
                if process != EE:
                    if process == CI or (process == MIX and u_mix[e] < p_copy):
                        ch = 2 * a
                        copied[e] = 1
                    else:
                        ch = 2 * a + 1
                    cnt = fill[ch]
                    # newest to oldest
                    p = pos[ch]
                    for k in range(cnt):
                        p -= 1
                        if p < 0:
                            p = m - 1
                        it = buf[ch * m + p]
                        dup = False
                        for d in range(nd):
                            if distinct[d] == it:
                                dup = True
                                break
                        if not dup:
                            distinct[nd] = it
                            nd += 1
                    if nd > 0:
                        out[e] = distinct[<Py_ssize_t>floor(u_pick[e] * nd)]
                        continue
                    fallback[e] = 1
                if n_pop > 0:
                    out[e] = pop[<Py_ssize_t>floor(u_pick[e] * n_pop)]
                else:
                    out[e] = <int64_t>floor(u_pick[e] * n_items)
            for e in range(i, j):
                it = out[e]
                pop[n_pop] = it
                n_pop += 1
                a = actor[e]
                for s in range(fan_ptr[a], fan_ptr[a + 1]):
                    ch = fan_chan[s]
                    buf[ch * m + pos[ch]] = it
                    pos[ch] += 1
                    if pos[ch] == m:
                        pos[ch] = 0
                    if fill[ch] < m:
                        fill[ch] += 1
            i = j
    return out_a, fb_a, cp_a
