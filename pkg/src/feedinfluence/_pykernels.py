"""Pure-Python kernels. Same signatures and outputs as the compiled `_kernels`."""
import math

import numpy as np

CI, PP, EE, MIX = 0, 1, 2, 3


def _groups(t):
    n = len(t)
    i = 0
    while i < n:
        j = i + 1
        while j < n and t[j] == t[i]:
            j += 1
        yield i, j
        i = j


def feed_sweep(t, actor, item, push, query, fan_ptr, fan_chan, n_query, n_per_query, m, latest_per_member):
    """One chronological pass over merged events.

    Each pushing event by actor `a` enters every channel in
    fan_chan[fan_ptr[a]:fan_ptr[a+1]]. An event with query[e] = q >= 0 tests
    its item against channels q*n_per_query + c. All events sharing a
    timestamp are queried before any of them is pushed.

    Returns (hits per channel, query events per query slot).
    """
    t = np.asarray(t).tolist()
    actor = np.asarray(actor).tolist()
    item = np.asarray(item).tolist()
    push = np.asarray(push).tolist()
    query = np.asarray(query).tolist()
    fan_ptr = np.asarray(fan_ptr).tolist()
    fan_chan = np.asarray(fan_chan).tolist()
    n_chan = n_query * n_per_query
    hits = [0] * n_chan
    nq = [0] * n_query

    if latest_per_member:
        # move-to-front lists of fan slots per channel
        head = [-1] * n_chan
        nxt = [-1] * len(fan_chan)
        prv = [-1] * len(fan_chan)
        active = [False] * len(fan_chan)
        slot_item = [0] * len(fan_chan)

        def seen(ch, it):
            s = head[ch]
            k = 0
            while s >= 0 and k < m:
                if slot_item[s] == it:
                    return True
                s = nxt[s]
                k += 1
            return False

        def put(ch, s, it):
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
            active[s] = True
    else:
        buf = [[] for _ in range(n_chan)]

        def seen(ch, it):
            return it in buf[ch]

        def put(ch, s, it):
            b = buf[ch]
            b.append(it)
            if len(b) > m:
                del b[0]

    for i, j in _groups(t):
        for e in range(i, j):
            q = query[e]
            if q >= 0:
                nq[q] += 1
                it = item[e]
                base = q * n_per_query
                for c in range(n_per_query):
                    if seen(base + c, it):
                        hits[base + c] += 1
        for e in range(i, j):
            if push[e]:
                a = actor[e]
                it = item[e]
                for s in range(fan_ptr[a], fan_ptr[a + 1]):
                    put(fan_chan[s], s, it)
    return np.asarray(hits, dtype=np.int64), np.asarray(nq, dtype=np.int64)


def synth_generate(t, actor, item, regen, u_mix, u_pick, fan_ptr, fan_chan, n_users, m,
                   process, p_copy, n_items):
    """Regenerate items of flagged events in chronological order.

    Channel 2*u holds the last `m` items acted on by u's friends, channel
    2*u + 1 those of u's preference neighbours. Events flagged in `regen`
    draw a new item (before being pushed), so later events see it.

    Returns (items, fallback flags, copy-choice flags).
    """
    t = np.asarray(t).tolist()
    actor = np.asarray(actor).tolist()
    out = np.asarray(item).tolist()
    regen = np.asarray(regen).tolist()
    u_mix = np.asarray(u_mix).tolist()
    u_pick = np.asarray(u_pick).tolist()
    fan_ptr = np.asarray(fan_ptr).tolist()
    fan_chan = np.asarray(fan_chan).tolist()
    n = len(t)
    buf = [[] for _ in range(2 * n_users)]
    pop = []
    fallback = [0] * n
    copied = [0] * n

    def draw_popular(u):
        if pop:
            return pop[int(math.floor(u * len(pop)))]
        return int(math.floor(u * n_items))

    for i, j in _groups(t):
        for e in range(i, j):
            if not regen[e]:
                continue
            a = actor[e]
            if process == EE:
                out[e] = draw_popular(u_pick[e])
                continue
            if process == CI or (process == MIX and u_mix[e] < p_copy):
                ch = 2 * a
                copied[e] = 1
            else:
                ch = 2 * a + 1
            distinct = []
            for it in reversed(buf[ch]):
                if it not in distinct:
                    distinct.append(it)
            if distinct:
                out[e] = distinct[int(math.floor(u_pick[e] * len(distinct)))]
            else:
                fallback[e] = 1
                out[e] = draw_popular(u_pick[e])
        for e in range(i, j):
            it = out[e]
            pop.append(it)
            a = actor[e]
            for s in range(fan_ptr[a], fan_ptr[a + 1]):
                b = buf[fan_chan[s]]
                b.append(it)
                if len(b) > m:
                    del b[0]
    return (np.asarray(out, dtype=np.int64), np.asarray(fallback, dtype=np.uint8),
            np.asarray(copied, dtype=np.uint8))
