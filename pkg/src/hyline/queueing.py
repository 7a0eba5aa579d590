"""Event-driven M/G/1 queue under preemptive SRPT.

Used as a Monte-Carlo check on the closed-form waiting time.  A virtual job
of size x arriving at time a starts service once no job with remaining work
below x is present.  Until then it does not perturb the real queue, so its
wait can be read off a single sample path for every arrival instant at once;
PASTA turns that time average into the per-arrival mean.
"""

import math

import numpy as np

from ._jit import njit


@njit
def _heap_push(h, n, v):
    i = n
    while i > 0:
        p = (i - 1) >> 1
        if h[p] <= v:
            break
        h[i] = h[p]
        i = p
    h[i] = v
    return n + 1


@njit
def _heap_pop(h, n):
    top = h[0]
    n -= 1
    v = h[n]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and h[c + 1] < h[c]:
            c += 1
        if h[c] >= v:
            break
        h[i] = h[c]
        i = c
    if n > 0:
        h[i] = v
    return top, n


@njit
def _close(acc, since, r, t0, tend):
    # integral of (r - a) over arrival instants a in [since, r) clipped to [t0, tend]
    if r <= t0:
        return acc
    s = since if since > t0 else t0
    if s >= tend:
        return acc
    e = r if r < tend else tend
    return acc + 0.5 * ((r - s) * (r - s) - (r - e) * (r - e))


@njit
def _advance(heap, hn, t, cur, below, since, ta, x, t0, tend, acc):
    """Serve the queue from t up to ta (ta may be inf)."""
    while cur >= 0.0:
        if not below:
            tc = t + (cur - x)
            if tc >= ta:
                cur -= ta - t
                t = ta
                return hn, t, cur, below, since, acc
            t = tc
            cur = x
            below = True
            since = t
        done = t + cur
        if done > ta:
            cur -= ta - t
            t = ta
            return hn, t, cur, below, since, acc
        t = done
        if hn > 0:
            cur, hn = _heap_pop(heap, hn)
        else:
            cur = -1.0
        if cur < 0.0 or cur >= x:
            acc = _close(acc, since, t, t0, tend)
            below = False
    if ta < math.inf:
        t = ta
    return hn, t, cur, below, since, acc


@njit
def srpt_first_wait_integral(gaps, services, x, warmup):
    """Integral over arrival instants of the first-service wait for size ``x``.

    ``gaps`` are inter-arrival times, ``services`` service times (seconds).
    Arrivals before index ``warmup`` only warm the queue.  Returns
    ``(integral, observed_time)``; their ratio is the mean wait.
    """
    n = len(gaps)
    heap = np.empty(n + 1)
    hn = 0
    t = 0.0
    cur = -1.0
    below = False
    since = 0.0
    acc = 0.0
    t0 = math.inf
    ta = 0.0
    for k in range(n):
        ta += gaps[k]
        hn, t, cur, below, since, acc = _advance(
            heap, hn, t, cur, below, since, ta, x, t0, math.inf, acc
        )
        if k == warmup:
            t0 = ta
        z = services[k]
        if cur < 0.0:
            cur = z
        elif z < cur:
            hn = _heap_push(heap, hn, cur)
            cur = z
        else:
            hn = _heap_push(heap, hn, z)
        if cur < x and not below:
            below = True
            since = ta
    tend = ta
    hn, t, cur, below, since, acc = _advance(
        heap, hn, t, cur, below, since, math.inf, x, t0, tend, acc
    )
    return acc, tend - t0


def simulate_first_wait(dist_sampler, arrival_rate, x, n_jobs, seed=0, warmup_frac=0.01):
    """Mean first-service wait of a size-``x`` job (all in seconds).

    ``dist_sampler(rng, n)`` draws service times.
    """
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1.0 / arrival_rate, n_jobs)
    services = np.asarray(dist_sampler(rng, n_jobs), dtype=float)
    acc, span = srpt_first_wait_integral(gaps, services, float(x), int(n_jobs * warmup_frac))
    return acc / span
