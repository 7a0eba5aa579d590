"""Packet-level event kernel.

All simulator state lives in flat numpy arrays bundled in an ``Arrays``
namedtuple so the kernel compiles under numba.  Column layouts are module
constants.  The kernel runs until it needs the Python-side manager (a control
message reaching MAN), runs out of pool space, finishes, or stalls; the
driver in :mod:`hyline.simengine` handles each of those and calls back in.
"""

from collections import namedtuple

import numpy as np

from ._jit import kernel

# event kinds
EV_DEPART = 0  # a: link
EV_ARRIVE = 1  # a: packet
EV_ACK = 2  # a: flow, b: cumulative ack, x: echoed send time
EV_TIMER = 3  # a: flow
EV_PFC = 4  # a: link whose sender is (un)paused, b: +1/-1
EV_MAN = 5  # a: flow, b: 0 RTS / 1 FIN
EV_HOST = 6  # a: flow, b: path index (CTS) or -1 (STS)

# kernel return codes
RC_DONE = 0
RC_MAN = 1
RC_GROW = 2
RC_STALL = 3
RC_LIMIT = 4

# flow states
S_IDLE = 0
S_ACTIVE = 1  # class 1 sending, class 2 permitted
S_WAITING = 2  # class 2 waiting for its first CTS
S_STOPPED = 3
S_DRAINING = 4  # class 2 after FIN, retransmissions only
S_SENT = 5  # every packet acknowledged

# flow int columns
FI_SH = 0  # source host slot
FI_CLS = 1
FI_NPKT = 2
FI_LASTB = 3
FI_PBASE = 4
FI_PATH = 5
FI_STATE = 6
FI_EPOCH = 7
FI_UNA = 8
FI_NXT = 9
FI_HIGH = 10
FI_DUP = 11
FI_RECOVER = 12
FI_INREC = 13
FI_RETX = 14
FI_TPEND = 15
FI_RCVNXT = 16
FI_RCVDONE = 17
FI_BOFF = 18
FI_NRETX = 19
FI_NPREEMPT = 20
FI_NTIMEOUT = 21
FI_NEXT = 22
FI_PREV = 23
FI_INLIST = 24
FI_LSEQ = 25
FI_LEPOCH = 26
FI_UNIQ = 27
FI_STARTED = 28
FI_GRANTED = 29
FI_SIZE = 30
FI_PLEN = 31
FI_DROPSEQ = 32  # test hook: first transmission of this seq is lost, -1 none
N_FI = 33

# flow float columns
FF_ARR = 0
FF_START = 1
FF_FINISH = 2
FF_CWND = 3
FF_SSTH = 4
FF_SRTT = 5
FF_RTTVAR = 6
FF_RTO = 7
FF_DEADLINE = 8
FF_WAIT = 9
FF_STOPPED = 10
FF_SINCE = 11
FF_MINRTO = 12
N_FF = 13

# link int columns
LI_HOST = 0  # host slot if the sender is a host NIC, else -1
LI_BUSY = 1
LI_CUR = 2
LI_Q1H = 3
LI_Q1T = 4
LI_Q2H = 5
LI_Q2T = 6
LI_OCC = 7
LI_ASSERT = 8
LI_PAUSE = 9
LI_CLAIM = 10
LI_FEED0 = 11
LI_FEED1 = 12
LI_MAXOCC = 13
N_LI = 14

LF_CAP = 0
LF_DELAY = 1
N_LF = 2

# packet columns
PI_FLOW = 0
PI_SEQ = 1
PI_CLS = 2
PI_BYTES = 3
PI_PATH = 4
PI_HOP = 5
PI_NEXT = 6
PI_EPOCH = 7
PI_RETX = 8
N_PI = 9

# host columns
HS_UPLINK = 0
HS_HEAD1 = 1
HS_HEAD2 = 2
N_HS = 3

# global counters
G_SEQ = 0
G_HN = 1
G_FREE = 2
G_NFREE = 3
G_NEXTARR = 4
G_DONE = 5
G_EVENTS = 6
G_DROP1 = 7
G_DROP2 = 8
G_PAUSES = 9
G_TIMEOUTS = 10
G_SPVIOL = 11
G_EXVIOL = 12
G_REORDER = 13
G_XEPOCH = 14
G_CONSVIOL = 15
G_RETX = 16
G_MANFLOW = 17
G_MANKIND = 18
G_DUPDELIV = 19
G_PKTS = 20
G_INJDROP = 21
N_G = 22

GF_NOW = 0
GF_PROGRESS = 1
N_GF = 2

# parameters
PAR_BUF = 0
PAR_PAUSE = 1
PAR_RESUME = 2
PAR_PFC = 3
PAR_INITW = 4
PAR_MAXW = 5
PAR_TCOST = 6
PAR_MAXRTO = 7
PAR_STALL = 8
PAR_MAXEV = 9
PAR_PKT = 10
N_PAR = 11

MARGIN = 512

Arrays = namedtuple(
    "Arrays",
    "fi ff li lf pi pf hi hf hs g gf par pl pn pack rb feed",
)


# -- event heap, ordered by (time, sequence) ---------------------------------


@kernel
def _before(hf, hi, i, t, s):
    return hf[i, 0] < t or (hf[i, 0] == t and hi[i, 0] < s)


@kernel
def push(a, t, kind, x1, x2, x3, xf):
    hi, hf, g = a.hi, a.hf, a.g
    s = g[G_SEQ]
    g[G_SEQ] = s + 1
    i = g[G_HN]
    g[G_HN] = i + 1
    while i > 0:
        p = (i - 1) >> 1
        if _before(hf, hi, p, t, s):
            break
        for c in range(5):
            hi[i, c] = hi[p, c]
        hf[i, 0] = hf[p, 0]
        hf[i, 1] = hf[p, 1]
        i = p
    hi[i, 0] = s
    hi[i, 1] = kind
    hi[i, 2] = x1
    hi[i, 3] = x2
    hi[i, 4] = x3
    hf[i, 0] = t
    hf[i, 1] = xf


@kernel
def _pop(a):
    hi, hf, g = a.hi, a.hf, a.g
    t = hf[0, 0]
    kind = hi[0, 1]
    x1 = hi[0, 2]
    x2 = hi[0, 3]
    x3 = hi[0, 4]
    xf = hf[0, 1]
    n = g[G_HN] - 1
    g[G_HN] = n
    if n == 0:
        return t, kind, x1, x2, x3, xf
    lt = hf[n, 0]
    ls = hi[n, 0]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and _before(hf, hi, c + 1, hf[c, 0], hi[c, 0]):
            c += 1
        if not _before(hf, hi, c, lt, ls):
            break
        for k in range(5):
            hi[i, k] = hi[c, k]
        hf[i, 0] = hf[c, 0]
        hf[i, 1] = hf[c, 1]
        i = c
    for k in range(5):
        hi[i, k] = hi[n, k]
    hf[i, 0] = hf[n, 0]
    hf[i, 1] = hf[n, 1]
    return t, kind, x1, x2, x3, xf


# -- packet pool ---------------------------------------------------------------


@kernel
def _alloc(a):
    g = a.g
    p = g[G_FREE]
    g[G_FREE] = a.pi[p, PI_NEXT]
    g[G_NFREE] -= 1
    a.pi[p, PI_NEXT] = -1
    return p


@kernel
def _free(a, p):
    g = a.g
    a.pi[p, PI_NEXT] = g[G_FREE]
    g[G_FREE] = p
    g[G_NFREE] += 1


# -- host flow lists (circular, doubly linked) ---------------------------------


@kernel
def _list_add(a, h, col, f):
    fi = a.fi
    if fi[f, FI_INLIST]:
        return
    fi[f, FI_INLIST] = 1
    head = a.hs[h, col]
    if head < 0:
        fi[f, FI_NEXT] = f
        fi[f, FI_PREV] = f
        a.hs[h, col] = f
    else:
        tail = fi[head, FI_PREV]
        fi[tail, FI_NEXT] = f
        fi[f, FI_PREV] = tail
        fi[f, FI_NEXT] = head
        fi[head, FI_PREV] = f


@kernel
def _list_del(a, h, col, f):
    fi = a.fi
    if not fi[f, FI_INLIST]:
        return
    fi[f, FI_INLIST] = 0
    nxt = fi[f, FI_NEXT]
    if nxt == f:
        a.hs[h, col] = -1
        return
    prv = fi[f, FI_PREV]
    fi[prv, FI_NEXT] = nxt
    fi[nxt, FI_PREV] = prv
    if a.hs[h, col] == f:
        a.hs[h, col] = nxt


# -- transport -------------------------------------------------------------------


@kernel
def _next_seq(a, f):
    """Sequence number the flow would send now, or -1."""
    fi = a.fi
    r = fi[f, FI_RETX]
    if r >= 0:
        return r
    nxt = fi[f, FI_NXT]
    if nxt < fi[f, FI_NPKT] and nxt - fi[f, FI_UNA] < int(a.ff[f, FF_CWND]):
        return nxt
    return -1


@kernel
def _arm_timer(a, f, t):
    ff = a.ff
    ff[f, FF_DEADLINE] = t + ff[f, FF_RTO]
    if not a.fi[f, FI_TPEND]:
        a.fi[f, FI_TPEND] = 1
        push(a, ff[f, FF_DEADLINE], EV_TIMER, f, 0, 0, 0.0)


@kernel
def _release_claims(a, f):
    path = a.fi[f, FI_PATH]
    if path < 0:
        return
    for j in range(a.pn[path]):
        l = a.pl[path, j]
        if a.li[l, LI_CLAIM] == f:
            a.li[l, LI_CLAIM] = -1


@kernel
def _emit(a, f, seq, t):
    """Build the packet for ``seq`` of flow ``f`` and do sender bookkeeping."""
    fi, ff = a.fi, a.ff
    p = _alloc(a)
    pi = a.pi
    pi[p, PI_FLOW] = f
    pi[p, PI_SEQ] = seq
    pi[p, PI_CLS] = fi[f, FI_CLS]
    pi[p, PI_BYTES] = fi[f, FI_LASTB] if seq == fi[f, FI_NPKT] - 1 else int(a.par[PAR_PKT])
    pi[p, PI_PATH] = fi[f, FI_PATH]
    pi[p, PI_HOP] = 0
    pi[p, PI_EPOCH] = fi[f, FI_EPOCH]
    a.pf[p] = t
    a.g[G_PKTS] += 1
    if seq < fi[f, FI_HIGH]:
        pi[p, PI_RETX] = 1
        fi[f, FI_NRETX] += 1
        a.g[G_RETX] += 1
    else:
        pi[p, PI_RETX] = 0
        fi[f, FI_HIGH] = seq + 1
    if fi[f, FI_RETX] == seq:
        fi[f, FI_RETX] = -1
    if seq == fi[f, FI_NXT]:
        fi[f, FI_NXT] = seq + 1
    if not fi[f, FI_STARTED]:
        fi[f, FI_STARTED] = 1
        ff[f, FF_START] = t
    if ff[f, FF_DEADLINE] < 0.0:
        _arm_timer(a, f, t)
    if fi[f, FI_CLS] == 2:
        path = fi[f, FI_PATH]
        if fi[f, FI_STATE] == S_ACTIVE:
            for j in range(a.pn[path]):
                if a.li[a.pl[path, j], LI_CLAIM] != f:
                    a.g[G_EXVIOL] += 1
        if seq == fi[f, FI_NPKT] - 1 and fi[f, FI_STATE] == S_ACTIVE:
            # last payload handed to the NIC: tell MAN, keep only recovery
            fi[f, FI_STATE] = S_DRAINING
            _release_claims(a, f)
            push(a, t + 0.5 * a.par[PAR_TCOST], EV_MAN, f, 1, 0, 0.0)
    return p


@kernel
def _start_tx(a, l, p, t):
    a.li[l, LI_BUSY] = 1
    a.li[l, LI_CUR] = p
    push(a, t + a.pi[p, PI_BYTES] * 8.0 / a.lf[l, LF_CAP], EV_DEPART, l, 0, 0, 0.0)


@kernel
def _scan(a, h, col, t):
    """Round-robin over one host list; returns a packet or -1."""
    head = a.hs[h, col]
    if head < 0:
        return -1
    f = head
    while True:
        st = a.fi[f, FI_STATE]
        if st == S_ACTIVE or st == S_DRAINING:
            seq = _next_seq(a, f)
            if seq >= 0:
                a.hs[h, col] = a.fi[f, FI_NEXT]
                return _emit(a, f, seq, t)
        f = a.fi[f, FI_NEXT]
        if f == head:
            return -1


@kernel
def _host_kick(a, h, t):
    l = a.hs[h, HS_UPLINK]
    if a.li[l, LI_BUSY]:
        return
    p = _scan(a, h, HS_HEAD1, t)
    if p < 0 and a.li[l, LI_PAUSE] == 0:
        p = _scan(a, h, HS_HEAD2, t)
    if p >= 0:
        _start_tx(a, l, p, t)


@kernel
def _sender_done(a, f):
    fi = a.fi
    fi[f, FI_STATE] = S_SENT
    a.ff[f, FF_DEADLINE] = -1.0
    _list_del(a, fi[f, FI_SH], HS_HEAD1 if fi[f, FI_CLS] == 1 else HS_HEAD2, f)


@kernel
def _on_ack(a, f, ack, echo, t):
    fi, ff = a.fi, a.ff
    st = fi[f, FI_STATE]
    if st == S_SENT:
        return
    una = fi[f, FI_UNA]
    if ack > una:
        r = t - echo
        if ff[f, FF_SRTT] < 0.0:
            ff[f, FF_SRTT] = r
            ff[f, FF_RTTVAR] = 0.5 * r
        else:
            ff[f, FF_RTTVAR] = 0.75 * ff[f, FF_RTTVAR] + 0.25 * abs(ff[f, FF_SRTT] - r)
            ff[f, FF_SRTT] = 0.875 * ff[f, FF_SRTT] + 0.125 * r
        ff[f, FF_RTO] = max(ff[f, FF_MINRTO], ff[f, FF_SRTT] + 4.0 * ff[f, FF_RTTVAR])
        newly = ack - una
        if fi[f, FI_INREC]:
            if ack >= fi[f, FI_RECOVER]:
                fi[f, FI_INREC] = 0
                ff[f, FF_CWND] = ff[f, FF_SSTH]
            else:
                fi[f, FI_RETX] = ack  # partial ack: next hole
        else:
            cw = ff[f, FF_CWND]
            if cw < ff[f, FF_SSTH]:
                cw += newly
            else:
                cw += newly / cw
            ff[f, FF_CWND] = min(cw, a.par[PAR_MAXW])
        fi[f, FI_UNA] = ack
        fi[f, FI_DUP] = 0
        if fi[f, FI_NXT] < ack:
            fi[f, FI_NXT] = ack
        if fi[f, FI_RETX] >= 0 and fi[f, FI_RETX] < ack:
            fi[f, FI_RETX] = -1
        if ack >= fi[f, FI_NPKT]:
            _sender_done(a, f)
            return
        if st == S_ACTIVE or st == S_DRAINING:
            ff[f, FF_DEADLINE] = -1.0
            _arm_timer(a, f, t)
    elif ack == una and fi[f, FI_NXT] > una:
        fi[f, FI_DUP] += 1
        if fi[f, FI_DUP] == 3 and not fi[f, FI_INREC]:
            flight = fi[f, FI_NXT] - una
            ff[f, FF_SSTH] = max(flight / 2.0, 2.0)
            ff[f, FF_CWND] = ff[f, FF_SSTH]
            fi[f, FI_INREC] = 1
            fi[f, FI_RECOVER] = fi[f, FI_NXT]
            fi[f, FI_RETX] = una
    _host_kick(a, fi[f, FI_SH], t)


@kernel
def _on_timer(a, f, t):
    fi, ff = a.fi, a.ff
    fi[f, FI_TPEND] = 0
    dl = ff[f, FF_DEADLINE]
    if dl < 0.0:
        return
    if t < dl:
        fi[f, FI_TPEND] = 1
        push(a, dl, EV_TIMER, f, 0, 0, 0.0)
        return
    st = fi[f, FI_STATE]
    if st != S_ACTIVE and st != S_DRAINING:
        ff[f, FF_DEADLINE] = -1.0
        return
    fi[f, FI_NTIMEOUT] += 1
    a.g[G_TIMEOUTS] += 1
    flight = fi[f, FI_NXT] - fi[f, FI_UNA]
    ff[f, FF_SSTH] = max(flight / 2.0, 2.0)
    ff[f, FF_CWND] = 1.0
    fi[f, FI_NXT] = fi[f, FI_UNA]
    fi[f, FI_RETX] = -1
    fi[f, FI_INREC] = 0
    fi[f, FI_DUP] = 0
    ff[f, FF_RTO] = min(2.0 * ff[f, FF_RTO], a.par[PAR_MAXRTO])
    ff[f, FF_DEADLINE] = -1.0
    _arm_timer(a, f, t)
    _host_kick(a, fi[f, FI_SH], t)


# -- switch ports and PFC --------------------------------------------------------


@kernel
def _signal_feeds(a, l, delta, t):
    for j in range(a.li[l, LI_FEED0], a.li[l, LI_FEED1]):
        fl = a.feed[j]
        push(a, t + a.lf[fl, LF_DELAY], EV_PFC, fl, delta, 0, 0.0)


@kernel
def _port_kick(a, l, t):
    li = a.li
    if li[l, LI_BUSY]:
        return
    p = li[l, LI_Q1H]
    if p >= 0:
        li[l, LI_Q1H] = a.pi[p, PI_NEXT]
        if li[l, LI_Q1H] < 0:
            li[l, LI_Q1T] = -1
    else:
        p = li[l, LI_Q2H]
        if p < 0 or li[l, LI_PAUSE] > 0:
            return
        if li[l, LI_Q1H] >= 0:
            a.g[G_SPVIOL] += 1
        li[l, LI_Q2H] = a.pi[p, PI_NEXT]
        if li[l, LI_Q2H] < 0:
            li[l, LI_Q2T] = -1
        f = a.pi[p, PI_FLOW]
        if (
            a.fi[f, FI_STATE] == S_ACTIVE
            and a.pi[p, PI_EPOCH] == a.fi[f, FI_EPOCH]
            and li[l, LI_CLAIM] != f
        ):
            a.g[G_EXVIOL] += 1
    a.pi[p, PI_NEXT] = -1
    _start_tx(a, l, p, t)


@kernel
def _enqueue(a, l, p, t):
    li, par = a.li, a.par
    cls = a.pi[p, PI_CLS]
    occ = li[l, LI_OCC]
    pfc = par[PAR_PFC] > 0.0
    limit = par[PAR_BUF]
    if pfc and cls == 1:
        limit = par[PAR_PAUSE]  # headroom above the pause point is for paused traffic
    f = a.pi[p, PI_FLOW]
    if a.fi[f, FI_DROPSEQ] == a.pi[p, PI_SEQ] and not a.pi[p, PI_RETX]:
        a.fi[f, FI_DROPSEQ] = -1
        a.g[G_INJDROP] += 1
        _free(a, p)
        return
    if occ >= limit:
        if cls == 1:
            a.g[G_DROP1] += 1
        else:
            a.g[G_DROP2] += 1
        _free(a, p)
        return
    a.pi[p, PI_NEXT] = -1
    hc = LI_Q1H if cls == 1 else LI_Q2H
    tc = LI_Q1T if cls == 1 else LI_Q2T
    if li[l, tc] < 0:
        li[l, hc] = p
    else:
        a.pi[li[l, tc], PI_NEXT] = p
    li[l, tc] = p
    occ += 1
    li[l, LI_OCC] = occ
    if occ > li[l, LI_MAXOCC]:
        li[l, LI_MAXOCC] = occ
    if pfc and not li[l, LI_ASSERT] and occ >= par[PAR_PAUSE]:
        li[l, LI_ASSERT] = 1
        a.g[G_PAUSES] += 1
        _signal_feeds(a, l, 1, t)
    _port_kick(a, l, t)


@kernel
def _on_depart(a, l, t):
    li = a.li
    p = li[l, LI_CUR]
    li[l, LI_BUSY] = 0
    li[l, LI_CUR] = -1
    push(a, t + a.lf[l, LF_DELAY], EV_ARRIVE, p, 0, 0, 0.0)
    h = li[l, LI_HOST]
    if h >= 0:
        _host_kick(a, h, t)
        return
    li[l, LI_OCC] -= 1
    if li[l, LI_ASSERT] and li[l, LI_OCC] <= a.par[PAR_RESUME]:
        li[l, LI_ASSERT] = 0
        _signal_feeds(a, l, -1, t)
    _port_kick(a, l, t)


@kernel
def _on_pfc(a, l, delta, t):
    li = a.li
    li[l, LI_PAUSE] += delta
    if li[l, LI_PAUSE] == 0:
        h = li[l, LI_HOST]
        if h >= 0:
            _host_kick(a, h, t)
        else:
            _port_kick(a, l, t)


# -- receiver --------------------------------------------------------------------


@kernel
def _receive(a, p, t):
    fi, pi = a.fi, a.pi
    f = pi[p, PI_FLOW]
    seq = pi[p, PI_SEQ]
    if pi[p, PI_CLS] == 2 and not pi[p, PI_RETX]:
        ep = pi[p, PI_EPOCH]
        if ep == fi[f, FI_LEPOCH]:
            if seq < fi[f, FI_LSEQ]:
                a.g[G_REORDER] += 1
            fi[f, FI_LSEQ] = seq
        elif ep > fi[f, FI_LEPOCH]:
            fi[f, FI_LEPOCH] = ep
            fi[f, FI_LSEQ] = seq
        else:
            a.g[G_XEPOCH] += 1
    idx = fi[f, FI_BOFF] + seq
    if a.rb[idx] == 0:
        a.rb[idx] = 1
        fi[f, FI_UNIQ] += pi[p, PI_BYTES]
        a.gf[GF_PROGRESS] = t
        n = fi[f, FI_NPKT]
        r = fi[f, FI_RCVNXT]
        while r < n and a.rb[fi[f, FI_BOFF] + r]:
            r += 1
        fi[f, FI_RCVNXT] = r
        if r == n and not fi[f, FI_RCVDONE]:
            fi[f, FI_RCVDONE] = 1
            a.ff[f, FF_FINISH] = t
            a.g[G_DONE] += 1
            if fi[f, FI_UNIQ] != fi[f, FI_SIZE]:
                a.g[G_CONSVIOL] += 1
    else:
        a.g[G_DUPDELIV] += 1
    path = pi[p, PI_PATH]
    push(a, t + a.pack[path], EV_ACK, f, fi[f, FI_RCVNXT], 0, a.pf[p])
    _free(a, p)


@kernel
def _on_arrive(a, p, t):
    pi = a.pi
    path = pi[p, PI_PATH]
    hop = pi[p, PI_HOP] + 1
    if hop >= a.pn[path]:
        _receive(a, p, t)
        return
    pi[p, PI_HOP] = hop
    _enqueue(a, a.pl[path, hop], p, t)


# -- control plane -----------------------------------------------------------------


@kernel
def _flow_arrive(a, f, t):
    fi = a.fi
    if fi[f, FI_CLS] == 1:
        fi[f, FI_STATE] = S_ACTIVE
        _list_add(a, fi[f, FI_SH], HS_HEAD1, f)
        _host_kick(a, fi[f, FI_SH], t)
    else:
        fi[f, FI_STATE] = S_WAITING
        push(a, t + 0.5 * a.par[PAR_TCOST], EV_MAN, f, 0, 0, 0.0)


@kernel
def _on_host_msg(a, f, path_idx, t):
    fi, ff = a.fi, a.ff
    st = fi[f, FI_STATE]
    if path_idx >= 0:  # CTS
        if st != S_WAITING and st != S_STOPPED:
            return
        if st == S_STOPPED:
            ff[f, FF_STOPPED] += t - ff[f, FF_SINCE]
        if not fi[f, FI_GRANTED]:
            fi[f, FI_GRANTED] = 1
            ff[f, FF_WAIT] = t - ff[f, FF_ARR]
        fi[f, FI_STATE] = S_ACTIVE
        fi[f, FI_EPOCH] += 1
        path = fi[f, FI_PBASE] + path_idx
        fi[f, FI_PATH] = path
        fi[f, FI_PLEN] = a.pn[path]
        for j in range(a.pn[path]):
            l = a.pl[path, j]
            c = a.li[l, LI_CLAIM]
            if c >= 0 and c != f:
                a.g[G_EXVIOL] += 1
            a.li[l, LI_CLAIM] = f
        _list_add(a, fi[f, FI_SH], HS_HEAD2, f)
        if fi[f, FI_NXT] > fi[f, FI_UNA]:
            _arm_timer(a, f, t)
        _host_kick(a, fi[f, FI_SH], t)
    else:  # STS
        if st != S_ACTIVE:
            return
        fi[f, FI_STATE] = S_STOPPED
        ff[f, FF_SINCE] = t
        fi[f, FI_NPREEMPT] += 1
        ff[f, FF_DEADLINE] = -1.0  # retransmission timer suspended while stopped
        _release_claims(a, f)
        _list_del(a, fi[f, FI_SH], HS_HEAD2, f)


# -- main loop -----------------------------------------------------------------------


@kernel
def run_kernel(a):
    g, gf, par, ff = a.g, a.gf, a.par, a.ff
    nflows = a.fi.shape[0]
    hcap = a.hi.shape[0]
    maxev = int(par[PAR_MAXEV])
    while True:
        if g[G_DONE] >= nflows:
            return RC_DONE
        if g[G_HN] + MARGIN >= hcap or g[G_NFREE] < MARGIN:
            return RC_GROW
        if maxev > 0 and g[G_EVENTS] >= maxev:
            return RC_LIMIT
        k = g[G_NEXTARR]
        if k < nflows and (g[G_HN] == 0 or ff[k, FF_ARR] <= a.hf[0, 0]):
            t = ff[k, FF_ARR]
            gf[GF_NOW] = t
            g[G_NEXTARR] = k + 1
            g[G_EVENTS] += 1
            _flow_arrive(a, k, t)
            continue
        if g[G_HN] == 0:
            return RC_STALL
        t, kind, x1, x2, x3, xf = _pop(a)
        gf[GF_NOW] = t
        g[G_EVENTS] += 1
        if t - gf[GF_PROGRESS] > par[PAR_STALL] and k >= nflows:
            return RC_STALL
        if kind == EV_DEPART:
            _on_depart(a, x1, t)
        elif kind == EV_ARRIVE:
            _on_arrive(a, x1, t)
        elif kind == EV_ACK:
            _on_ack(a, x1, x2, xf, t)
        elif kind == EV_TIMER:
            _on_timer(a, x1, t)
        elif kind == EV_PFC:
            _on_pfc(a, x1, x2, t)
        elif kind == EV_MAN:
            g[G_MANFLOW] = x1
            g[G_MANKIND] = x2
            return RC_MAN
        elif kind == EV_HOST:
            _on_host_msg(a, x1, x2, t)


def grow(a: Arrays, heap: bool = True, pool: bool = True) -> Arrays:
    """Copy of ``a`` with doubled heap and/or packet pool."""
    hi, hf, pi, pf = a.hi, a.hf, a.pi, a.pf
    if heap:
        n = hi.shape[0]
        hi = np.concatenate([hi, np.zeros_like(hi)])
        hf = np.concatenate([hf, np.zeros_like(hf)])
    if pool:
        n = pi.shape[0]
        extra = np.full((n, N_PI), -1, dtype=np.int64)
        extra[:, PI_NEXT] = np.arange(n + 1, 2 * n + 1)
        extra[-1, PI_NEXT] = a.g[G_FREE]
        pi = np.concatenate([pi, extra])
        pf = np.concatenate([pf, np.zeros(n)])
        a.g[G_FREE] = n
        a.g[G_NFREE] += n
    return a._replace(hi=hi, hf=hf, pi=pi, pf=pf)
