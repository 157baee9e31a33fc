"""Flow-level event kernels.

State lives in a handful of numpy arrays (struct-of-arrays, row constants
below). Each station owns exactly one pending flow event (its next start or
its current end), so the event heap always holds ``m`` entries ordered by
``(time, kind, station)`` with flow ends before flow starts.

Every function is plain Python in the numba-compatible subset; see
:mod:`mabwlan._accel` for how the interpreted fallback is selected.
"""

import math

import numpy as np

from ._accel import njit

# event kinds (heap key = kind * m + station)
EV_END = 0
EV_START = 1

# per-station float rows
SF_DEMAND = 0
SF_AIR = 1
SF_T0 = 2
SF_T1 = 3
SF_S0 = 4
SF_ACC_SAT = 5
SF_ACC_ACT = 6
SF_ACC_SERVED = 7
SF_ACC_OFFERED = 8
SF_MARK_T = 9
SF_MARK_S = 10
N_SF = 11

# per-station int rows
SI_ASSOC = 0
SI_ACTIVE = 1
SI_NEXT = 2
SI_FR_HEAD = 3
SI_FR_COUNT = 4
N_SI = 5

# per-AP float rows
AF_OWN = 0
AF_EFF = 1
AF_CUM_R = 2
AF_CUM_S = 3
AF_CUM_L = 4
N_AF = 5

# per-AP int rows
AI_CHAN = 0
AI_NACT = 1
N_AI = 2

# scalar parameters
P_RETRY = 0
P_LD = 1
P_KEEP = 2
P_CLOCK = 3
N_PAR = 4

# counters
C_HLEN = 0
C_EVENTS = 1
N_CNT = 2

# traffic buffer rows
TR_START = 0
TR_END = 1
TR_DEMAND = 2

# completed-flow ring rows
FR_T0 = 0
FR_T1 = 1
FR_AP = 2
FR_INT = 3

# advance() status codes
ST_DONE = 0
ST_NEED_TRAFFIC = 1
ST_GROW_HIST = 2
ST_GROW_RING = 3
ST_MAX_EVENTS = 4


@njit
def reward_rate(eff):
    return 1.0 - eff if eff < 1.0 else 0.0


@njit
def sat_rate(eff):
    return 1.0 / eff if eff > 1.0 else 1.0


@njit
def integrate(ap_f, par, t):
    dt = t - par[P_CLOCK]
    if dt <= 0.0:
        return
    for j in range(ap_f.shape[1]):
        eff = ap_f[AF_EFF, j]
        ap_f[AF_CUM_R, j] += reward_rate(eff) * dt
        ap_f[AF_CUM_S, j] += sat_rate(eff) * dt
        ap_f[AF_CUM_L, j] += eff * dt
    par[P_CLOCK] = t


@njit
def _eff_of(ap_f, ap_i, sense, l):
    c = ap_i[AI_CHAN, l]
    s = ap_f[AF_OWN, l]
    for q in range(ap_f.shape[1]):
        if q != l and ap_i[AI_CHAN, q] == c and sense[c, l, q]:
            s += ap_f[AF_OWN, q]
    return s


@njit
def refresh_around(ap_f, ap_i, sense, j):
    """Recompute the effective load of ``j`` and of every co-channel AP sensing it."""
    c = ap_i[AI_CHAN, j]
    for l in range(ap_f.shape[1]):
        if l == j or (ap_i[AI_CHAN, l] == c and sense[c, l, j]):
            ap_f[AF_EFF, l] = _eff_of(ap_f, ap_i, sense, l)


@njit
def refresh_all(ap_f, ap_i, sense):
    for l in range(ap_f.shape[1]):
        ap_f[AF_EFF, l] = _eff_of(ap_f, ap_i, sense, l)


@njit
def _sift_down(hp_t, hp_key, pos):
    size = hp_t.shape[0]
    t = hp_t[pos]
    key = hp_key[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        r = child + 1
        if r < size and (hp_t[r] < hp_t[child] or (hp_t[r] == hp_t[child] and hp_key[r] < hp_key[child])):
            child = r
        if hp_t[child] < t or (hp_t[child] == t and hp_key[child] < key):
            hp_t[pos] = hp_t[child]
            hp_key[pos] = hp_key[child]
            pos = child
        else:
            break
    hp_t[pos] = t
    hp_key[pos] = key


@njit
def append_history(h_t, h_cum, cnt, ap_f, t):
    n = ap_f.shape[1]
    k = cnt[C_HLEN]
    if k > 0 and h_t[k - 1] == t:
        k -= 1  # same instant: cumulative values are identical, keep one entry
    h_t[k] = t
    for j in range(n):
        h_cum[k, j] = ap_f[AF_CUM_R, j]
        h_cum[k, n + j] = ap_f[AF_CUM_S, j]
    cnt[C_HLEN] = k + 1


@njit
def _last_at_or_before(h_t, length, t):
    lo = 0
    hi = length
    while lo < hi:
        mid = (lo + hi) // 2
        if h_t[mid] <= t:
            lo = mid + 1
        else:
            hi = mid
    return lo - 1


@njit
def compact_history(h_t, h_cum, cnt, cutoff):
    """Drop entries no query can reach; returns the number removed."""
    length = cnt[C_HLEN]
    k0 = _last_at_or_before(h_t, length, cutoff)
    if k0 <= 0:
        return 0
    keep = length - k0
    for k in range(keep):
        h_t[k] = h_t[k0 + k]
        h_cum[k, :] = h_cum[k0 + k, :]
    cnt[C_HLEN] = keep
    return k0


@njit
def cum_at(h_t, h_cum, cnt, ap_f, col, t):
    """Cumulative reward (``col < n``) or satisfaction integral of one AP at time ``t``."""
    length = cnt[C_HLEN]
    k = _last_at_or_before(h_t, length, t)
    if k < 0:
        k = 0
    base = h_cum[k, col]
    if k + 1 < length:
        dt = h_t[k + 1] - h_t[k]
        if dt > 0.0:
            return base + (h_cum[k + 1, col] - base) * ((t - h_t[k]) / dt)
        return base
    n = ap_f.shape[1]
    if col < n:
        rate = reward_rate(ap_f[AF_EFF, col])
    else:
        rate = sat_rate(ap_f[AF_EFF, col - n])
    return base + rate * (t - h_t[k])


@njit
def flow_airtime(demand, per_packet, par):
    return par[P_RETRY] * math.ceil(demand / par[P_LD]) * per_packet


@njit
def _start_flow(i, t, sta_f, sta_i, ap_f, ap_i, sense, ts_full, par, tr):
    idx = sta_i[SI_NEXT, i]
    demand = tr[TR_DEMAND, i, idx]
    j = sta_i[SI_ASSOC, i]
    c = ap_i[AI_CHAN, j]
    air = flow_airtime(demand, ts_full[c, i, j], par)
    sta_f[SF_DEMAND, i] = demand
    sta_f[SF_AIR, i] = air
    sta_f[SF_T0, i] = t
    sta_f[SF_T1, i] = tr[TR_END, i, idx]
    s_now = ap_f[AF_CUM_S, j]
    sta_f[SF_S0, i] = s_now
    sta_f[SF_MARK_T, i] = t
    sta_f[SF_MARK_S, i] = s_now
    sta_i[SI_ACTIVE, i] = 1
    ap_f[AF_OWN, j] += air
    ap_i[AI_NACT, j] += 1
    refresh_around(ap_f, ap_i, sense, j)


@njit
def _accumulate(i, t, j, sta_f, ap_f):
    d_s = ap_f[AF_CUM_S, j] - sta_f[SF_MARK_S, i]
    d_t = t - sta_f[SF_MARK_T, i]
    demand = sta_f[SF_DEMAND, i]
    sta_f[SF_ACC_SAT, i] += d_s
    sta_f[SF_ACC_ACT, i] += d_t
    sta_f[SF_ACC_SERVED, i] += demand * d_s
    sta_f[SF_ACC_OFFERED, i] += demand * d_t
    sta_f[SF_MARK_T, i] = t
    sta_f[SF_MARK_S, i] = ap_f[AF_CUM_S, j]


@njit
def _ring_push(i, t0, t1, ap, integral, sta_i, fr):
    F = fr.shape[2]
    pos = sta_i[SI_FR_HEAD, i]
    fr[FR_T0, i, pos] = t0
    fr[FR_T1, i, pos] = t1
    fr[FR_AP, i, pos] = ap
    fr[FR_INT, i, pos] = integral
    sta_i[SI_FR_HEAD, i] = (pos + 1) % F
    if sta_i[SI_FR_COUNT, i] < F:
        sta_i[SI_FR_COUNT, i] += 1


@njit
def _detach_flow(i, j, ap_f, ap_i, sta_f, sense):
    ap_f[AF_OWN, j] -= sta_f[SF_AIR, i]
    ap_i[AI_NACT, j] -= 1
    if ap_i[AI_NACT, j] == 0:
        ap_f[AF_OWN, j] = 0.0  # clears accumulated rounding
    refresh_around(ap_f, ap_i, sense, j)


@njit
def _end_flow(i, t, sta_f, sta_i, ap_f, ap_i, sense, fr):
    j = sta_i[SI_ASSOC, i]
    _detach_flow(i, j, ap_f, ap_i, sta_f, sense)
    _accumulate(i, t, j, sta_f, ap_f)
    _ring_push(i, sta_f[SF_T0, i], t, j, ap_f[AF_CUM_S, j] - sta_f[SF_S0, i], sta_i, fr)
    sta_i[SI_ACTIVE, i] = 0
    sta_i[SI_NEXT, i] += 1


@njit
def advance(t_until, max_events, sta_f, sta_i, ap_f, ap_i, sense, ts_full, par, cnt,
            hp_t, hp_key, tr, h_t, h_cum, fr, out):
    """Process flow events with time <= ``t_until``.

    Returns a status code; ``out[0]`` carries the station it refers to.
    On ``ST_DONE`` the clock has been integrated up to ``t_until``.
    """
    m = sta_f.shape[1]
    C = tr.shape[2]
    F = fr.shape[2]
    K = h_t.shape[0]
    done = 0
    while m > 0:
        if max_events >= 0 and done >= max_events:
            out[0] = -1
            return ST_MAX_EVENTS
        t = hp_t[0]
        if t > t_until:
            break
        key = hp_key[0]
        kind = key // m
        i = key - kind * m
        if kind == EV_END:
            if sta_i[SI_NEXT, i] + 1 >= C:
                out[0] = i
                return ST_NEED_TRAFFIC
            if sta_i[SI_FR_COUNT, i] == F:
                oldest = sta_i[SI_FR_HEAD, i]
                if fr[FR_T1, i, oldest] >= t - par[P_KEEP]:
                    out[0] = i
                    return ST_GROW_RING
        if cnt[C_HLEN] >= K:
            removed = compact_history(h_t, h_cum, cnt, t - par[P_KEEP])
            if removed < K // 4:
                out[0] = -1
                return ST_GROW_HIST
        integrate(ap_f, par, t)
        if kind == EV_START:
            _start_flow(i, t, sta_f, sta_i, ap_f, ap_i, sense, ts_full, par, tr)
            hp_t[0] = sta_f[SF_T1, i]
            hp_key[0] = EV_END * m + i
        else:
            _end_flow(i, t, sta_f, sta_i, ap_f, ap_i, sense, fr)
            hp_t[0] = tr[TR_START, i, sta_i[SI_NEXT, i]]
            hp_key[0] = EV_START * m + i
        _sift_down(hp_t, hp_key, 0)
        append_history(h_t, h_cum, cnt, ap_f, t)
        done += 1
        cnt[C_EVENTS] += 1
    integrate(ap_f, par, t_until)
    return ST_DONE


@njit
def set_channel(j, c_new, t, sta_f, sta_i, ap_f, ap_i, sense, ts_full, par, cnt, h_t, h_cum):
    """Move AP ``j`` to channel index ``c_new`` at time ``t`` (clock must be at ``t``)."""
    integrate(ap_f, par, t)
    own = 0.0
    for i in range(sta_f.shape[1]):
        if sta_i[SI_ASSOC, i] == j and sta_i[SI_ACTIVE, i] != 0:
            air = flow_airtime(sta_f[SF_DEMAND, i], ts_full[c_new, i, j], par)
            sta_f[SF_AIR, i] = air
            own += air
    ap_f[AF_OWN, j] = own
    ap_i[AI_CHAN, j] = c_new
    refresh_all(ap_f, ap_i, sense)
    append_history(h_t, h_cum, cnt, ap_f, t)


@njit
def set_assoc(i, j_new, t, sta_f, sta_i, ap_f, ap_i, sense, ts_full, par, cnt, h_t, h_cum, fr):
    """Re-associate station ``i``; an active flow continues on the new link."""
    integrate(ap_f, par, t)
    j_old = sta_i[SI_ASSOC, i]
    if sta_i[SI_ACTIVE, i] != 0:
        _detach_flow(i, j_old, ap_f, ap_i, sta_f, sense)
        _accumulate(i, t, j_old, sta_f, ap_f)
        if t > sta_f[SF_T0, i]:
            _ring_push(i, sta_f[SF_T0, i], t, j_old, ap_f[AF_CUM_S, j_old] - sta_f[SF_S0, i], sta_i, fr)
        sta_i[SI_ASSOC, i] = j_new
        c = ap_i[AI_CHAN, j_new]
        air = flow_airtime(sta_f[SF_DEMAND, i], ts_full[c, i, j_new], par)
        sta_f[SF_AIR, i] = air
        sta_f[SF_T0, i] = t
        sta_f[SF_S0, i] = ap_f[AF_CUM_S, j_new]
        sta_f[SF_MARK_S, i] = ap_f[AF_CUM_S, j_new]
        sta_f[SF_MARK_T, i] = t
        ap_f[AF_OWN, j_new] += air
        ap_i[AI_NACT, j_new] += 1
        refresh_all(ap_f, ap_i, sense)
        append_history(h_t, h_cum, cnt, ap_f, t)
    else:
        sta_i[SI_ASSOC, i] = j_new


@njit
def flush(t, sta_f, sta_i, ap_f, par):
    """Bring every active flow's accumulators up to ``t``."""
    integrate(ap_f, par, t)
    for i in range(sta_f.shape[1]):
        if sta_i[SI_ACTIVE, i] != 0:
            _accumulate(i, t, sta_i[SI_ASSOC, i], sta_f, ap_f)


@njit
def ap_window(j, starts, ends, ap_f, cnt, h_t, h_cum):
    """Time-averaged channel reward of AP ``j`` over the given intervals (NaN if empty)."""
    num = 0.0
    den = 0.0
    for k in range(starts.shape[0]):
        a = starts[k]
        b = ends[k]
        if b > a:
            num += cum_at(h_t, h_cum, cnt, ap_f, j, b) - cum_at(h_t, h_cum, cnt, ap_f, j, a)
            den += b - a
    if den > 0.0:
        return num / den
    return np.nan


@njit
def station_window(i, arm, lo, hi, sta_f, sta_i, ap_f, cnt, h_t, h_cum, fr):
    """Time-averaged satisfaction of station ``i`` while served by AP ``arm`` in ``[lo, hi]``."""
    n = ap_f.shape[1]
    F = fr.shape[2]
    col = n + arm
    num = 0.0
    den = 0.0
    head = sta_i[SI_FR_HEAD, i]
    for k in range(sta_i[SI_FR_COUNT, i]):
        pos = head - 1 - k
        if pos < 0:
            pos += F
        t0 = fr[FR_T0, i, pos]
        t1 = fr[FR_T1, i, pos]
        if t1 <= lo:
            break
        if int(fr[FR_AP, i, pos]) != arm:
            continue
        a = max(t0, lo)
        b = min(t1, hi)
        if b <= a:
            continue
        if a == t0 and b == t1:
            num += fr[FR_INT, i, pos]
        else:
            num += cum_at(h_t, h_cum, cnt, ap_f, col, b) - cum_at(h_t, h_cum, cnt, ap_f, col, a)
        den += b - a
    if sta_i[SI_ACTIVE, i] != 0 and sta_i[SI_ASSOC, i] == arm:
        a = max(sta_f[SF_T0, i], lo)
        if hi > a:
            num += cum_at(h_t, h_cum, cnt, ap_f, col, hi) - cum_at(h_t, h_cum, cnt, ap_f, col, a)
            den += hi - a
    if den > 0.0:
        return num / den
    return np.nan
