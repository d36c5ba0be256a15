"""Continuous-imaginary-time worm-algorithm kernel for lattice bosons.

Worldlines are piecewise-constant occupation trajectories per (species, site),
stored as circular doubly-linked event lists in flat arrays.  Every occupation
change is either one side of a kink (a hop, paired with the opposite change on
a neighboring site at the same time) or a worm endpoint.  The configuration
weight is

    prod_kinks J_s * sqrt(matrix elements) * exp(-int_0^beta E_diag(tau) dtau)

with E_diag = sum_i [ U_A/2 n_A(n_A-1) + U_AB n_A n_B - mu_i,s n_s ] and worm
endpoints carrying sqrt(max(n_below, n_above)) each.

Updates (all Metropolis, log-space acceptance):
  open   Z->G : insert a worm head/tail pair inside one inter-event interval
  close  G->Z : remove the pair when head and tail are ring-adjacent
  move        : resample the head time uniformly in its bounding interval
  insert kink : promote the head discontinuity to a kink, head hops to a neighbor
  delete kink : absorb a ring-adjacent kink, head hops across it
  flat        : +-1 shift of an event-free site trajectory (Z sector only)

This file is plain Python and also valid Cython "pure Python mode"; setup.py
compiles it into an extension that shadows this source.  Both backends execute
the identical statements, so chains agree bit for bit (benchmarks/bench_worm.py
checks that).
"""

import numpy as np

try:
    import cython
    # compiled: C libm; interpreted: Cython's shadow maps this to math.log,
    # the same libm call, so both backends see identical values
    from cython.cimports.libc.math import log
except ImportError:  # pragma: no cover - fallback when Cython is not installed
    import math as _math

    globals()["log"] = _math.log

    class _TypeStub:
        def __getitem__(self, item):
            return self

        def __call__(self, *a, **k):
            return a[0] if a else 0

    class _CythonShim:
        compiled = False
        double = _TypeStub()
        long = _TypeStub()
        ulonglong = _TypeStub()
        bint = _TypeStub()
        Py_ssize_t = _TypeStub()

        @staticmethod
        def cclass(cls):
            return cls

        @staticmethod
        def cfunc(f):
            return f

        @staticmethod
        def ccall(f):
            return f

        @staticmethod
        def inline(f):
            return f

        @staticmethod
        def exceptval(*a, **k):
            def deco(f):
                return f
            return deco

    cython = _CythonShim()

COMPILED = cython.compiled

_MASK = 0xFFFFFFFFFFFFFFFF
_INV53 = 1.0 / 9007199254740992.0  # 2^-53

# move-type probabilities; only ratios enter the acceptance factors
P_OPEN = 0.75  # in Z sector (rest: flat update)
P_CLOSE = 0.2
P_MOVE = 0.4
P_INSERT = 0.2
P_DELETE = 0.2  # in G sector

_LOG_CLOSE_OVER_OPEN = float(np.log(P_CLOSE / P_OPEN))
_LOG_DEL_OVER_INS = float(np.log(P_DELETE / P_INSERT))

# acceptance counter layout
N_MOVE_TYPES = 6
MOVE_NAMES = ("open", "close", "move", "insert", "delete", "flat")


@cython.cclass
class WormKernel:
    n_sites: cython.Py_ssize_t
    n_species: cython.Py_ssize_t
    beta: cython.double
    log_worm_weight: cython.double
    p_open: cython.double
    p_close: cython.double
    p_close_move: cython.double
    p_close_move_ins: cython.double
    log_close_over_open: cython.double
    log_del_over_ins: cython.double

    j_hop: cython.double[:]
    u_on: cython.double[:]
    n_max: cython.long[:]
    mu_site: cython.double[:, :]
    u_ab: cython.double

    nbr: cython.long[:, :]
    deg: cython.long[:]

    cap: cython.Py_ssize_t
    ev_time: cython.double[:]
    ev_site: cython.long[:]
    ev_nafter: cython.long[:]
    ev_next: cython.long[:]
    ev_prev: cython.long[:]
    ev_link: cython.long[:]
    ev_species: cython.long[:]

    anchor: cython.long[:, :]
    n0: cython.long[:, :]

    free_head: cython.long
    n_events: cython.long[:]
    n_kinks: cython.long[:]

    worm_open: cython.bint
    worm_species: cython.long
    head: cython.long
    tail: cython.long

    r0: cython.ulonglong
    r1: cython.ulonglong
    r2: cython.ulonglong
    r3: cython.ulonglong

    proposed: cython.long[:]
    accepted: cython.long[:]

    _arrays: object  # keeps the backing ndarrays alive / addressable

    def __init__(self, n_species, n_sites, beta, j_hop, u_on, n_max, mu_site,
                 u_ab, nbr, deg, n0_init, worm_weight, seed):
        self.n_sites = n_sites
        self.n_species = n_species
        self.beta = beta
        # extended-ensemble constant C_w = worm_weight / (2 N_sites N_species beta^2);
        # the normalization cancels the proposal-density factors so the open
        # acceptance is O(worm_weight) regardless of system size
        self.log_worm_weight = float(np.log(worm_weight))
        self.p_open = P_OPEN
        self.p_close = P_CLOSE
        self.p_close_move = P_CLOSE + P_MOVE
        self.p_close_move_ins = P_CLOSE + P_MOVE + P_INSERT
        self.log_close_over_open = _LOG_CLOSE_OVER_OPEN
        self.log_del_over_ins = _LOG_DEL_OVER_INS

        arrays = {}
        arrays["j_hop"] = np.asarray(j_hop, dtype=np.float64).copy()
        arrays["u_on"] = np.asarray(u_on, dtype=np.float64).copy()
        arrays["n_max"] = np.asarray(n_max, dtype=np.int64).copy()
        arrays["mu_site"] = np.ascontiguousarray(mu_site, dtype=np.float64).copy()
        arrays["nbr"] = np.ascontiguousarray(nbr, dtype=np.int64).copy()
        arrays["deg"] = np.asarray(deg, dtype=np.int64).copy()

        cap = 256
        arrays["ev_time"] = np.zeros(cap, dtype=np.float64)
        arrays["ev_site"] = np.zeros(cap, dtype=np.int64)
        arrays["ev_nafter"] = np.zeros(cap, dtype=np.int64)
        arrays["ev_next"] = np.zeros(cap, dtype=np.int64)
        arrays["ev_prev"] = np.zeros(cap, dtype=np.int64)
        arrays["ev_link"] = np.zeros(cap, dtype=np.int64)
        arrays["ev_species"] = np.zeros(cap, dtype=np.int64)
        arrays["anchor"] = -np.ones((n_species, n_sites), dtype=np.int64)
        arrays["n0"] = np.ascontiguousarray(n0_init, dtype=np.int64).copy()
        arrays["n_events"] = np.zeros(n_species, dtype=np.int64)
        arrays["n_kinks"] = np.zeros(n_species, dtype=np.int64)
        arrays["proposed"] = np.zeros(N_MOVE_TYPES, dtype=np.int64)
        arrays["accepted"] = np.zeros(N_MOVE_TYPES, dtype=np.int64)
        self._arrays = arrays
        self.cap = cap
        self._bind()

        # free list threads through ev_next
        for k in range(cap - 1):
            self.ev_next[k] = k + 1
        self.ev_next[cap - 1] = -1
        self.free_head = 0

        self.u_ab = u_ab
        self.worm_open = False
        self.worm_species = -1
        self.head = -1
        self.tail = -1
        self.seed_rng(seed)

    def _bind(self):
        a = self._arrays
        self.j_hop = a["j_hop"]
        self.u_on = a["u_on"]
        self.n_max = a["n_max"]
        self.mu_site = a["mu_site"]
        self.nbr = a["nbr"]
        self.deg = a["deg"]
        self.ev_time = a["ev_time"]
        self.ev_site = a["ev_site"]
        self.ev_nafter = a["ev_nafter"]
        self.ev_next = a["ev_next"]
        self.ev_prev = a["ev_prev"]
        self.ev_link = a["ev_link"]
        self.ev_species = a["ev_species"]
        self.anchor = a["anchor"]
        self.n0 = a["n0"]
        self.n_events = a["n_events"]
        self.n_kinks = a["n_kinks"]
        self.proposed = a["proposed"]
        self.accepted = a["accepted"]

    # ------------------------------------------------------------------ rng
    def seed_rng(self, seed):
        s: cython.ulonglong = (int(seed) & _MASK) or 0x1234567887654321
        vals = []
        for _ in range(4):
            s = (s + 0x9E3779B97F4A7C15) & _MASK
            z: cython.ulonglong = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
            vals.append(z ^ (z >> 31))
        self.r0, self.r1, self.r2, self.r3 = vals
        if self.r0 == 0 and self.r1 == 0 and self.r2 == 0 and self.r3 == 0:
            self.r0 = 1

    @cython.cfunc
    def _next_u64(self) -> cython.ulonglong:
        # xoshiro256**
        s1: cython.ulonglong = self.r1
        x: cython.ulonglong = (s1 * 5) & _MASK
        result: cython.ulonglong = (((x << 7) | (x >> 57)) & _MASK) * 9 & _MASK
        t: cython.ulonglong = (s1 << 17) & _MASK
        self.r2 ^= self.r0
        self.r3 ^= s1
        self.r1 = (s1 ^ self.r2) & _MASK
        self.r0 ^= self.r3
        self.r2 ^= t
        s3: cython.ulonglong = self.r3
        self.r3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        return result

    @cython.cfunc
    def _rnd(self) -> cython.double:
        return (self._next_u64() >> 11) * _INV53

    @cython.cfunc
    def _randint(self, n: cython.long) -> cython.long:
        k: cython.long = int(self._rnd() * n)
        if k >= n:
            k = n - 1
        return k

    def rng_state(self):
        return (int(self.r0), int(self.r1), int(self.r2), int(self.r3))

    def set_rng_state(self, state):
        self.r0, self.r1, self.r2, self.r3 = (int(v) & _MASK for v in state)

    # ------------------------------------------------------- event pool
    @cython.ccall
    def _grow(self) -> cython.long:
        a = self._arrays
        old = self.cap
        new = old * 2
        for name in ("ev_time", "ev_site", "ev_nafter", "ev_next", "ev_prev",
                     "ev_link", "ev_species"):
            arr = np.zeros(new, dtype=a[name].dtype)
            arr[:old] = a[name]
            a[name] = arr
        self.cap = new
        self._bind()
        for k in range(old, new - 1):
            self.ev_next[k] = k + 1
        self.ev_next[new - 1] = self.free_head
        self.free_head = old
        return new

    @cython.cfunc
    def _alloc(self) -> cython.long:
        if self.free_head < 0:
            self._grow()
        idx: cython.long = self.free_head
        self.free_head = self.ev_next[idx]
        return idx

    @cython.cfunc
    def _free(self, idx: cython.long):
        self.ev_next[idx] = self.free_head
        self.free_head = idx

    # ---------------------------------------------------- ring primitives
    @cython.cfunc
    def _ring_insert_after(self, prev_idx: cython.long, idx: cython.long,
                           s: cython.long, i: cython.long):
        if prev_idx < 0:  # empty ring: make a self-loop
            self.ev_next[idx] = idx
            self.ev_prev[idx] = idx
        else:
            nxt: cython.long = self.ev_next[prev_idx]
            self.ev_next[prev_idx] = idx
            self.ev_prev[idx] = prev_idx
            self.ev_next[idx] = nxt
            self.ev_prev[nxt] = idx
        self.anchor[s, i] = idx
        self.n_events[s] += 1

    @cython.cfunc
    def _ring_remove(self, idx: cython.long, s: cython.long, i: cython.long):
        nxt: cython.long = self.ev_next[idx]
        if nxt == idx:
            self.anchor[s, i] = -1
        else:
            prv: cython.long = self.ev_prev[idx]
            self.ev_next[prv] = nxt
            self.ev_prev[nxt] = prv
            self.anchor[s, i] = nxt
        self.n_events[s] -= 1
        self._free(idx)

    @cython.cfunc
    def _find_before(self, s: cython.long, i: cython.long,
                     t: cython.double) -> cython.long:
        """Event with the greatest time <= t; wraps to the max-time event."""
        a: cython.long = self.anchor[s, i]
        if a < 0:
            return -1
        best: cython.long = -1
        best_t: cython.double = -1.0
        mx: cython.long = a
        mx_t: cython.double = self.ev_time[a]
        e: cython.long = a
        while True:
            te: cython.double = self.ev_time[e]
            if te <= t and te > best_t:
                best = e
                best_t = te
            if te > mx_t:
                mx = e
                mx_t = te
            e = self.ev_next[e]
            if e == a:
                break
        if best >= 0:
            return best
        return mx

    @cython.cfunc
    def _occ_at(self, s: cython.long, i: cython.long,
                t: cython.double) -> cython.long:
        e: cython.long = self._find_before(s, i, t)
        if e < 0:
            return self.n0[s, i]
        return self.ev_nafter[e]

    # -------------------------------------------------- diagonal action
    @cython.cfunc
    def _other_integral(self, s_other: cython.long, i: cython.long,
                        t0: cython.double, length: cython.double) -> cython.double:
        """Integral of the other species' occupation over (t0, t0+length).

        Single ring pass: each inter-event segment overlaps the (circular)
        query window by an O(1)-computable amount.
        """
        a: cython.long = self.anchor[s_other, i]
        if a < 0:
            return self.n0[s_other, i] * length
        beta: cython.double = self.beta
        acc: cython.double = 0.0
        e: cython.long = a
        while True:
            nxt: cython.long = self.ev_next[e]
            ds: cython.double = self.ev_time[nxt] - self.ev_time[e]
            if ds <= 0.0:
                ds += beta
            # segment start in window coordinates
            rel: cython.double = self.ev_time[e] - t0
            if rel < 0.0:
                rel += beta
            over: cython.double = 0.0
            hi: cython.double = rel + ds
            if hi > length:
                hi = length
            if hi > rel:
                over = hi - rel
            wrap: cython.double = rel + ds - beta
            if wrap > 0.0:
                if wrap > length:
                    wrap = length
                over += wrap
            acc += self.ev_nafter[e] * over
            e = nxt
            if e == a:
                break
        return acc

    @cython.cfunc
    def _dshift(self, s: cython.long, i: cython.long, t0: cython.double,
                length: cython.double, n_cur: cython.long,
                d: cython.long) -> cython.double:
        """Action change for shifting species-s occupation by d on a segment.

        Returns integral over (t0, t0+length) of E_diag(n_cur+d) - E_diag(n_cur).
        """
        du: cython.double = 0.5 * self.u_on[s] * d * (2 * n_cur + d - 1)
        dmu: cython.double = -self.mu_site[s, i] * d
        out: cython.double = (du + dmu) * length
        if self.n_species == 2 and self.u_ab != 0.0:
            other: cython.long = 1 - s
            out += self.u_ab * d * self._other_integral(other, i, t0, length)
        return out

    # --------------------------------------------------------- updates
    @cython.cfunc
    def _try_open(self) -> cython.bint:
        self.proposed[0] += 1
        s: cython.long = self._randint(self.n_species)
        i: cython.long = self._randint(self.n_sites)
        t1: cython.double = self._rnd() * self.beta
        e_prev: cython.long = self._find_before(s, i, t1)

        t_a: cython.double
        t_b: cython.double
        seg_len: cython.double
        n: cython.long
        log_interval: cython.double

        if e_prev < 0:
            # empty trajectory: the pair is inserted anywhere on the circle and
            # the modified segment runs forward from t1 to t2
            t2: cython.double = self._rnd() * self.beta
            if t2 == t1:
                return False
            n = self.n0[s, i]
            t_a = t1
            t_b = t2
            seg_len = t2 - t1
            if seg_len < 0.0:
                seg_len += self.beta
            # reverse close on a two-event ring erases either arc with a 1/2
            # coin, which exactly cancels the shift/ordering factors here
            log_interval = 0.0
        else:
            t_prev: cython.double = self.ev_time[e_prev]
            nxt: cython.long = self.ev_next[e_prev]
            l_int: cython.double = self.ev_time[nxt] - t_prev
            if l_int <= 0.0:
                l_int += self.beta
            o1: cython.double = t1 - t_prev
            if o1 < 0.0:
                o1 += self.beta
            o2: cython.double = self._rnd() * l_int
            if o2 == o1 or o1 == 0.0 or o2 == 0.0:
                return False
            n = self.ev_nafter[e_prev]
            if o1 < o2:
                t_a = t_prev + o1
                seg_len = o2 - o1
            else:
                t_a = t_prev + o2
                seg_len = o1 - o2
            if t_a >= self.beta:
                t_a -= self.beta
            t_b = t_a + seg_len
            if t_b >= self.beta:
                t_b -= self.beta
            log_interval = log(l_int / self.beta)

        shift: cython.long = 1 if self._rnd() < 0.5 else -1
        n_seg: cython.long = n + shift
        if n_seg < 0 or n_seg > self.n_max[s]:
            return False
        head_at_start: cython.bint = self._rnd() < 0.5

        me: cython.long = n_seg if n_seg > n else n  # max(n, n+shift)
        d_action: cython.double = self._dshift(s, i, t_a, seg_len, n, shift)
        log_acc: cython.double = (self.log_worm_weight
                                  + log_interval
                                  + log(float(me))
                                  + self.log_close_over_open
                                  - d_action)
        if log_acc < 0.0 and log(self._rnd() + 1e-300) >= log_acc:
            return False

        ea: cython.long = self._alloc()
        eb: cython.long = self._alloc()
        self.ev_time[ea] = t_a
        self.ev_site[ea] = i
        self.ev_species[ea] = s
        self.ev_nafter[ea] = n_seg
        self.ev_link[ea] = -1
        self.ev_time[eb] = t_b
        self.ev_site[eb] = i
        self.ev_species[eb] = s
        self.ev_nafter[eb] = n
        self.ev_link[eb] = -1
        # splice in: ea goes after e_prev (or self-loop), eb right after ea
        self._ring_insert_after(e_prev, ea, s, i)
        self._ring_insert_after(ea, eb, s, i)
        self.worm_open = True
        self.worm_species = s
        if head_at_start:
            self.head = ea
            self.tail = eb
        else:
            self.head = eb
            self.tail = ea
        self.accepted[0] += 1
        return True

    @cython.cfunc
    def _try_close(self) -> cython.bint:
        self.proposed[1] += 1
        h: cython.long = self.head
        t: cython.long = self.tail
        s: cython.long = self.worm_species
        i: cython.long = self.ev_site[h]
        if self.ev_site[t] != i:
            return False

        first: cython.long
        second: cython.long
        pair_only: cython.bint = self.ev_next[h] == t and self.ev_prev[h] == t
        if pair_only:
            # both arcs are event-free; erase either with equal probability
            # (each choice reverses one of the two opens that reach this state)
            if self._rnd() < 0.5:
                first = h
                second = t
            else:
                first = t
                second = h
        elif self.ev_next[h] == t:
            first = h
            second = t
        elif self.ev_prev[h] == t:
            first = t
            second = h
        else:
            return False

        n_out: cython.long = self.ev_nafter[second]
        if not pair_only:
            if self.ev_nafter[self.ev_prev[first]] != n_out:
                return False  # cannot happen for a consistent worm; guard anyway

        n_seg: cython.long = self.ev_nafter[first]
        t_first: cython.double = self.ev_time[first]
        seg_len: cython.double = self.ev_time[second] - t_first
        if seg_len <= 0.0:
            seg_len += self.beta

        log_interval: cython.double
        if pair_only:
            log_interval = 0.0
        else:
            t_lo: cython.double = self.ev_time[self.ev_prev[first]]
            t_hi: cython.double = self.ev_time[self.ev_next[second]]
            l_merged: cython.double = t_hi - t_lo
            if l_merged <= 0.0:
                l_merged += self.beta
            log_interval = log(l_merged / self.beta)

        me: cython.long = n_seg if n_seg > n_out else n_out
        d_action: cython.double = self._dshift(s, i, t_first, seg_len, n_seg,
                                               n_out - n_seg)
        log_acc: cython.double = -(self.log_worm_weight
                                   + log_interval
                                   + log(float(me))
                                   + self.log_close_over_open) - d_action
        if log_acc < 0.0 and log(self._rnd() + 1e-300) >= log_acc:
            return False

        if pair_only:
            self.n0[s, i] = n_out
        self._ring_remove(first, s, i)
        self._ring_remove(second, s, i)
        self.worm_open = False
        self.worm_species = -1
        self.head = -1
        self.tail = -1
        self.accepted[1] += 1
        return True

    @cython.cfunc
    def _try_move(self) -> cython.bint:
        self.proposed[2] += 1
        h: cython.long = self.head
        s: cython.long = self.worm_species
        i: cython.long = self.ev_site[h]
        prv: cython.long = self.ev_prev[h]
        nxt: cython.long = self.ev_next[h]
        t_prev: cython.double = self.ev_time[prv]
        window: cython.double = self.ev_time[nxt] - t_prev
        if window <= 0.0:
            window += self.beta  # covers the two-event ring (full circle window)
        t_h: cython.double = self.ev_time[h]
        o_h: cython.double = t_h - t_prev
        if o_h < 0.0:
            o_h += self.beta
        o_new: cython.double = self._rnd() * window
        if o_new == o_h or o_new == 0.0:
            return False

        n_a: cython.long = self.ev_nafter[h]
        n_b: cython.long = self.ev_nafter[prv]
        d_action: cython.double
        if o_new > o_h:
            d_action = self._dshift(s, i, t_h, o_new - o_h, n_a, n_b - n_a)
        else:
            t_new: cython.double = t_prev + o_new
            if t_new >= self.beta:
                t_new -= self.beta
            d_action = self._dshift(s, i, t_new, o_h - o_new, n_b, n_a - n_b)
        log_acc: cython.double = -d_action
        if log_acc < 0.0 and log(self._rnd() + 1e-300) >= log_acc:
            return False

        t_new2: cython.double = t_prev + o_new
        if t_new2 >= self.beta:
            t_new2 -= self.beta
        self.ev_time[h] = t_new2
        self.accepted[2] += 1
        return True

    @cython.cfunc
    def _try_insert_kink(self) -> cython.bint:
        self.proposed[3] += 1
        h: cython.long = self.head
        s: cython.long = self.worm_species
        i: cython.long = self.ev_site[h]
        if self.deg[i] == 0:
            return False
        j: cython.long = self.nbr[i, self._randint(self.deg[i])]
        after: cython.bint = self._rnd() < 0.5
        t_h: cython.double = self.ev_time[h]

        n_b: cython.long = self.ev_nafter[self.ev_prev[h]]
        n_a: cython.long = self.ev_nafter[h]
        d: cython.long = n_a - n_b

        # occupation and window on the target ring around t_h
        e_uprev: cython.long = self._find_before(s, j, t_h)
        m: cython.long
        window: cython.double
        if e_uprev < 0:
            m = self.n0[s, j]
            window = self.beta
        else:
            if self.ev_time[e_uprev] == t_h:
                return False
            m = self.ev_nafter[e_uprev]
            if after:
                window = self.ev_time[self.ev_next[e_uprev]] - t_h
            else:
                window = t_h - self.ev_time[e_uprev]
            if window == 0.0:
                return False  # exact time collision with an existing event
            if window < 0.0:
                window += self.beta

        seg_n: cython.long = m - d if after else m + d
        if seg_n < 0 or seg_n > self.n_max[s]:
            return False

        off: cython.double = self._rnd() * window
        if off == 0.0:
            return False
        t_new: cython.double = t_h + off if after else t_h - off
        if t_new >= self.beta:
            t_new -= self.beta
        if t_new < 0.0:
            t_new += self.beta

        me: cython.long = seg_n if seg_n > m else m
        d_action: cython.double
        if after:
            d_action = self._dshift(s, j, t_h, off, m, -d)
        else:
            d_action = self._dshift(s, j, t_new, off, m, d)
        log_acc: cython.double = (log(self.j_hop[s])
                                  + log(float(me))
                                  + log(float(self.deg[i]) * window)
                                  + self.log_del_over_ins
                                  - d_action)
        if log_acc < 0.0 and log(self._rnd() + 1e-300) >= log_acc:
            return False

        ek: cython.long = self._alloc()  # kink's j-side
        eh: cython.long = self._alloc()  # new head on j
        self.ev_time[ek] = t_h
        self.ev_site[ek] = j
        self.ev_species[ek] = s
        self.ev_time[eh] = t_new
        self.ev_site[eh] = j
        self.ev_species[eh] = s
        self.ev_link[eh] = -1
        if after:
            self.ev_nafter[ek] = seg_n
            self.ev_nafter[eh] = m
            self._ring_insert_after(e_uprev, ek, s, j)
            self._ring_insert_after(ek, eh, s, j)
        else:
            self.ev_nafter[eh] = seg_n
            self.ev_nafter[ek] = m
            # head goes in first (earlier time), then the kink after it
            e_before_head: cython.long = self._find_before(s, j, t_new) \
                if e_uprev >= 0 else -1
            self._ring_insert_after(e_before_head, eh, s, j)
            self._ring_insert_after(eh, ek, s, j)
        self.ev_link[h] = ek
        self.ev_link[ek] = h
        self.head = eh
        self.n_kinks[s] += 1
        self.accepted[3] += 1
        return True

    @cython.cfunc
    def _try_delete_kink(self) -> cython.bint:
        self.proposed[4] += 1
        h: cython.long = self.head
        s: cython.long = self.worm_species
        j: cython.long = self.ev_site[h]
        toward_prev: cython.bint = self._rnd() < 0.5
        adj: cython.long = self.ev_prev[h] if toward_prev else self.ev_next[h]
        if adj == h:
            return False
        partner: cython.long = self.ev_link[adj]
        if partner < 0:
            return False  # worm tail, not a kink

        i2: cython.long = self.ev_site[partner]
        t_k: cython.double = self.ev_time[adj]
        t_h: cython.double = self.ev_time[h]

        first: cython.long = adj if toward_prev else h
        second: cython.long = h if toward_prev else adj
        n_seg: cython.long = self.ev_nafter[first]
        n_out: cython.long = self.ev_nafter[second]
        ring_pair_only: cython.bint = self.ev_prev[first] == second
        n_before: cython.long = n_out if ring_pair_only \
            else self.ev_nafter[self.ev_prev[first]]
        if n_before != n_out:
            return False  # same-direction jumps: removal would be inconsistent

        seg_len: cython.double = self.ev_time[second] - self.ev_time[first]
        if seg_len <= 0.0:
            seg_len += self.beta

        # window of the reverse insert, measured in the post-removal ring
        window: cython.double
        if ring_pair_only:
            window = self.beta
        else:
            if toward_prev:
                t_stop: cython.double = self.ev_time[self.ev_next[h]]
                window = t_stop - t_k
            else:
                t_stop2: cython.double = self.ev_time[self.ev_prev[h]]
                window = t_k - t_stop2
            if window <= 0.0:
                window += self.beta

        me: cython.long = n_seg if n_seg > n_out else n_out
        d_action: cython.double = self._dshift(s, j, self.ev_time[first],
                                               seg_len, n_seg, n_out - n_seg)
        log_acc: cython.double = (-log(self.j_hop[s])
                                  - log(float(me))
                                  - log(float(self.deg[i2]) * window)
                                  - self.log_del_over_ins
                                  - d_action)
        if log_acc < 0.0 and log(self._rnd() + 1e-300) >= log_acc:
            return False

        if ring_pair_only:
            self.n0[s, j] = n_out
        self._ring_remove(adj, s, j)
        self._ring_remove(h, s, j)
        self.ev_link[partner] = -1
        self.head = partner
        self.n_kinks[s] -= 1
        self.accepted[4] += 1
        return True

    @cython.cfunc
    def _try_flat(self) -> cython.bint:
        self.proposed[5] += 1
        s: cython.long = self._randint(self.n_species)
        i: cython.long = self._randint(self.n_sites)
        if self.anchor[s, i] >= 0:
            return False
        d: cython.long = 1 if self._rnd() < 0.5 else -1
        n: cython.long = self.n0[s, i]
        n_new: cython.long = n + d
        if n_new < 0 or n_new > self.n_max[s]:
            return False
        d_action: cython.double = self._dshift(s, i, 0.0, self.beta, n, d)
        log_acc: cython.double = -d_action
        if log_acc < 0.0 and log(self._rnd() + 1e-300) >= log_acc:
            return False
        self.n0[s, i] = n_new
        self.accepted[5] += 1
        return True

    # ---------------------------------------------------------- driver
    @cython.ccall
    def run_updates(self, n_attempts: cython.long) -> cython.long:
        """Perform elementary update attempts; returns how many were accepted."""
        acc: cython.long = 0
        k: cython.long
        for k in range(n_attempts):
            u: cython.double = self._rnd()
            if not self.worm_open:
                if u < self.p_open:
                    acc += self._try_open()
                else:
                    acc += self._try_flat()
            else:
                if u < self.p_close:
                    acc += self._try_close()
                elif u < self.p_close_move:
                    acc += self._try_move()
                elif u < self.p_close_move_ins:
                    acc += self._try_insert_kink()
                else:
                    acc += self._try_delete_kink()
        return acc

    def in_z_sector(self):
        return not self.worm_open

    def total_events(self):
        return int(np.asarray(self.n_events).sum())

    def kink_counts(self):
        return np.asarray(self.n_kinks).copy()

    def move_stats(self):
        return (np.asarray(self.proposed).copy(), np.asarray(self.accepted).copy())

    # ------------------------------------------------------ measurement
    @cython.ccall
    def measure(self, out_n: cython.double[:, :], out_docc: cython.double[:],
                out_scalars: cython.double[:]) -> cython.bint:
        """Time-averaged estimators of the current Z-sector configuration.

        out_n[(species, site)] <- beta^-1 int n dtau
        out_docc[site]         <- beta^-1 int n_A (n_A - 1)/2 dtau
        out_scalars            <- [kinks_A, kinks_B, int_UAB/beta, int_multi_A/beta]
        Returns False (and writes nothing) outside the Z sector.
        """
        if self.worm_open:
            return False
        beta: cython.double = self.beta
        s: cython.long
        i: cython.long
        for s in range(self.n_species):
            for i in range(self.n_sites):
                a: cython.long = self.anchor[s, i]
                int_n: cython.double = 0.0
                int_docc: cython.double = 0.0
                int_multi: cython.double = 0.0
                if a < 0:
                    n_c: cython.long = self.n0[s, i]
                    int_n = n_c * beta
                    int_docc = 0.5 * n_c * (n_c - 1) * beta
                    int_multi = (n_c if n_c >= 2 else 0) * beta
                else:
                    e: cython.long = a
                    while True:
                        nxt: cython.long = self.ev_next[e]
                        dt: cython.double = self.ev_time[nxt] - self.ev_time[e]
                        if dt <= 0.0:
                            dt += beta
                        n_e: cython.long = self.ev_nafter[e]
                        int_n += n_e * dt
                        int_docc += 0.5 * n_e * (n_e - 1) * dt
                        int_multi += (n_e if n_e >= 2 else 0) * dt
                        e = nxt
                        if e == a:
                            break
                out_n[s, i] = int_n / beta
                if s == 0:
                    out_docc[i] = int_docc / beta
                    out_scalars[3] += int_multi / beta

        # cross term: int n_A n_B per site
        if self.n_species == 2:
            for i in range(self.n_sites):
                aa: cython.long = self.anchor[0, i]
                ab: cython.long = self.anchor[1, i]
                if aa < 0 and ab < 0:
                    out_scalars[2] += self.n0[0, i] * self.n0[1, i] * 1.0
                elif aa < 0:
                    out_scalars[2] += self.n0[0, i] * out_n[1, i]
                elif ab < 0:
                    out_scalars[2] += self.n0[1, i] * out_n[0, i]
                else:
                    out_scalars[2] += self._cross_integral(i) / beta
        out_scalars[0] = self.n_kinks[0]
        out_scalars[1] = self.n_kinks[1] if self.n_species == 2 else 0.0
        return True

    @cython.cfunc
    def _cross_integral(self, i: cython.long) -> cython.double:
        """int_0^beta n_A(tau) n_B(tau) dtau for one site, both rings nonempty."""
        beta: cython.double = self.beta
        ea: cython.long = self._find_before(0, i, 0.0)
        eb: cython.long = self._find_before(1, i, 0.0)
        na: cython.long = self.ev_nafter[ea]
        nb: cython.long = self.ev_nafter[eb]
        pa: cython.long = self.ev_next[ea]
        pb: cython.long = self.ev_next[eb]
        ta: cython.double = self.ev_time[pa]
        tb: cython.double = self.ev_time[pb]
        if ta <= 0.0:
            ta += beta
        if tb <= 0.0:
            tb += beta
        cur: cython.double = 0.0
        acc: cython.double = 0.0
        while cur < beta:
            t_next: cython.double = beta
            which: cython.long = 0
            if ta < t_next:
                t_next = ta
                which = 1
            if tb < t_next:
                t_next = tb
                which = 2
            acc += na * nb * (t_next - cur)
            cur = t_next
            if which == 1:
                na = self.ev_nafter[pa]
                pa = self.ev_next[pa]
                ta = self.ev_time[pa]
                if ta <= cur:
                    ta = beta + 1.0  # ring exhausted for this period
            elif which == 2:
                nb = self.ev_nafter[pb]
                pb = self.ev_next[pb]
                tb = self.ev_time[pb]
                if tb <= cur:
                    tb = beta + 1.0
            else:
                break
        return acc

    # ---------------------------------------------------- checkpointing
    def pack_state(self):
        """Snapshot of everything the Markov chain needs to continue."""
        a = self._arrays
        return {
            "cap": int(self.cap),
            "free_head": int(self.free_head),
            "worm_open": bool(self.worm_open),
            "worm_species": int(self.worm_species),
            "head": int(self.head),
            "tail": int(self.tail),
            "rng": np.array(self.rng_state(), dtype=np.uint64),
            "ev_time": np.asarray(a["ev_time"]).copy(),
            "ev_site": np.asarray(a["ev_site"]).copy(),
            "ev_nafter": np.asarray(a["ev_nafter"]).copy(),
            "ev_next": np.asarray(a["ev_next"]).copy(),
            "ev_prev": np.asarray(a["ev_prev"]).copy(),
            "ev_link": np.asarray(a["ev_link"]).copy(),
            "ev_species": np.asarray(a["ev_species"]).copy(),
            "anchor": np.asarray(a["anchor"]).copy(),
            "n0": np.asarray(a["n0"]).copy(),
            "n_events": np.asarray(a["n_events"]).copy(),
            "n_kinks": np.asarray(a["n_kinks"]).copy(),
            "proposed": np.asarray(a["proposed"]).copy(),
            "accepted": np.asarray(a["accepted"]).copy(),
        }

    def unpack_state(self, state):
        a = self._arrays
        cap = int(state["cap"])
        for name in ("ev_time", "ev_site", "ev_nafter", "ev_next", "ev_prev",
                     "ev_link", "ev_species"):
            a[name] = np.asarray(state[name]).copy()
            assert len(a[name]) == cap
        for name in ("anchor", "n0", "n_events", "n_kinks", "proposed", "accepted"):
            a[name] = np.asarray(state[name]).copy()
        self.cap = cap
        self._bind()
        self.free_head = int(state["free_head"])
        self.worm_open = bool(state["worm_open"])
        self.worm_species = int(state["worm_species"])
        self.head = int(state["head"])
        self.tail = int(state["tail"])
        self.set_rng_state([int(v) for v in np.asarray(state["rng"])])

    # -------------------------------------------------------- debugging
    def check_invariants(self):
        """Raise RuntimeError on any structural inconsistency (debug aid)."""
        beta = self.beta
        seen = set()
        n_ev = [0] * self.n_species
        n_kinkside = [0] * self.n_species
        for s in range(self.n_species):
            for i in range(self.n_sites):
                a = int(self.anchor[s, i])
                if a < 0:
                    if not (0 <= self.n0[s, i] <= self.n_max[s]):
                        raise RuntimeError(f"n0 out of bounds at ({s},{i})")
                    continue
                e = a
                count = 0
                jump_sum = 0
                while True:
                    if e in seen:
                        raise RuntimeError("event in two rings")
                    seen.add(e)
                    count += 1
                    n_ev[s] += 1
                    if self.ev_site[e] != i or self.ev_species[e] != s:
                        raise RuntimeError("event site/species mismatch")
                    nxt = int(self.ev_next[e])
                    if int(self.ev_prev[nxt]) != e:
                        raise RuntimeError("broken ring links")
                    na = int(self.ev_nafter[e])
                    if not (0 <= na <= self.n_max[s]):
                        raise RuntimeError(f"occupation {na} out of bounds")
                    nb = int(self.ev_nafter[int(self.ev_prev[e])])
                    jump = na - nb
                    if jump not in (-1, 1):
                        raise RuntimeError(f"jump {jump} is not +-1")
                    jump_sum += jump
                    link = int(self.ev_link[e])
                    if link >= 0:
                        n_kinkside[s] += 1
                        if int(self.ev_link[link]) != e:
                            raise RuntimeError("kink link not mutual")
                        if self.ev_time[link] != self.ev_time[e]:
                            raise RuntimeError("kink times differ")
                        if self.ev_species[link] != s:
                            raise RuntimeError("kink species differ")
                    else:
                        if not self.worm_open or e not in (self.head, self.tail):
                            raise RuntimeError("unlinked event is not the worm")
                    if not (0.0 <= self.ev_time[e] < beta):
                        raise RuntimeError("event time outside [0, beta)")
                    if count > self.cap:
                        raise RuntimeError("ring does not close")
                    e = nxt
                    if e == a:
                        break
                if jump_sum != 0:
                    raise RuntimeError("occupation not periodic in tau")
                # strict circular time ordering
                e = a
                wraps = 0
                while True:
                    nxt = int(self.ev_next[e])
                    if nxt == e:
                        raise RuntimeError("singleton ring")
                    if self.ev_time[nxt] <= self.ev_time[e]:
                        wraps += 1
                    e = nxt
                    if e == a:
                        break
                if wraps != 1:
                    raise RuntimeError("ring times not circularly ordered")
        for s in range(self.n_species):
            if n_ev[s] != int(self.n_events[s]):
                raise RuntimeError("event count mismatch")
            expected_kinks = 2 * int(self.n_kinks[s])
            if self.worm_open and self.worm_species == s:
                if n_ev[s] != expected_kinks + 2:
                    raise RuntimeError("event/kink/worm count mismatch")
            elif n_ev[s] != expected_kinks:
                raise RuntimeError("event/kink count mismatch")
            if n_kinkside[s] != expected_kinks:
                raise RuntimeError("kink side count mismatch")
