# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot kernels: all-pairs power solutions and the pairing walk.

Arithmetic mirrors the pure-Python reference operation for operation so
that both backends return identical tables and matchings.
"""

import numpy as np

from libc.math cimport ceil, log, log2, expm1, pow, INFINITY
from libc.stdlib cimport malloc, realloc, free

cdef double LN2 = log(2.0)


cdef struct Sys:
    double n
    double p0
    double bw
    double phi
    double v
    double tau


cdef Sys _sys(params):
    cdef Sys s
    s.n = <double>params.n_users
    s.p0 = params.power_budget_w
    s.bw = params.bandwidth_hz
    s.phi = params.blocklength_factor
    s.v = params.v_weight
    s.tau = params.slot_duration_s
    return s


# -- OMA ---------------------------------------------------------------------

cdef inline double _oma_threshold(double rho, double gamma, Sys* s) noexcept nogil:
    cdef double expo
    if gamma <= 0:
        return INFINITY
    expo = s.n * rho / (s.phi * s.bw)
    return expm1(expo * LN2) / (s.n * gamma)


cdef inline double _oma_served_rate(double p, double gamma, double thr, Sys* s) noexcept nogil:
    if p <= 0 or p < thr:
        return 0.0
    return s.phi * s.bw / s.n * log2(1.0 + s.n * gamma * p)


cdef void _solve_oma(double gamma, double qb, double z, double rho, Sys* s,
                     double* out_metric, double* out_power, double* out_rate) noexcept nogil:
    cdef double thr, w, p_star, power, rate
    if gamma <= 0:
        out_metric[0] = 0.0
        out_power[0] = 0.0
        out_rate[0] = 0.0
        return
    thr = _oma_threshold(rho, gamma, s)
    w = s.tau * qb + z
    if w <= 0:
        p_star = -1.0 / (s.n * gamma)
    elif s.v == 0:
        p_star = INFINITY
    else:
        p_star = s.phi * s.bw * w / (s.n * s.v * LN2) - 1.0 / (s.n * gamma)
    power = 0.0
    if thr <= s.p0 and s.p0 <= p_star:
        if s.v * s.p0 - w * _oma_served_rate(s.p0, gamma, thr, s) < 0:
            power = s.p0
    elif thr <= p_star and p_star < s.p0:
        power = p_star
    elif p_star < thr and thr <= s.p0:
        if s.v * thr - w * _oma_served_rate(thr, gamma, thr, s) < 0:
            power = thr
    rate = _oma_served_rate(power, gamma, thr, s)
    out_metric[0] = s.v * power - w * rate
    out_power[0] = power
    out_rate[0] = rate


# -- NOMA pair -----------------------------------------------------------------

cdef inline double _sic_threshold(double rho, double gamma, Sys* s) noexcept nogil:
    cdef double expo
    if gamma <= 0:
        return INFINITY
    expo = s.n * rho / (2.0 * s.phi * s.bw)
    return 2.0 / (s.n * gamma) * expm1(expo * LN2)


cdef inline void _non_sic_parts(double rho, double gamma, Sys* s,
                                double* offset, double* growth) noexcept nogil:
    # bound = (q - offset) / growth, split so the q-free part is computed once
    cdef double expo
    if gamma <= 0:
        offset[0] = INFINITY
        growth[0] = 1.0
        return
    expo = s.n * rho / (2.0 * s.phi * s.bw)
    growth[0] = pow(2.0, expo)
    offset[0] = 2.0 / (s.n * gamma) * expm1(expo * LN2)


cdef struct PairOut:
    double m_i
    double m_j
    double r_i
    double r_j


cdef inline PairOut _pair_terms(double q, double p_j, double g_i, double g_j,
                                double w_i, double w_j, double bound_i, double bound_j,
                                Sys* s) noexcept nogil:
    cdef PairOut o
    cdef double p_i = q - p_j
    cdef double scale = 2.0 * s.phi * s.bw / s.n
    cdef double sinr_i
    o.r_i = 0.0
    o.r_j = 0.0
    if p_i > 0 and p_j <= bound_i:
        sinr_i = (s.n * g_i * p_i / 2.0) / (s.n * g_i * p_j / 2.0 + 1.0)
        o.r_i = scale * log2(1.0 + sinr_i)
    if p_j > 0 and p_j >= bound_j:
        o.r_j = scale * log2(1.0 + s.n * g_j * p_j / 2.0)
    o.m_i = s.v * p_i - w_i * o.r_i
    o.m_j = s.v * p_j - w_j * o.r_j
    return o


cdef double _solve_q(double g_i, double w, Sys* s) noexcept nogil:
    cdef double cap = 2.0 * s.p0
    cdef double q_star
    if g_i <= 0 or w <= 0:
        return 0.0
    if s.v == 0:
        return cap
    q_star = 2.0 / (s.n * g_i) * (s.phi * s.bw * g_i * w / (s.v * LN2) - 1.0)
    if q_star < 0:
        return 0.0
    if q_star < cap:
        return q_star
    return cap


cdef bint _solve_pair(double g_i, double g_j, double w_i, double w_j,
                      double offset_i, double growth_i, double bound_j, Sys* s,
                      double* p_i_out, double* p_j_out, PairOut* best) noexcept nogil:
    """Returns False when the pair is useless."""
    cdef double q = _solve_q(g_i, w_i, s)
    cdef double lo, hi, bound_i, den, stat, cand, m
    cdef double pts[5]
    cdef int k, npts = 0
    cdef double best_p = 0.0, best_m = INFINITY
    cdef PairOut o
    if q <= 0:
        return False
    lo = q - s.p0
    if lo < 0.0:
        lo = 0.0
    hi = q / 2.0
    if g_i <= 0:
        bound_i = -INFINITY
    else:
        bound_i = (q - offset_i) / growth_i
    den = w_i - w_j
    if not (den == 0 or g_i <= 0 or g_j <= 0):
        stat = 2.0 / (s.n * g_i * g_j) * (g_j * w_j - g_i * w_i) / den
        if stat < lo:
            stat = lo
        if stat > hi:
            stat = hi
        pts[npts] = stat
        npts += 1
    pts[npts] = bound_j
    pts[npts + 1] = bound_i
    pts[npts + 2] = lo
    pts[npts + 3] = hi
    npts += 4
    for k in range(npts):
        cand = pts[k]
        if not (lo <= cand and cand <= hi):
            continue
        o = _pair_terms(q, cand, g_i, g_j, w_i, w_j, bound_i, bound_j, s)
        m = o.m_i + o.m_j
        if m < best_m:
            best_m = m
            best_p = cand
            best[0] = o
    if not best_m < 0:
        return False
    p_j_out[0] = best_p
    p_i_out[0] = q - best_p
    return True


def oma_vectors(gamma, q_bits, z_tilde, rho, params):
    cdef Sys s = _sys(params)
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[::1] qb = np.ascontiguousarray(q_bits, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(z_tilde, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef Py_ssize_t n = g.shape[0], a
    metric = np.zeros(n)
    power = np.zeros(n)
    rate = np.zeros(n)
    cdef double[::1] mv = metric, pv = power, rv = rate
    with nogil:
        for a in range(n):
            _solve_oma(g[a], qb[a], z[a], r[a], &s, &mv[a], &pv[a], &rv[a])
    return metric, power, rate


def pair_tables(gamma, q_bits, z_tilde, rho, params):
    cdef Sys s = _sys(params)
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[::1] qb = np.ascontiguousarray(q_bits, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(z_tilde, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef Py_ssize_t n = g.shape[0], a, b, i, j
    metric = np.zeros((n, n))
    power = np.zeros((n, n))
    rate = np.zeros((n, n))
    cdef double[:, ::1] mv = metric, pv = power, rv = rate
    cdef double[::1] w = np.empty(n)
    cdef double[::1] sic = np.empty(n)
    cdef double[::1] offset = np.empty(n)
    cdef double[::1] growth = np.empty(n)
    cdef double p_i, p_j
    cdef PairOut o
    with nogil:
        for a in range(n):
            w[a] = s.tau * qb[a] + z[a]
            sic[a] = _sic_threshold(r[a], g[a], &s)
            _non_sic_parts(r[a], g[a], &s, &offset[a], &growth[a])
            _solve_oma(g[a], qb[a], z[a], r[a], &s, &mv[a, a], &pv[a, a], &rv[a, a])
        for a in range(n):
            for b in range(a + 1, n):
                if g[a] > g[b]:
                    i, j = b, a
                else:
                    i, j = a, b
                if _solve_pair(g[i], g[j], w[i], w[j], offset[i], growth[i], sic[j],
                               &s, &p_i, &p_j, &o):
                    mv[i, j] = o.m_i
                    mv[j, i] = o.m_j
                    pv[i, j] = p_i
                    pv[j, i] = p_j
                    rv[i, j] = o.r_i
                    rv[j, i] = o.r_j
    return metric, power, rate


# -- pairing walk --------------------------------------------------------------

cdef void _sorted_lists(double[:, ::1] metric, Py_ssize_t[:, ::1] order,
                        Py_ssize_t[::1] lens) noexcept nogil:
    """Strictly negative entries per row, ascending, ties to the lower index."""
    cdef Py_ssize_t n = metric.shape[0], i, c, k, cnt, key
    cdef double v
    for i in range(n):
        cnt = 0
        for c in range(n):
            v = metric[i, c]
            if not v < 0:
                continue
            # insertion keeps equal metrics in column order
            k = cnt
            while k > 0 and metric[i, order[i, k - 1]] > v:
                order[i, k] = order[i, k - 1]
                k -= 1
            order[i, k] = c
            cnt += 1
        lens[i] = cnt


cdef class _Walk:
    cdef Py_ssize_t n
    cdef double* metric
    cdef Py_ssize_t* lists
    cdef Py_ssize_t* lens
    cdef Py_ssize_t* psi
    cdef Py_ssize_t* excl
    # undo log: (user, previous partner)
    cdef Py_ssize_t* log_user
    cdef Py_ssize_t* log_old
    cdef Py_ssize_t log_len
    cdef Py_ssize_t log_cap
    cdef Py_ssize_t* first_old
    cdef Py_ssize_t* touched
    cdef Py_ssize_t n_touched
    cdef object _keep

    def __cinit__(self):
        self.log_user = NULL
        self.log_old = NULL

    def __init__(self, double[:, ::1] metric):
        cdef Py_ssize_t n = metric.shape[0]
        cdef Py_ssize_t[:, ::1] order = np.empty((n, n), dtype=np.intp)
        cdef Py_ssize_t[::1] lens = np.zeros(n, dtype=np.intp)
        cdef Py_ssize_t[::1] work = np.empty(4 * n + 1, dtype=np.intp)
        _sorted_lists(metric, order, lens)
        self._keep = (metric, order, lens, work)
        self.n = n
        self.metric = &metric[0, 0] if n else NULL
        self.lists = &order[0, 0] if n else NULL
        self.lens = &lens[0]
        self.psi = &work[0]
        self.excl = &work[n]
        self.first_old = &work[2 * n]
        self.touched = &work[3 * n]
        for u in range(n):
            self.psi[u] = u
            self.excl[u] = 0
            self.first_old[u] = -1
        self.log_cap = 8 * n + 16
        self.log_user = <Py_ssize_t*>malloc(self.log_cap * sizeof(Py_ssize_t))
        self.log_old = <Py_ssize_t*>malloc(self.log_cap * sizeof(Py_ssize_t))
        if self.log_user == NULL or self.log_old == NULL:
            raise MemoryError()
        self.log_len = 0
        self.n_touched = 0

    def __dealloc__(self):
        free(self.log_user)
        free(self.log_old)

    cdef int _set(self, Py_ssize_t u, Py_ssize_t v) except -1:
        cdef Py_ssize_t* grown
        if self.log_len >= self.log_cap:
            self.log_cap *= 2
            grown = <Py_ssize_t*>realloc(self.log_user, self.log_cap * sizeof(Py_ssize_t))
            if grown == NULL:
                raise MemoryError()
            self.log_user = grown
            grown = <Py_ssize_t*>realloc(self.log_old, self.log_cap * sizeof(Py_ssize_t))
            if grown == NULL:
                raise MemoryError()
            self.log_old = grown
        self.log_user[self.log_len] = u
        self.log_old[self.log_len] = self.psi[u]
        self.log_len += 1
        if self.first_old[u] < 0:
            self.first_old[u] = self.psi[u]
            self.touched[self.n_touched] = u
            self.n_touched += 1
        self.psi[u] = v
        return 0

    cdef Py_ssize_t _best(self, Py_ssize_t u) noexcept:
        cdef Py_ssize_t k, c
        cdef Py_ssize_t* row = self.lists + u * self.n
        for k in range(self.lens[u]):
            c = row[k]
            if self.excl[c] == 0:
                return c
        return -1

    cdef int _request(self, Py_ssize_t i, Py_ssize_t j, Py_ssize_t depth) except -1:
        cdef Py_ssize_t m, p
        if depth > self.n:
            raise RuntimeError("match request recursion exceeded the user count")
        m = self.psi[i]
        p = self.psi[j]
        self._set(i, j)
        self._set(j, i)
        if m != i:
            self._set(m, m)
        if p != j:
            self._set(p, p)
        self.excl[i] += 1
        self.excl[j] += 1
        if m != i:
            self._repropose(m, depth)
        if p != j and self.psi[p] == p:
            self._repropose(p, depth)
        self.excl[i] -= 1
        self.excl[j] -= 1
        return 0

    cdef int _repropose(self, Py_ssize_t u, Py_ssize_t depth) except -1:
        cdef Py_ssize_t t = self._best(u)
        if t >= 0 and t != u:
            self._request(u, t, depth + 1)
        return 0

    cdef int _release(self, Py_ssize_t i) except -1:
        cdef Py_ssize_t m = self.psi[i]
        self._set(i, i)
        self._set(m, m)
        self.excl[i] += 1
        self._repropose(m, 0)
        self.excl[i] -= 1
        return 0

    cdef double _delta(self) noexcept:
        cdef Py_ssize_t a, b, u, key, n = self.n
        cdef double d = 0.0
        # insertion sort so the sum runs in user-index order
        for a in range(1, self.n_touched):
            key = self.touched[a]
            b = a - 1
            while b >= 0 and self.touched[b] > key:
                self.touched[b + 1] = self.touched[b]
                b -= 1
            self.touched[b + 1] = key
        for a in range(self.n_touched):
            u = self.touched[a]
            if self.psi[u] != self.first_old[u]:
                d += self.metric[u * n + self.psi[u]] - self.metric[u * n + self.first_old[u]]
        return d

    cdef void _forget(self) noexcept:
        cdef Py_ssize_t a
        for a in range(self.n_touched):
            self.first_old[self.touched[a]] = -1
        self.n_touched = 0
        self.log_len = 0

    cdef void _rollback(self) noexcept:
        cdef Py_ssize_t k
        for k in range(self.log_len - 1, -1, -1):
            self.psi[self.log_user[k]] = self.log_old[k]
        self._forget()

    cdef run(self):
        cdef Py_ssize_t i, k, j
        for i in range(self.n):
            for k in range(self.lens[i]):
                j = self.lists[i * self.n + k]
                if j == self.psi[i]:
                    break
                if j == i:
                    self._release(i)
                else:
                    self._request(i, j, 0)
                if self._delta() < 0:
                    self._forget()
                    break
                self._rollback()
        return np.array([self.psi[u] for u in range(self.n)], dtype=np.intp)


def match(metric):
    cdef double[:, ::1] m = np.ascontiguousarray(metric, dtype=np.float64)
    if m.shape[0] == 0:
        return np.zeros(0, dtype=np.intp)
    return _Walk(m).run()


# -- packet queues ---------------------------------------------------------------

cdef double _BIT_EPS = 1e-9


cdef inline long _left(double rem, double size) noexcept nogil:
    cdef double x = ceil(rem / size - _BIT_EPS)
    return <long>x if x > 0 else 0


cdef class FifoBank:
    """Per-user FIFOs of arrival batches stored in growable 2-D buffers.

    Mirrors ``queueing.serve``/``queueing.enqueue`` entry for entry; delays of
    packets stamped at or after ``count_from`` go into the histogram and the
    per-user sums.
    """

    cdef public Py_ssize_t n
    cdef Py_ssize_t cap
    cdef double packet_bits
    cdef object _slot_arr, _rem_arr
    cdef long[:, ::1] slot
    cdef double[:, ::1] rem
    cdef Py_ssize_t[::1] head
    cdef Py_ssize_t[::1] tail
    cdef public object backlog_bits
    cdef double[::1] q
    cdef public object delay_hist
    cdef long[::1] hist
    cdef public object delay_sum
    cdef double[::1] dsum
    cdef public object delay_count
    cdef long[::1] dcnt
    cdef public object served_bits
    cdef double[::1] served
    cdef public long count_from

    def __init__(self, Py_ssize_t n_users, double packet_bits, Py_ssize_t max_delay,
                 long count_from=0, Py_ssize_t capacity=64):
        self.n = n_users
        self.cap = capacity
        self.packet_bits = packet_bits
        self._slot_arr = np.zeros((n_users, capacity), dtype=np.int_)
        self._rem_arr = np.zeros((n_users, capacity))
        self.slot = self._slot_arr
        self.rem = self._rem_arr
        self.head = np.zeros(n_users, dtype=np.intp)
        self.tail = np.zeros(n_users, dtype=np.intp)
        self.backlog_bits = np.zeros(n_users)
        self.q = self.backlog_bits
        self.delay_hist = np.zeros(max_delay + 2, dtype=np.int_)
        self.hist = self.delay_hist
        self.delay_sum = np.zeros(n_users)
        self.dsum = self.delay_sum
        self.delay_count = np.zeros(n_users, dtype=np.int_)
        self.dcnt = self.delay_count
        self.served_bits = np.zeros(n_users)
        self.served = self.served_bits
        self.count_from = count_from

    cdef void _record(self, Py_ssize_t u, long delay, long count) noexcept:
        cdef Py_ssize_t k = delay
        if k >= self.hist.shape[0]:
            k = self.hist.shape[0] - 1
        self.hist[k] += count
        self.dsum[u] += <double>delay * count
        self.dcnt[u] += count

    def serve(self, mu_bits, long now):
        """Serve ``mu_bits[u]`` from every queue head at slot ``now``."""
        cdef double[::1] mu = np.ascontiguousarray(mu_bits, dtype=np.float64)
        cdef Py_ssize_t u, h, e
        cdef double budget, take, q_pre
        cdef long before, done
        for u in range(self.n):
            if mu[u] < 0:
                raise ValueError("mu_bits must be non-negative")
        for u in range(self.n):
            budget = mu[u]
            h = self.head[u]
            while budget > 0 and h < self.tail[u]:
                e = h
                before = _left(self.rem[u, e], self.packet_bits)
                take = budget if budget < self.rem[u, e] else self.rem[u, e]
                self.rem[u, e] -= take
                budget -= take
                if self.rem[u, e] <= _BIT_EPS:
                    done = before
                    h += 1
                else:
                    done = before - _left(self.rem[u, e], self.packet_bits)
                if done and self.slot[u, e] >= self.count_from:
                    self._record(u, now - self.slot[u, e] + 1, done)
            self.head[u] = h
            q_pre = self.q[u]
            if h < self.tail[u]:
                self.q[u] = q_pre - mu[u] if q_pre - mu[u] > 0.0 else 0.0
            else:
                self.q[u] = 0.0
            self.served[u] += q_pre - self.q[u]

    def enqueue(self, arrival_bits, long now):
        cdef double[::1] bits = np.ascontiguousarray(arrival_bits, dtype=np.float64)
        cdef Py_ssize_t u
        for u in range(self.n):
            if bits[u] <= 0:
                continue
            if self.tail[u] >= self.cap:
                self._make_room(u)
            self.slot[u, self.tail[u]] = now
            self.rem[u, self.tail[u]] = bits[u]
            self.tail[u] += 1
            self.q[u] += bits[u]

    cdef void _make_room(self, Py_ssize_t u):
        cdef Py_ssize_t h = self.head[u], t = self.tail[u], k
        if h >= self.cap // 2:
            for k in range(t - h):
                self.slot[u, k] = self.slot[u, h + k]
                self.rem[u, k] = self.rem[u, h + k]
            self.head[u] = 0
            self.tail[u] = t - h
            return
        new_cap = 2 * self.cap
        slots = np.zeros((self.n, new_cap), dtype=np.int_)
        rems = np.zeros((self.n, new_cap))
        slots[:, :self.cap] = self._slot_arr
        rems[:, :self.cap] = self._rem_arr
        self._slot_arr, self._rem_arr = slots, rems
        self.slot = slots
        self.rem = rems
        self.cap = new_cap

    def pending(self, long now):
        """``(arrival_slot, packets)`` for queued entries stamped at or after ``count_from``."""
        out = []
        cdef Py_ssize_t u, k
        for u in range(self.n):
            for k in range(self.head[u], self.tail[u]):
                if self.slot[u, k] >= self.count_from:
                    out.append((int(self.slot[u, k]), int(_left(self.rem[u, k], self.packet_bits))))
        return out

    def fifo_bits(self):
        """Sum of remaining bits held in each FIFO."""
        out = np.zeros(self.n)
        cdef double[::1] acc = out
        cdef Py_ssize_t u, k
        for u in range(self.n):
            for k in range(self.head[u], self.tail[u]):
                acc[u] += self.rem[u, k]
        return out
