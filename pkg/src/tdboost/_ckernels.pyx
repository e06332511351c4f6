# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Tweedie series, best-first tree growth, tree routing.

Semantics match ``_pykernels`` exactly; see that module for the reference.
"""
import numpy as np

from libc.math cimport exp, floor, lgamma, log, pow

cdef double SERIES_CUTOFF = 37.0
cdef double GAIN_RTOL = 1e-12


cdef inline double _log_w(double t, double c, double alpha) nogil:
    return t * c - lgamma(t + 1.0) - lgamma(t * alpha)


def log_wright_series(y, phi, double rho):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(
        np.broadcast_to(np.asarray(phi, dtype=np.float64), np.shape(y)))
    cdef Py_ssize_t n = yv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double alpha = (2.0 - rho) / (rho - 1.0)
    cdef double lr1 = log(rho - 1.0), l2r = log(2.0 - rho)
    cdef double z, ph, c, t0, lw, lt, s, t
    with nogil:
        for i in range(n):
            z = yv[i]
            ph = pv[i]
            c = alpha * log(z) - alpha * lr1 - (1.0 + alpha) * log(ph) - l2r
            t0 = floor(pow(z, 2.0 - rho) / ((2.0 - rho) * ph) + 0.5)
            if t0 < 1.0:
                t0 = 1.0
            lw = _log_w(t0, c, alpha)
            while t0 > 1.0:
                lt = _log_w(t0 - 1.0, c, alpha)
                if lt > lw:
                    t0 -= 1.0
                    lw = lt
                else:
                    break
            while True:
                lt = _log_w(t0 + 1.0, c, alpha)
                if lt > lw:
                    t0 += 1.0
                    lw = lt
                else:
                    break
            s = 1.0
            t = t0 + 1.0
            while True:
                lt = _log_w(t, c, alpha)
                if lt < lw - SERIES_CUTOFF:
                    break
                s += exp(lt - lw)
                t += 1.0
            t = t0 - 1.0
            while t >= 1.0:
                lt = _log_w(t, c, alpha)
                if lt < lw - SERIES_CUTOFF:
                    break
                s += exp(lt - lw)
                t -= 1.0
            ov[i] = lw + log(s)
    return out


cdef class _Grower:
    cdef const double[:, ::1] Xt
    cdef const unsigned char[::1] is_cat
    cdef const int[::1] n_levels
    cdef const double[::1] u
    cdef int[:, ::1] idx
    cdef int[::1] tmp
    cdef unsigned char[::1] go_left
    cdef Py_ssize_t p, n
    cdef int min_node
    # per-node candidate split
    cdef int[::1] start, end, bfeat, bnleft
    cdef double[::1] bgain, bthr
    cdef unsigned char[:, ::1] bflags
    # categorical scratch
    cdef double[::1] lev_sum, lev_mean
    cdef int[::1] lev_cnt, lev_order

    def __init__(self, Xt, order, is_cat, n_levels, u, int max_nodes, int min_node):
        self.Xt = Xt
        self.is_cat = is_cat
        self.n_levels = n_levels
        self.u = u
        self.p = Xt.shape[0]
        self.n = Xt.shape[1]
        self.idx = np.array(order, dtype=np.intc, order="C", copy=True)
        self.tmp = np.empty(self.n, dtype=np.intc)
        self.go_left = np.zeros(self.n, dtype=np.uint8)
        self.min_node = min_node
        self.start = np.zeros(max_nodes, dtype=np.intc)
        self.end = np.zeros(max_nodes, dtype=np.intc)
        self.bfeat = np.full(max_nodes, -1, dtype=np.intc)
        self.bnleft = np.zeros(max_nodes, dtype=np.intc)
        self.bgain = np.full(max_nodes, -1.0)
        self.bthr = np.zeros(max_nodes)
        maxlev = max(1, int(np.max(n_levels)) if len(n_levels) else 1)
        self.bflags = np.zeros((max_nodes, maxlev), dtype=np.uint8)
        self.lev_sum = np.zeros(maxlev)
        self.lev_mean = np.zeros(maxlev)
        self.lev_cnt = np.zeros(maxlev, dtype=np.intc)
        self.lev_order = np.zeros(maxlev, dtype=np.intc)

    cdef double node_mean(self, int nid):
        cdef Py_ssize_t k
        cdef double s = 0.0
        for k in range(self.start[nid], self.end[nid]):
            s += self.u[self.idx[0, k]]
        return s / (self.end[nid] - self.start[nid])

    cdef void search(self, int nid):
        cdef Py_ssize_t s = self.start[nid], e = self.end[nid]
        cdef Py_ssize_t cnt = e - s, k, f, j, m, c, a, b, nl
        cdef int min_node = self.min_node
        cdef double mean, total, base, sumsq, sl, g, best, x0, x1, thr, key
        cdef int r, cl, cr, code
        self.bgain[nid] = -1.0
        self.bfeat[nid] = -1
        if cnt < 2 * min_node:
            return
        mean = self.node_mean(nid)
        total = 0.0
        sumsq = 0.0
        for k in range(s, e):
            r = self.idx[0, k]
            total += self.u[r] - mean
            sumsq += self.u[r] * self.u[r]
        base = total * total / cnt
        best = -1.0
        for f in range(self.p):
            if self.is_cat[f]:
                nl = self.n_levels[f]
                for c in range(nl):
                    self.lev_sum[c] = 0.0
                    self.lev_cnt[c] = 0
                for k in range(s, e):
                    r = self.idx[f, k]
                    code = <int>self.Xt[f, r]
                    self.lev_sum[code] += self.u[r] - mean
                    self.lev_cnt[code] += 1
                m = 0
                for c in range(nl):
                    if self.lev_cnt[c] > 0:
                        self.lev_mean[c] = self.lev_sum[c] / self.lev_cnt[c]
                        # insertion sort by (mean, code)
                        j = m
                        key = self.lev_mean[c]
                        while j > 0 and self.lev_mean[self.lev_order[j - 1]] > key:
                            self.lev_order[j] = self.lev_order[j - 1]
                            j -= 1
                        self.lev_order[j] = c
                        m += 1
                if m < 2:
                    continue
                sl = 0.0
                cl = 0
                for j in range(m - 1):
                    c = self.lev_order[j]
                    sl += self.lev_sum[c]
                    cl += self.lev_cnt[c]
                    cr = cnt - cl
                    if cl >= min_node and cr >= min_node:
                        g = sl * sl / cl + (total - sl) * (total - sl) / cr - base
                        if g > best:
                            best = g
                            self.bfeat[nid] = f
                            self.bnleft[nid] = cl
                            self.bthr[nid] = 0.0
                            for a in range(nl):
                                self.bflags[nid, a] = 0
                            for a in range(j + 1):
                                self.bflags[nid, self.lev_order[a]] = 1
            else:
                sl = 0.0
                for k in range(s, e - 1):
                    r = self.idx[f, k]
                    sl += self.u[r] - mean
                    cl = k - s + 1
                    cr = cnt - cl
                    if cl < min_node or cr < min_node:
                        continue
                    x0 = self.Xt[f, r]
                    x1 = self.Xt[f, self.idx[f, k + 1]]
                    if not x0 < x1:
                        continue
                    g = sl * sl / cl + (total - sl) * (total - sl) / cr - base
                    if g > best:
                        best = g
                        thr = 0.5 * (x0 + x1)
                        if not thr < x1:
                            thr = x0
                        self.bfeat[nid] = f
                        self.bnleft[nid] = cl
                        self.bthr[nid] = thr
        if best > GAIN_RTOL * sumsq:
            self.bgain[nid] = best
        else:
            self.bfeat[nid] = -1

    cdef int split(self, int nid, int lid, int rid):
        cdef Py_ssize_t s = self.start[nid], e = self.end[nid], k, g, w, wr
        cdef int f = self.bfeat[nid], r, nleft = 0
        cdef double thr = self.bthr[nid]
        cdef bint cat = self.is_cat[f]
        for k in range(s, e):
            r = self.idx[0, k]
            if cat:
                self.go_left[r] = self.bflags[nid, <int>self.Xt[f, r]]
            else:
                self.go_left[r] = self.Xt[f, r] <= thr
            nleft += self.go_left[r]
        for g in range(self.p):
            w = s
            wr = 0
            for k in range(s, e):
                r = self.idx[g, k]
                if self.go_left[r]:
                    self.idx[g, w] = r
                    w += 1
                else:
                    self.tmp[wr] = r
                    wr += 1
            for k in range(wr):
                self.idx[g, w + k] = self.tmp[k]
        self.start[lid] = s
        self.end[lid] = s + nleft
        self.start[rid] = s + nleft
        self.end[rid] = e
        return nleft


def grow_tree(Xt, order, is_cat, n_levels, u, int max_leaves, int min_node):
    cdef int max_nodes = 2 * max_leaves - 1
    Xt = np.ascontiguousarray(Xt, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    is_cat = np.ascontiguousarray(is_cat, dtype=np.uint8)
    n_levels = np.ascontiguousarray(n_levels, dtype=np.intc)
    cdef _Grower gr = _Grower(Xt, order, is_cat, n_levels, u, max_nodes, min_node)
    cdef Py_ssize_t n = gr.n, k
    feature = np.full(max_nodes, -1, dtype=np.intc)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.intc)
    right = np.full(max_nodes, -1, dtype=np.intc)
    value = np.zeros(max_nodes)
    gain = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.intc)
    cat_offset = np.full(max_nodes, -1, dtype=np.intc)
    cdef int[::1] fv = feature, lv = left, rv = right, cv = count
    cdef double[::1] tv = threshold, vv = value, gv = gain
    cat_chunks = []
    cdef int cat_used = 0, n_nodes = 1, n_leaves = 1, nid, best_id, f, lid, rid
    cdef double best_gain

    gr.start[0] = 0
    gr.end[0] = n
    cv[0] = n
    vv[0] = gr.node_mean(0)
    gr.search(0)
    while n_leaves < max_leaves:
        best_id = -1
        best_gain = -1.0
        for nid in range(n_nodes):
            if lv[nid] < 0 and gr.bgain[nid] > best_gain:
                best_gain = gr.bgain[nid]
                best_id = nid
        if best_id < 0:
            break
        f = gr.bfeat[best_id]
        fv[best_id] = f
        gv[best_id] = best_gain
        if is_cat[f]:
            flags = np.array(gr.bflags[best_id, : n_levels[f]], dtype=np.uint8)
            cat_offset[best_id] = cat_used
            cat_chunks.append(flags)
            cat_used += flags.shape[0]
        else:
            tv[best_id] = gr.bthr[best_id]
        lid = n_nodes
        rid = n_nodes + 1
        gr.split(best_id, lid, rid)
        lv[best_id] = lid
        rv[best_id] = rid
        gr.bgain[best_id] = -1.0
        n_nodes += 2
        n_leaves += 1
        for nid in (lid, rid):
            cv[nid] = gr.end[nid] - gr.start[nid]
            vv[nid] = gr.node_mean(nid)
            gr.search(nid)

    leaf_of_row = np.zeros(n, dtype=np.intc)
    cdef int[::1] lr = leaf_of_row
    for nid in range(n_nodes):
        if lv[nid] < 0:
            for k in range(gr.start[nid], gr.end[nid]):
                lr[gr.idx[0, k]] = nid
    flat = (np.concatenate(cat_chunks) if cat_chunks
            else np.zeros(0, dtype=np.uint8))
    return {
        "feature": feature[:n_nodes],
        "threshold": threshold[:n_nodes],
        "left": left[:n_nodes],
        "right": right[:n_nodes],
        "value": value[:n_nodes],
        "gain": gain[:n_nodes],
        "count": count[:n_nodes],
        "cat_offset": cat_offset[:n_nodes],
        "cat_flags": flat,
        "leaf_of_row": leaf_of_row,
    }


def apply_tree(Xt, n_levels, feature, threshold, left, right, cat_offset, cat_flags):
    cdef const double[:, ::1] X = np.ascontiguousarray(Xt, dtype=np.float64)
    cdef const int[::1] nlev = np.ascontiguousarray(n_levels, dtype=np.intc)
    cdef const int[::1] fv = np.ascontiguousarray(feature, dtype=np.intc)
    cdef const double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const int[::1] lv = np.ascontiguousarray(left, dtype=np.intc)
    cdef const int[::1] rv = np.ascontiguousarray(right, dtype=np.intc)
    cdef const int[::1] ov = np.ascontiguousarray(cat_offset, dtype=np.intc)
    cdef const unsigned char[::1] cf = np.ascontiguousarray(cat_flags, dtype=np.uint8)
    cdef Py_ssize_t n = X.shape[1], i
    out = np.empty(n, dtype=np.intc)
    cdef int[::1] res = out
    cdef int node, f, code
    cdef double x
    with nogil:
        for i in range(n):
            node = 0
            while lv[node] >= 0:
                f = fv[node]
                x = X[f, i]
                if ov[node] >= 0:
                    code = <int>x
                    if x >= 0 and code < nlev[f] and code == x and cf[ov[node] + code]:
                        node = lv[node]
                    else:
                        node = rv[node]
                elif x <= tv[node]:
                    node = lv[node]
                else:
                    node = rv[node]
            res[i] = node
    return out
