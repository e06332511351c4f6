"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation and are used when the
compiled extension is unavailable (or when ``TDBOOST_PURE_PYTHON`` is set).
"""
import numpy as np
from scipy.special import gammaln

# log W_t below the running maximum by more than this contributes < 1 ulp
SERIES_CUTOFF = 37.0
# splits whose gain is below this fraction of sum(u^2) in the node are rounding noise
GAIN_RTOL = 1e-12


def _log_w(t, c, alpha):
    return t * c - gammaln(t + 1.0) - gammaln(t * alpha)


def log_wright_series(y, phi, rho):
    """log(sum_{t>=1} W_t(y, phi, rho)) for each positive y."""
    y = np.asarray(y, dtype=np.float64)
    phi = np.broadcast_to(np.asarray(phi, dtype=np.float64), y.shape)
    if y.size == 0:
        return np.empty(0)
    alpha = (2.0 - rho) / (rho - 1.0)
    c = (alpha * np.log(y) - alpha * np.log(rho - 1.0)
         - (1.0 + alpha) * np.log(phi) - np.log(2.0 - rho))
    t0 = np.floor(y ** (2.0 - rho) / ((2.0 - rho) * phi) + 0.5)
    t0 = np.maximum(t0, 1.0)
    lw = _log_w(t0, c, alpha)

    # integer hill climb; log W_t is concave in t
    while True:
        cand = t0 - 1.0
        ok = cand >= 1.0
        lc = np.full_like(lw, -np.inf)
        lc[ok] = _log_w(cand[ok], c[ok], alpha)
        move = lc > lw
        if not move.any():
            break
        t0[move] = cand[move]
        lw[move] = lc[move]
    while True:
        cand = t0 + 1.0
        lc = _log_w(cand, c, alpha)
        move = lc > lw
        if not move.any():
            break
        t0[move] = cand[move]
        lw[move] = lc[move]

    total = np.ones_like(lw)
    for step in (1.0, -1.0):
        t = t0 + step
        active = np.flatnonzero(t >= 1.0)
        while active.size:
            lt = _log_w(t[active], c[active], alpha)
            keep = lt >= lw[active] - SERIES_CUTOFF
            active = active[keep]
            total[active] += np.exp(lt[keep] - lw[active])
            t[active] += step
            active = active[t[active] >= 1.0]
    return lw + np.log(total)


def _search_node(Xt, order, is_cat, n_levels, u, rows, in_node, min_node):
    """Best split of one node. Returns (gain, feature, threshold, n_left, flags)."""
    cnt = rows.size
    best = (-1.0, -1, 0.0, 0, None)
    if cnt < 2 * min_node:
        return best
    uu = u[rows]
    mean = np.cumsum(uu)[-1] / cnt
    d = u - mean
    total = np.cumsum(d[rows])[-1]
    base = total * total / cnt
    best_gain = -1.0
    p = Xt.shape[0]
    for f in range(p):
        if is_cat[f]:
            codes = Xt[f, rows].astype(np.intp)
            nl = int(n_levels[f])
            lev_sum = np.bincount(codes, weights=d[rows], minlength=nl)
            lev_cnt = np.bincount(codes, minlength=nl)
            present = np.flatnonzero(lev_cnt > 0)
            if present.size < 2:
                continue
            means = lev_sum[present] / lev_cnt[present]
            srt = present[np.lexsort((present, means))]
            sl = np.cumsum(lev_sum[srt])[:-1]
            cl = np.cumsum(lev_cnt[srt])[:-1]
            cr = cnt - cl
            gain = sl * sl / cl + (total - sl) ** 2 / cr - base
            ok = (cl >= min_node) & (cr >= min_node)
            if not ok.any():
                continue
            gain = np.where(ok, gain, -np.inf)
            j = int(np.argmax(gain))
            if gain[j] > best_gain:
                best_gain = float(gain[j])
                flags = np.zeros(nl, dtype=np.uint8)
                flags[srt[: j + 1]] = 1
                best = (best_gain, f, 0.0, int(cl[j]), flags)
        else:
            o = order[f]
            o = o[in_node[o]]
            x = Xt[f, o]
            sl = np.cumsum(d[o])[:-1]
            nlft = np.arange(1, cnt)
            nrgt = cnt - nlft
            ok = (x[:-1] < x[1:]) & (nlft >= min_node) & (nrgt >= min_node)
            if not ok.any():
                continue
            gain = sl * sl / nlft + (total - sl) ** 2 / nrgt - base
            gain = np.where(ok, gain, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] > best_gain:
                best_gain = float(gain[k])
                thr = 0.5 * (x[k] + x[k + 1])
                if not thr < x[k + 1]:
                    thr = x[k]
                best = (best_gain, f, float(thr), k + 1, None)
    tol = GAIN_RTOL * float(np.dot(uu, uu))
    if not best[0] > tol:
        return (-1.0, -1, 0.0, 0, None)
    return best


def grow_tree(Xt, order, is_cat, n_levels, u, max_leaves, min_node):
    """Best-first least-squares tree on working responses ``u``.

    ``Xt`` is the (p, n) feature matrix (categorical columns hold integer
    codes), ``order`` the per-feature argsort of ``Xt``. Returns node arrays
    plus the leaf id of every training row.
    """
    p, n = Xt.shape
    max_nodes = 2 * max_leaves - 1
    feature = np.full(max_nodes, -1, dtype=np.intc)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.intc)
    right = np.full(max_nodes, -1, dtype=np.intc)
    value = np.zeros(max_nodes)
    gain = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.intc)
    cat_offset = np.full(max_nodes, -1, dtype=np.intc)
    cat_chunks = []
    cat_used = 0

    node_of_row = np.zeros(n, dtype=np.intc)
    cand = {}

    def setup(nid):
        rows = np.flatnonzero(node_of_row == nid)
        count[nid] = rows.size
        value[nid] = np.cumsum(u[rows])[-1] / rows.size
        cand[nid] = _search_node(Xt, order, is_cat, n_levels, u, rows,
                                 node_of_row == nid, min_node)

    setup(0)
    n_nodes = 1
    n_leaves = 1
    while n_leaves < max_leaves:
        best_id = -1
        best_gain = -1.0
        for nid in sorted(cand):
            g = cand[nid][0]
            if g > best_gain:
                best_gain = g
                best_id = nid
        if best_id < 0:
            break
        g, f, thr, _, flags = cand.pop(best_id)
        rows = np.flatnonzero(node_of_row == best_id)
        x = Xt[f, rows]
        if is_cat[f]:
            go_left = flags[x.astype(np.intp)] == 1
            cat_offset[best_id] = cat_used
            cat_chunks.append(flags)
            cat_used += flags.size
        else:
            go_left = x <= thr
            threshold[best_id] = thr
        feature[best_id] = f
        gain[best_id] = g
        lid, rid = n_nodes, n_nodes + 1
        left[best_id], right[best_id] = lid, rid
        node_of_row[rows[go_left]] = lid
        node_of_row[rows[~go_left]] = rid
        n_nodes += 2
        n_leaves += 1
        setup(lid)
        setup(rid)

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
        "cat_flags": flat.astype(np.uint8),
        "leaf_of_row": node_of_row,
    }


def apply_tree(Xt, n_levels, feature, threshold, left, right, cat_offset, cat_flags):
    """Leaf node id reached by every column of ``Xt``."""
    n = Xt.shape[1]
    node = np.zeros(n, dtype=np.intc)
    active = np.arange(n)
    while True:
        active = active[left[node[active]] >= 0]
        if active.size == 0:
            return node
        nd = node[active]
        f = feature[nd]
        x = Xt[f, active]
        go_left = x <= threshold[nd]
        cat = cat_offset[nd] >= 0
        if cat.any():
            codes = x[cat]
            lev = n_levels[f[cat]]
            known = (codes >= 0) & (codes < lev) & (codes == np.floor(codes))
            pos = cat_offset[nd[cat]] + np.where(known, codes, 0).astype(np.intp)
            go_left[cat] = known & (cat_flags[pos] == 1)
        node[active] = np.where(go_left, left[nd], right[nd])
