"""
Hot numeric kernels, each in two flavours.

``*_nb`` functions are explicit loops compiled with numba; ``*_np`` functions
are vectorized numpy.  The public names at the bottom of the module pick one
of the two according to :data:`cassl._accel.USE_NUMBA`.  Both flavours must
agree (exactly for integer/bit work, to rounding for float reductions); the
test-suite checks this directly.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

SOBOL_BITS = 32


# ---------------------------------------------------------------------------
# Sobol points (Gray-code ordering)
# ---------------------------------------------------------------------------

@njit(cache=True)
def sobol_block_nb(directions, start, count):
    dim, nbits = directions.shape
    out = np.empty((count, dim))
    scale = 1.0 / float(2 ** SOBOL_BITS)
    x = np.zeros(dim, dtype=np.uint64)
    g = start ^ (start >> 1)
    b = 0
    while g > 0:
        if g & 1:
            for d in range(dim):
                x[d] ^= directions[d, b]
        g >>= 1
        b += 1
    for n in range(count):
        for d in range(dim):
            out[n, d] = x[d] * scale
        # next point flips the direction number at the lowest zero bit of the index
        idx = start + n
        c = 0
        while idx & 1:
            idx >>= 1
            c += 1
        if c < nbits:
            for d in range(dim):
                x[d] ^= directions[d, c]
    return out


def sobol_block_np(directions, start, count):
    dim, nbits = directions.shape
    n = np.arange(start, start + count, dtype=np.uint64)
    gray = n ^ (n >> np.uint64(1))
    x = np.zeros((count, dim), dtype=np.uint64)
    for b in range(nbits):
        bit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
        x[bit] ^= directions[:, b]
    return x * (1.0 / float(2 ** SOBOL_BITS))


# ---------------------------------------------------------------------------
# Saltelli / Jansen estimators
# ---------------------------------------------------------------------------

def sobol_estimates_np(f_a, f_b, f_ab, f_ba):
    """Return (s1, st, s2, var) from output blocks; ``f_ba`` may have 0 rows."""
    # centring on the pooled mean makes every index invariant to output shifts
    mean = np.mean(np.concatenate((f_a, f_b)))
    f_a, f_b, f_ab, f_ba = f_a - mean, f_b - mean, f_ab - mean, f_ba - mean
    var = np.var(np.concatenate((f_a, f_b)))
    s1 = np.mean(f_b * (f_ab - f_a), axis=1) / var
    st = 0.5 * np.mean((f_a - f_ab) ** 2, axis=1) / var
    k = f_ab.shape[0]
    s2 = np.full((k, k), np.nan)
    if f_ba.shape[0] == k:
        cross = (f_ba @ f_ab.T) / f_a.shape[0] - np.mean(f_a * f_b)
        full = cross / var - s1[:, None] - s1[None, :]
        iu = np.triu_indices(k, 1)
        s2[iu] = full[iu]
        s2[(iu[1], iu[0])] = full[iu]
    return s1, st, s2, var


@njit(cache=True)
def sobol_estimates_nb(f_a, f_b, f_ab, f_ba):
    k, n = f_ab.shape
    mean = 0.0
    for r in range(n):
        mean += f_a[r] + f_b[r]
    mean /= 2 * n
    var = 0.0
    for r in range(n):
        var += (f_a[r] - mean) ** 2 + (f_b[r] - mean) ** 2
    var /= 2 * n
    f_a = f_a - mean
    f_b = f_b - mean
    f_ab = f_ab - mean
    f_ba = f_ba - mean
    s1 = np.empty(k)
    st = np.empty(k)
    for i in range(k):
        acc1 = 0.0
        acct = 0.0
        for r in range(n):
            acc1 += f_b[r] * (f_ab[i, r] - f_a[r])
            acct += (f_a[r] - f_ab[i, r]) ** 2
        s1[i] = acc1 / n / var
        st[i] = 0.5 * acct / n / var
    s2 = np.full((k, k), np.nan)
    if f_ba.shape[0] == k:
        ab = 0.0
        for r in range(n):
            ab += f_a[r] * f_b[r]
        ab /= n
        for i in range(k):
            for j in range(i + 1, k):
                acc = 0.0
                for r in range(n):
                    acc += f_ba[i, r] * f_ab[j, r]
                v = (acc / n - ab) / var - s1[i] - s1[j]
                s2[i, j] = v
                s2[j, i] = v
    return s1, st, s2, var


@njit(cache=True)
def bootstrap_estimates_nb(f_a, f_b, f_ab, f_ba, idx):
    n_res = idx.shape[0]
    k = f_ab.shape[0]
    has_ba = f_ba.shape[0] == k
    out_s1 = np.empty((n_res, k))
    out_st = np.empty((n_res, k))
    out_s2 = np.empty((n_res, k, k))
    for r in range(n_res):
        sel = idx[r]
        a = f_a[sel]
        b = f_b[sel]
        ab = np.empty((k, sel.shape[0]))
        for i in range(k):
            ab[i] = f_ab[i][sel]
        if has_ba:
            ba = np.empty((k, sel.shape[0]))
            for i in range(k):
                ba[i] = f_ba[i][sel]
        else:
            ba = np.empty((0, sel.shape[0]))
        s1, st, s2, _ = sobol_estimates_nb(a, b, ab, ba)
        out_s1[r] = s1
        out_st[r] = st
        out_s2[r] = s2
    return out_s1, out_st, out_s2


def bootstrap_estimates_np(f_a, f_b, f_ab, f_ba, idx):
    n_res = idx.shape[0]
    k = f_ab.shape[0]
    out_s1 = np.empty((n_res, k))
    out_st = np.empty((n_res, k))
    out_s2 = np.empty((n_res, k, k))
    for r in range(n_res):
        sel = idx[r]
        ba = f_ba[:, sel] if f_ba.shape[0] == k else f_ba[:, :0]
        s1, st, s2, _ = sobol_estimates_np(f_a[sel], f_b[sel], f_ab[:, sel], ba)
        out_s1[r] = s1
        out_st[r] = st
        out_s2[r] = s2
    return out_s1, out_st, out_s2


# ---------------------------------------------------------------------------
# Curriculum energy over every non-empty subset (bitmask m -> dims with bit set)
# ---------------------------------------------------------------------------

@njit(cache=True)
def subset_energies_nb(gap, abs_s2):
    m = gap.shape[0]
    n_masks = 1 << m
    out = np.empty(n_masks)
    out[0] = np.inf
    for mask in range(1, n_masks):
        e = 0.0
        for i in range(m):
            if (mask >> i) & 1:
                e += gap[i]
                for j in range(m):
                    if not (mask >> j) & 1:
                        e += abs_s2[i, j]
        out[mask] = e
    return out


def subset_energies_np(gap, abs_s2):
    m = gap.shape[0]
    masks = np.arange(1 << m)
    member = ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(np.float64)
    out = member @ gap + np.einsum("si,ij,sj->s", member, abs_s2, 1.0 - member)
    out[0] = np.inf
    return out


# ---------------------------------------------------------------------------
# Tabular Beta-Bernoulli counts with the executed-bin mask
# ---------------------------------------------------------------------------

@njit(cache=True)
def tabular_counts_nb(cluster, bins, outcome, weight, n_clusters, max_bins):
    n, k = bins.shape
    succ = np.zeros((n_clusters, k, max_bins))
    fail = np.zeros((n_clusters, k, max_bins))
    for r in range(n):
        c = cluster[r]
        w = weight[r]
        for i in range(k):
            if outcome[r] > 0.5:
                succ[c, i, bins[r, i]] += w
            else:
                fail[c, i, bins[r, i]] += w
    return succ, fail


def tabular_counts_np(cluster, bins, outcome, weight, n_clusters, max_bins):
    n, k = bins.shape
    succ = np.zeros((n_clusters, k, max_bins))
    fail = np.zeros((n_clusters, k, max_bins))
    dims = np.broadcast_to(np.arange(k), (n, k))
    cl = np.broadcast_to(cluster[:, None], (n, k))
    w = np.broadcast_to(weight[:, None], (n, k))
    hit = np.broadcast_to((outcome > 0.5)[:, None], (n, k))
    np.add.at(succ, (cl[hit], dims[hit], bins[hit]), w[hit])
    np.add.at(fail, (cl[~hit], dims[~hit], bins[~hit]), w[~hit])
    return succ, fail


# ---------------------------------------------------------------------------
# Masked logistic loss: only the executed bin of each dimension sees a record
# ---------------------------------------------------------------------------

@njit(cache=True)
def logistic_loss_grad_nb(weights, bias, feats, bins, y, w):
    k, _, nf = weights.shape
    n = feats.shape[0]
    g_w = np.zeros_like(weights)
    g_b = np.zeros_like(bias)
    total = 0.0
    for r in range(n):
        total += w[r]
    loss = 0.0
    for r in range(n):
        for i in range(k):
            u = bins[r, i]
            z = bias[i, u]
            for f in range(nf):
                z += weights[i, u, f] * feats[r, f]
            # stable log(1 + exp(-|z|)) form of the binary cross-entropy
            if z >= 0:
                p = 1.0 / (1.0 + np.exp(-z))
                ce = np.log1p(np.exp(-z)) + (1.0 - y[r]) * z
            else:
                ez = np.exp(z)
                p = ez / (1.0 + ez)
                ce = np.log1p(ez) - y[r] * z
            loss += w[r] * ce
            d = w[r] * (p - y[r]) / total
            g_b[i, u] += d
            for f in range(nf):
                g_w[i, u, f] += d * feats[r, f]
    return loss / total, g_w, g_b


def logistic_loss_grad_np(weights, bias, feats, bins, y, w):
    k = weights.shape[0]
    dims = np.arange(k)[None, :]
    rows_w = weights[dims, bins]                     # (n, k, F)
    z = np.einsum("nkf,nf->nk", rows_w, feats) + bias[dims, bins]
    ce = np.logaddexp(0.0, -np.abs(z)) + np.maximum(z, 0.0) - y[:, None] * z
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    total = w.sum()
    d = w[:, None] * (p - y[:, None]) / total
    g_w = np.zeros_like(weights)
    g_b = np.zeros_like(bias)
    dd = np.broadcast_to(dims, bins.shape)
    np.add.at(g_b, (dd, bins), d)
    np.add.at(g_w, (dd, bins), d[:, :, None] * feats[:, None, :])
    return float((w[:, None] * ce).sum() / total), g_w, g_b


def _adam_update(param, m, v, g, lr, beta1, beta2, eps, step):
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    m[...] = beta1 * m + (1.0 - beta1) * g
    v[...] = beta2 * v + (1.0 - beta2) * g * g
    param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


_adam_update_nb = njit(cache=True)(_adam_update)


@njit(cache=True)
def adam_epochs_nb(weights, bias, feats, bins, y, w, orders, batch, lr, beta1, beta2, eps, m_w, v_w, m_b, v_b,
                   step):
    n = feats.shape[0]
    for e in range(orders.shape[0]):
        order = orders[e]
        for s in range(0, n, batch):
            sel = order[s:s + batch]
            _, g_w, g_b = logistic_loss_grad_nb(weights, bias, feats[sel], bins[sel], y[sel], w[sel])
            step += 1
            _adam_update_nb(weights, m_w, v_w, g_w, lr, beta1, beta2, eps, step)
            _adam_update_nb(bias, m_b, v_b, g_b, lr, beta1, beta2, eps, step)
    return step


def adam_epochs_np(weights, bias, feats, bins, y, w, orders, batch, lr, beta1, beta2, eps, m_w, v_w, m_b, v_b,
                   step):
    """Mini-batch Adam over pre-drawn epoch permutations; updates arrays in place, returns the step count."""
    n = feats.shape[0]
    for order in orders:
        for s in range(0, n, batch):
            sel = order[s:s + batch]
            _, g_w, g_b = logistic_loss_grad_np(weights, bias, feats[sel], bins[sel], y[sel], w[sel])
            step += 1
            _adam_update(weights, m_w, v_w, g_w, lr, beta1, beta2, eps, step)
            _adam_update(bias, m_b, v_b, g_b, lr, beta1, beta2, eps, step)
    return step


# ---------------------------------------------------------------------------
# Synthetic grasp logits at bin resolution
# ---------------------------------------------------------------------------

@njit(cache=True)
def grasp_logits_nb(bins, main, pair_i, pair_j, pair_tab):
    n, k = bins.shape
    out = np.zeros(n)
    for r in range(n):
        z = 0.0
        for i in range(k):
            z += main[i, bins[r, i]]
        for p in range(pair_i.shape[0]):
            z += pair_tab[p, bins[r, pair_i[p]], bins[r, pair_j[p]]]
        out[r] = z
    return out


def grasp_logits_np(bins, main, pair_i, pair_j, pair_tab):
    k = bins.shape[1]
    z = main[np.arange(k)[None, :], bins].sum(axis=1)
    for p in range(pair_i.shape[0]):
        z = z + pair_tab[p, bins[:, pair_i[p]], bins[:, pair_j[p]]]
    return z


if USE_NUMBA:
    sobol_block = sobol_block_nb
    sobol_estimates = sobol_estimates_nb
    bootstrap_estimates = bootstrap_estimates_nb
    subset_energies = subset_energies_nb
    tabular_counts = tabular_counts_nb
    logistic_loss_grad = logistic_loss_grad_nb
    adam_epochs = adam_epochs_nb
    grasp_logits = grasp_logits_nb
else:
    sobol_block = sobol_block_np
    sobol_estimates = sobol_estimates_np
    bootstrap_estimates = bootstrap_estimates_np
    subset_energies = subset_energies_np
    tabular_counts = tabular_counts_np
    logistic_loss_grad = logistic_loss_grad_np
    adam_epochs = adam_epochs_np
    grasp_logits = grasp_logits_np
