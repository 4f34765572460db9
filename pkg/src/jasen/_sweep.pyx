# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SGD sweep over the corpus for the joint-topic embedding objective.

Semantics are mirrored exactly by ``jasen._sweep_py``; keep the two in step.
"""

from libc.math cimport exp, log, log1p
from libc.stdlib cimport malloc, free

ctypedef unsigned long long u64


cdef inline u64 _next(u64* state) noexcept nogil:
    state[0] += <u64>0x9E3779B97F4A7C15ULL
    cdef u64 z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(u64* state) noexcept nogil:
    return (_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline double _log_sigmoid(double x) noexcept nogil:
    if x >= 0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline Py_ssize_t _search(const double[::1] cdf, double u) noexcept nogil:
    # first index i with cdf[i] > u
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    if lo >= cdf.shape[0]:
        lo = cdf.shape[0] - 1
    return lo


cdef inline double _dot(double[:, ::1] a, Py_ssize_t i, double[:, ::1] b, Py_ssize_t j,
                        Py_ssize_t dim) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t k
    for k in range(dim):
        s = s + a[i, k] * b[j, k]
    return s


cdef double _sgns_pair(double[:, ::1] W, Py_ssize_t w, double[:, ::1] ctx, Py_ssize_t pos,
                       Py_ssize_t* negs, Py_ssize_t nneg, double* coef, double* gu,
                       double scale, double lr, Py_ssize_t dim) noexcept nogil:
    cdef double loss = 0.0, f
    cdef Py_ssize_t r, k, row
    f = _dot(W, w, ctx, pos, dim)
    loss -= _log_sigmoid(f)
    coef[0] = scale * (_sigmoid(f) - 1.0)
    for r in range(nneg):
        f = _dot(W, w, ctx, negs[r], dim)
        loss -= _log_sigmoid(-f)
        coef[r + 1] = scale * _sigmoid(f)
    for k in range(dim):
        gu[k] = coef[0] * ctx[pos, k]
    for r in range(nneg):
        row = negs[r]
        for k in range(dim):
            gu[k] = gu[k] + coef[r + 1] * ctx[row, k]
    for k in range(dim):
        ctx[pos, k] = ctx[pos, k] - lr * coef[0] * W[w, k]
    for r in range(nneg):
        row = negs[r]
        for k in range(dim):
            ctx[row, k] = ctx[row, k] - lr * coef[r + 1] * W[w, k]
    for k in range(dim):
        W[w, k] = W[w, k] - lr * gu[k]
    return loss


cdef void _softmax_logits(double[:, ::1] W, Py_ssize_t w, double[:, ::1] T, Py_ssize_t n,
                          Py_ssize_t dim, double* p, double* out_logz) noexcept nogil:
    cdef Py_ssize_t t
    cdef double m, s = 0.0
    for t in range(n):
        p[t] = _dot(W, w, T, t, dim)
    m = p[0]
    for t in range(1, n):
        if p[t] > m:
            m = p[t]
    for t in range(n):
        p[t] = p[t] - m
        s = s + exp(p[t])
    # p holds shifted logits; log-normalizer relative to the shift
    out_logz[0] = log(s)


cdef void _apply_topic_update(double[:, ::1] W, Py_ssize_t w, double[:, ::1] T, Py_ssize_t n,
                              double* delta, double* gu, double scale, double lr,
                              Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t t, k
    for k in range(dim):
        gu[k] = 0.0
    for t in range(n):
        for k in range(dim):
            gu[k] = gu[k] + delta[t] * T[t, k]
    for t in range(n):
        for k in range(dim):
            T[t, k] = T[t, k] - lr * scale * delta[t] * W[w, k]
    for k in range(dim):
        W[w, k] = W[w, k] - lr * scale * gu[k]


cdef double _reg_nll(double[:, ::1] W, Py_ssize_t w, double[:, ::1] T, Py_ssize_t owner,
                     double* p, double* gu, double scale, double lr, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t n = T.shape[0], t
    cdef double logz, loss
    _softmax_logits(W, w, T, n, dim, p, &logz)
    loss = logz - p[owner]
    for t in range(n):
        p[t] = exp(p[t] - logz)
    p[owner] = p[owner] - 1.0
    _apply_topic_update(W, w, T, n, p, gu, scale, lr, dim)
    return loss


cdef double _joint_nll(double[:, ::1] W, Py_ssize_t w, double[:, ::1] J, Py_ssize_t n_sent,
                       Py_ssize_t n_asp, Py_ssize_t owner, bint aspect_dim, double* p,
                       double* gu, double scale, double lr, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t n = J.shape[0], s, a, t
    cdef double logz, mass = 0.0
    _softmax_logits(W, w, J, n, dim, p, &logz)
    for t in range(n):
        p[t] = exp(p[t] - logz)
    for s in range(n_sent):
        for a in range(n_asp):
            if (aspect_dim and a == owner) or ((not aspect_dim) and s == owner):
                mass = mass + p[s * n_asp + a]
    for s in range(n_sent):
        for a in range(n_asp):
            if (aspect_dim and a == owner) or ((not aspect_dim) and s == owner):
                t = s * n_asp + a
                p[t] = p[t] - p[t] / mass
    _apply_topic_update(W, w, J, n, p, gu, scale, lr, dim)
    return -log(mass)


cdef double _cross_kl(double[:, ::1] W, Py_ssize_t w, double[:, ::1] T, double* p,
                      double* gu, double scale, double lr, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t n = T.shape[0], t
    cdef double logz, mean_lp = 0.0, loss
    _softmax_logits(W, w, T, n, dim, p, &logz)
    for t in range(n):
        mean_lp = mean_lp + (p[t] - logz)
    mean_lp = mean_lp / n
    loss = -log(<double>n) - mean_lp
    if loss < 0:
        loss = 0.0
    for t in range(n):
        p[t] = exp(p[t] - logz) - 1.0 / n
    _apply_topic_update(W, w, T, n, p, gu, scale, lr, dim)
    return loss


def sweep(double[:, ::1] W, double[:, ::1] C, double[:, ::1] D,
          double[:, ::1] TA, double[:, ::1] TS, double[:, ::1] TJ,
          const int[::1] tokens, const long long[::1] offsets, const long long[::1] order,
          const int[::1] aspect_of, const int[::1] sent_of, const double[::1] cdf,
          int window, int negative, double lambda_g, double lambda_r,
          bint use_topics, bint use_joint, double lr_start, double lr_end,
          double progress_start, double progress_step, u64 seed, double[::1] losses):
    """One pass over the documents listed in ``order``; updates arrays in place.

    ``losses`` accumulates (local, global, reg, joint, cross), unweighted.
    """
    cdef Py_ssize_t dim = W.shape[1]
    cdef Py_ssize_t n_docs = D.shape[0]
    cdef Py_ssize_t n_asp = TA.shape[0], n_sent = TS.shape[0]
    cdef Py_ssize_t oi, d, start, end, n, i, j, r, w, c, cand, tries, nneg
    cdef Py_ssize_t a, s
    cdef double progress, lr, l_local = 0.0, l_global = 0.0, l_reg = 0.0
    cdef double l_joint = 0.0, l_cross = 0.0
    cdef long long counter = 0
    cdef u64 state = seed

    cdef double* gu = <double*> malloc(dim * sizeof(double))
    cdef double* coef = <double*> malloc((negative + 1) * sizeof(double))
    cdef double* p = <double*> malloc((n_asp * n_sent + n_asp + n_sent + 1) * sizeof(double))
    cdef Py_ssize_t* negs = <Py_ssize_t*> malloc((negative + 1) * sizeof(Py_ssize_t))
    if gu == NULL or coef == NULL or p == NULL or negs == NULL:
        free(gu); free(coef); free(p); free(negs)
        raise MemoryError()

    with nogil:
        for oi in range(order.shape[0]):
            d = order[oi]
            start = offsets[d]
            end = offsets[d + 1]
            n = end - start
            for i in range(n):
                progress = progress_start + counter * progress_step
                if progress > 1.0:
                    progress = 1.0
                lr = lr_start - (lr_start - lr_end) * progress
                counter += 1
                w = tokens[start + i]

                if n >= 2:
                    for j in range(i - window, i + window + 1):
                        if j < 0 or j >= n or j == i:
                            continue
                        c = tokens[start + j]
                        nneg = 0
                        for r in range(negative):
                            tries = 0
                            cand = _search(cdf, _uniform(&state))
                            while cand == c and tries < 100:
                                cand = _search(cdf, _uniform(&state))
                                tries += 1
                            if cand != c:
                                negs[nneg] = cand
                                nneg += 1
                        l_local += _sgns_pair(W, w, C, c, negs, nneg, coef, gu, 1.0, lr, dim)

                if lambda_g > 0:
                    nneg = 0
                    if n_docs > 1:
                        for r in range(negative):
                            cand = <Py_ssize_t>(_uniform(&state) * (n_docs - 1))
                            if cand >= d:
                                cand += 1
                            negs[nneg] = cand
                            nneg += 1
                    l_global += _sgns_pair(W, w, D, d, negs, nneg, coef, gu, lambda_g, lr, dim)

                if use_topics and lambda_r > 0:
                    a = aspect_of[w]
                    s = sent_of[w]
                    if a >= 0:
                        l_reg += _reg_nll(W, w, TA, a, p, gu, lambda_r, lr, dim)
                        if use_joint:
                            l_joint += _joint_nll(W, w, TJ, n_sent, n_asp, a, True, p, gu,
                                                  lambda_r, lr, dim)
                            l_cross += _cross_kl(W, w, TS, p, gu, lambda_r, lr, dim)
                    if s >= 0:
                        l_reg += _reg_nll(W, w, TS, s, p, gu, lambda_r, lr, dim)
                        if use_joint:
                            l_joint += _joint_nll(W, w, TJ, n_sent, n_asp, s, False, p, gu,
                                                  lambda_r, lr, dim)
                            l_cross += _cross_kl(W, w, TA, p, gu, lambda_r, lr, dim)

    free(gu); free(coef); free(p); free(negs)
    losses[0] += l_local
    losses[1] += l_global
    losses[2] += l_reg
    losses[3] += l_joint
    losses[4] += l_cross
    return counter
