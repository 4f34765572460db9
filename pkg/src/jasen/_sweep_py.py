"""Pure-Python SGD sweep; the fallback twin of the compiled ``_sweep`` kernel.

Consumes the same splitmix64 stream in the same order, so both backends draw
identical negatives and agree up to floating-point summation order.
"""

from __future__ import annotations

import math

import numpy as np

from .losses import log_sigmoid, sigmoid

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next() >> 11) * (1.0 / 9007199254740992.0)


def _sgns_pair(W, w, ctx, pos, negs, scale, lr):
    rows = [pos, *negs]
    u = W[w].copy()
    f = ctx[rows] @ u
    loss = -log_sigmoid(float(f[0]))
    coef = np.empty(len(rows))
    coef[0] = scale * (sigmoid(float(f[0])) - 1.0)
    for r in range(1, len(rows)):
        loss -= log_sigmoid(-float(f[r]))
        coef[r] = scale * sigmoid(float(f[r]))
    gu = coef @ ctx[rows]
    np.add.at(ctx, rows, -lr * coef[:, None] * u)
    W[w] -= lr * gu
    return loss


def _topic_step(W, w, T, delta, scale, lr):
    u = W[w].copy()
    gu = delta @ T
    T -= lr * scale * np.outer(delta, u)
    W[w] -= lr * scale * gu


def _shifted_logits(W, w, T):
    z = T @ W[w]
    z = z - z.max()
    return z, math.log(np.exp(z).sum())


def _reg_nll(W, w, T, owner, scale, lr):
    z, logz = _shifted_logits(W, w, T)
    loss = logz - z[owner]
    delta = np.exp(z - logz)
    delta[owner] -= 1.0
    _topic_step(W, w, T, delta, scale, lr)
    return loss


def _joint_nll(W, w, J, n_sent, n_asp, owner, aspect_dim, scale, lr):
    z, logz = _shifted_logits(W, w, J)
    p = np.exp(z - logz)
    grid = p.reshape(n_sent, n_asp)
    mask = np.zeros((n_sent, n_asp), dtype=bool)
    if aspect_dim:
        mask[:, owner] = True
    else:
        mask[owner, :] = True
    mass = float(grid[mask].sum())
    mask = mask.ravel()
    delta = p.copy()
    delta[mask] -= p[mask] / mass
    _topic_step(W, w, J, delta, scale, lr)
    return -math.log(mass)


def _cross_kl(W, w, T, scale, lr):
    n = T.shape[0]
    z, logz = _shifted_logits(W, w, T)
    loss = max(-math.log(n) - float((z - logz).mean()), 0.0)
    delta = np.exp(z - logz) - 1.0 / n
    _topic_step(W, w, T, delta, scale, lr)
    return loss


def sweep(W, C, D, TA, TS, TJ, tokens, offsets, order, aspect_of, sent_of, cdf,
          window, negative, lambda_g, lambda_r, use_topics, use_joint,
          lr_start, lr_end, progress_start, progress_step, seed, losses):
    rng = SplitMix64(seed)
    n_docs = D.shape[0]
    n_asp, n_sent = TA.shape[0], TS.shape[0]
    last = len(cdf) - 1
    totals = [0.0] * 5
    counter = 0

    def draw_word():
        return min(int(np.searchsorted(cdf, rng.uniform(), side="right")), last)

    for d in order:
        d = int(d)
        doc = tokens[offsets[d]:offsets[d + 1]]
        n = len(doc)
        for i in range(n):
            progress = min(progress_start + counter * progress_step, 1.0)
            lr = lr_start - (lr_start - lr_end) * progress
            counter += 1
            w = int(doc[i])

            if n >= 2:
                for j in range(max(0, i - window), min(n, i + window + 1)):
                    if j == i:
                        continue
                    c = int(doc[j])
                    negs = []
                    for _ in range(negative):
                        cand = draw_word()
                        tries = 0
                        while cand == c and tries < 100:
                            cand = draw_word()
                            tries += 1
                        if cand != c:
                            negs.append(cand)
                    totals[0] += _sgns_pair(W, w, C, c, negs, 1.0, lr)

            if lambda_g > 0:
                negs = []
                if n_docs > 1:
                    for _ in range(negative):
                        cand = int(rng.uniform() * (n_docs - 1))
                        if cand >= d:
                            cand += 1
                        negs.append(cand)
                totals[1] += _sgns_pair(W, w, D, d, negs, lambda_g, lr)

            if use_topics and lambda_r > 0:
                a, s = int(aspect_of[w]), int(sent_of[w])
                if a >= 0:
                    totals[2] += _reg_nll(W, w, TA, a, lambda_r, lr)
                    if use_joint:
                        totals[3] += _joint_nll(W, w, TJ, n_sent, n_asp, a, True, lambda_r, lr)
                        totals[4] += _cross_kl(W, w, TS, lambda_r, lr)
                if s >= 0:
                    totals[2] += _reg_nll(W, w, TS, s, lambda_r, lr)
                    if use_joint:
                        totals[3] += _joint_nll(W, w, TJ, n_sent, n_asp, s, False, lambda_r, lr)
                        totals[4] += _cross_kl(W, w, TA, lambda_r, lr)

    for k in range(5):
        losses[k] += totals[k]
    return counter
