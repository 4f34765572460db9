"""Loss terms of the joint-topic embedding objective with analytic gradients.

Every function returns ``(loss, grads...)`` where the gradients are with
respect to the arguments, in argument order. These are the reference
implementations: the SGD sweep backends apply the same formulas in place.
"""

from __future__ import annotations

import math

import numpy as np


def log_sigmoid(x: float) -> float:
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    m = z.max()
    return z - m - math.log(np.exp(z - m).sum())


def sgns_loss_grad(u, pos, negs):
    """Negative-sampling loss ``-log s(pos.u) - sum log s(-neg.u)``.

    ``negs`` is a (k, dim) array (k may be 0). Returns gradients for u, pos
    and each negative row.
    """
    u = np.asarray(u, dtype=np.float64)
    negs = np.asarray(negs, dtype=np.float64).reshape(-1, u.shape[0])
    f = float(pos @ u)
    loss = -log_sigmoid(f)
    gpos_coef = sigmoid(f) - 1.0
    gu = gpos_coef * pos
    gpos = gpos_coef * u
    fn = negs @ u
    gnegs = np.empty_like(negs)
    for r, x in enumerate(fn):
        loss -= log_sigmoid(-float(x))
        c = sigmoid(float(x))
        gu = gu + c * negs[r]
        gnegs[r] = c * u
    return loss, gu, gpos, gnegs


def softmax_nll_grad(u, contexts, target):
    """Exact ``-log softmax(contexts @ u)[target]`` over every context row."""
    lp = log_softmax(contexts @ u)
    delta = np.exp(lp)
    delta[target] -= 1.0
    return -float(lp[target]), contexts.T @ delta, np.outer(delta, u)


def topic_nll_grad(u, topics, owner):
    """``-log P(t_owner | w)`` with ``P(t|w) = softmax(topics @ u)``."""
    return softmax_nll_grad(u, topics, owner)


def joint_marginal_nll_grad(u, joint, n_sent, n_asp, owner, dimension):
    """Negative log of the marginal joint-topic mass on ``owner``.

    ``joint`` rows are ordered (sentiment, aspect) row-major. For the
    ``aspect`` dimension the marginal sums over sentiments, and vice versa.
    """
    p = softmax(joint @ u)
    mask = np.zeros((n_sent, n_asp), dtype=bool)
    if dimension == "aspect":
        mask[:, owner] = True
    elif dimension == "sentiment":
        mask[owner, :] = True
    else:
        raise ValueError(f"unknown dimension {dimension!r}")
    mask = mask.ravel()
    mass = p[mask].sum()
    loss = -math.log(mass)
    delta = p.copy()
    delta[mask] -= p[mask] / mass
    return loss, joint.T @ delta, np.outer(delta, u)


def uniform_kl_grad(u, topics):
    """``KL(U || softmax(topics @ u))`` with U uniform over the topic rows."""
    n = topics.shape[0]
    lp = log_softmax(topics @ u)
    loss = -math.log(n) - float(lp.mean())
    delta = np.exp(lp) - 1.0 / n
    return max(loss, 0.0), topics.T @ delta, np.outer(delta, u)


def kl_uniform(p) -> float:
    """``KL(U || p)`` for a probability vector ``p``."""
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[0]
    return float(np.sum((1.0 / n) * np.log((1.0 / n) / p)))
