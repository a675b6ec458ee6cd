"""numba-compiled kernels: explicit-loop twins of ``_kernels_numpy``.

Compiled lazily on first call; ``cache=True`` persists the machine code next
to this file so later processes skip compilation. No RNG and no Python
objects inside the kernels, so per-backend determinism is exact.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def softmax_rows(logits):
    B, K = logits.shape
    out = np.empty((B, K))
    for i in range(B):
        mx = logits[i, 0]
        for k in range(1, K):
            if logits[i, k] > mx:
                mx = logits[i, k]
        tot = 0.0
        for k in range(K):
            e = np.exp(logits[i, k] - mx)
            out[i, k] = e
            tot += e
        for k in range(K):
            out[i, k] /= tot
    return out


@njit(cache=True)
def logistic_forward(X, W, b):
    B, d = X.shape
    K = W.shape[1]
    logits = np.empty((B, K))
    for i in range(B):
        for k in range(K):
            s = b[k]
            for j in range(d):
                s += X[i, j] * W[j, k]
            logits[i, k] = s
    return softmax_rows(logits)


@njit(cache=True)
def logistic_grad(X, y, W, b):
    B, d = X.shape
    K = W.shape[1]
    probs = logistic_forward(X, W, b)
    dW = np.zeros((d, K))
    db = np.zeros(K)
    loss = 0.0
    for i in range(B):
        loss -= np.log(probs[i, y[i]])
        for k in range(K):
            g = probs[i, k]
            if k == y[i]:
                g -= 1.0
            g /= B
            db[k] += g
            for j in range(d):
                dW[j, k] += X[i, j] * g
    return dW, db, loss / B


@njit(cache=True)
def mlp_forward(X, W1, b1, W2, b2):
    B, d = X.shape
    H = W1.shape[1]
    K = W2.shape[1]
    logits = np.empty((B, K))
    hid = np.empty(H)
    for i in range(B):
        for h in range(H):
            s = b1[h]
            for j in range(d):
                s += X[i, j] * W1[j, h]
            hid[h] = s if s > 0.0 else 0.0
        for k in range(K):
            s = b2[k]
            for h in range(H):
                s += hid[h] * W2[h, k]
            logits[i, k] = s
    return softmax_rows(logits)


@njit(cache=True)
def mlp_grad(X, y, W1, b1, W2, b2):
    B, d = X.shape
    H = W1.shape[1]
    K = W2.shape[1]
    hidden = np.empty((B, H))
    logits = np.empty((B, K))
    for i in range(B):
        for h in range(H):
            s = b1[h]
            for j in range(d):
                s += X[i, j] * W1[j, h]
            hidden[i, h] = s if s > 0.0 else 0.0
        for k in range(K):
            s = b2[k]
            for h in range(H):
                s += hidden[i, h] * W2[h, k]
            logits[i, k] = s
    probs = softmax_rows(logits)
    dW1 = np.zeros((d, H))
    db1 = np.zeros(H)
    dW2 = np.zeros((H, K))
    db2 = np.zeros(K)
    loss = 0.0
    for i in range(B):
        loss -= np.log(probs[i, y[i]])
        for k in range(K):
            g = probs[i, k]
            if k == y[i]:
                g -= 1.0
            g /= B
            db2[k] += g
            for h in range(H):
                dW2[h, k] += hidden[i, h] * g
        for h in range(H):
            if hidden[i, h] <= 0.0:
                continue
            gh = 0.0
            for k in range(K):
                g = probs[i, k]
                if k == y[i]:
                    g -= 1.0
                gh += (g / B) * W2[h, k]
            db1[h] += gh
            for j in range(d):
                dW1[j, h] += X[i, j] * gh
    return dW1, db1, dW2, db2, loss / B


@njit(cache=True)
def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for i in range(p.size):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)
