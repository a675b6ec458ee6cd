"""Pure-numpy reference kernels for model training and inference.

Every function here has an explicit-loop twin in ``_kernels_numba`` with the
same name and signature. Shapes: X is (B, d) float64, y is (B,) int64,
logistic weights W are (d, K) with bias b (K,); the one-hidden-layer model
adds W1 (d, H), b1 (H,), W2 (H, K), b2 (K,). All gradients are of the mean
cross-entropy over the batch.
"""

import numpy as np


def softmax_rows(logits):
    """Row-wise softmax with max-shift, so finite logits never overflow."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logistic_forward(X, W, b):
    return softmax_rows(X @ W + b)


def logistic_grad(X, y, W, b):
    """Gradients of mean cross-entropy for the multinomial logistic model.

    Returns (dW, db, loss).
    """
    B = X.shape[0]
    probs = logistic_forward(X, W, b)
    loss = -np.log(probs[np.arange(B), y]).mean()
    G = probs
    G[np.arange(B), y] -= 1.0
    G /= B
    dW = X.T @ G
    db = G.sum(axis=0)
    return dW, db, loss


def mlp_forward(X, W1, b1, W2, b2):
    H = np.maximum(X @ W1 + b1, 0.0)
    return softmax_rows(H @ W2 + b2)


def mlp_grad(X, y, W1, b1, W2, b2):
    """Gradients of mean cross-entropy for the one-hidden-layer ReLU model.

    Returns (dW1, db1, dW2, db2, loss).
    """
    B = X.shape[0]
    H = np.maximum(X @ W1 + b1, 0.0)
    probs = softmax_rows(H @ W2 + b2)
    loss = -np.log(probs[np.arange(B), y]).mean()
    G2 = probs
    G2[np.arange(B), y] -= 1.0
    G2 /= B
    dW2 = H.T @ G2
    db2 = G2.sum(axis=0)
    GH = G2 @ W2.T
    GH[H <= 0.0] = 0.0
    dW1 = X.T @ GH
    db1 = GH.sum(axis=0)
    return dW1, db1, dW2, db2, loss


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam step, in place on flat float64 arrays.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;
    p <- p - lr * m_hat / (sqrt(v_hat) + eps)   with m_hat = m/(1-b1^t) etc.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
