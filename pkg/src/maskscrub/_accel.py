"""Hot numeric kernels.

Each kernel has a numba-compiled variant and a plain numpy variant with the
same signature. The numba path is used when numba imports cleanly and the
``MASKSCRUB_DISABLE_NUMBA`` environment variable is unset (or "0"); both
paths agree to floating-point rounding.

Softmax and cosine distances dispatch to numpy either way: numpy's
vectorised exp and BLAS matrix-vector product beat the compiled loops (see
``benchmarks/bench_kernels.py``). Their numba variants stay available as
``softmax_nb`` and ``cosine_distances_nb``.
"""

import math
import os

import numpy as np

_FLAG = "MASKSCRUB_DISABLE_NUMBA"


def _numba_requested():
    return os.environ.get(_FLAG, "0").strip().lower() in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled via " + _FLAG)
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# numpy reference implementations
# --------------------------------------------------------------------------

def softmax_np(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm_np(x, gamma, beta, eps):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def gelu_np(x):
    # exact erf form, as used by BERT checkpoints
    from scipy.special import erf
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def cosine_distances_np(query, matrix):
    """Distance from one vector to every row of ``matrix``."""
    qn = np.sqrt(np.dot(query, query))
    rn = np.sqrt(np.einsum("ij,ij->i", matrix, matrix))
    sim = matrix @ query / (rn * qn)
    return 1.0 - sim


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _softmax_rows(logits):
        n, m = logits.shape
        out = np.empty_like(logits)
        for i in range(n):
            mx = logits[i, 0]
            for j in range(1, m):
                if logits[i, j] > mx:
                    mx = logits[i, j]
            s = 0.0
            for j in range(m):
                v = math.exp(logits[i, j] - mx)
                out[i, j] = v
                s += v
            for j in range(m):
                out[i, j] /= s
        return out

    @njit(cache=True)
    def _layer_norm_rows(x, gamma, beta, eps):
        n, m = x.shape
        out = np.empty_like(x)
        for i in range(n):
            mu = 0.0
            for j in range(m):
                mu += x[i, j]
            mu /= m
            var = 0.0
            for j in range(m):
                d = x[i, j] - mu
                var += d * d
            var /= m
            inv = 1.0 / math.sqrt(var + eps)
            for j in range(m):
                out[i, j] = (x[i, j] - mu) * inv * gamma[j] + beta[j]
        return out

    @njit(cache=True)
    def _gelu_flat(x):
        out = np.empty_like(x)
        c = 1.0 / math.sqrt(2.0)
        for i in range(x.size):
            v = x[i]
            out[i] = 0.5 * v * (1.0 + math.erf(v * c))
        return out

    @njit(cache=True)
    def _cosine_distances(query, matrix):
        n, d = matrix.shape
        qn = 0.0
        for j in range(d):
            qn += query[j] * query[j]
        qn = math.sqrt(qn)
        out = np.empty(n)
        for i in range(n):
            dot = 0.0
            rn = 0.0
            for j in range(d):
                dot += matrix[i, j] * query[j]
                rn += matrix[i, j] * matrix[i, j]
            out[i] = 1.0 - dot / (math.sqrt(rn) * qn)
        return out

    def softmax_nb(logits):
        a = np.ascontiguousarray(logits, dtype=np.float64)
        return _softmax_rows(a.reshape(-1, a.shape[-1])).reshape(a.shape)

    def layer_norm(x, gamma, beta, eps):
        a = np.ascontiguousarray(x, dtype=np.float64)
        out = _layer_norm_rows(a.reshape(-1, a.shape[-1]),
                               np.ascontiguousarray(gamma, dtype=np.float64),
                               np.ascontiguousarray(beta, dtype=np.float64),
                               float(eps))
        return out.reshape(a.shape)

    def gelu(x):
        a = np.ascontiguousarray(x, dtype=np.float64)
        return _gelu_flat(a.ravel()).reshape(a.shape)

    def cosine_distances_nb(query, matrix):
        return _cosine_distances(np.ascontiguousarray(query, dtype=np.float64),
                                 np.ascontiguousarray(matrix, dtype=np.float64))

else:
    layer_norm = layer_norm_np
    gelu = gelu_np

softmax = softmax_np


def cosine_distances(query, matrix):
    return cosine_distances_np(np.asarray(query, dtype=np.float64),
                               np.asarray(matrix, dtype=np.float64))


def backend_name():
    return "numba" if HAVE_NUMBA else "numpy"
