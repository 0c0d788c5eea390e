"""Hot inner loops: one implementation, two backends.

Every kernel is written once as a plain-Python/numpy function and, when
numba is available, compiled with ``@njit``.  The backend is picked at
import time from the environment variable ``ERGODYN_NUMBA`` ("0", "false"
or "off" forces the pure-numpy fallback).  Both backends execute the same
statements on the same float64 arrays, so results are bit-identical; the
equivalence is pinned by tests and timed by ``benchmarks/bench_kernels.py``.

Kernels consume pre-drawn innovation arrays and never touch the RNG, which
keeps the replicable-stream guarantees in one place (:mod:`ergodyn.rng`).
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("ERGODYN_NUMBA", "1").strip().lower()
_WANT_NUMBA = _flag not in ("0", "false", "off", "no")

try:  # pragma: no cover - exercised via subprocess in tests
    if _WANT_NUMBA:
        from numba import njit
        HAS_NUMBA = True
    else:
        raise ImportError
except ImportError:  # fallback: identity decorator
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend() -> str:
    """Name of the active kernel backend."""
    return "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# state recursions (one value per time step, sequential in t)
# ---------------------------------------------------------------------------

def _linear_path(kappa_z, eps, x0):
    n = kappa_z.shape[0]
    x = np.empty(n)
    prev = x0
    for t in range(n):
        prev = kappa_z[t] * prev + eps[t]
        x[t] = prev
    return x


def _ar_arch_path(a0, a1, b0, b1, eps, x0):
    n = eps.shape[0]
    x = np.empty(n)
    prev = x0
    for t in range(n):
        prev = a0[t] + a1[t] * prev + eps[t] * np.sqrt(b0[t] + b1[t] * prev * prev)
        x[t] = prev
    return x


def _charn_path(th1, th2, delta, eps, init):
    # th1[t] = (theta_0, theta_1..theta_q, theta_{q+1}..theta_{2q}) for the
    # threshold location part; th2[t] = (theta_0, theta_1..theta_q) >= 0 for
    # the power-delta volatility part.  init holds (y_{-1},...,y_{-q}).
    n = eps.shape[0]
    q = init.shape[0]
    lags = init.copy()
    y = np.empty(n)
    for t in range(n):
        loc = th1[t, 0]
        vol = th2[t, 0]
        for i in range(q):
            yi = lags[i]
            if yi > 0.0:
                loc += th1[t, 1 + i] * yi
            else:
                loc -= th1[t, 1 + q + i] * yi
            vol += th2[t, 1 + i] * abs(yi) ** delta
        val = loc + eps[t] * vol ** (1.0 / delta)
        for i in range(q - 1, 0, -1):
            lags[i] = lags[i - 1]
        lags[0] = val
        y[t] = val
    return y


def _apgarch_path(pz, beta, alpha_p, alpha_m, delta, eps, init_u, init_v, init_h):
    # state per lag: (u,v,h) = ((Y+)^delta, (Y-)^delta, h); newest lag first
    n = eps.shape[0]
    q = beta.shape[0]
    u = init_u.copy()
    v = init_v.copy()
    h = init_h.copy()
    y_out = np.empty(n)
    h_out = np.empty(n)
    for t in range(n):
        hn = pz[t]
        for j in range(q):
            hn += beta[j] * h[j] + alpha_p[j] * u[j] + alpha_m[j] * v[j]
        yn = eps[t] * hn ** (1.0 / delta)
        for j in range(q - 1, 0, -1):
            u[j] = u[j - 1]
            v[j] = v[j - 1]
            h[j] = h[j - 1]
        if yn > 0.0:
            u[0] = yn ** delta
            v[0] = 0.0
        else:
            u[0] = 0.0
            v[0] = (-yn) ** delta
        h[0] = hn
        y_out[t] = yn
        h_out[t] = hn
    return y_out, h_out


def _binary_path(a, v, init):
    # v[t] = pi'Z_{t-1} + eps_t; init holds (y_{-1},...,y_{-q})
    n = v.shape[0]
    q = a.shape[0]
    lags = init.copy()
    y = np.empty(n)
    for t in range(n):
        g = v[t]
        for i in range(q):
            g += a[i] * lags[i]
        val = 1.0 if g > 0.0 else 0.0
        for i in range(q - 1, 0, -1):
            lags[i] = lags[i - 1]
        lags[0] = val
        y[t] = val
    return y


def _binary_interaction_path(c, amat, bmat, zlag, eps, init):
    # g = sum_i c_i y_i + sum_{i,j} [a_ij y_i + b_ij (1-y_i)] z_{j,t-i} + eps_t
    # zlag[t, i, j] = Z_{j, t-1-i}
    n = eps.shape[0]
    q = c.shape[0]
    e = amat.shape[1]
    lags = init.copy()
    y = np.empty(n)
    for t in range(n):
        g = eps[t]
        for i in range(q):
            g += c[i] * lags[i]
            for j in range(e):
                g += (amat[i, j] * lags[i] + bmat[i, j] * (1.0 - lags[i])) * zlag[t, i, j]
        val = 1.0 if g > 0.0 else 0.0
        for i in range(q - 1, 0, -1):
            lags[i] = lags[i - 1]
        lags[0] = val
        y[t] = val
    return y


def _categorical_path(acat, gz, u, init):
    # acat[i, j]: weight of lag j for category i+1; gz[t, i] = gamma_i' Z_{t-1};
    # cumulative kernel masses taken in fixed index order 1..N, tie rule >=.
    n = u.shape[0]
    ncat = acat.shape[0]
    q = acat.shape[1]
    lags = init.copy()
    y = np.empty(n, dtype=np.int64)
    logits = np.empty(ncat)
    probs = np.empty(ncat)
    for t in range(n):
        mx = -1e308
        for i in range(ncat):
            s = gz[t, i]
            for j in range(q):
                s += acat[i, j] * lags[j]
            logits[i] = s
            if s > mx:
                mx = s
        tot = 0.0
        for i in range(ncat):
            probs[i] = np.exp(logits[i] - mx)
            tot += probs[i]
        cum = 0.0
        val = ncat
        for i in range(ncat):
            cum += probs[i] / tot
            if cum >= u[t]:
                val = i + 1
                break
        for j in range(q - 1, 0, -1):
            lags[j] = lags[j - 1]
        lags[0] = float(val)
        y[t] = val
    return y


def _var1_path(phi, eta):
    n = eta.shape[0]
    e = eta.shape[1]
    z = np.empty((n, e))
    prev = np.zeros(e)
    for t in range(n):
        cur = eta[t].copy()
        for i in range(e):
            acc = 0.0
            for j in range(e):
                acc += phi[i, j] * prev[j]
            cur[i] += acc
        for i in range(e):
            z[t, i] = cur[i]
            prev[i] = cur[i]
    return z


def _companion_log_norm(c):
    # c[t, i]: top-row entries of the lag-companion Lipschitz matrix at step t.
    # Accumulates log of the l1 norm of the product with per-step renormalization.
    n = c.shape[0]
    q = c.shape[1]
    v = np.ones(q) / q
    total = 0.0
    for t in range(n):
        head = 0.0
        for i in range(q):
            head += c[t, i] * v[i]
        for i in range(q - 1, 0, -1):
            v[i] = v[i - 1]
        v[0] = head
        s = 0.0
        for i in range(q):
            s += abs(v[i])
        total += np.log(s)
        for i in range(q):
            v[i] /= s
    return total


def _power_iteration(m, tol, max_iter):
    # Perron root of a nonnegative matrix via power iteration on M + I
    # (the shift separates the dominant eigenvalue in modulus).  Collatz-
    # Wielandt ratios min_i (Mv)_i/v_i <= rho <= max_i (Mv)_i/v_i bracket the
    # root as long as v stays strictly positive, which (M+I)v guarantees.
    n = m.shape[0]
    v = np.ones(n) / n
    lo = 0.0
    hi = 0.0
    for _ in range(max_iter):
        w = np.empty(n)
        for i in range(n):
            acc = v[i]
            for j in range(n):
                acc += m[i, j] * v[j]
            w[i] = acc
        lo = 1e308
        hi = 0.0
        s = 0.0
        for i in range(n):
            r = w[i] / v[i]
            if r < lo:
                lo = r
            if r > hi:
                hi = r
            s += w[i]
        for i in range(n):
            v[i] = w[i] / s
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi) - 1.0


_PY_IMPLS = {
    "linear_path": _linear_path,
    "ar_arch_path": _ar_arch_path,
    "charn_path": _charn_path,
    "apgarch_path": _apgarch_path,
    "binary_path": _binary_path,
    "binary_interaction_path": _binary_interaction_path,
    "categorical_path": _categorical_path,
    "var1_path": _var1_path,
    "companion_log_norm": _companion_log_norm,
    "power_iteration": _power_iteration,
}

numpy_impls = dict(_PY_IMPLS)

if HAS_NUMBA:
    numba_impls = {name: njit(cache=True)(fn) for name, fn in _PY_IMPLS.items()}
    _active = numba_impls
else:
    numba_impls = None
    _active = numpy_impls

linear_path = _active["linear_path"]
ar_arch_path = _active["ar_arch_path"]
charn_path = _active["charn_path"]
apgarch_path = _active["apgarch_path"]
binary_path = _active["binary_path"]
binary_interaction_path = _active["binary_interaction_path"]
categorical_path = _active["categorical_path"]
var1_path = _active["var1_path"]
companion_log_norm = _active["companion_log_norm"]
power_iteration = _active["power_iteration"]
