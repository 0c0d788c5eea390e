"""Forward path construction: innovation arrays in, state trajectories out.

A path over time indices t0..t0+n-1 is built by (a) reading the covariate
and eps draws for that window from the replicable stream and (b) running
the family's recursion kernel on them.  Because draws are addressed by
time index, two runs over overlapping windows agree exactly on the
overlap, which is what backward iteration and the xi_0-replacement
coupling rely on.

``prime_zero=True`` swaps the time-0 draw (eps_0, eta_0, and the time-0
arrival stream for the Poisson family) for its independent copy.
"""

from __future__ import annotations

import numpy as np

from . import kernels, models
from .models import ModelSpec, PoissonArrivalView, arrival_view
from .noise import ConfigurationError, CovariateSpec, covariate_path, eps_path
from .rng import SeedStream


def innovation_arrays(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                      t0: int, n: int, prime_zero: bool = False
                      ) -> tuple[np.ndarray, np.ndarray]:
    """(z, eps) for steps t0..t0+n-1; z[t] is the covariate entering step t."""
    prime_at = 0 if prime_zero else None
    z = covariate_path(stream, cov, t0 - 1, t0 + n - 2, prime_at=prime_at)
    eps = eps_path(stream, cov, t0, t0 + n - 1, prime_at=prime_at)
    return z, eps


def forward_path(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                 t0: int, n: int, init: np.ndarray, prime_zero: bool = False,
                 z: np.ndarray | None = None, eps: np.ndarray | None = None
                 ) -> dict:
    """Run n steps from the lag state ``init`` (newest first) starting at t0.

    Returns {"states": (n, q, k) array of lag states AFTER each step,
    "head": (n, k), "z": (n, e), "eps": (n,)}.  Pre-drawn (z, eps) arrays may
    be passed to share draws between coupled runs.
    """
    init = np.asarray(init, dtype=float)
    if init.shape != (spec.q, spec.k):
        raise ConfigurationError(f"initial state shape {init.shape} != {(spec.q, spec.k)}")
    if z is None or eps is None:
        z, eps = innovation_arrays(spec, cov, stream, t0, n, prime_zero)
    head = _run_family(spec, cov, stream, t0, init, z, eps, prime_zero)
    states = _stack_lags(init, head, spec.q)
    return {"states": states, "head": head, "z": z, "eps": eps}


def _stack_lags(init: np.ndarray, head: np.ndarray, q: int) -> np.ndarray:
    n, k = head.shape
    full = np.concatenate([init[::-1], head], axis=0)  # oldest ... newest
    states = np.empty((n, q, k))
    for j in range(q):
        states[:, j, :] = full[q - 1 - j + 1: q - 1 - j + 1 + n]
    return states


def _run_family(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream, t0: int,
                init: np.ndarray, z: np.ndarray, eps: np.ndarray,
                prime_zero: bool) -> np.ndarray:
    n = eps.shape[0]
    zs = z[:, 0]

    if spec.family == "linear_random_coef":
        kz = np.asarray(spec.kappa(zs), dtype=float)
        x = kernels.linear_path(kz, eps, float(init[0, 0]))
        return x[:, None]

    if spec.family == "ar_arch_benchmark":
        x = kernels.ar_arch_path(np.asarray(spec.a0(zs), dtype=float),
                                 np.asarray(spec.a1(zs), dtype=float),
                                 np.asarray(spec.b0(zs), dtype=float),
                                 np.asarray(spec.b1(zs), dtype=float),
                                 eps, float(init[0, 0]))
        return x[:, None]

    if spec.family == "charn":
        th1 = np.column_stack([np.broadcast_to(np.asarray(c(zs), dtype=float), zs.shape)
                               for c in spec.theta_loc])
        th2 = np.column_stack([np.broadcast_to(np.asarray(c(zs), dtype=float), zs.shape)
                               for c in spec.theta_vol])
        y = kernels.charn_path(th1, th2, spec.power, eps, init[:, 0].copy())
        return y[:, None]

    if spec.family == "apgarch_x":
        pz = z[:, : len(spec.pi)] @ np.asarray(spec.pi, dtype=float)
        y, h = kernels.apgarch_path(pz, np.asarray(spec.beta, dtype=float),
                                    np.asarray(spec.alpha_plus, dtype=float),
                                    np.asarray(spec.alpha_minus, dtype=float),
                                    spec.power, eps,
                                    init[:, 0].copy(), init[:, 1].copy(), init[:, 2].copy())
        up = np.maximum(y, 0.0) ** spec.power
        vm = np.maximum(-y, 0.0) ** spec.power
        return np.column_stack([up, vm, h])

    if spec.family == "parx":
        return _parx_path(spec, stream, t0, init, z, prime_zero)

    if spec.family == "binary_choice":
        if spec.has_interaction:
            q, e = spec.q, z.shape[1]
            amat = np.asarray(spec.interaction_a, dtype=float).reshape(q, -1)[:, :e]
            bmat = np.asarray(spec.interaction_b, dtype=float).reshape(q, -1)[:, :e]
            zlag = _lagged_covariates(spec, cov, stream, t0, n, z, prime_zero)
            y = kernels.binary_interaction_path(np.asarray(spec.interaction_c, dtype=float),
                                                amat, bmat, zlag, eps, init[:, 0].copy())
        else:
            v = z[:, : len(spec.pi)] @ np.asarray(spec.pi, dtype=float) + eps
            y = kernels.binary_path(np.asarray(spec.a, dtype=float), v, init[:, 0].copy())
        return y[:, None]

    if spec.family == "categorical":
        g = spec.gammas(z.shape[1]) if spec.gamma else None
        gz = z @ g.T if g is not None else np.zeros((n, spec.n_categories))
        y = kernels.categorical_path(spec.weights(), gz, eps, init[:, 0].copy())
        return y.astype(float)[:, None]

    raise ConfigurationError(f"unknown family {spec.family!r}")


def _parx_path(spec, stream, t0, init, z, prime_zero) -> np.ndarray:
    n = z.shape[0]
    pi = np.asarray(spec.pi, dtype=float)
    pz = z[:, : len(pi)] @ pi if len(pi) else np.zeros(n)
    y = init[:, 0].copy()
    lam = init[:, 1].copy()
    out = np.empty((n, 2))
    for t in range(n):
        lam_new = spec.beta0 + pz[t]
        for j in range(spec.q):
            lam_new += spec.beta[j] * lam[j] + spec.alpha[j] * y[j]
        if lam_new < 0:
            raise FloatingPointError("negative intensity")
        view = arrival_view(stream, t0 + t, prime=(prime_zero and t0 + t == 0))
        cnt = float(view.count_below(lam_new))
        y[1:] = y[:-1]
        lam[1:] = lam[:-1]
        y[0] = cnt
        lam[0] = lam_new
        out[t, 0] = cnt
        out[t, 1] = lam_new
    return out


def _lagged_covariates(spec, cov, stream, t0, n, z, prime_zero) -> np.ndarray:
    """zlag[t, i, :] = Z_{t0+t-1-i} for the interaction binary form."""
    q = spec.q
    prime_at = 0 if prime_zero else None
    zfull = covariate_path(stream, cov, t0 - q, t0 + n - 2, prime_at=prime_at)
    e = zfull.shape[1]
    zlag = np.empty((n, q, e))
    for i in range(q):
        zlag[:, i, :] = zfull[q - 1 - i: q - 1 - i + n]
    return zlag


def dual_gap(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
             t: int, s: int, x_a: np.ndarray, x_b: np.ndarray) -> float:
    """Distance between states at time t reached from x_a vs x_b at t-s,
    both driven by the same draws."""
    z, eps = innovation_arrays(spec, cov, stream, t - s + 1, s)
    pa = forward_path(spec, cov, stream, t - s + 1, s, x_a, z=z, eps=eps)
    pb = forward_path(spec, cov, stream, t - s + 1, s, x_b, z=z, eps=eps)
    return models.state_distance(spec, pa["states"][-1], pb["states"][-1])
