"""Functional dependence coefficients by innovation-replacement coupling.

theta_{p,t} is the L^p distance between the stationary path and its copy
driven by the same innovations except at time 0, where (eps_0, eta_0) is
swapped for an independent duplicate.  Both chains share every other draw,
so the estimator needs one extra region of the seed stream and no storage.

The theoretical envelope mixes the model's geometric contraction rate with
the covariate process's own dependence tail (closed form per covariate
family); only decay rates are compared downstream because the envelope's
constant is not identified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models, paths
from ._parallel import replicate_map
from .contraction import ContractionCertificate
from .models import ModelSpec
from .noise import ConfigurationError, CovariateSpec, dependence_tail_of_z
from .rng import SeedStream
from .stationarity import NonContractiveError, check_conditions, fit_log_slope

BURN_CAP = 4096


@dataclass(frozen=True)
class DependenceProfile:
    p: float
    o: float
    t: np.ndarray              # 0..t_max
    theta_hat: np.ndarray
    theta_se: np.ndarray
    tail_sums: np.ndarray      # Theta_hat_{p,h}, h = 0..t_max
    bound_shape: np.ndarray    # envelope normalized at h = 1
    rho_fit: float             # fitted geometric decay of theta_hat
    rho_bound: float           # envelope decay rate
    burn_used: int
    residual_bound: float      # kappa^{burn/m}, the ignored-past contribution


def estimate_theta(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                   t_max: int = 64, replicates: int = 2000,
                   burn: int | None = None, threads: int | None = None,
                   fit_window: tuple[int, int] = (5, 30)) -> DependenceProfile:
    """Coupled-path estimate of theta_{p,t} for t = 0..t_max.

    Refuses (NonContractiveError) when the contraction certificate fails,
    since the coefficients presuppose the stationary solution.
    """
    cert, verdicts = check_conditions(spec, cov)
    if not cert.contractive:
        failing = [k for k, v in verdicts.items() if v.status == "fails"]
        raise NonContractiveError(
            f"dependence coefficients undefined without a contraction certificate"
            f" (failing: {', '.join(failing) or 'kappa >= 1'})")

    p, o = cert.p, cert.o
    m = cert.m or 1
    kappa = cert.kappa
    if burn is None:
        burn = min(BURN_CAP, m * max(1, math.ceil(3.0 * math.log(10.0) / -math.log(kappa))))
    residual = kappa ** (burn / m)

    x0, _ = models.default_states(spec)
    n = burn + t_max + 1

    def one(r: int) -> np.ndarray:
        st = stream.replicate(r)
        za, ea = paths.innovation_arrays(spec, cov, st, -burn, n, prime_zero=False)
        zb, eb = paths.innovation_arrays(spec, cov, st, -burn, n, prime_zero=True)
        run_a = paths.forward_path(spec, cov, st, -burn, n, x0, z=za, eps=ea)
        run_b = paths.forward_path(spec, cov, st, -burn, n, x0, prime_zero=True,
                                   z=zb, eps=eb)
        ha, hb = run_a["head"][burn:], run_b["head"][burn:]
        if spec.family in models.FINITE_ALPHABET:
            return (np.any(ha != hb, axis=1)).astype(float)
        # d(x,y)^p with d the (o,p) head metric: sum_i |dx_i|^{o p}
        return np.sum(np.abs(ha - hb) ** (o * p), axis=1)

    dp = np.stack(replicate_map(one, replicates, threads))  # (R, t_max+1) of d^p
    mean_dp = dp.mean(axis=0)
    se_dp = dp.std(axis=0, ddof=1) / math.sqrt(replicates)
    theta = mean_dp ** (1.0 / p)
    # delta method for the p-th root
    with np.errstate(divide="ignore", invalid="ignore"):
        theta_se = np.where(mean_dp > 0,
                            se_dp * np.abs(mean_dp) ** (1.0 / p - 1.0) / p, 0.0)
    tail = np.cumsum(theta[::-1])[::-1]

    rho_bound, shape = bound_curve(cert, cov, t_max)
    lo, hi = fit_window
    hi = min(hi, t_max)
    window = np.arange(lo, hi + 1)
    rho_fit = math.exp(fit_log_slope(window, theta[lo:hi + 1]))

    return DependenceProfile(p=p, o=o, t=np.arange(t_max + 1), theta_hat=theta,
                             theta_se=theta_se, tail_sums=tail, bound_shape=shape,
                             rho_fit=rho_fit, rho_bound=rho_bound,
                             burn_used=burn, residual_bound=residual)


def bound_curve(cert: ContractionCertificate, cov: CovariateSpec,
                h_max: int) -> tuple[float, np.ndarray]:
    """(rho, shape) of the envelope rho^h + sum_{i=1}^h rho^i Theta_{r,h-i}(Z).

    rho is the model's per-step L^p contraction rate; the covariate tail
    sums come in closed form per family (unit innovation scale).  The shape
    is normalized at h = 1 since the envelope constant is unknown.
    """
    rho = cert.decay_rate()
    if rho is None:
        raise NonContractiveError("no decay rate without a contraction certificate")
    tails = dependence_tail_of_z(cov, h_max)
    if tails is None:
        raise ConfigurationError(
            f"covariate family {cov.family!r} has no closed-form dependence tail")
    h = np.arange(h_max + 1)
    curve = rho ** h.astype(float)
    for hh in range(h_max + 1):
        acc = 0.0
        for i in range(1, hh + 1):
            acc += rho ** i * tails[hh - i]
        curve[hh] += acc
    if curve[min(1, h_max)] > 0:
        curve = curve / curve[min(1, h_max)]
    return rho, curve


def holder_interpolate(theta_p: np.ndarray, p: float, q: float, q_prime: float,
                       moment_bound: float) -> np.ndarray:
    """Upper bound on theta_q from theta_p and a L^{q'} moment bound M:

    theta_q <= theta_p^{p(q'-q)/(q(q'-p))} * (2M)^{q'(q-p)/(q(q'-p))}.
    """
    if not p <= q < q_prime:
        raise ConfigurationError("need p <= q < q'")
    if moment_bound < 0:
        raise ConfigurationError("moment bound must be nonnegative")
    theta_p = np.asarray(theta_p, dtype=float)
    if np.any(theta_p < 0):
        raise ConfigurationError("theta values must be nonnegative")
    denom = q * (q_prime - p)
    e1 = p * (q_prime - q) / denom
    e2 = q_prime * (q - p) / denom
    return theta_p ** e1 * (2.0 * moment_bound) ** e2
