"""Stationary solutions by backward iteration, condition checking, Lyapunov
exponents and coalescence.

Backward iteration evaluates f^t_{t-s}(x) for growing s, re-reading the same
per-time-index draws at every horizon (the counter-based streams make this
free).  Continuous-state families stop when two initializations agree within
``tol`` in the model metric; finite-alphabet families compose the one-step
maps over the whole state space and stop at exact coalescence, which makes
the returned draw an exact stationary sample.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels, models, paths
from ._parallel import replicate_map
from .contraction import ContractionCertificate
from .models import FINITE_ALPHABET, ModelSpec, contraction_metadata
from .noise import (ConfigurationError, CovariateSpec, abs_moment, covariate_path,
                    eps_path, expect_of_z, law_pdf)
from .rng import SeedStream

DEFAULT_TOL = 1e-8
DEFAULT_S_MAX = 1 << 15


class NonContractiveError(RuntimeError):
    """Raised when an engine requires a contraction certificate that fails."""


@dataclass(frozen=True)
class Verdict:
    status: str          # holds | fails | undecidable
    value: float | None = None
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.status == "holds"


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    coalesced: bool
    horizon: int
    gap: float
    tol: float
    coalescence_time: int | None = None
    gap_history: tuple = ()


# ---------------------------------------------------------------------------
# backward iteration
# ---------------------------------------------------------------------------

def backward_sample(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                    t: int = 0, tol: float = DEFAULT_TOL, s_max: int = DEFAULT_S_MAX,
                    certificate: ContractionCertificate | None = None,
                    init_pair: tuple | None = None):
    """Approximate (continuous) or exact (finite-alphabet) stationary draw at t.

    Returns (lag_state, ConvergenceReport); a report with converged=False is
    an expected outcome for non-contractive specifications.
    """
    if spec.family in FINITE_ALPHABET:
        state, tc = _coalesce_all_states(spec, cov, stream, t, s_max)
        if tc is None:
            return state, ConvergenceReport(False, False, s_max, 1.0, tol)
        return state, ConvergenceReport(True, True, tc, 0.0, tol, coalescence_time=tc)

    if certificate is None:
        certificate = contraction_metadata(spec, cov)
    m = certificate.m if certificate.m else 1
    if init_pair is None:
        init_pair = models.default_states(spec)
    x_a, x_b = init_pair

    history = []
    s = m
    gap = math.inf
    while s <= s_max:
        gap = paths.dual_gap(spec, cov, stream, t, s, x_a, x_b)
        history.append((s, gap))
        if gap <= tol:
            break
        s *= 2
    s_used = history[-1][0]
    run = paths.forward_path(spec, cov, stream, t - s_used + 1, s_used, x_a)
    report = ConvergenceReport(gap <= tol, False, s_used, gap, tol,
                               gap_history=tuple(history))
    return run["states"][-1], report


def _coalesce_all_states(spec, cov, stream, t, s_max, chunk: int = 64):
    """Backward-compose one-step maps on the full lag-state space.

    Returns (lag_state, T) at the first horizon T where the composition
    f_t o ... o f_{t-T+1} is constant, or (any_state, None) at the cap.
    """
    alpha = models.alphabet(spec)
    base = len(alpha)
    n_states = base ** spec.q
    tuples = np.array(np.meshgrid(*[alpha] * spec.q, indexing="ij")).reshape(spec.q, -1).T
    lookup = {tuple(row): i for i, row in enumerate(tuples)}
    phi = np.arange(n_states)
    s = 0
    while s < s_max:
        hi = t - s                       # newest map time in this chunk
        lo = hi - chunk + 1
        z = covariate_path(stream, cov, lo - 1, hi - 1)
        eps = eps_path(stream, cov, lo, hi)
        for back in range(chunk):
            u_idx = chunk - 1 - back     # time u = hi - back
            innov = models.InnovationDraw(eps=float(eps[u_idx]), eta=np.zeros(cov.dim))
            one = np.empty(n_states, dtype=np.int64)
            for i in range(n_states):
                new_state = models.step(spec, tuples[i][:, None], z[u_idx], innov)
                one[i] = lookup[tuple(new_state[:, 0])]
            phi = phi[one]
            s += 1
            if np.all(phi == phi[0]):
                return tuples[phi[0]][:, None].copy(), s
            if s >= s_max:
                break
    return tuples[phi[0]][:, None].copy(), None


def stationary_path(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                    n: int, tol: float = DEFAULT_TOL, s_max: int = DEFAULT_S_MAX,
                    certificate: ContractionCertificate | None = None) -> dict:
    """Backward sample at time 0, then n forward steps over t = 1..n.

    Returns {"t", "head", "states", "z", "eps", "report"}; reproducible from
    the stream alone.
    """
    state0, report = backward_sample(spec, cov, stream, 0, tol, s_max, certificate)
    if not (report.converged or report.coalesced):
        raise NonContractiveError(
            f"backward iteration did not converge by s_max={s_max} (gap {report.gap:g})")
    run = paths.forward_path(spec, cov, stream, 1, n, state0)
    return {"t": np.arange(1, n + 1), "head": run["head"], "states": run["states"],
            "z": run["z"], "eps": run["eps"], "report": report}


def gap_profile(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                horizons, replicates: int = 200, t: int = 0,
                init_pair: tuple | None = None, threads: int | None = None):
    """Replicate-averaged dual-initialization gaps at the given horizons.

    Returns (horizons, mean_gap, stderr); the Monte-Carlo mean-gap diagnostic
    behind the divergence regression test and the rate checks.
    """
    if init_pair is None:
        init_pair = models.default_states(spec)
    x_a, x_b = init_pair
    horizons = list(horizons)

    def one(r: int) -> np.ndarray:
        st = stream.replicate(r)
        return np.array([paths.dual_gap(spec, cov, st, t, s, x_a, x_b)
                         for s in horizons])

    gaps = np.stack(replicate_map(one, replicates, threads))
    return (np.asarray(horizons), gaps.mean(axis=0),
            gaps.std(axis=0, ddof=1) / math.sqrt(replicates))


def fit_log_slope(horizons, values) -> float:
    """Least-squares slope of log(values) against horizon."""
    h = np.asarray(horizons, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(h[keep], np.log(v[keep]), 1)[0])


# ---------------------------------------------------------------------------
# Lyapunov exponent
# ---------------------------------------------------------------------------

def lyapunov_estimate(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                      n: int, replicates: int = 1, threads: int | None = None):
    """Monte-Carlo estimate of chi = lim (1/n) log || A_n ... A_1 ||.

    Uses the model's per-step random Lipschitz companion matrices (top row
    a_{i,1}(Z) + a_{i,2}(Z)|eps|), with the log accumulated every step so the
    product never overflows.  Returns (chi_hat, stderr, per_replicate).
    """
    if n < spec.q:
        raise ConfigurationError("n must be at least the lag order q")

    def one(r: int) -> float:
        st = stream.replicate(r)
        z, eps = paths.innovation_arrays(spec, cov, st, 1, n)
        c = models.lipschitz_top_row(spec, z, eps)
        if spec.q == 1:
            with np.errstate(divide="ignore"):
                return float(np.mean(np.log(c[:, 0])))
        return float(kernels.companion_log_norm(np.ascontiguousarray(c))) / n

    vals = np.array(replicate_map(one, replicates, threads))
    chi = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return chi, stderr, vals


# ---------------------------------------------------------------------------
# condition checking
# ---------------------------------------------------------------------------

def _verdict_lt(value: float, bound: float, name: str, stderr: float = 0.0) -> Verdict:
    tag = f"{name}={value:g}" + (f" (stderr {stderr:.2g})" if stderr else "")
    if not math.isfinite(value):
        return Verdict("fails" if value > bound else "holds", value, tag)
    return Verdict("holds" if value < bound else "fails", float(value), tag)


def check_conditions(spec: ModelSpec, cov: CovariateSpec):
    """(certificate, verdict map) for every condition applicable to the family.

    Statuses are holds/fails/undecidable; undecidable carries the reason.
    Spectral radii inside the certificate come from an eigen solve that is
    cross-checked against power iteration.
    """
    cert = contraction_metadata(spec, cov)
    scal = dict(cert.scalars)
    verdicts: dict[str, Verdict] = {}

    if spec.family == "linear_random_coef":
        ksup = scal["kappa_sup"]
        verdicts["sup_contraction"] = _verdict_lt(ksup, 1.0, "kappa_sup")
        val, se = _log_kappa_expectation(spec, cov)
        if val is None:
            verdicts["log_contraction"] = Verdict("undecidable", None,
                                                  "no closed-form covariate marginal")
        else:
            scal["e_log_kappa"] = val
            verdicts["log_contraction"] = _verdict_lt(val, 0.0, "E_log_kappa", se)
        growth = _mean_gap_factor(spec, cov)
        if growth is None:
            verdicts["mean_gap_decay"] = Verdict("undecidable", None,
                                                 "covariate family has no closed form")
        else:
            scal["mean_gap_factor"] = growth
            verdicts["mean_gap_decay"] = _verdict_lt(growth, 1.0, "mean_gap_factor")

    elif spec.family == "ar_arch_benchmark":
        verdicts["bench2"] = _verdict_lt(scal["bench2"], 1.0, "kappa2")
        b1, se1 = _bench1_value(spec, cov)
        if b1 is None:
            verdicts["bench1"] = Verdict("undecidable", None, "no closed-form marginal")
        else:
            scal["bench1"] = b1
            verdicts["bench1"] = _verdict_lt(b1, 0.0, "E_log_lipschitz", se1)
        b3, se3 = expect_of_z(cov, lambda z: math.log(spec.a1(z) ** 2 + spec.b1(z)))
        scal["bench3"] = b3
        verdicts["bench3"] = _verdict_lt(b3, 0.0, "E_log_kappa2", se3)

    elif spec.family == "charn":
        verdicts["newdeal_sum"] = _verdict_lt(scal["newdeal_sum"], 1.0, "lipschitz_sum")

    elif spec.family == "apgarch_x":
        verdicts["G2"] = _verdict_lt(scal["gamma"], 1.0, "gamma")

    elif spec.family == "parx":
        verdicts["PA1"] = _verdict_lt(scal["gamma"], 1.0, "gamma")

    elif spec.family == "binary_choice":
        if spec.has_interaction:
            if cov.eps_law in ("gaussian", "logistic"):
                verdicts["full_support"] = Verdict("holds", None, "epsilon has full support")
            else:
                verdicts["full_support"] = Verdict("undecidable", None,
                                                   "bounded epsilon, interaction form")
            verdicts["conditional_refresh"] = Verdict(
                "undecidable", None, "no certificate for the interaction form")
        else:
            delta = scal.get("refresh_delta")
            if cov.eps_law in ("gaussian", "logistic"):
                verdicts["full_support"] = Verdict("holds", None, "epsilon has full support")
            elif delta is not None:
                verdicts["full_support"] = Verdict("holds" if delta > 0 else "fails",
                                                   delta, f"refresh_mass={delta:g}")
            else:
                verdicts["full_support"] = Verdict("undecidable", None,
                                                   "refresh mass not computable")
            if delta is None:
                verdicts["conditional_refresh"] = Verdict(
                    "undecidable", None,
                    "conditional law not enumerable for this covariate family")
            elif delta > 0:
                verdicts["conditional_refresh"] = Verdict(
                    "holds", delta,
                    f"delta={delta:g}, K={int(scal.get('refresh_lag', 0))}")
            else:
                verdicts["conditional_refresh"] = Verdict("fails", 0.0, "delta=0")

    elif spec.family == "categorical":
        eta = scal.get("eta_minus")
        if eta is None:
            verdicts["kernel_floor"] = Verdict("undecidable", None,
                                               "covariate support unbounded")
        else:
            verdicts["kernel_floor"] = Verdict("holds" if eta > 0 else "fails",
                                               eta, f"eta_minus={eta:g}")
            verdicts["kernel_lipschitz"] = Verdict("holds", scal["kernel_lipschitz"],
                                                   f"C={scal['kernel_lipschitz']:g}")

    cert = dataclasses.replace(cert, scalars=scal)
    return cert, verdicts


def _log_kappa_expectation(spec, cov):
    kap = spec.kappa
    if kap.is_const():
        v = abs(float(kap(0.0)))
        return (math.log(v) if v > 0 else -math.inf), 0.0

    def log_abs(z):
        v = abs(float(kap(z)))
        return math.log(v) if v > 0 else -math.inf

    try:
        return expect_of_z(cov, log_abs)
    except Exception:
        return None, 0.0


def _mean_gap_factor(spec, cov):
    """Per-step growth factor of E[prod kappa(Z_{t-i})], closed form only.

    i.i.d. covariates: E|kappa(Z_0)|.  Product chains with kappa(z) = z:
    E[a^q], the factor that multiplies the mean gap once the chain memory is
    past (mean gap = prod_{i<q} E^2 a^i * E^{j-q+2} a^q).
    """
    kap = spec.kappa
    if kap.is_const():
        return abs(float(kap(0.0)))
    if cov.family == "iid":
        val, _ = expect_of_z(cov, lambda z: abs(float(kap(z))))
        return val
    is_identity = (kap.kind == "affine" and kap.params[0] == 0.0
                   and kap.params[1] == 1.0 and not math.isfinite(kap.params[2])
                   and not math.isfinite(kap.params[3]))
    if cov.family == "product_chain" and is_identity:
        return abs_moment(cov.factor_law, cov.chain_order, cov.factor_params)
    return None


def _bench1_value(spec, cov):
    """E log(|a1(Z)| + sqrt(b1(Z)) |eps|) by nested quadrature."""
    def inner(z: float) -> float:
        a = abs(float(spec.a1(z)))
        b = math.sqrt(float(spec.b1(z)))
        if b == 0.0:
            return math.log(a) if a > 0 else -math.inf
        val, _ = integrate.quad(
            lambda x: math.log(a + b * abs(x)) * law_pdf(x, cov.eps_law, cov.eps_params),
            -np.inf, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
        return val
    try:
        return expect_of_z(cov, inner)
    except Exception:
        return None, 0.0


def certified(spec: ModelSpec, cov: CovariateSpec,
              precomputed: ContractionCertificate | None = None) -> bool:
    cert = precomputed if precomputed is not None else contraction_metadata(spec, cov)
    return cert.contractive


# ---------------------------------------------------------------------------
# coalescence times
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoalescenceReport:
    times: np.ndarray          # coalescence time per replicate; -1 = censored
    cap: int
    eta_minus: float | None
    geometric_rate: float | None   # 1 - eta_minus^q

    @property
    def censored(self) -> int:
        return int(np.sum(self.times < 0))

    def survival(self, k: int) -> float:
        """Empirical P(T > k); censored runs count as T > cap >= k."""
        return float(np.mean((self.times < 0) | (self.times > k)))


def coalescence_times(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                      replicates: int = 500, cap: int = 512,
                      threads: int | None = None) -> CoalescenceReport:
    """Empirical distribution of the backward coalescence time T."""
    if spec.family not in FINITE_ALPHABET:
        raise ConfigurationError("coalescence requires a finite-alphabet family")

    def one(r: int) -> int:
        _, tc = _coalesce_all_states(spec, cov, stream.replicate(r), 0, cap)
        return -1 if tc is None else tc

    times = np.array(replicate_map(one, replicates, threads), dtype=np.int64)
    cert = contraction_metadata(spec, cov)
    eta = cert.scalars.get("eta_minus")
    if spec.family == "binary_choice":
        eta = cert.scalars.get("refresh_delta")
        rate = None if eta is None else 1.0 - eta
    else:
        rate = None if eta is None else 1.0 - eta ** spec.q
    return CoalescenceReport(times=times, cap=cap, eta_minus=eta, geometric_rate=rate)


# ---------------------------------------------------------------------------
# law agreement (backward vs forward burn-in)
# ---------------------------------------------------------------------------

def law_agreement(spec: ModelSpec, cov: CovariateSpec, stream: SeedStream,
                  replicates: int = 2000, forward_burn: int = 200,
                  tol: float = DEFAULT_TOL, threads: int | None = None) -> dict:
    """First two moments of the head coordinate under backward sampling vs
    forward burn-in, with standard errors, across independent replicates."""
    x0, _ = models.default_states(spec)

    def back(r: int) -> float:
        state, rep = backward_sample(spec, cov, stream.replicate(r), 0, tol)
        return float(state[0, 0])

    def fwd(r: int) -> float:
        st = stream.replicate(replicates + r)
        run = paths.forward_path(spec, cov, st, 1, forward_burn, x0)
        return float(run["head"][-1, 0])

    b = np.array(replicate_map(back, replicates, threads))
    f = np.array(replicate_map(fwd, replicates, threads))

    def moments(x: np.ndarray) -> dict:
        n = len(x)
        m = float(x.mean())
        v = float(x.var(ddof=1))
        m4 = float(np.mean((x - m) ** 4))
        return {"mean": m, "var": v,
                "se_mean": math.sqrt(v / n),
                "se_var": math.sqrt(max(m4 - v * v, 0.0) / n)}

    return {"backward": moments(b), "forward": moments(f),
            "backward_sample": b, "forward_sample": f}
