"""Model families exposed as random maps F(x_1..x_q, z, eps) with contraction metadata.

Families and their state points (newest lag first, shape (q, k)):

  linear_random_coef   x in R,            head kappa(z) x + eps
  ar_arch_benchmark    x in R,            head a0(z) + a1(z) x + eps sqrt(b0(z) + b1(z) x^2)
  charn                y in R (q lags),   head f1(y, z) + eps f2(y, z)
  apgarch_x            ((Y+)^d,(Y-)^d,h), head from the power-GARCH volatility recursion
  parx                 (Y, lambda),       head (N^(t)_lambda, lambda) on a shared arrival stream
  binary_choice        y in {0,1},        head 1{g(y, z, eps) > 0}
  categorical          y in {1..N},       head K_z^-(eps | y), the kernel inverse

Each family also knows how to emit its conditional-contraction lag matrices
(and the scalar conditions around them), which the stationarity checker
wraps into verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import expit

from . import contraction, kernels
from .contraction import ContractionCertificate, certificate_from_matrices, direct_certificate
from .noise import (ConfigurationError, CovariateSpec, InnovationDraw, abs_moment,
                    half_moments, law_cdf)
from .rng import SeedStream, arrival_generator

_BIG_Z = 1e12
LAMBDA_CAP = 1e6


# ---------------------------------------------------------------------------
# functional coefficients theta(z)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coef:
    """Scalar coefficient as a function of a scalar covariate.

    kinds: const c | affine clip(a + b z, lo, hi) | logistic lo + (hi-lo) expit(a + b z)
    """

    kind: str
    params: tuple

    @classmethod
    def const(cls, c: float) -> "Coef":
        return cls("const", (float(c),))

    @classmethod
    def affine(cls, a: float, b: float, lo: float = -math.inf, hi: float = math.inf) -> "Coef":
        return cls("affine", (float(a), float(b), float(lo), float(hi)))

    @classmethod
    def identity(cls) -> "Coef":
        return cls.affine(0.0, 1.0)

    @classmethod
    def logistic(cls, lo: float, hi: float, a: float, b: float) -> "Coef":
        return cls("logistic", (float(lo), float(hi), float(a), float(b)))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "const":
            return np.broadcast_to(self.params[0], z.shape).copy() if z.shape else float(self.params[0])
        if self.kind == "affine":
            a, b, lo, hi = self.params
            return np.clip(a + b * z, lo, hi)
        if self.kind == "logistic":
            lo, hi, a, b = self.params
            return lo + (hi - lo) * expit(a + b * z)
        raise ConfigurationError(f"unknown coefficient kind {self.kind!r}")

    def breakpoints(self) -> list[float]:
        """z values where the piecewise structure changes (plus sign crossings)."""
        if self.kind == "const":
            return []
        if self.kind == "affine":
            a, b, lo, hi = self.params
            if b == 0.0:
                return []
            pts = [-a / b]
            for c in (lo, hi):
                if math.isfinite(c):
                    pts.append((c - a) / b)
            return pts
        lo, hi, a, b = self.params
        if b == 0.0:
            return []
        # logistic: center plus effective saturation points
        return [-a / b, (-a - 45.0) / b, (-a + 45.0) / b]

    def is_const(self) -> bool:
        return self.kind == "const" or (self.kind == "affine" and self.params[1] == 0.0)


def z_candidates(coefs, support: tuple[float, float] | None,
                 n_grid: int = 2049) -> np.ndarray:
    """Candidate covariate values for extremizing expressions in the coefficients.

    Exact for piecewise-affine menus (all breakpoints included, extrema of
    convex pieces sit at piece endpoints); a dense grid covers logistic
    mixtures.  When every coefficient is constant z is irrelevant.
    """
    if all(c.is_const() for c in coefs):
        return np.array([0.0])
    lo, hi = (-math.inf, math.inf) if support is None else support
    pts = {p for c in coefs for p in c.breakpoints()}
    pts.update((lo, hi))
    finite = sorted(p for p in pts if math.isfinite(p) and lo <= p <= hi)
    out = list(finite)
    if finite:
        span = max(finite) - min(finite) or 1.0
        out.extend(np.linspace(min(finite) - 0.5 * span, max(finite) + 0.5 * span, n_grid))
    probe_lo = lo if math.isfinite(lo) else (-_BIG_Z)
    probe_hi = hi if math.isfinite(hi) else _BIG_Z
    out.extend([probe_lo, probe_hi])
    arr = np.unique(np.clip(np.asarray(out, dtype=float), lo, hi))
    return arr


def sup_over_z(fun, coefs, support) -> float:
    val = float(np.max(fun(z_candidates(coefs, support))))
    # a supremum attained at the +-1e12 probe of an unbounded direction
    return math.inf if val >= 1e9 else val


def inf_over_z(fun, coefs, support) -> float:
    return float(np.min(fun(z_candidates(coefs, support))))


def _scalar_support(cov: CovariateSpec | None) -> tuple[float, float] | None:
    if cov is None:
        return None
    box = cov.support_box()
    if box is None:
        return None
    lo, hi = box
    return float(lo[0]), float(hi[0])


# ---------------------------------------------------------------------------
# Poisson arrival stream
# ---------------------------------------------------------------------------

class PoissonArrivalView:
    """Ordered arrivals of one unit-rate Poisson process, generated lazily.

    Counting arrivals at or below lam yields N_lam; two intensities read off
    the same view satisfy N_h - N_g = #arrivals in (g, h], so |N_h - N_g|
    has conditional mean |h - g| path-wise (monotone coupling).
    """

    def __init__(self, gen: np.random.Generator, cap: float = LAMBDA_CAP):
        self._gen = gen
        self._cap = cap
        self._times = np.empty(0)
        self._total = 0.0

    def _extend(self, lam: float) -> None:
        while self._total <= lam:
            batch = self._gen.exponential(size=max(64, int(lam - self._total) + 16))
            times = self._total + np.cumsum(batch)
            self._times = np.concatenate([self._times, times])
            self._total = float(self._times[-1])

    def count_below(self, lam: float) -> int:
        if lam < 0:
            raise ConfigurationError("Poisson intensity must be nonnegative")
        if lam > self._cap:
            raise ConfigurationError(f"intensity {lam:g} exceeds cap {self._cap:g}")
        self._extend(lam)
        return int(np.searchsorted(self._times, lam, side="right"))


def arrival_view(stream: SeedStream, t: int, prime: bool = False) -> PoissonArrivalView:
    return PoissonArrivalView(arrival_generator(stream, t, prime=prime))


# ---------------------------------------------------------------------------
# model families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearRandomCoef:
    """x_t = kappa(Z_{t-1}) x_{t-1} + eps_t."""

    kappa: Coef = field(default_factory=lambda: Coef.const(0.5))
    o: float = 1.0
    p: float = 1.0

    family = "linear_random_coef"
    q = 1
    k = 1

    def __post_init__(self):
        _check_op(self.o, self.p)


@dataclass(frozen=True)
class ArArchBenchmark:
    """x_t = a0(Z) + a1(Z) x_{t-1} + eps_t sqrt(b0(Z) + b1(Z) x_{t-1}^2)."""

    a0: Coef = field(default_factory=lambda: Coef.const(0.0))
    a1: Coef = field(default_factory=lambda: Coef.const(0.5))
    b0: Coef = field(default_factory=lambda: Coef.const(1.0))
    b1: Coef = field(default_factory=lambda: Coef.const(0.0))
    o: float = 1.0
    p: float = 2.0

    family = "ar_arch_benchmark"
    q = 1
    k = 1

    def __post_init__(self):
        _check_op(self.o, self.p, unit_o=True)
        for name in ("b0", "b1"):
            c = getattr(self, name)
            if _coef_min(c) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class Charn:
    """y_t = f1(y_{t-1..t-q}, Z) + eps_t f2(y_{t-1..t-q}, Z) with

    f1 the threshold-location form  theta_0 + sum_i (theta_i y_i^+ + theta_{q+i} y_i^-)
    f2 the power-volatility form    (theta_0 + sum_i theta_i |y_i|^power)^(1/power)

    every theta being a functional coefficient of the covariate.
    """

    q: int = 1
    theta_loc: tuple = ()     # 2q+1 coefficients
    theta_vol: tuple = ()     # q+1 nonnegative coefficients
    power: float = 2.0
    o: float = 1.0
    p: float = 1.0

    family = "charn"
    k = 1

    def __post_init__(self):
        _check_op(self.o, self.p, unit_o=True)
        if self.q < 1:
            raise ConfigurationError("q must be >= 1")
        if self.power < 1.0:
            raise ConfigurationError("volatility power must be >= 1")
        if len(self.theta_loc) != 2 * self.q + 1:
            raise ConfigurationError(f"theta_loc needs {2 * self.q + 1} coefficients")
        if len(self.theta_vol) != self.q + 1:
            raise ConfigurationError(f"theta_vol needs {self.q + 1} coefficients")
        for c in self.theta_vol:
            if _coef_min(c) < 0:
                raise ConfigurationError("volatility coefficients must be nonnegative")

    def lipschitz_coefs(self, z) -> tuple[np.ndarray, np.ndarray]:
        """(a_{i,1}(z), a_{i,2}(z)) arrays of shape (q,) + z-shape."""
        z = np.asarray(z, dtype=float)
        a1 = np.stack([np.maximum(np.abs(self.theta_loc[1 + i](z)),
                                  np.abs(self.theta_loc[1 + self.q + i](z)))
                       for i in range(self.q)])
        a2 = np.stack([self.theta_vol[1 + i](z) ** (1.0 / self.power)
                       for i in range(self.q)])
        return a1, a2


@dataclass(frozen=True)
class ApGarchX:
    """Asymmetric power GARCH with exogenous shift pi'Z in the volatility."""

    q: int = 1
    power: float = 2.0
    pi: tuple = (0.0,)
    beta: tuple = (0.0,)
    alpha_plus: tuple = (0.0,)
    alpha_minus: tuple = (0.0,)
    o: float = 1.0
    p: float = 1.0

    family = "apgarch_x"
    k = 3

    def __post_init__(self):
        _check_op(self.o, self.p, unit_o=True)
        if self.p != 1.0:
            raise ConfigurationError("the volatility-state contraction is an L^1 bound; p must be 1")
        if self.q < 1:
            raise ConfigurationError("q must be >= 1")
        if self.power <= 0:
            raise ConfigurationError("power must be > 0")
        for name in ("beta", "alpha_plus", "alpha_minus"):
            v = getattr(self, name)
            if len(v) != self.q:
                raise ConfigurationError(f"{name} needs q={self.q} entries")
            if any(x < 0 for x in v):
                raise ConfigurationError(f"{name} must be nonnegative")
        if any(x < 0 for x in self.pi):
            raise ConfigurationError("pi must be nonnegative")


@dataclass(frozen=True)
class Parx:
    """Poisson autoregression Y_t = N^(t)_{lambda_t} with exogenous intensity shift."""

    q: int = 1
    beta0: float = 1.0
    alpha: tuple = (0.0,)
    beta: tuple = (0.0,)
    pi: tuple = (0.0,)
    o: float = 1.0
    p: float = 1.0

    family = "parx"
    k = 2

    def __post_init__(self):
        _check_op(self.o, self.p, unit_o=True)
        if self.p != 1.0:
            raise ConfigurationError("the Poisson coupling bound is an L^1 bound; p must be 1")
        if self.q < 1:
            raise ConfigurationError("q must be >= 1")
        if len(self.alpha) != self.q or len(self.beta) != self.q:
            raise ConfigurationError("alpha and beta need q entries each")
        if self.beta0 < 0 or any(x < 0 for x in self.alpha + self.beta + self.pi):
            raise ConfigurationError("parx coefficients must be nonnegative")


@dataclass(frozen=True)
class BinaryChoice:
    """Y_t = 1{g(Y_{t-1..t-q}, Z_{t-1}, eps_t) > 0}.

    Linear form g = sum a_i y_i + pi'z + eps; the interaction form adds
    [a_ij y_i + b_ij (1-y_i)] z_j cross terms (simulation only, no
    dependence certificate).
    """

    q: int = 1
    a: tuple = (0.0,)
    pi: tuple = (0.0,)
    interaction_c: tuple = ()
    interaction_a: tuple = ()    # flattened (q, e)
    interaction_b: tuple = ()
    o: float = 1.0
    p: float = 1.0

    family = "binary_choice"
    k = 1

    def __post_init__(self):
        _check_op(self.o, self.p, unit_o=True)
        if self.q < 1 or self.q > 16:
            raise ConfigurationError("q must be in 1..16")
        if not self.has_interaction and len(self.a) != self.q:
            raise ConfigurationError("a needs q entries")
        if self.has_interaction and len(self.interaction_c) != self.q:
            raise ConfigurationError("interaction_c needs q entries")

    @property
    def has_interaction(self) -> bool:
        return len(self.interaction_c) > 0


@dataclass(frozen=True)
class Categorical:
    """Multinomial-logit autoregression on {1..N}:

    K_z(i | y) = softmax_i( sum_j a_{i,j} y_j + gamma_i' z ).
    """

    q: int = 1
    n_categories: int = 2
    lag_weights: tuple = ()   # flattened (N, q)
    gamma: tuple = ()         # flattened (N, e), empty = no covariate effect
    o: float = 1.0
    p: float = 1.0

    family = "categorical"
    k = 1

    def __post_init__(self):
        _check_op(self.o, self.p, unit_o=True)
        if self.q < 1 or self.q > 8:
            raise ConfigurationError("q must be in 1..8")
        if self.n_categories < 2:
            raise ConfigurationError("need at least 2 categories")
        if len(self.lag_weights) != self.n_categories * self.q:
            raise ConfigurationError("lag_weights must have N*q entries")
        if self.gamma and len(self.gamma) % self.n_categories != 0:
            raise ConfigurationError("gamma must have N*e entries")

    def weights(self) -> np.ndarray:
        return np.asarray(self.lag_weights, dtype=float).reshape(self.n_categories, self.q)

    def gammas(self, e: int) -> np.ndarray:
        if not self.gamma:
            return np.zeros((self.n_categories, e))
        g = np.asarray(self.gamma, dtype=float).reshape(self.n_categories, -1)
        if g.shape[1] != e:
            raise ConfigurationError("gamma width does not match covariate dimension")
        return g


ModelSpec = (LinearRandomCoef | ArArchBenchmark | Charn | ApGarchX | Parx
             | BinaryChoice | Categorical)

FINITE_ALPHABET = ("binary_choice", "categorical")


def _check_op(o: float, p: float, unit_o: bool = False) -> None:
    if not 0.0 < o <= 1.0:
        raise ConfigurationError("metric exponent o must lie in (0, 1]")
    if p < 1.0:
        raise ConfigurationError("moment order p must be >= 1")
    if unit_o and o != 1.0:
        raise ConfigurationError("this family's lag matrices are derived for o = 1")


def _coef_min(c: Coef) -> float:
    return inf_over_z(c, [c], None)


def alphabet(spec: ModelSpec) -> np.ndarray:
    if spec.family == "binary_choice":
        return np.array([0.0, 1.0])
    if spec.family == "categorical":
        return np.arange(1, spec.n_categories + 1, dtype=float)
    raise ConfigurationError(f"{spec.family} has no finite alphabet")


def default_states(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Two well-separated initial states for dual-initialization runs."""
    q, k = spec.q, spec.k
    x_a = np.zeros((q, k))
    x_b = np.full((q, k), 10.0)
    if spec.family == "apgarch_x":
        x_a = np.zeros((q, 3))
        x_b = np.tile(np.array([10.0, 10.0, 10.0]), (q, 1))
    if spec.family == "parx":
        x_b = np.tile(np.array([10.0, 10.0]), (q, 1))
    if spec.family == "binary_choice":
        x_b = np.ones((q, 1))
    if spec.family == "categorical":
        x_a = np.ones((q, 1))
        x_b = np.full((q, 1), float(spec.n_categories))
    return x_a, x_b


# ---------------------------------------------------------------------------
# one-step evolution
# ---------------------------------------------------------------------------

def step(spec: ModelSpec, state: np.ndarray, z: np.ndarray,
         innov: InnovationDraw, arrivals: PoissonArrivalView | None = None) -> np.ndarray:
    """Shift the lag state and compute the new head F(x_1..x_q, z, eps)."""
    state = np.asarray(state, dtype=float)
    if state.shape != (spec.q, spec.k):
        raise ConfigurationError(f"state shape {state.shape} != {(spec.q, spec.k)}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    eps = innov.eps
    zs = float(z[0])

    if spec.family == "linear_random_coef":
        head = [float(spec.kappa(zs)) * state[0, 0] + eps]
    elif spec.family == "ar_arch_benchmark":
        x = state[0, 0]
        var = float(spec.b0(zs)) + float(spec.b1(zs)) * x * x
        head = [float(spec.a0(zs)) + float(spec.a1(zs)) * x + eps * math.sqrt(var)]
    elif spec.family == "charn":
        y = state[:, 0]
        loc = float(spec.theta_loc[0](zs))
        vol = float(spec.theta_vol[0](zs))
        for i in range(spec.q):
            loc += float(spec.theta_loc[1 + i](zs)) * max(y[i], 0.0)
            loc += float(spec.theta_loc[1 + spec.q + i](zs)) * max(-y[i], 0.0)
            vol += float(spec.theta_vol[1 + i](zs)) * abs(y[i]) ** spec.power
        head = [loc + eps * vol ** (1.0 / spec.power)]
    elif spec.family == "apgarch_x":
        u, v, h = state[:, 0], state[:, 1], state[:, 2]
        hn = float(np.dot(spec.pi, z[: len(spec.pi)]))
        for j in range(spec.q):
            hn += spec.beta[j] * h[j] + spec.alpha_plus[j] * u[j] + spec.alpha_minus[j] * v[j]
        if hn < 0:
            raise FloatingPointError("negative volatility state")
        yn = eps * hn ** (1.0 / spec.power)
        head = [max(yn, 0.0) ** spec.power, max(-yn, 0.0) ** spec.power, hn]
    elif spec.family == "parx":
        if arrivals is None:
            raise ConfigurationError("parx step needs a PoissonArrivalView")
        y, lam = state[:, 0], state[:, 1]
        lam_new = spec.beta0 + float(np.dot(spec.pi, z[: len(spec.pi)]))
        for j in range(spec.q):
            lam_new += spec.beta[j] * lam[j] + spec.alpha[j] * y[j]
        if lam_new < 0:
            raise FloatingPointError("negative intensity")
        head = [float(arrivals.count_below(lam_new)), lam_new]
    elif spec.family == "binary_choice":
        y = state[:, 0]
        if spec.has_interaction:
            g = eps
            amat = np.asarray(spec.interaction_a, dtype=float).reshape(spec.q, -1)
            bmat = np.asarray(spec.interaction_b, dtype=float).reshape(spec.q, -1)
            for i in range(spec.q):
                g += spec.interaction_c[i] * y[i]
                g += float(np.dot(amat[i] * y[i] + bmat[i] * (1.0 - y[i]), z[: amat.shape[1]]))
        else:
            g = float(np.dot(spec.a, y)) + float(np.dot(spec.pi, z[: len(spec.pi)])) + eps
        head = [1.0 if g > 0.0 else 0.0]
    elif spec.family == "categorical":
        head = [float(kernel_inverse(spec, eps, z, state[:, 0]))]
    else:
        raise ConfigurationError(f"unknown family {spec.family!r}")

    new = np.empty_like(state)
    new[0] = head
    new[1:] = state[:-1]
    return new


def kernel_probabilities(spec: Categorical, z: np.ndarray, y) -> np.ndarray:
    """K_z(. | y) for a categorical spec; rows sum to one."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    y = np.asarray(y, dtype=float)
    logits = spec.weights() @ y + spec.gammas(len(z)) @ z
    logits -= logits.max()
    p = np.exp(logits)
    return p / p.sum()


def kernel_inverse(spec: Categorical, u: float, z: np.ndarray, y) -> int:
    """Smallest category whose cumulative kernel mass reaches u (ties go down).

    Cumulative sums are taken in fixed index order 1..N; u exactly equal to
    a partial sum maps to that category.
    """
    if not 0.0 <= u <= 1.0:
        raise ConfigurationError("u must lie in [0, 1]")
    cum = np.cumsum(kernel_probabilities(spec, z, y))
    idx = int(np.searchsorted(cum, u, side="left"))
    return min(idx, spec.n_categories - 1) + 1


# ---------------------------------------------------------------------------
# contraction metadata
# ---------------------------------------------------------------------------

def _lp_norm_affine_abs(a, b, p: float, eps_law: str, eps_params: tuple) -> np.ndarray:
    """|| a + b |eps| ||_p elementwise over arrays a, b >= 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if p == 1.0:
        return a + b * abs_moment(eps_law, 1.0, eps_params)
    if p == 2.0:
        m1 = abs_moment(eps_law, 1.0, eps_params)
        m2 = abs_moment(eps_law, 2.0, eps_params)
        return np.sqrt(a * a + 2.0 * a * b * m1 + b * b * m2)
    out = np.empty(np.broadcast(a, b).shape)
    it = np.nditer([a, b, out], op_flags=[["readonly"], ["readonly"], ["writeonly"]])
    for ai, bi, oi in it:
        val, _ = integrate.quad(
            lambda x, ai=float(ai), bi=float(bi):
                (ai + bi * abs(x)) ** p * _eps_pdf(x, eps_law, eps_params),
            -np.inf, np.inf, epsabs=1e-11, epsrel=1e-11, limit=200)
        oi[...] = val ** (1.0 / p)
    return out


def _eps_pdf(x, law, params):
    from .noise import law_pdf
    return law_pdf(x, law, params)


def contraction_metadata(spec: ModelSpec, cov: CovariateSpec) -> ContractionCertificate:
    """Lag matrices, companion spectral data and scalar conditions for a model.

    The covariate spec supplies the support over which z-suprema run and
    the eps law whose moments enter the matrices.
    """
    support = _scalar_support(cov)

    if spec.family == "linear_random_coef":
        kap = spec.kappa
        ksup = sup_over_z(lambda z: np.abs(kap(z)), [kap], support)
        scal = {"kappa_sup": ksup}
        if math.isfinite(ksup):
            # on the Delta^p = |dx|^{o p} scale one step contracts by kappa_sup^{o p}
            return certificate_from_matrices([[[ksup ** (spec.o * spec.p)]]],
                                             spec.p, spec.o, scal)
        return ContractionCertificate(p=spec.p, o=spec.o, rho_sum=math.inf,
                                      rho_companion=math.inf, scalars=scal)

    if spec.family == "ar_arch_benchmark":
        coefs = [spec.a1, spec.b1]
        k2 = sup_over_z(lambda z: spec.a1(z) ** 2 + spec.b1(z), coefs, support)
        scal = {"bench2": k2}
        if math.isfinite(k2):
            return certificate_from_matrices([[[k2]]], 2.0, spec.o, scal)
        return ContractionCertificate(p=2.0, o=spec.o, rho_sum=math.inf,
                                      rho_companion=math.inf, scalars=scal)

    if spec.family == "charn":
        coefs = list(spec.theta_loc) + list(spec.theta_vol)
        cand = z_candidates(coefs, support)
        a1, a2 = spec.lipschitz_coefs(cand)
        norms = _lp_norm_affine_abs(a1, a2, spec.p, cov.eps_law, cov.eps_params)
        delta = np.max(norms, axis=1)
        total = float(delta.sum())
        mats = [[[float((total ** (spec.p - 1.0)) * d)]] for d in delta]
        return certificate_from_matrices(mats, spec.p, spec.o,
                                         {"newdeal_sum": total,
                                          "delta_i": tuple(float(d) for d in delta)})

    if spec.family == "apgarch_x":
        s_plus, s_minus = half_moments(cov.eps_law, spec.power, cov.eps_params)
        bq, ap, am = spec.beta, spec.alpha_plus, spec.alpha_minus
        gamma = sum(bq[j] + s_plus * ap[j] + s_minus * am[j] for j in range(spec.q))
        a1 = np.array([[bq[0] + ap[0] * s_plus + am[0] * s_minus, 0.0, 0.0],
                       [s_plus, 0.0, 0.0],
                       [s_minus, 0.0, 0.0]])
        mats = [a1] + [np.array([[bq[j], ap[j], am[j]],
                                 [0.0, 0.0, 0.0],
                                 [0.0, 0.0, 0.0]]) for j in range(1, spec.q)]
        a = sum(bq) + ap[0] * s_plus + am[0] * s_minus
        b = sum(ap[1:])
        c = sum(am[1:])
        disc = a * a + 4.0 * (b * s_plus + c * s_minus)
        rho_formula = 0.5 * (a + math.sqrt(disc))
        return certificate_from_matrices(
            mats, 1.0, spec.o,
            {"gamma": float(gamma), "s_plus": s_plus, "s_minus": s_minus,
             "rho_formula": rho_formula})

    if spec.family == "parx":
        mats = [np.array([[spec.alpha[j], spec.beta[j]],
                          [spec.alpha[j], spec.beta[j]]]) for j in range(spec.q)]
        gamma = float(sum(spec.alpha) + sum(spec.beta))
        return certificate_from_matrices(mats, 1.0, spec.o, {"gamma": gamma})

    if spec.family == "binary_choice":
        if spec.has_interaction:
            return direct_certificate(1.0, spec.o, m=spec.q, kappa=1.0,
                                      scalars={"interaction_form": 1.0})
        grid = np.array(np.meshgrid(*[[0.0, 1.0]] * spec.q)).reshape(spec.q, -1).T
        sums = grid @ np.asarray(spec.a, dtype=float)
        phi_plus = float(sums.max())
        phi_minus = float(sums.min())
        delta, kk = _binary_refresh_probability(spec, cov, phi_plus, phi_minus)
        scal = {"phi_plus": phi_plus, "phi_minus": phi_minus}
        if delta is not None:
            scal["refresh_delta"] = delta
            scal["refresh_lag"] = float(kk)
            j = math.ceil((spec.q + kk) / spec.q)
            if delta > 0.0:
                return direct_certificate(1.0, spec.o, m=j * spec.q,
                                          kappa=(1.0 - delta), scalars=scal)
        return direct_certificate(1.0, spec.o, m=spec.q, kappa=1.0, scalars=scal)

    if spec.family == "categorical":
        eta_minus = kernel_floor(spec, cov)
        scal = {}
        if eta_minus is not None:
            scal["eta_minus"] = eta_minus
            scal["delta_coalescence"] = eta_minus ** spec.q
            g = spec.gammas(cov.dim) if spec.gamma else np.zeros((spec.n_categories, cov.dim))
            scal["kernel_lipschitz"] = 2.0 * float(np.max(np.sum(np.abs(g), axis=1)))
            return direct_certificate(1.0, spec.o, m=spec.q,
                                      kappa=1.0 - eta_minus ** spec.q, scalars=scal)
        return direct_certificate(1.0, spec.o, m=spec.q, kappa=1.0, scalars=scal)

    raise ConfigurationError(f"unknown family {spec.family!r}")


def _binary_refresh_probability(spec: BinaryChoice, cov: CovariateSpec,
                                phi_plus: float, phi_minus: float):
    """(delta, K) for the conditional-refresh condition, or (None, 0).

    upsilon_t = pi'Z_{t-1} + eps_t.  With finite covariate memory M the
    vector (upsilon_1..upsilon_q) is independent of the sigma-field K = M+2
    steps back, so the conditional probability equals the unconditional one;
    it is computable by quadrature for q = 1 and by the product rule for
    i.i.d. covariates.
    """
    from .noise import expect_of_z
    if cov.family in ("var1", "bounded_transform"):
        return None, 0
    mem = cov.memory()
    kk = mem + 2
    pi = np.asarray(spec.pi, dtype=float)

    def upsilon_cdf(x: float) -> float:
        if not pi.any():
            return float(law_cdf(np.array([x]), cov.eps_law, cov.eps_params)[0])
        if cov.dim != 1:
            raise ConfigurationError("refresh check supports scalar covariates")
        val, err = expect_of_z(
            cov, lambda z: float(law_cdf(np.array([x - pi[0] * z]),
                                         cov.eps_law, cov.eps_params)[0]))
        return val

    try:
        if spec.q == 1:
            hi = 1.0 - upsilon_cdf(-phi_minus)       # P(upsilon > -phi_-)
            lo = upsilon_cdf(-phi_plus)              # P(upsilon <= -phi_+)
            return max(0.0, hi) + max(0.0, lo), kk
        if cov.family == "iid" or not pi.any():
            s = 1.0 - upsilon_cdf(-phi_minus)
            t = upsilon_cdf(-phi_plus)
            return max(0.0, s) ** spec.q + max(0.0, t) ** spec.q, kk
    except ConfigurationError:
        return None, 0
    return None, 0


def kernel_floor(spec: Categorical, cov: CovariateSpec) -> float | None:
    """eta_minus = inf over (z in support, y, i) of K_z(i | y).

    Exact lag enumeration; z handled exactly when the kernel ignores it,
    by a dense grid over the declared box otherwise, None when unbounded.
    """
    lag_grids = np.array(np.meshgrid(
        *[np.arange(1, spec.n_categories + 1)] * spec.q)).reshape(spec.q, -1).T
    if not spec.gamma or not any(spec.gamma):
        zs = [np.zeros(cov.dim)]
    else:
        box = cov.support_box()
        if box is None:
            return None
        lo, hi = box
        axes = [np.linspace(lo[i], hi[i], 65) for i in range(cov.dim)]
        mesh = np.meshgrid(*axes)
        zs = np.stack([m.ravel() for m in mesh], axis=1)
    best = 1.0
    for y in lag_grids:
        for z in zs:
            best = min(best, float(kernel_probabilities(spec, z, y).min()))
    return best


# ---------------------------------------------------------------------------
# per-step Lipschitz factors (Lyapunov estimation)
# ---------------------------------------------------------------------------

def lipschitz_top_row(spec: ModelSpec, z: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """c[t, i]: top row of the random lag-companion Lipschitz matrix at step t."""
    zs = z[:, 0]
    if spec.family == "linear_random_coef":
        return np.abs(spec.kappa(zs))[:, None]
    if spec.family == "ar_arch_benchmark":
        return (np.abs(spec.a1(zs)) + np.sqrt(spec.b1(zs)) * np.abs(eps))[:, None]
    if spec.family == "charn":
        a1, a2 = spec.lipschitz_coefs(zs)
        return (a1 + a2 * np.abs(eps)[None, :]).T
    raise ConfigurationError(
        f"{spec.family} does not expose per-step Lipschitz factors")


# ---------------------------------------------------------------------------
# model metric
# ---------------------------------------------------------------------------

def state_distance(spec: ModelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Distance between stacked states: (sum |dx_i|^{o p})^{1/p}, and the
    exact-match indicator for finite-alphabet families."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.family in FINITE_ALPHABET:
        return 0.0 if np.array_equal(x, y) else 1.0
    d = np.abs(x - y) ** (spec.o * spec.p)
    return float(d.sum() ** (1.0 / spec.p))
