"""Innovation pairs (eps_t, eta_t) and covariate processes Z_t.

The driving randomness is an i.i.d. sequence xi_t = (eps_t, eta_t); the
covariate process is a causal function of the eta's,
Z_t = H'(eta_t, eta_{t-1}, ...), truncated at `truncation` lags for the
infinite-memory families.  Everything here is a pure function of a
:class:`~ergodyn.rng.SeedStream` and a time range.

eps_t may be linked to eta_t through a Gaussian-copula common shock
(eta's uniform blended with eps's uniform), which keeps eta_t a
deterministic function K(eps_t, U_t) at link weight 1 while preserving
the declared marginal law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import expit, gammaln, ndtr, ndtri

from .rng import BLOCK_WIDTH, SeedStream, uniform_block

MAX_COV_DIM = BLOCK_WIDTH - 2  # block layout: eps | eta_1..eta_e | link

EPS_LAWS = ("gaussian", "uniform01", "logistic", "rademacher", "lognormal")
ETA_LAWS = ("gaussian", "uniform", "lognormal", "rademacher")
FACTOR_LAWS = ("lognormal", "uniform_scaled")
COV_FAMILIES = ("iid", "finite_moving_average", "var1", "bounded_transform", "product_chain")


class ConfigurationError(ValueError):
    """Invalid model/covariate/run configuration."""


# ---------------------------------------------------------------------------
# scalar laws: inverse-CDF transforms and exact moments
# ---------------------------------------------------------------------------

def transform_uniform(u: np.ndarray, law: str, params: tuple = ()) -> np.ndarray:
    """Map uniforms on (0,1) to the requested law by inverse CDF."""
    if law == "gaussian":
        return ndtri(u)
    if law == "uniform01":
        return np.asarray(u, dtype=float)
    if law == "uniform":
        return 2.0 * u - 1.0
    if law == "logistic":
        return np.log(u / (1.0 - u))
    if law == "rademacher":
        return np.where(u >= 0.5, 1.0, -1.0)
    if law == "lognormal":
        mu, sigma = params if params else (0.0, 1.0)
        return np.exp(mu + sigma * ndtri(u))
    if law == "uniform_scaled":
        (c,) = params if params else (1.0,)
        return c * u
    raise ConfigurationError(f"unknown law {law!r}")


def law_cdf(x: np.ndarray, law: str, params: tuple = ()) -> np.ndarray:
    if law == "gaussian":
        return ndtr(x)
    if law == "logistic":
        return expit(x)
    if law == "uniform01":
        return np.clip(x, 0.0, 1.0)
    raise ConfigurationError(f"cdf not available for law {law!r}")


def law_pdf(x: np.ndarray, law: str, params: tuple = ()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if law == "gaussian":
        return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if law == "logistic":
        e = np.exp(-np.abs(x))
        return e / (1.0 + e) ** 2
    if law == "uniform":
        return np.where(np.abs(x) <= 1.0, 0.5, 0.0)
    if law == "uniform01":
        return np.where((x >= 0.0) & (x <= 1.0), 1.0, 0.0)
    if law == "lognormal":
        mu, sigma = params if params else (0.0, 1.0)
        out = np.zeros_like(x)
        pos = x > 0
        lx = np.log(x[pos])
        out[pos] = np.exp(-0.5 * ((lx - mu) / sigma) ** 2) / (x[pos] * sigma * math.sqrt(2 * math.pi))
        return out
    raise ConfigurationError(f"pdf not available for law {law!r}")


def abs_moment(law: str, r: float, params: tuple = ()) -> float:
    """E|X|^r, closed form where available, quadrature for the logistic law."""
    if r == 0:
        return 1.0
    if law == "gaussian":
        return math.exp(0.5 * r * math.log(2.0) + gammaln((r + 1.0) / 2.0) - 0.5 * math.log(math.pi))
    if law == "uniform":
        return 1.0 / (r + 1.0)
    if law == "uniform01":
        return 1.0 / (r + 1.0)
    if law == "rademacher":
        return 1.0
    if law == "lognormal":
        mu, sigma = params if params else (0.0, 1.0)
        return math.exp(r * mu + 0.5 * r * r * sigma * sigma)
    if law == "uniform_scaled":
        (c,) = params if params else (1.0,)
        return c ** r / (r + 1.0)
    if law == "logistic":
        val, _ = integrate.quad(lambda x: 2.0 * x ** r * law_pdf(x, "logistic"), 0.0, np.inf,
                                epsabs=1e-12, epsrel=1e-12)
        return val
    raise ConfigurationError(f"unknown law {law!r}")


def signed_moment(law: str, r: int, params: tuple = ()) -> float:
    """E[X^r] for integer r."""
    if law in ("gaussian", "uniform", "rademacher", "logistic"):
        if r % 2 == 1:
            return 0.0
        return abs_moment(law, r, params)
    return abs_moment(law, r, params)


def half_moments(law: str, delta: float, params: tuple = ()) -> tuple[float, float]:
    """(E[(X^+)^delta], E[(X^-)^delta]) by adaptive quadrature (tol 1e-10)."""
    def plus(x):
        return x ** delta * law_pdf(x, law, params)

    s_plus, _ = integrate.quad(plus, 0.0, np.inf, epsabs=1e-12, epsrel=1e-12)
    if law in ("gaussian", "uniform", "logistic", "rademacher"):
        s_minus = s_plus  # symmetric laws
    elif law in ("lognormal", "uniform01", "uniform_scaled"):
        s_minus = 0.0
    else:
        s_minus, _ = integrate.quad(lambda x: (-x) ** delta * law_pdf(x, law, params),
                                    -np.inf, 0.0, epsabs=1e-12, epsrel=1e-12)
    if law == "rademacher":
        s_plus = s_minus = 0.5
    return s_plus, s_minus


def mean_abs_difference(law: str, params: tuple = ()) -> float:
    """E|X - X'| for two independent copies, by double quadrature."""
    if law == "gaussian":
        return 2.0 / math.sqrt(math.pi)
    if law == "uniform01":
        return 1.0 / 3.0

    def inner(x):
        # E|x - X'| = int F(u) du trick is messier for general laws; integrate directly
        val, _ = integrate.quad(lambda y: abs(x - y) * law_pdf(y, law, params),
                                -np.inf, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
        return val * law_pdf(x, law, params)

    val, _ = integrate.quad(inner, -np.inf, np.inf, epsabs=1e-9, epsrel=1e-9, limit=200)
    return val


# ---------------------------------------------------------------------------
# covariate specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariateSpec:
    """Driving-noise pair and covariate shift specification.

    family:
        iid                    Z_t = eta_t
        finite_moving_average  Z_t = sum_j c_j eta_{t-j}     (scalar, coefficients c_0..c_M)
        var1                   Z_t = Phi Z_{t-1} + eta_t     (truncated at `truncation` lags)
        bounded_transform      componentwise center + half*tanh(V_t), V_t a var1 path
        product_chain          Z_t = a_t a_{t-1} ... a_{t-q+1}, a_t iid nonnegative
    """

    family: str = "iid"
    dim: int = 1
    coefficients: tuple = ()      # MA coefficients / var1 phi (scalar, diag tuple, or flat matrix)
    eta_law: str = "gaussian"
    eta_params: tuple = ()
    eps_law: str = "gaussian"
    eps_params: tuple = ()
    eps_eta_link: str = "independent"
    link_weight: float = 0.0
    truncation: int = 512         # B_H for infinite shifts
    chain_order: int = 1          # product_chain memory q
    factor_law: str = "lognormal"
    factor_params: tuple = (-1.0, 1.0954451150103321)  # sqrt(1.2)
    box: tuple = ()               # bounded_transform (lo, hi) pairs, flattened

    def __post_init__(self):
        if self.family not in COV_FAMILIES:
            raise ConfigurationError(f"unknown covariate family {self.family!r}")
        if self.eta_law not in ETA_LAWS:
            raise ConfigurationError(f"unknown eta_law {self.eta_law!r}")
        if self.eps_law not in EPS_LAWS:
            raise ConfigurationError(f"unknown eps_law {self.eps_law!r}")
        if not 1 <= self.dim <= MAX_COV_DIM:
            raise ConfigurationError(f"covariate dim must be in 1..{MAX_COV_DIM}")
        if self.eps_eta_link not in ("independent", "common_shock"):
            raise ConfigurationError(f"unknown eps_eta_link {self.eps_eta_link!r}")
        if not 0.0 <= self.link_weight <= 1.0:
            raise ConfigurationError("link weight must lie in [0,1]")
        if self.eps_eta_link == "common_shock" and self.eps_law == "rademacher":
            raise ConfigurationError("common_shock requires a continuous eps law")
        if self.truncation < 1:
            raise ConfigurationError("truncation must be >= 1")
        if self.family == "finite_moving_average" and len(self.coefficients) == 0:
            raise ConfigurationError("finite_moving_average needs coefficients")
        if self.family in ("var1", "bounded_transform"):
            rho = np.max(np.abs(np.linalg.eigvals(self._phi_matrix())))
            if rho >= 1.0:
                raise ConfigurationError(f"var1 coefficient spectral radius {rho:g} >= 1")
        if self.family == "bounded_transform":
            if len(self.box) != 2 * self.dim:
                raise ConfigurationError("bounded_transform needs a (lo,hi) pair per dimension")
            lo, hi = self._box_arrays()
            if np.any(hi < lo):
                raise ConfigurationError("bounded_transform box has hi < lo")
        if self.family == "product_chain":
            if self.chain_order < 1:
                raise ConfigurationError("product_chain order must be >= 1")
            if self.factor_law not in FACTOR_LAWS:
                raise ConfigurationError(f"unknown factor_law {self.factor_law!r}")

    # -- helpers -----------------------------------------------------------

    def _phi_matrix(self) -> np.ndarray:
        c = self.coefficients
        if len(c) == 1:
            return np.eye(self.dim) * float(c[0])
        if len(c) == self.dim:
            return np.diag(np.asarray(c, dtype=float))
        if len(c) == self.dim * self.dim:
            return np.asarray(c, dtype=float).reshape(self.dim, self.dim)
        raise ConfigurationError("var1 coefficients must be scalar, diagonal, or a full matrix")

    def _box_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        b = np.asarray(self.box, dtype=float).reshape(self.dim, 2)
        return b[:, 0], b[:, 1]

    def memory(self) -> int:
        """Lags of eta that one Z_t depends on (0 means Z_t = f(eta_t))."""
        if self.family == "iid":
            return 0
        if self.family == "finite_moving_average":
            return len(self.coefficients) - 1
        if self.family == "product_chain":
            return self.chain_order - 1
        return self.truncation

    def support_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Componentwise (lo, hi) support when bounded, else None."""
        if self.family == "bounded_transform":
            return self._box_arrays()
        bound = {"uniform": 1.0, "rademacher": 1.0}.get(self.eta_law)
        if self.family == "iid" and bound is not None:
            return -bound * np.ones(self.dim), bound * np.ones(self.dim)
        if self.family == "finite_moving_average" and bound is not None:
            s = float(np.sum(np.abs(self.coefficients))) * bound
            return -s * np.ones(self.dim), s * np.ones(self.dim)
        if self.family == "var1" and bound is not None:
            phi = self._phi_matrix()
            rho = float(np.max(np.abs(np.linalg.eigvals(phi))))
            norm = float(np.linalg.norm(phi, np.inf))
            if norm < 1.0:
                s = bound / (1.0 - norm)
                return -s * np.ones(self.dim), s * np.ones(self.dim)
            return None
        if self.family == "product_chain" and self.factor_law == "uniform_scaled":
            (c,) = self.factor_params if self.factor_params else (1.0,)
            hi = c ** self.chain_order
            return np.zeros(self.dim), hi * np.ones(self.dim)
        return None


def provably_nonnegative(spec: CovariateSpec) -> bool:
    """True when the covariate support provably sits in the nonnegative cone
    (required by intensity/volatility shifts with nonzero loadings)."""
    if spec.family == "product_chain":
        return True
    box = spec.support_box()
    if box is not None and bool(np.all(box[0] >= 0.0)):
        return True
    if spec.eta_law == "lognormal":
        if spec.family == "iid":
            return True
        if spec.family == "finite_moving_average":
            return all(c >= 0 for c in spec.coefficients)
        if spec.family == "var1":
            return bool(np.all(spec._phi_matrix() >= 0.0))
    return False


@dataclass(frozen=True)
class InnovationDraw:
    """One time step of the driving pair xi_t = (eps_t, eta_t)."""

    eps: float
    eta: np.ndarray


# ---------------------------------------------------------------------------
# path generation
# ---------------------------------------------------------------------------

def _blocks(stream: SeedStream, spec: CovariateSpec, t0: int, t1: int,
            prime_at: int | None = None) -> np.ndarray:
    u = uniform_block(stream, t0, t1)
    if prime_at is not None and t0 <= prime_at <= t1:
        u[prime_at - t0] = uniform_block(stream, prime_at, prime_at, prime=True)[0]
    return u


def _eps_from_blocks(u: np.ndarray, spec: CovariateSpec) -> np.ndarray:
    return transform_uniform(u[:, 0], spec.eps_law, spec.eps_params)


def _eta_from_blocks(u: np.ndarray, spec: CovariateSpec) -> np.ndarray:
    u_eta = u[:, 1:1 + spec.dim]
    if spec.eps_eta_link == "common_shock" and spec.link_weight > 0.0:
        w = spec.link_weight
        shock = ndtri(u[:, 0])[:, None]
        blended = w * shock + math.sqrt(1.0 - w * w) * ndtri(u_eta)
        u_eta = ndtr(blended)
        u_eta = np.clip(u_eta, 2.0 ** -53, 1.0 - 2.0 ** -53)
    return transform_uniform(u_eta, spec.eta_law, spec.eta_params)


def _factors_from_blocks(u: np.ndarray, spec: CovariateSpec) -> np.ndarray:
    return transform_uniform(u[:, 1], spec.factor_law, spec.factor_params)


def draw_innovation(stream: SeedStream, t: int, spec: CovariateSpec,
                    prime: bool = False) -> InnovationDraw:
    """The pair (eps_t, eta_t); a pure function of (stream, t, spec)."""
    u = uniform_block(stream, t, t, prime=prime)
    eps = float(_eps_from_blocks(u, spec)[0])
    eta = _eta_from_blocks(u, spec)[0]
    return InnovationDraw(eps=eps, eta=eta)


def eps_path(stream: SeedStream, spec: CovariateSpec, t0: int, t1: int,
             prime_at: int | None = None) -> np.ndarray:
    """eps_{t0..t1}; with prime_at=k the draw at index k is the independent copy."""
    return _eps_from_blocks(_blocks(stream, spec, t0, t1, prime_at), spec)


def covariate_path(stream: SeedStream, spec: CovariateSpec, t0: int, t1: int,
                   prime_at: int | None = None) -> np.ndarray:
    """Z_{t0..t1}, shape (t1-t0+1, dim).

    The path is a deterministic function of the eta draws at indices
    >= t0 - memory(); infinite shifts are truncated at `truncation` lags.
    """
    if t1 < t0:
        raise ConfigurationError("t1 must be >= t0")
    mem = spec.memory()
    lo = t0 - mem
    u = _blocks(stream, spec, lo, t1, prime_at)
    n = t1 - t0 + 1

    if spec.family == "product_chain":
        a = _factors_from_blocks(u, spec)
        q = spec.chain_order
        z = np.ones(n)
        for j in range(q):
            z = z * a[mem - j: mem - j + n]
        return z[:, None] if spec.dim == 1 else np.tile(z[:, None], (1, spec.dim))

    eta = _eta_from_blocks(u, spec)

    if spec.family == "iid":
        return eta

    if spec.family == "finite_moving_average":
        c = np.asarray(spec.coefficients, dtype=float)
        out = np.zeros((n, spec.dim))
        for j, cj in enumerate(c):
            out += cj * eta[mem - j: mem - j + n]
        return out

    # var1 / bounded_transform: filter from zero at the truncation horizon
    phi = spec._phi_matrix()
    from . import kernels
    v = kernels.var1_path(phi, eta)
    v = v[mem:]
    if spec.family == "bounded_transform":
        lo_b, hi_b = spec._box_arrays()
        center = 0.5 * (lo_b + hi_b)
        half = 0.5 * (hi_b - lo_b)
        return center + half * np.tanh(v)
    return v


def coupled_covariate_path(stream: SeedStream, spec: CovariateSpec,
                           t1: int) -> tuple[np.ndarray, np.ndarray]:
    """(Z_{0..t1}, Zbar_{0..t1}) where Zbar uses the independent copy eta_0'."""
    if t1 < 0:
        raise ConfigurationError("t1 must be >= 0")
    z = covariate_path(stream, spec, 0, t1)
    zbar = covariate_path(stream, spec, 0, t1, prime_at=0)
    return z, zbar


# ---------------------------------------------------------------------------
# analytic helpers for condition checkers
# ---------------------------------------------------------------------------

def expect_of_z(spec: CovariateSpec, fun, n_mc: int = 200_000,
                probe_seed: int = 977) -> tuple[float, float]:
    """(E[f(Z_0)], stderr); stderr 0 when a closed-form marginal is integrable.

    Closed forms: iid (any law), scalar-var1 with gaussian eta (gaussian
    marginal of the truncated shift), product_chain with lognormal factors
    (product of lognormals).  Everything else falls back to Monte Carlo on
    a dedicated probe stream.
    """
    if spec.family == "iid" and spec.dim == 1:
        val, _ = integrate.quad(lambda x: fun(x) * law_pdf(x, spec.eta_law, spec.eta_params),
                                -np.inf, np.inf, epsabs=1e-11, epsrel=1e-11, limit=200)
        return val, 0.0
    if spec.family == "var1" and spec.dim == 1 and spec.eta_law == "gaussian":
        phi = float(spec._phi_matrix()[0, 0])
        var = (1.0 - phi ** (2 * (spec.truncation + 1))) / (1.0 - phi * phi)
        sd = math.sqrt(var)
        val, _ = integrate.quad(lambda x: fun(x) * law_pdf(x / sd, "gaussian") / sd,
                                -np.inf, np.inf, epsabs=1e-11, epsrel=1e-11, limit=200)
        return val, 0.0
    if spec.family == "product_chain" and spec.factor_law == "lognormal":
        mu, sigma = spec.factor_params
        q = spec.chain_order
        m, s = q * mu, math.sqrt(q) * sigma
        val, _ = integrate.quad(
            lambda x: fun(x) * law_pdf(x, "lognormal", (m, s)), 0.0, np.inf,
            epsabs=1e-11, epsrel=1e-11, limit=200)
        return val, 0.0
    # Monte Carlo fallback
    stream = SeedStream(probe_seed, 0)
    z = covariate_path(stream, spec, 0, n_mc - 1)
    vals = np.asarray([fun(zz[0] if spec.dim == 1 else zz) for zz in z], dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc))


def dependence_tail_of_z(spec: CovariateSpec, h_max: int) -> np.ndarray | None:
    """Unit-normalized tail sums Theta_{r,h}(Z) for h = 0..h_max.

    Shapes only (the innovation norm is set to 1): iid has a single mass at
    h=0, a finite moving average has finite support, var1 decays
    geometrically.  Returns None for families without a closed form.
    """
    h = np.arange(h_max + 1)
    if spec.family == "iid":
        out = np.zeros(h_max + 1)
        out[0] = 1.0
        return out
    if spec.family == "finite_moving_average":
        c = np.abs(np.asarray(spec.coefficients, dtype=float))
        theta = np.zeros(h_max + 1)
        theta[: min(len(c), h_max + 1)] = c[: h_max + 1]
        return np.cumsum(theta[::-1])[::-1]
    if spec.family in ("var1", "bounded_transform"):
        phi = spec._phi_matrix()
        r = float(np.max(np.abs(np.linalg.eigvals(phi))))
        if r == 0.0:
            out = np.zeros(h_max + 1)
            out[0] = 1.0
            return out
        return r ** h / (1.0 - r)
    return None
