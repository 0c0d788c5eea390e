"""Contraction certificates: lag matrices, companion lift, spectral radii.

A q-lag conditional Lipschitz system with nonnegative k x k lag matrices
A_1..A_q is lifted to the one-lag companion

    B = [ A_1 ... A_{q-1}  A_q ]
        [ I_{k(q-1)}        0  ]

whose spectral radius is < 1 exactly when rho(A_1 + ... + A_q) < 1.  The
contraction lag m is the first power with max column sum of B^m below one
and kappa^p that column sum, which turns the lag system into an m-step
contraction with rate kappa in the L^p distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

M_POWER_CAP = 10_000


def companion_matrix(a_matrices: list[np.ndarray]) -> np.ndarray:
    """Block companion lift of the lag matrices."""
    a_matrices = [np.atleast_2d(np.asarray(a, dtype=float)) for a in a_matrices]
    q = len(a_matrices)
    k = a_matrices[0].shape[0]
    for a in a_matrices:
        if a.shape != (k, k):
            raise ValueError("lag matrices must share one square shape")
        if np.any(a < 0):
            raise ValueError("lag matrices must be nonnegative")
    b = np.zeros((k * q, k * q))
    for i, a in enumerate(a_matrices):
        b[:k, i * k:(i + 1) * k] = a
    if q > 1:
        b[k:, :k * (q - 1)] = np.eye(k * (q - 1))
    return b


def spectral_radius_eig(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(m, dtype=float)))))


def spectral_radius_power(m: np.ndarray, tol: float = 1e-13, max_iter: int = 200_000) -> float:
    m = np.ascontiguousarray(np.asarray(m, dtype=float))
    if m.size == 1:
        return abs(float(m[0, 0]))
    return float(kernels.power_iteration(m, tol, max_iter))


def spectral_radius(m: np.ndarray, cross_check_tol: float = 1e-8) -> float:
    """Spectral radius by eigen solve, cross-checked by power iteration."""
    rho_e = spectral_radius_eig(m)
    rho_p = spectral_radius_power(m)
    if abs(rho_e - rho_p) > cross_check_tol * max(1.0, rho_e):
        raise FloatingPointError(
            f"spectral radius mismatch: eig {rho_e!r} vs power iteration {rho_p!r}")
    return rho_e


def contraction_lag(b: np.ndarray, cap: int = M_POWER_CAP) -> tuple[int, float] | None:
    """(m, |1'B^m|_inf) with m the first power whose max column sum is < 1.

    Returns None when the cap is hit (rho(B) >= 1, or too close to it).
    """
    b = np.asarray(b, dtype=float)
    power = b.copy()
    for j in range(1, cap + 1):
        colsum = float(np.max(power.sum(axis=0)))
        if colsum < 1.0:
            return j, colsum
        power = power @ b
    return None


@dataclass(frozen=True)
class ContractionCertificate:
    """Everything a stationarity/dependence engine needs to know about a model's
    contraction structure: the lag matrices when the model has them, the
    companion spectral radii, the (m, kappa, L) triple, and the per-family
    scalar conditions (gamma, bench values, eta_minus, ...)."""

    p: float
    o: float
    a_matrices: tuple | None = None
    companion: np.ndarray | None = None
    rho_sum: float | None = None
    rho_companion: float | None = None
    m: int | None = None
    kappa: float | None = None
    one_step_bound: float | None = None
    scalars: dict = field(default_factory=dict)

    @property
    def contractive(self) -> bool:
        return self.kappa is not None and self.kappa < 1.0

    def decay_rate(self) -> float | None:
        """Per-step geometric rate of the L^p coupling distance."""
        if self.rho_companion is not None and self.rho_companion < 1.0:
            return self.rho_companion ** (1.0 / self.p)
        if self.kappa is not None and self.m is not None and self.kappa < 1.0:
            return self.kappa ** (1.0 / self.m)
        return None


def certificate_from_matrices(a_matrices, p: float, o: float,
                              scalars: dict | None = None) -> ContractionCertificate:
    """Assemble the certificate for a model with explicit lag matrices."""
    mats = tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in a_matrices)
    b = companion_matrix(list(mats))
    rho_sum = spectral_radius(sum(mats))
    rho_b = spectral_radius(b)
    m = kappa_p = None
    if rho_b < 1.0:
        found = contraction_lag(b)
        if found is not None:
            m, kappa_p = found
    one_step = float(np.max(b.sum(axis=0)))
    return ContractionCertificate(
        p=p,
        o=o,
        a_matrices=mats,
        companion=b,
        rho_sum=rho_sum,
        rho_companion=rho_b,
        m=m,
        kappa=None if kappa_p is None else kappa_p ** (1.0 / p),
        one_step_bound=max(1.0, one_step) ** (1.0 / p),
        scalars=dict(scalars or {}),
    )


def direct_certificate(p: float, o: float, m: int, kappa: float,
                       scalars: dict | None = None) -> ContractionCertificate:
    """Certificate for models whose contraction comes from a probability
    argument rather than lag matrices (finite-alphabet families)."""
    return ContractionCertificate(
        p=p, o=o, m=m, kappa=kappa, one_step_bound=1.0,
        scalars=dict(scalars or {}))
