"""Characteristics of the drift system: eigendecomposition, flow and the Z integral."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ResonantPairWarning
from .master_eq import R_IDX

DEFECTIVE_COND = 1e8
RESONANT_TOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    lambdas: np.ndarray
    eta: np.ndarray
    epsilon: np.ndarray
    condition_number: float
    defective: bool
    M: np.ndarray

    @property
    def resonant_pairs(self):
        s = self.lambdas[:, None] + self.lambdas[None, :]
        return np.argwhere(np.abs(s) < RESONANT_TOL)


@dataclass(frozen=True)
class ZValue:
    value: complex
    resonant: bool = False


def _normalize_columns(vec: np.ndarray) -> np.ndarray:
    out = vec.astype(complex).copy()
    for k in range(out.shape[1]):
        col = out[:, k] / np.linalg.norm(out[:, k])
        big = np.abs(col) > 1e-12 * np.max(np.abs(col))
        first = col[np.argmax(big)]
        out[:, k] = col * (abs(first) / first)
    return out


def eigendecompose(M) -> Spectrum:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("drift matrix must be finite")
    lam, vec = np.linalg.eig(M)
    order = np.lexsort((lam.imag, np.round(lam.real, 14)))
    lam, vec = lam[order], _normalize_columns(vec[:, order])
    cond = float(np.linalg.cond(vec))
    defective = not np.isfinite(cond) or cond > DEFECTIVE_COND
    eps = np.linalg.inv(vec) if not defective else np.linalg.pinv(vec)
    if not defective:
        res = np.linalg.norm(M @ vec - vec * lam)
        defective = res > 1e-9 * max(np.linalg.norm(M), 1e-300)
    return Spectrum(lam.astype(complex), vec, eps, cond, bool(defective), M)


def flow_matrix(s: Spectrum, t: float) -> np.ndarray:
    """exp(M t) as a real matrix."""
    if t == 0:
        return np.eye(len(s.M))
    if s.defective:
        return expm(s.M * t)
    return ((s.eta * np.exp(s.lambdas * t)) @ s.epsilon).real


def propagate_characteristics(s: Spectrum, v0, t: float):
    """Solution of dv/dt = M v with v(0) = v0; works for negative t too."""
    v0 = np.asarray(v0)
    out = flow_matrix(s, t) @ v0
    return out.real if np.isrealobj(v0) else out


def _pair_integrals(lambdas: np.ndarray, t: float):
    """F_mn = int_0^t exp(-(L_m + L_n) tau) d tau, with the resonant limit t."""
    x = lambdas[:, None] + lambdas[None, :]
    resonant = np.abs(x) < RESONANT_TOL
    safe = np.where(resonant, 1.0, x)
    F = np.where(resonant, t, -np.expm1(-safe * t) / safe)
    return F, bool(np.any(resonant))


def diffusion_gramian(s: Spectrum, diffusion, t: float) -> np.ndarray:
    """W_t = int_0^t E_tau^T P E_tau d tau with E_tau = exp(-M tau), P the embedded diffusion.

    For a terminal point v the accumulated suppression exponent is v^T W_t v.
    """
    P = np.zeros((4, 4))
    P[np.ix_(R_IDX, R_IDX)] = np.asarray(diffusion, dtype=float)
    if t == 0:
        return np.zeros((4, 4))
    if s.defective:
        return _van_loan_gramian(s.M, P, t)
    # E_tau = eta diag(exp(-L tau)) eps, so W = eps^T [(eta^T P eta) o F] eps
    F, _ = _pair_integrals(s.lambdas, t)
    W = (s.epsilon.T @ ((s.eta.T @ P @ s.eta) * F) @ s.epsilon).real
    return 0.5 * (W + W.T)


def _van_loan_gramian(M: np.ndarray, P: np.ndarray, t: float) -> np.ndarray:
    A = -M
    C = np.zeros((8, 8))
    C[:4, :4] = -A.T
    C[:4, 4:] = P
    C[4:, 4:] = A
    F = expm(C * t)
    W = F[4:, 4:].T @ F[:4, 4:]
    return 0.5 * (W + W.T)


def z_function(s: Spectrum, diffusion, c0, t: float) -> ZValue:
    """Z = sum_mn c_m(t) c_n(t) N_mn (1 - exp(-(L_m + L_n) t)) / (L_m + L_n).

    c_m(t) = c_m(0) exp(L_m t) and N_mn = (eta^T P eta)_mn; for diagonal D this
    is D1 eta_1m eta_1n + D2 eta_3m eta_3n, for the common form
    D (eta_1m + eta_3m)(eta_1n + eta_3n).
    """
    c0 = np.asarray(c0, dtype=complex)
    P = np.zeros((4, 4))
    P[np.ix_(R_IDX, R_IDX)] = np.asarray(diffusion, dtype=float)
    if s.defective:
        v = expm(s.M * t) @ (s.eta @ c0)
        return ZValue(complex(v @ _van_loan_gramian(s.M, P, t) @ v), False)
    F, resonant = _pair_integrals(s.lambdas, t)
    if resonant:
        warnings.warn("resonant eigenvalue pair; using the linear-in-t limit", ResonantPairWarning, stacklevel=2)
    c = c0 * np.exp(s.lambdas * t)
    N = s.eta.T @ P @ s.eta
    return ZValue(complex(c @ (N * F) @ c), resonant)
