"""High-temperature master-equation coefficients and the drift/diffusion system.

The partially Fourier-transformed master equation over v = (r1, K1, r2, K2)
reads

    d rho~/dt + sum_ij M_ij v_j d rho~/dv_i = -(1/hbar^2) r^T D r rho~

with M the 4x4 drift matrix and D the 2x2 diffusion form over (r1, r2).
hbar = 1 here; in the printed matrix it divides the lambda_22 and 1/m
entries and multiplies the m omega^2 entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeRenormalizedFrequency, SingularReduction
from .model import ModelParams, Topology, as_params, reduced_masses, reduction_denominator, SINGULAR_TOL

R_IDX = (0, 2)
K_IDX = (1, 3)


@dataclass(frozen=True)
class EffectiveCoefficients:
    gamma_tilde_1: float
    gamma_tilde_2: float
    D_1: float
    D_2: float
    Gamma_eff_1: float
    Gamma_eff_2: float
    Delta_eff_1: float
    Delta_eff_2: float
    omega_tilde_sq_1: float
    omega_tilde_sq_2: float
    varpi_sq_1: float
    varpi_sq_2: float
    lambda_tilde_11: float


@dataclass(frozen=True)
class DriftSystem:
    M: np.ndarray
    diffusion: np.ndarray
    topology: Topology

    def diffusion_4x4(self) -> np.ndarray:
        """Diffusion form embedded at the r slots of v = (r1, K1, r2, K2)."""
        P = np.zeros((4, 4))
        P[np.ix_(R_IDX, R_IDX)] = self.diffusion
        return P


def effective_damping(p: ModelParams) -> tuple[float, float]:
    """gamma~_l = gamma_l / (1 - lambda_22^2 m1 m2)."""
    p = as_params(p)
    den = reduction_denominator(p)
    if abs(den) < SINGULAR_TOL:
        raise SingularReduction(f"1 - lambda_22^2 m1 m2 = {den:.3e}")
    r = p.reservoir
    return (r.gamma_1 / den, r.gamma_2 / den)


def diffusion_coefficients(p: ModelParams) -> tuple[float, float]:
    """D_l = 2 m_l gamma~_l k_B T_l. In the common case both entries hold D."""
    p = as_params(p)
    g1, g2 = effective_damping(p)
    o, r = p.oscillators, p.reservoir
    return (2 * o.m_1 * g1 * r.T_1, 2 * o.m_2 * g2 * r.T_2)


def _cutoff_eta(p: ModelParams):
    """eta_l = 2 mu_ll gamma_l, only needed for the cutoff shifts."""
    mu = reduced_masses(p)
    r = p.reservoir
    return (2 * mu[0, 0] * r.gamma_1, 2 * mu[1, 1] * r.gamma_2)


def lambda_tilde_11(p: ModelParams) -> float:
    p = as_params(p)
    r = p.reservoir
    if not r.cutoff_enabled or r.topology is not Topology.COMMON:
        return p.couplings.lambda_11
    eta = _cutoff_eta(p)[0]
    return p.couplings.lambda_11 - 2 * r.cutoff * eta / math.pi


def effective_couplings(p: ModelParams):
    """((Gamma_1, Gamma_2), (Delta_1, Delta_2)).

    Gamma_l = lambda_11 + 2 m_l gamma~_l lambda_{l'l}
    Delta_l = 2 lambda_22 m_l gamma~_l + lambda_{ll'}
    The common-reservoir expressions coincide once masses and rates are equal,
    except that lambda_11 is replaced by its shifted value when the cutoff is on.
    """
    p = as_params(p)
    g1, g2 = effective_damping(p)
    o, c = p.oscillators, p.couplings
    l11 = lambda_tilde_11(p)
    Gamma = (l11 + 2 * o.m_1 * g1 * c.lambda_21, l11 + 2 * o.m_2 * g2 * c.lambda_12)
    Delta = (2 * c.lambda_22 * o.m_1 * g1 + c.lambda_12, 2 * c.lambda_22 * o.m_2 * g2 + c.lambda_21)
    return Gamma, Delta


def renormalized_frequencies(p: ModelParams):
    """(omega~1^2, omega~2^2, varpi1^2, varpi2^2).

    omega~^2 = omega^2 - 2 eta Omega_C / (pi m) when the cutoff shift is on.
    varpi_l^2 = omega~_l^2 + 2 gamma~ (lambda_12 delta_l1 + lambda_21 delta_l2) for a
    common reservoir; for distinct reservoirs varpi = omega~.
    """
    p = as_params(p)
    o, c, r = p.oscillators, p.couplings, p.reservoir
    w = [o.omega_1 ** 2, o.omega_2 ** 2]
    if r.cutoff_enabled:
        eta = _cutoff_eta(p)
        w = [w[0] - 2 * eta[0] * r.cutoff / (math.pi * o.m_1),
             w[1] - 2 * eta[1] * r.cutoff / (math.pi * o.m_2)]
    vp = list(w)
    if r.topology is Topology.COMMON:
        g = effective_damping(p)[0]
        vp = [w[0] + 2 * g * c.lambda_12, w[1] + 2 * g * c.lambda_21]
    out = (w[0], w[1], vp[0], vp[1])
    bad = [x for x in out if not x > 0]
    if bad:
        raise NegativeRenormalizedFrequency(f"renormalized squared frequencies {out} not all positive")
    return out


def effective_coefficients(p: ModelParams) -> EffectiveCoefficients:
    p = as_params(p)
    g = effective_damping(p)
    D = diffusion_coefficients(p)
    Gamma, Delta = effective_couplings(p)
    w = renormalized_frequencies(p)
    return EffectiveCoefficients(g[0], g[1], D[0], D[1], Gamma[0], Gamma[1], Delta[0], Delta[1],
                                 w[0], w[1], w[2], w[3], lambda_tilde_11(p))


def build_drift_system(p: ModelParams) -> DriftSystem:
    """Drift matrix exactly as printed, rows and columns ordered (r1, K1, r2, K2).

    The common-reservoir matrix has the same layout with varpi in place of omega~.
    """
    p = as_params(p)
    e = effective_coefficients(p)
    o, c = p.oscillators, p.couplings
    w1, w2 = (e.varpi_sq_1, e.varpi_sq_2)
    M = np.array([
        [2 * e.gamma_tilde_1, -1 / o.m_1, e.Delta_eff_2, -c.lambda_22],
        [o.m_1 * w1, 0.0, e.Gamma_eff_2, -c.lambda_12],
        [e.Delta_eff_1, -c.lambda_22, 2 * e.gamma_tilde_2, -1 / o.m_2],
        [e.Gamma_eff_1, -c.lambda_21, o.m_2 * w2, 0.0],
    ])
    if p.topology is Topology.COMMON:
        diffusion = e.D_1 * np.ones((2, 2))
    else:
        diffusion = np.diag([e.D_1, e.D_2])
    return DriftSystem(M, diffusion, p.topology)
