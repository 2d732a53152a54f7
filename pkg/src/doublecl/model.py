"""Physical parameters of two coupled dissipative oscillators.

Natural units are used throughout (hbar = k_B = 1). Where hbar would appear
in a formula it is noted in the docstring so units can be restored by hand.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    HighTemperatureWarning,
    SingularReduction,
    ValidationError,
)

SINGULAR_TOL = 1e-12
MASS_MATCH_TOL = 1e-12


class Topology(str, Enum):
    DISTINCT = "distinct"
    COMMON = "common"


@dataclass(frozen=True)
class OscillatorParams:
    m_1: float = 1.0
    m_2: float = 1.0
    omega_1: float = 1.0
    omega_2: float = 2.0

    @property
    def masses(self):
        return (self.m_1, self.m_2)

    @property
    def omegas(self):
        return (self.omega_1, self.omega_2)


@dataclass(frozen=True)
class CouplingParams:
    """Bilinear couplings lambda_11 q1 q2 + lambda_12 q1 p2 + lambda_21 q2 p1 + lambda_22 p1 p2."""

    lambda_11: float = 0.0
    lambda_12: float = 0.0
    lambda_21: float = 0.0
    lambda_22: float = 0.0

    def scaled(self, factor: float) -> "CouplingParams":
        return CouplingParams(
            self.lambda_11 * factor,
            self.lambda_12 * factor,
            self.lambda_21 * factor,
            self.lambda_22 * factor,
        )


@dataclass(frozen=True)
class ReservoirSpec:
    """Ohmic reservoirs at high temperature.

    For the common topology gamma_1 == gamma_2 and T_1 == T_2 hold the single
    shared values; use :meth:`common` to build one.
    """

    topology: Topology = Topology.DISTINCT
    gamma_1: float = 1e-3
    gamma_2: float = 1e-3
    T_1: float = 1000.0
    T_2: float = 1000.0
    cutoff: float | None = None
    cutoff_enabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))

    @classmethod
    def distinct(cls, gamma_1, gamma_2, T_1, T_2, cutoff=None, cutoff_enabled=False):
        return cls(Topology.DISTINCT, gamma_1, gamma_2, T_1, T_2, cutoff, cutoff_enabled)

    @classmethod
    def common(cls, gamma, T, cutoff=None, cutoff_enabled=False):
        return cls(Topology.COMMON, gamma, gamma, T, T, cutoff, cutoff_enabled)

    @property
    def gamma(self) -> float:
        return self.gamma_1

    @property
    def T(self) -> float:
        return self.T_1


@dataclass(frozen=True)
class ModelParams:
    oscillators: OscillatorParams = field(default_factory=OscillatorParams)
    couplings: CouplingParams = field(default_factory=CouplingParams)
    reservoir: ReservoirSpec = field(default_factory=ReservoirSpec)

    @property
    def topology(self) -> Topology:
        return self.reservoir.topology


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass(frozen=True)
class ValidatedModel:
    """A ModelParams that passed every check, with its normal-mode frequencies."""

    params: ModelParams
    Omega: tuple
    notes: tuple = ()


def as_params(model) -> ModelParams:
    return model.params if isinstance(model, ValidatedModel) else model


def reduction_denominator(p: ModelParams) -> float:
    o = p.oscillators
    return 1.0 - p.couplings.lambda_22 ** 2 * o.m_1 * o.m_2


def reduced_masses(p: ModelParams) -> np.ndarray:
    """mu_ll' = m_l (lambda_22 m_l')^(1 - delta_ll') / (1 - lambda_22^2 m1 m2)."""
    p = as_params(p)
    den = reduction_denominator(p)
    if abs(den) < SINGULAR_TOL:
        raise SingularReduction(f"1 - lambda_22^2 m1 m2 = {den:.3e}")
    m = p.oscillators.masses
    lam = p.couplings.lambda_22
    mu = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            mu[i, j] = m[i] * (1.0 if i == j else lam * m[j]) / den
    return mu


def _finite(x) -> bool:
    return x is not None and math.isfinite(x)


def check(p: ModelParams) -> list[Violation]:
    """Return every violated condition (empty list means valid)."""
    from .normal_modes import stability_check

    p = as_params(p)
    out: list[Violation] = []
    o, c, r = p.oscillators, p.couplings, p.reservoir
    for name in ("m_1", "m_2", "omega_1", "omega_2"):
        v = getattr(o, name)
        if not (_finite(v) and v > 0):
            out.append(Violation("NonPositiveParameter", f"{name} must be finite and > 0, got {v}"))
    for name in ("lambda_11", "lambda_12", "lambda_21", "lambda_22"):
        v = getattr(c, name)
        if not _finite(v):
            out.append(Violation("NonPositiveParameter", f"{name} must be finite, got {v}"))
    for name in ("gamma_1", "gamma_2"):
        v = getattr(r, name)
        if not (_finite(v) and v >= 0):
            out.append(Violation("NonPositiveParameter", f"{name} must be finite and >= 0, got {v}"))
    for name in ("T_1", "T_2"):
        v = getattr(r, name)
        if not (_finite(v) and v > 0):
            out.append(Violation("NonPositiveParameter", f"{name} must be finite and > 0, got {v}"))
    if r.cutoff_enabled and not (_finite(r.cutoff) and r.cutoff > 0):
        out.append(Violation("NonPositiveParameter", f"cutoff must be > 0 when enabled, got {r.cutoff}"))
    if out:
        return out

    den = reduction_denominator(p)
    if abs(den) < SINGULAR_TOL:
        out.append(Violation("SingularReduction", f"1 - lambda_22^2 m1 m2 = {den:.3e}"))
    elif den < 0:
        out.append(Violation("NonPositiveParameter",
                             f"lambda_22^2 m1 m2 = {1 - den:.6g} > 1 makes the reduced masses negative"))

    if r.topology is Topology.COMMON:
        if abs(o.m_1 - o.m_2) > MASS_MATCH_TOL * max(o.m_1, o.m_2):
            out.append(Violation("NonPositiveParameter",
                                 f"common reservoir needs m_1 == m_2, got {o.m_1} and {o.m_2}"))
        if r.gamma_1 != r.gamma_2 or r.T_1 != r.T_2:
            out.append(Violation("NonPositiveParameter",
                                 "common reservoir needs a single gamma and T"))

    if not out:
        from .master_eq import renormalized_frequencies
        from .errors import NegativeRenormalizedFrequency

        try:
            renormalized_frequencies(p)
        except NegativeRenormalizedFrequency as exc:
            out.append(Violation("NegativeRenormalizedFrequency", str(exc)))

    rep = stability_check(p)
    if not rep.stable:
        out.append(Violation("Unstable", rep.reason))
    return out


def validate(p: ModelParams) -> ValidatedModel:
    """Validate ``p`` or raise ValidationError listing every violation."""
    p = as_params(p)
    violations = check(p)
    if violations:
        raise ValidationError(violations)
    from .normal_modes import normal_mode_frequencies

    notes = []
    w_max = max(p.oscillators.omegas)
    t_min = min(p.reservoir.T_1, p.reservoir.T_2)
    if t_min < 10 * w_max:
        msg = f"k_B T = {t_min:g} is below 10 hbar omega_max = {10 * w_max:g}; high-temperature equations may not apply"
        warnings.warn(msg, HighTemperatureWarning, stacklevel=2)
        notes.append(msg)
    return ValidatedModel(p, normal_mode_frequencies(p), tuple(notes))

