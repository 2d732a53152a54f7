"""Benchmark superpositions, their resources, and decoherence measures.

For a two-component state the off-diagonal term (0, 1) of the density has
peak modulus exp(-S/2 [1 - Gamma(t)]) relative to its initial value, with
S = sum_l ((q_l1 - q_l2)/sigma_l)^2. Gamma(t) is read off the evolved Gaussian
form and D(t) = exp(-S/2 [1 - Gamma(t)]). D underflows quickly for the narrow
states, so log D is carried alongside.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidMagnitudes, WrongComponentCount
from .model import CouplingParams, ModelParams, OscillatorParams, ReservoirSpec, Topology, as_params
from .propagator import Component, EvolvedGaussianForm, GaussianSuperposition, Propagator


class StateKind(str, Enum):
    PSI1 = "Psi1"
    PSI2 = "Psi2"
    PSI3 = "Psi3"
    CAT = "Cat"


DEFAULT_MAGNITUDES = {
    StateKind.PSI1: {"sigma": 1.0, "q_major": 10.0, "q_minor": 5.0},
    StateKind.PSI2: {"sigma": 1.0, "q_major": 10.0, "q_minor": 5.0},
    StateKind.PSI3: {"sigma": 1.0 / 12, "q_1": math.sqrt(7.5), "q_2": math.sqrt(5.0)},
    StateKind.CAT: {"sigma": 0.06, "q": 5 / math.sqrt(2), "ground_width": None},
}


@dataclass(frozen=True)
class BenchmarkState:
    kind: StateKind
    realized: GaussianSuperposition
    params: dict = field(default_factory=dict)


def build_state(kind, sigma_1: float = 1.0, model: ModelParams | None = None, **overrides) -> BenchmarkState:
    """One of the benchmark superpositions, lengths in units of sigma_1.

    Psi1: peaks at (-q_major, q_minor) and (-q_minor, q_major).
    Psi2: peaks at (q_minor, q_major) and (q_major, q_minor).
    Psi3: peaks at -(q_1, q_2) and +(q_1, q_2), widths sigma_1/12.
    Cat:  peaks at +-q on oscillator 1, oscillator 2 in its ground state,
          whose width sqrt(2/(m_2 omega_2)) is taken from ``model`` (default m_2=1, omega_2=2).
    """
    kind = StateKind(kind)
    if not (math.isfinite(sigma_1) and sigma_1 > 0):
        raise InvalidMagnitudes(f"sigma_1 must be positive, got {sigma_1}")
    mag = dict(DEFAULT_MAGNITUDES[kind])
    unknown = set(overrides) - set(mag)
    if unknown:
        raise InvalidMagnitudes(f"unknown magnitudes {sorted(unknown)} for {kind.value}")
    mag.update(overrides)
    for k, v in mag.items():
        if v is not None and k in ("sigma", "ground_width") and not v > 0:
            raise InvalidMagnitudes(f"{k} must be positive, got {v}")
    s = mag["sigma"] * sigma_1
    if kind is StateKind.PSI1:
        a, b = mag["q_major"] * sigma_1, mag["q_minor"] * sigma_1
        comps = [Component(1.0, a, -b), Component(1.0, b, -a)]
        state = GaussianSuperposition(comps, s, s)
    elif kind is StateKind.PSI2:
        a, b = mag["q_major"] * sigma_1, mag["q_minor"] * sigma_1
        comps = [Component(1.0, -b, -a), Component(1.0, -a, -b)]
        state = GaussianSuperposition(comps, s, s)
    elif kind is StateKind.PSI3:
        a, b = mag["q_1"] * sigma_1, mag["q_2"] * sigma_1
        state = GaussianSuperposition([Component(1.0, a, b), Component(1.0, -a, -b)], s, s)
    else:
        q = mag["q"] * sigma_1
        gw = mag["ground_width"]
        if gw is None:
            o = (model.oscillators if model is not None else OscillatorParams())
            gw = math.sqrt(2 / (o.m_2 * o.omega_2))
            mag["ground_width"] = gw
        state = GaussianSuperposition([Component(1.0, q, 0.0), Component(1.0, -q, 0.0)], s, gw)
    mag["sigma_1"] = sigma_1
    return BenchmarkState(kind, state, mag)


def _state(state) -> GaussianSuperposition:
    return state.realized if isinstance(state, BenchmarkState) else state


def mean_energy(state, model) -> float:
    """<H_S1 + H_S2> in units of omega_1, including component overlaps."""
    st = _state(state)
    o = as_params(model).oscillators
    q, s, P = st.centers, st.sigmas, st.amplitudes
    d = q[:, None, :] - q[None, :, :]
    sm = q[:, None, :] + q[None, :, :]
    ov = s * math.sqrt(math.pi / 2) * np.exp(-d ** 2 / (2 * s ** 2))
    x2 = ov * (sm ** 2 + s ** 2) / 4
    p2 = ov * (s ** 2 - d ** 2) / s ** 4
    m = np.array(o.masses)
    w = np.array(o.omegas)
    h = p2 / (2 * m) + m * w ** 2 * x2 / 2
    H = h[..., 0] * ov[..., 1] + h[..., 1] * ov[..., 0]
    Nm = np.prod(ov, axis=-1)
    E = np.real(P.conj() @ H @ P) / np.real(P.conj() @ Nm @ P)
    return float(E / o.omega_1)


def peak_distance(state) -> float:
    st = _state(state)
    if len(st.components) != 2:
        raise WrongComponentCount(f"need exactly two components, got {len(st.components)}")
    q = st.centers
    return float(math.hypot(*(q[0] - q[1])))


def separation(state) -> float:
    """S = sum_l ((q_l1 - q_l2)/sigma_l)^2."""
    st = _state(state)
    if len(st.components) != 2:
        raise WrongComponentCount(f"need exactly two components, got {len(st.components)}")
    q = st.centers
    return float(np.sum(((q[0] - q[1]) / st.sigmas) ** 2))


def _pair_log_ratio(form: EvolvedGaussianForm) -> float:
    pos = form.position
    lp = [pos.peak(form.pair_index(a, b))[1] for a, b in ((0, 1), (0, 0), (1, 1))]
    return lp[0] - 0.5 * (lp[1] + lp[2])


def _visibility_raw(form: EvolvedGaussianForm) -> float:
    pos = form.position
    vals = []
    for a, b in ((0, 1), (0, 0), (1, 1)):
        loc, _ = pos.peak(form.pair_index(a, b))
        vals.append(abs(pos(loc)))
    return vals[0] / math.sqrt(vals[1] * vals[2])


VISIBILITY_TOL = 1e-3


@dataclass(frozen=True)
class DecoherencePoint:
    t: float
    gamma: float
    log_d: float
    visibility: float

    @property
    def d(self) -> float:
        return math.exp(self.log_d)


@dataclass(frozen=True)
class DecoherenceSeries:
    times: np.ndarray
    gamma_t: np.ndarray
    log_d_t: np.ndarray
    visibility_t: np.ndarray

    @property
    def d_t(self) -> np.ndarray:
        return np.exp(self.log_d_t)

    def divergent(self, tol: float = VISIBILITY_TOL) -> np.ndarray:
        """Samples where the visibility ratio and D differ by more than ``tol``.

        The visibility reads the full density at the peak locations, so it
        picks up the other pair terms once the diagonal peaks spread over
        the off-diagonal one; D reads the off-diagonal term alone.
        """
        return np.abs(self.d_t - self.visibility_t) > tol


class DecoherenceEvaluator:
    """Caches the propagator and the t = 0 reference for one (model, state)."""

    def __init__(self, model, state):
        self.state = _state(state)
        self.S = separation(self.state)
        self.prop = Propagator(model)
        f0 = self.prop.evolve(self.state, 0.0)
        self._ref_log = _pair_log_ratio(f0)
        self._ref_vis = _visibility_raw(f0)

    def at(self, t: float) -> DecoherencePoint:
        if t == 0:
            return DecoherencePoint(0.0, 1.0, 0.0, 1.0)
        form = self.prop.evolve(self.state, t)
        log_d = _pair_log_ratio(form) - self._ref_log
        gamma = 1.0 + 2.0 * log_d / self.S if self.S > 0 else 1.0
        return DecoherencePoint(float(t), gamma, log_d, _visibility_raw(form) / self._ref_vis)

    def gamma_closed(self, t: float) -> float:
        """Gamma(t) = theta^T Q^-1 theta / (2 S) with theta the real pair offset; an independent route."""
        form = self.prop.evolve(self.state, t)
        th = form.theta[form.pair_index(0, 1)]
        return float(th @ np.linalg.solve(form.Q, th) / (2 * self.S))


def gamma_of_t(model, state, t) -> float:
    return DecoherenceEvaluator(model, state).at(t).gamma


def decoherence_function(model, state, t) -> float:
    return DecoherenceEvaluator(model, state).at(t).d


def log_decoherence(model, state, t) -> float:
    return DecoherenceEvaluator(model, state).at(t).log_d


def visibility(model, state, t) -> float:
    return DecoherenceEvaluator(model, state).at(t).visibility


def decoherence_time(model, state, level: float = -1.0, t_lo: float = 1e-12, t_hi: float = 1e7) -> float:
    """First time at which log D falls to ``level`` (1/e by default), bracketed on a log grid."""
    ev = DecoherenceEvaluator(model, state)
    f = lambda lt: ev.at(10.0 ** lt).log_d - level
    grid = np.linspace(math.log10(t_lo), math.log10(t_hi), 200)
    vals = [f(x) for x in grid]
    for k in range(1, len(grid)):
        if vals[k - 1] > 0 >= vals[k]:
            return 10.0 ** brentq(f, grid[k - 1], grid[k], xtol=1e-12)
    return math.inf


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("DOUBLECL_THREADS", "1")))
    except ValueError:
        return 1


def decoherence_series(model, state, t_grid, workers: int | None = None) -> DecoherenceSeries:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at 0")
    ev = DecoherenceEvaluator(model, state)
    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            pts = list(pool.map(ev.at, t_grid))
    else:
        pts = [ev.at(t) for t in t_grid]
    return DecoherenceSeries(t_grid, np.array([p.gamma for p in pts]),
                             np.array([p.log_d for p in pts]), np.array([p.visibility for p in pts]))


def printed_gamma(form: EvolvedGaussianForm, state, offsets: str = "theta") -> dict:
    """Gamma from the printed decay-function formulas, fed with the evolved coefficients.

    ``offsets="theta"`` feeds the real drift offsets of pair (0, 1), which is
    the reading under which the printed expression is the Schur-complement
    split of theta^T Q^-1 theta (minus the r1 r2 cross width).
    ``offsets="theta_tilde"`` feeds the phase offsets literally. The relative
    widths sigma_l(t) are the reciprocals of the printed combinations, which
    reduce to 1/sigma_l at t = 0.
    """
    from .propagator import printed_widths

    S = separation(state)
    Phi = form.Phi
    pw = printed_widths(Phi)
    src = form.theta if offsets == "theta" else form.theta_tilde
    th = src[form.pair_index(0, 1)]
    F = lambda i, j: Phi[i - 1, j - 1]
    S2 = pw["Sigma"] ** 2
    vt = [
        th[0] - ((2 * F(4, 4) * F(1, 2) - F(1, 4) * F(2, 4)) * th[1]
                 + (2 * F(2, 2) * F(1, 4) - F(1, 2) * F(2, 4)) * th[3]) / S2,
        th[2] - ((2 * F(4, 4) * F(2, 3) - F(3, 4) * F(2, 4)) * th[1]
                 + (2 * F(2, 2) * F(3, 4) - F(2, 3) * F(2, 4)) * th[3]) / S2,
    ]
    sig = (1 / pw["sigma_11"], 1 / pw["sigma_22"])
    inv_Sig2 = {(1, 1): 1 / pw["Sigma_11"] ** 2, (2, 2): 1 / pw["Sigma_22"] ** 2,
                (1, 2): 1 / pw["Sigma_12"] ** 2, (2, 1): 1 / pw["Sigma_12"] ** 2}
    total = 0.0
    for l in (1, 2):
        total += sig[l - 1] ** 2 * vt[l - 1] ** 2
        for lp in (1, 2):
            total += 2 ** ((l == lp) + 1) * (-1) ** (l + lp) * th[2 * l - 1] * th[2 * lp - 1] * inv_Sig2[(l, lp)]
    g = total / S
    ok = bool(np.isfinite(g))
    return {"gamma": float(g) if ok else math.nan, "well_defined": ok}


# ---------------------------------------------------------------- figure presets

FIGURE_TIME_MAX = 3.0      # scaled time gamma_1 t
FIGURE_SAMPLES = 200
FIGURE_STATES = {1: StateKind.PSI1, 2: StateKind.PSI2, 3: StateKind.PSI3, 4: StateKind.PSI1}
FIGURE_LAMBDA = {1: 0.1, 2: 0.1, 3: 0.1, 4: 0.5}
BASE_OSCILLATORS = OscillatorParams(m_1=1.0, m_2=1.0, omega_1=1.0, omega_2=2.0)
BASE_GAMMA = 1e-3
BASE_T = 1000.0
CURVES = ("cat", "distinct_qq_pp", "distinct_qp_pq", "common_qq_pp", "common_qp_pq")


def coupling_form(form: str, lam: float) -> CouplingParams:
    if form == "qq_pp":
        return CouplingParams(lambda_11=lam, lambda_22=lam)
    if form == "qp_pq":
        return CouplingParams(lambda_12=lam, lambda_21=lam)
    if form == "none":
        return CouplingParams()
    raise ValueError(f"unknown coupling form {form!r}")


def reservoir_for(topology: str, gamma=BASE_GAMMA, T=BASE_T) -> ReservoirSpec:
    if Topology(topology) is Topology.COMMON:
        return ReservoirSpec.common(gamma, T)
    return ReservoirSpec.distinct(gamma, gamma, T, T)


@dataclass(frozen=True)
class CurveScenario:
    label: str
    model: ModelParams
    state: BenchmarkState


def figure_scenarios(n: int, lam: float | None = None) -> list[CurveScenario]:
    """Cat reference plus the four coupling/topology curves of figure ``n``."""
    if n not in FIGURE_STATES:
        raise ValueError(f"figure must be one of 1-4, got {n}")
    lam = FIGURE_LAMBDA[n] if lam is None else lam
    cat_model = ModelParams(BASE_OSCILLATORS, CouplingParams(), reservoir_for("distinct"))
    out = [CurveScenario("cat", cat_model, build_state(StateKind.CAT, model=cat_model))]
    state = build_state(FIGURE_STATES[n])
    for topo in ("distinct", "common"):
        for form in ("qq_pp", "qp_pq"):
            model = ModelParams(BASE_OSCILLATORS, coupling_form(form, lam), reservoir_for(topo))
            out.append(CurveScenario(f"{topo}_{form}", model, state))
    return out


def scaled_grid(gamma_1: float, t_max_scaled=FIGURE_TIME_MAX, samples=FIGURE_SAMPLES) -> np.ndarray:
    """Physical times for ``samples`` points evenly spaced in gamma_1 t over [0, t_max_scaled]."""
    return np.linspace(0.0, t_max_scaled, samples) / gamma_1
