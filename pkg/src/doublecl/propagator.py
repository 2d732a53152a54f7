"""Closed-form evolution of Gaussian superpositions.

Coordinates: R = (x + y)/2 and r = x - y per oscillator; the partial Fourier
transform is taken over R,

    rho~(K, r) = (1/2pi) int exp(+i K.R) rho(R, r) d^2R,
    rho(R, r)  = (1/2pi) int exp(-i K.R) rho~(K, r) d^2K.

This kernel sign is the one under which the drift matrix of ``master_eq``
generates the master equation, see the oracle PDE residual.

Every component pair (a, b) of the density is a Gaussian in v = (r1, K1, r2, K2):

    rho~_ab(v, t) = exp(-v^T Q_t v + L_ab(t).v + c_ab)

with Q_t = E_t^T Q_0 E_t + W_t, L_ab(t) = E_t^T L_ab(0), E_t = exp(-M t) the
characteristic preimage map and W_t the accumulated diffusion. c_ab does
not change in time. The inverse transform over (K1, K2) is done analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridTooLarge, InvalidMagnitudes, NonIntegrableForm
from .master_eq import K_IDX, R_IDX, build_drift_system
from .model import as_params
from .spectral import diffusion_gramian, eigendecompose, flow_matrix

MAX_GRID_POINTS = 10_000_000
CROSS_WIDTH_FLOOR = 1e-14
# u = (R1, r1, R2, r2) as positions into y = (R1, R2, r1, r2)
_U_FROM_Y = [0, 2, 1, 3]
COORDS = ("R1", "r1", "R2", "r2")


@dataclass(frozen=True)
class Component:
    amplitude: complex
    q_1: float
    q_2: float


@dataclass(frozen=True)
class GaussianSuperposition:
    """sum_a P_a prod_l exp(-(x_l + q_la)^2 / sigma_l^2); component a peaks at x = -q_a."""

    components: tuple
    sigma_1: float = 1.0
    sigma_2: float = 1.0

    def __post_init__(self):
        comps = tuple(c if isinstance(c, Component) else Component(*c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise InvalidMagnitudes("a superposition needs at least one component")
        for s in (self.sigma_1, self.sigma_2):
            if not (math.isfinite(s) and s > 0):
                raise InvalidMagnitudes(f"widths must be positive, got {s}")
        g = self.gram()
        if np.min(np.linalg.eigvalsh(g)) <= 1e-14 * np.max(np.abs(g)) and len(comps) > 1:
            raise InvalidMagnitudes("component overlaps are linearly dependent")
        if self.norm() <= 0:
            raise InvalidMagnitudes("state has zero norm")

    @property
    def sigmas(self):
        return np.array([self.sigma_1, self.sigma_2])

    @property
    def amplitudes(self):
        return np.array([c.amplitude for c in self.components], dtype=complex)

    @property
    def centers(self):
        return np.array([[c.q_1, c.q_2] for c in self.components], dtype=float)

    def gram(self) -> np.ndarray:
        """Overlaps <psi_b | psi_a> of the unnormalized component wavefunctions."""
        q, s = self.centers, self.sigmas
        d = q[:, None, :] - q[None, :, :]
        return np.prod(s * math.sqrt(math.pi / 2) * np.exp(-d ** 2 / (2 * s ** 2)), axis=-1)

    def norm(self) -> float:
        P = self.amplitudes
        return float(np.real(P @ self.gram() @ P.conj()))

    def pairs(self):
        n = len(self.components)
        return [(a, b) for a in range(n) for b in range(n)]

    def wavefunction(self, x1, x2):
        x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
        out = np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        for c in self.components:
            out = out + c.amplitude * np.exp(-(x1 + c.q_1) ** 2 / self.sigma_1 ** 2
                                             - (x2 + c.q_2) ** 2 / self.sigma_2 ** 2)
        return out


# ---------------------------------------------------------------- Gaussian forms

@dataclass(frozen=True)
class PositionForm:
    """rho(u) = sum_p exp(-u^T G u + h_p.u + g_p) over u = (R1, r1, R2, r2)."""

    G: np.ndarray
    h: np.ndarray
    g: np.ndarray

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        quad = np.einsum("...i,ij,...j->...", u, self.G, u)
        lin = u @ self.h.T
        return np.sum(np.exp(-quad[..., None] + lin + self.g), axis=-1)

    def term(self, p: int, u):
        u = np.asarray(u, dtype=float)
        quad = np.einsum("...i,ij,...j->...", u, self.G, u)
        return np.exp(-quad + u @ self.h[p] + self.g[p])

    def peak(self, p: int):
        """(location, log modulus) of the p-th term's maximum modulus over real u."""
        ReG, Reh = self.G.real, self.h[p].real
        loc = 0.5 * np.linalg.solve(ReG, Reh)
        return loc, float(self.g[p].real + 0.5 * Reh @ loc)

    def marginalize(self, keep, integrate, fixed_zero=None):
        """Integrate coordinate ``integrate`` over the real line after pinning ``fixed_zero`` to 0."""
        n = self.G.shape[0]
        idx = [i for i in range(n) if i != fixed_zero]
        pos = {old: new for new, old in enumerate(idx)}
        G, h = self.G[np.ix_(idx, idx)], self.h[:, idx]
        i, kk = pos[integrate], [pos[k] for k in keep]
        a = G[i, i]
        if a.real <= 0:
            raise NonIntegrableForm("marginal integrand does not decay")
        gk = G[kk, i]
        return PositionForm(G[np.ix_(kk, kk)] - np.outer(gk, gk) / a,
                            h[:, kk] - np.outer(h[:, i], gk) / a,
                            self.g + h[:, i] ** 2 / (4 * a) + 0.5 * np.log(np.pi / a))


def _principal_sqrt_det(A: np.ndarray) -> complex:
    return complex(np.prod(np.sqrt(np.linalg.eigvals(A).astype(complex))))


def fourier_to_position(Q: np.ndarray, L: np.ndarray, c: np.ndarray) -> PositionForm:
    """Analytic inverse transform over (K1, K2) of exp(-v^T Q v + L.v + c)."""
    r, k = list(R_IDX), list(K_IDX)
    A = Q[np.ix_(k, k)]
    if np.min(np.linalg.eigvalsh(0.5 * (A.real + A.real.T))) <= 0:
        raise NonIntegrableForm("momentum block of the evolved form is not positive definite")
    Ainv = np.linalg.inv(A)
    # J = L_K + B y,  y = (R1, R2, r1, r2)
    B = np.hstack([-1j * np.eye(2), -2 * Q[np.ix_(k, r)]])
    Gy = np.zeros((4, 4), dtype=complex)
    Gy[2:, 2:] = Q[np.ix_(r, r)]
    Gy = Gy - 0.25 * B.T @ Ainv @ B
    L = np.atleast_2d(L)
    hy = np.zeros((L.shape[0], 4), dtype=complex)
    hy[:, 2:] = L[:, r]
    hy = hy + 0.5 * (L[:, k] @ Ainv.T) @ B
    g = np.asarray(c, dtype=complex) + 0.25 * np.einsum("pi,ij,pj->p", L[:, k], Ainv, L[:, k]) \
        - np.log(2 * _principal_sqrt_det(A))
    G = Gy[np.ix_(_U_FROM_Y, _U_FROM_Y)]
    return PositionForm(0.5 * (G + G.T), hy[:, _U_FROM_Y], g)


# ---------------------------------------------------------------- initial data

def initial_fourier_data(state: GaussianSuperposition):
    """(Q0, L0 per pair, c0 per pair) of the transformed initial density."""
    s = state.sigmas
    Q0 = np.diag([1 / (2 * s[0] ** 2), s[0] ** 2 / 8, 1 / (2 * s[1] ** 2), s[1] ** 2 / 8])
    q, P = state.centers, state.amplitudes
    N = state.norm()
    pairs = state.pairs()
    L0 = np.zeros((len(pairs), 4), dtype=complex)
    c0 = np.zeros(len(pairs), dtype=complex)
    for n, (a, b) in enumerate(pairs):
        d, sm = q[a] - q[b], q[a] + q[b]
        L0[n] = [-d[0] / s[0] ** 2, -0.5j * sm[0], -d[1] / s[1] ** 2, -0.5j * sm[1]]
        c0[n] = np.log(P[a] * np.conj(P[b]) * s[0] * s[1] / (4 * N) + 0j) - np.sum(d ** 2 / (2 * s ** 2))
    return Q0, L0, c0


def initial_density_position(state: GaussianSuperposition, R1, r1, R2, r2):
    """(1/N) sum_ab P_a P_b* psi_a(x) psi_b(y), x = R + r/2, y = R - r/2."""
    R1, r1, R2, r2 = np.broadcast_arrays(*(np.asarray(v, float) for v in (R1, r1, R2, r2)))
    x1, y1, x2, y2 = R1 + r1 / 2, R1 - r1 / 2, R2 + r2 / 2, R2 - r2 / 2
    out = np.zeros(R1.shape, dtype=complex)
    s1, s2 = state.sigma_1, state.sigma_2
    for ca in state.components:
        fa = np.exp(-(x1 + ca.q_1) ** 2 / s1 ** 2 - (x2 + ca.q_2) ** 2 / s2 ** 2)
        for cb in state.components:
            fb = np.exp(-(y1 + cb.q_1) ** 2 / s1 ** 2 - (y2 + cb.q_2) ** 2 / s2 ** 2)
            out += ca.amplitude * np.conj(cb.amplitude) * fa * fb
    return out / state.norm()


def initial_density_fourier(state: GaussianSuperposition, K1, r1, K2, r2):
    """Transformed initial density, component pair by component pair."""
    K1, r1, K2, r2 = np.broadcast_arrays(*(np.asarray(v, float) for v in (K1, r1, K2, r2)))
    s = state.sigmas
    q, P = state.centers, state.amplitudes
    K, r = (K1, K2), (r1, r2)
    out = np.zeros(K1.shape, dtype=complex)
    for a in range(len(q)):
        for b in range(len(q)):
            term = P[a] * np.conj(P[b]) * np.ones(K1.shape, dtype=complex)
            for l in range(2):
                d, sm = q[a, l] - q[b, l], q[a, l] + q[b, l]
                term *= s[l] / 2 * np.exp(-(r[l] + d) ** 2 / (2 * s[l] ** 2)
                                          - 0.5j * sm * K[l] - s[l] ** 2 * K[l] ** 2 / 8)
            out += term
    return out / state.norm()


# ---------------------------------------------------------------- evolution

@dataclass(frozen=True)
class PeakWidths:
    """Widths read off the evolved position-space form.

    Diagonal widths follow 2/Sigma_ll^2 = G_RlRl and 1/(2 sigma_ll^2) = G_rlrl, so
    both reduce to the input sigmas at t = 0. Cross couplings are reported as
    inverse squares (1/Sigma_12^2, 1/sigma_12^2), set to exactly 0 below 1e-14.
    """

    Sigma: float
    Sigma_11: float
    Sigma_22: float
    Sigma_12_inv_sq: float
    sigma_11: float
    sigma_22: float
    sigma_12_inv_sq: float
    printed: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvolvedGaussianForm:
    t: float
    Q: np.ndarray
    L: np.ndarray
    c: np.ndarray
    pairs: tuple
    E: np.ndarray
    W: np.ndarray

    @property
    def Phi(self) -> np.ndarray:
        """Coefficients of v_k v_k' (k <= k') in the exponent, as a symmetric array."""
        P = 2 * self.Q
        np.fill_diagonal(P, np.diag(self.Q))
        return P

    @property
    def theta(self) -> np.ndarray:
        return -self.L.real

    @property
    def theta_tilde(self) -> np.ndarray:
        return self.L.imag

    @property
    def Upsilon(self) -> np.ndarray:
        return np.exp(self.c)

    @cached_property
    def position(self) -> PositionForm:
        return fourier_to_position(self.Q, self.L, self.c)

    @property
    def Sigma_t(self) -> float:
        A = self.Q[np.ix_(K_IDX, K_IDX)]
        return 2 * math.sqrt(np.linalg.det(A))

    def fourier(self, v):
        v = np.asarray(v, dtype=float)
        quad = np.einsum("...i,ij,...j->...", v, self.Q, v)
        return np.sum(np.exp(-quad[..., None] + v @ self.L.T + self.c), axis=-1)

    def pair_index(self, a, b) -> int:
        return self.pairs.index((a, b))


class Propagator:
    """Caches the drift system and its spectrum for one model."""

    def __init__(self, model):
        self.params = as_params(model)
        self.drift = build_drift_system(self.params)
        self.spectrum = eigendecompose(self.drift.M)

    def preimage(self, t: float) -> np.ndarray:
        return flow_matrix(self.spectrum, -t)

    def gramian(self, t: float) -> np.ndarray:
        return diffusion_gramian(self.spectrum, self.drift.diffusion, t)

    def evolve(self, state: GaussianSuperposition, t: float) -> EvolvedGaussianForm:
        state = getattr(state, "realized", state)
        Q0, L0, c0 = initial_fourier_data(state)
        E = self.preimage(t)
        W = self.gramian(t)
        Q = E.T @ Q0 @ E + W
        Q = 0.5 * (Q + Q.T)
        L = L0 @ E
        A = Q[np.ix_(K_IDX, K_IDX)]
        if np.min(np.linalg.eigvalsh(A)) <= 0:
            raise NonIntegrableForm(f"momentum block lost positive definiteness at t={t}")
        return EvolvedGaussianForm(t, Q, L, c0, tuple(state.pairs()), E, W)


def gaussian_coefficients(model, state, t) -> EvolvedGaussianForm:
    return Propagator(model).evolve(state, t)


def evolve_fourier(model, state, t, K1, r1, K2, r2):
    form = gaussian_coefficients(model, state, t)
    v = np.stack(np.broadcast_arrays(*(np.asarray(x, float) for x in (r1, K1, r2, K2))), axis=-1)
    return form.fourier(v)


def evolve_position(model, state, t, R1, r1, R2, r2):
    form = gaussian_coefficients(model, state, t)
    u = np.stack(np.broadcast_arrays(*(np.asarray(x, float) for x in (R1, r1, R2, r2))), axis=-1)
    return form.position(u)


def marginal_form(form: EvolvedGaussianForm, which: int) -> PositionForm:
    """Reduced density of oscillator ``which`` (1 or 2) over (R, r)."""
    if which == 1:
        return form.position.marginalize((0, 1), 2, 3)
    if which == 2:
        return form.position.marginalize((2, 3), 0, 1)
    raise ValueError("which must be 1 or 2")


def marginal_density(model, state, t, which, R, r):
    form = marginal_form(gaussian_coefficients(model, state, t), which)
    u = np.stack(np.broadcast_arrays(np.asarray(R, float), np.asarray(r, float)), axis=-1)
    return form(u)


def peak_widths(model, state, t) -> PeakWidths:
    form = gaussian_coefficients(model, state, t)
    return widths_from_form(form)


def widths_from_form(form: EvolvedGaussianForm) -> PeakWidths:
    G = form.position.G.real
    GR = G[np.ix_([0, 2], [0, 2])]
    Gr = G[np.ix_([1, 3], [1, 3])]
    cross_R = -GR[0, 1]
    cross_r = 4 * Gr[0, 1]
    return PeakWidths(
        Sigma=form.Sigma_t,
        Sigma_11=math.sqrt(2 / GR[0, 0]),
        Sigma_22=math.sqrt(2 / GR[1, 1]),
        Sigma_12_inv_sq=0.0 if abs(cross_R) < CROSS_WIDTH_FLOOR else float(cross_R),
        sigma_11=math.sqrt(1 / (2 * Gr[0, 0])),
        sigma_22=math.sqrt(1 / (2 * Gr[1, 1])),
        sigma_12_inv_sq=0.0 if abs(cross_r) < CROSS_WIDTH_FLOOR else float(cross_r),
        printed=printed_widths(form.Phi),
    )


def _sqrt_or_nan(x):
    return math.sqrt(x) if x >= 0 else math.nan


def printed_widths(Phi: np.ndarray) -> dict:
    """Width combinations exactly as printed, indices 1..4 = (r1, K1, r2, K2)."""
    F = lambda i, j: Phi[i - 1, j - 1]
    S2 = 4 * F(4, 4) * F(2, 2) - F(2, 4) ** 2
    out = {"Sigma": _sqrt_or_nan(S2)}
    out["Sigma_11"] = _sqrt_or_nan(2 * S2 / F(4, 4))
    out["Sigma_22"] = _sqrt_or_nan(2 * S2 / F(2, 2))
    out["Sigma_12"] = _sqrt_or_nan(2 * S2 / F(2, 4)) if F(2, 4) != 0 else math.inf
    out["sigma_11"] = _sqrt_or_nan(2 * F(1, 1) - 2 * (F(2, 2) * F(1, 4) ** 2 + F(4, 4) * F(1, 2) ** 2
                                                       - F(1, 2) * F(1, 4) * F(2, 4)) / S2)
    out["sigma_22"] = _sqrt_or_nan(2 * F(3, 3) - 2 * (F(2, 2) * F(3, 4) ** 2 + F(4, 4) * F(2, 3) ** 2
                                                       - F(2, 3) * F(3, 4) * F(2, 4)) / S2)
    out["sigma_12"] = _sqrt_or_nan(2 * F(1, 3)
                                   - 2 * (2 * F(2, 2) * F(1, 4) - F(1, 2) * F(2, 4)) / S2 * F(3, 4)
                                   - 2 * (2 * F(4, 4) * F(1, 2) - F(1, 4) * F(2, 4)) / S2 * F(2, 3))
    return out


def printed_coefficients(prop: Propagator, state: GaussianSuperposition, t: float) -> dict:
    """Phi, theta and theta~ from the printed expanded formulas (audit only).

    The undefined zeta_ij is reconstructed from the Z integral as
    (D1 eta_1i eta_1j + D2 eta_3i eta_3j) / (Lambda_i + Lambda_j) (common form:
    D (eta_1i + eta_3i)(eta_1j + eta_3j) / (...)), with exponent (Lambda_i + Lambda_j) t.
    """
    s = prop.spectrum
    eta, eps, lam = s.eta, s.epsilon, s.lambdas
    sg = state.sigmas
    Pd = prop.drift.diffusion_4x4()
    Nmat = eta.T @ Pd @ eta
    x = lam[:, None] + lam[None, :]
    zeta = np.where(np.abs(x) < 1e-12, 0, Nmat / np.where(np.abs(x) < 1e-12, 1, x))
    Phi = np.zeros((4, 4), dtype=complex)
    for k in range(4):
        for kp in range(k, 4):
            acc = 0
            for i in range(4):
                for j in range(i, 4):
                    base = (eta[0, i] * eta[0, j] / sg[0] ** 2 + sg[0] ** 2 / 4 * eta[1, i] * eta[1, j]
                            + eta[2, i] * eta[2, j] / sg[1] ** 2 + sg[1] ** 2 / 4 * eta[3, i] * eta[3, j])
                    e = np.exp(-(lam[i] + lam[j]) * t)
                    term = base * e + 2 * zeta[i, j] * (1 - e)
                    comb = eps[i, k] * eps[j, kp] - (0 if k == kp else 1) * eps[i, kp] * eps[j, k]
                    acc += (-1) ** (i + j) * 2.0 ** (-(i == j)) * term * comb
            Phi[k, kp] = Phi[kp, k] = acc
    q = state.centers
    theta, theta_t = {}, {}
    decay = np.exp(-lam * t)
    for a, b in state.pairs():
        sign = (-1) ** a  # (-1)^(l+1) with l = a + 1
        d = (q[a] - q[b]) / sg ** 2
        sm = (q[a] + q[b]) / 2
        w = d[0] * eta[0] + d[1] * eta[2]
        wt = sm[0] * eta[1] + sm[1] * eta[3]
        theta[(a, b)] = sign * np.real_if_close((w * decay) @ eps)
        theta_t[(a, b)] = sign * np.real_if_close((wt * decay) @ eps)
    return {"Phi": np.real_if_close(Phi), "theta": theta, "theta_tilde": theta_t}


# ---------------------------------------------------------------- grids

@dataclass(frozen=True)
class GridSpec:
    axes: tuple = ("R1", "R2")
    ranges: tuple = ((-15.0, 15.0), (-15.0, 15.0))
    counts: tuple = (101, 101)
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        from .errors import InvalidAxis

        if len(self.axes) != 2 or len(set(self.axes)) != 2 or any(a not in COORDS for a in self.axes):
            raise InvalidAxis(f"axes must be two distinct names from {COORDS}, got {self.axes}")
        bad = [k for k in self.fixed if k not in COORDS or k in self.axes]
        if bad:
            raise InvalidAxis(f"fixed coordinates {bad} clash with the axes or are unknown")
        if any(int(n) < 1 for n in self.counts):
            raise InvalidAxis("grid counts must be >= 1")

    def coordinates(self):
        return [np.linspace(lo, hi, int(n)) if n > 1 else np.array([lo])
                for (lo, hi), n in zip(self.ranges, self.counts)]

    def points(self):
        a, b = self.coordinates()
        A, B = np.meshgrid(a, b, indexing="ij")
        u = np.zeros(A.shape + (4,))
        for name, val in self.fixed.items():
            u[..., COORDS.index(name)] = val
        u[..., COORDS.index(self.axes[0])] = A
        u[..., COORDS.index(self.axes[1])] = B
        return A, B, u


def grid_eval(model, state, t, grid: GridSpec, chunk: int = 200_000):
    """Density on a 2D grid; returns (coord1, coord2, values), row-major over axis 1."""
    n = int(grid.counts[0]) * int(grid.counts[1])
    if n > MAX_GRID_POINTS:
        raise GridTooLarge(f"{n} points exceeds {MAX_GRID_POINTS}")
    form = gaussian_coefficients(model, state, t).position
    A, B, u = grid.points()
    flat = u.reshape(-1, 4)
    vals = np.concatenate([form(flat[i:i + chunk]) for i in range(0, len(flat), chunk)])
    return A, B, vals.reshape(A.shape)
