"""Brute-force validators for the closed-form paths.

Nothing here relies on the spectral or Gaussian-algebra code. The checks
use only the drift/diffusion matrices from ``master_eq``, raw state
definitions, fixed-step RK4, Simpson quadrature and finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoxTooSmall, StepTooLarge
from .master_eq import build_drift_system

MAX_STEP_NORM = 0.1


@dataclass(frozen=True)
class OracleReport:
    name: str
    max_abs_err: float
    max_rel_err: float
    points_tested: int
    passed: bool
    tolerance: float
    mode: str = "rel"
    seed: int | None = None

    @classmethod
    def from_errors(cls, name, abs_err, rel_err, n, tol, mode="rel", seed=None):
        err = rel_err if mode == "rel" else abs_err
        return cls(name, float(abs_err), float(rel_err), int(n), bool(err <= tol), float(tol), mode, seed)


# ---------------------------------------------------------------- RK4

def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step_matrix(M, h):
    """One classical RK4 step of v' = M v is exactly this polynomial in hM."""
    A = h * np.asarray(M, dtype=float)
    A2 = A @ A
    A3 = A2 @ A
    return np.eye(len(A)) + A + A2 / 2 + A3 / 6 + A2 @ A2 / 24


def _check_steps(M, t_end, steps):
    if steps < 100:
        raise StepTooLarge(f"need at least 100 steps, got {steps}")
    h = abs(t_end) / steps
    hn = h * np.linalg.norm(M, 2)
    if hn >= MAX_STEP_NORM:
        raise StepTooLarge(f"h*|M| = {hn:.3g} >= {MAX_STEP_NORM}")
    return t_end / steps


def steps_for(M, t_end, h_norm=0.01):
    """Smallest step count with h*|M|_2 <= h_norm (at least 100)."""
    return max(100, int(math.ceil(abs(t_end) * np.linalg.norm(M, 2) / h_norm)))


def rk4_trajectory(M, v0, t_end, steps, block=256):
    """RK4 solution at all steps + 1 nodes; v0 may be a vector or a matrix of column vectors."""
    M = np.asarray(M, dtype=float)
    h = _check_steps(M, t_end, steps)
    S = rk4_step_matrix(M, h)
    v0 = np.asarray(v0)
    out = np.empty((steps + 1,) + v0.shape, dtype=np.result_type(v0, float))
    # powers S^0..S^(block-1) applied to each block start
    powers = [np.eye(len(M))]
    for _ in range(block - 1):
        powers.append(S @ powers[-1])
    powers = np.array(powers)
    Sb = S @ powers[-1]
    cur = v0
    n = 0
    while n <= steps:
        m = min(block, steps + 1 - n)
        out[n:n + m] = np.einsum("kij,j...->ki...", powers[:m], cur)
        cur = Sb @ cur
        n += m
    return out


def rk4_propagate(M, v0, t_end, steps):
    M = np.asarray(M, dtype=float)
    h = _check_steps(M, t_end, steps)
    return np.linalg.matrix_power(rk4_step_matrix(M, h), steps) @ np.asarray(v0)


def simpson_weights(n_intervals, h):
    if n_intervals % 2:
        raise ValueError("Simpson needs an even number of intervals")
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def z_by_quadrature(M, diffusion, v0, t, steps):
    """int_0^t r(tau)^T D r(tau) dtau along the RK4 characteristic from v0."""
    if t == 0:
        return 0.0
    steps += steps % 2
    traj = rk4_trajectory(M, v0, t, steps)
    r = traj[:, [0, 2]]
    integrand = np.einsum("ni,ij,nj->n", r, np.asarray(diffusion, dtype=float), r)
    return simpson_weights(steps, t / steps) @ integrand


def gramian_by_quadrature(M, diffusion, t, steps):
    """int_0^t exp(-M s)^T P exp(-M s) ds with RK4 for the flow and Simpson in s."""
    P = np.zeros((4, 4))
    P[np.ix_([0, 2], [0, 2])] = diffusion
    if t == 0:
        return P * 0
    steps += steps % 2
    E = rk4_trajectory(-np.asarray(M, float), np.eye(4), t, steps)
    w = simpson_weights(steps, t / steps)
    return np.einsum("n,nki,kl,nlj->ij", w, E, P, E)


# ---------------------------------------------------------------- Fourier quadrature

def _simpson_grid(lo, hi, n):
    n += n % 2
    x = np.linspace(lo, hi, n + 1)
    return x, simpson_weights(n, (hi - lo) / n)


def fourier_quadrature(f, direction, points, box, n=400, max_widen=6, decay_tol=1e-12):
    """2D transform of f by tensor-product Simpson.

    direction "forward":  (1/2pi) int exp(+i k.x) f(x) d^2x
    direction "inverse":  (1/2pi) int exp(-i k.x) f(x) d^2x
    ``f`` maps arrays (x1, x2) to values, ``points`` is (..., 2) of conjugate
    variables, ``box`` = ((lo1, hi1), (lo2, hi2)). The box is doubled about its
    center until the integrand edge values fall below decay_tol times the peak.
    """
    sign = {"forward": 1.0, "inverse": -1.0}[direction]
    box = [list(b) for b in box]
    for _ in range(max_widen + 1):
        x1, w1 = _simpson_grid(*box[0], n)
        x2, w2 = _simpson_grid(*box[1], n)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        F = f(X1, X2)
        peak = np.max(np.abs(F))
        edge = max(np.abs(F[0]).max(), np.abs(F[-1]).max(), np.abs(F[:, 0]).max(), np.abs(F[:, -1]).max())
        if edge <= decay_tol * peak:
            break
        box = [[c - (hi - lo), c + (hi - lo)] for (lo, hi), c in ((b, 0.5 * (b[0] + b[1])) for b in box)]
        n *= 2
    else:
        raise BoxTooSmall("integrand does not decay inside the widened box")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    # separable kernel: exp(i s k1 x1) exp(i s k2 x2)
    E1 = np.exp(1j * sign * np.outer(pts[:, 0], x1)) * w1
    E2 = np.exp(1j * sign * np.outer(pts[:, 1], x2)) * w2
    vals = np.sum((E1 @ F) * E2, axis=1) / (2 * math.pi)
    return vals.reshape(np.asarray(points).shape[:-1]) if np.ndim(points) > 1 else vals[0]


# ---------------------------------------------------------------- PDE residual

def _d1(f, x, i, h):
    e = np.zeros(x.shape[-1])
    e[i] = h
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)


def _d2(f, x, i, j, h):
    return _d1(lambda y: _d1(f, y, j, h), x, i, h)


def master_equation_rhs(model, rho, u, h=1e-4):
    """Right side of the master equation in (R, r) applied to the callable rho(u).

    With u = (R1, r1, R2, r2) and the drift matrix over v = (r1, K1, r2, K2),
    each term M_ij v_j d/dv_i of the transformed equation maps to
        r-r:  r_j d/dr_i
        r-K:  i d^2/(dR_j dr_i)
        K-r:  i R_i r_j
        K-K:  -(delta_ij + R_i d/dR_j)
    and the diffusion adds -r^T D r rho.
    """
    ds = build_drift_system(model)
    M, Dm = ds.M, ds.diffusion
    R = {1: 0, 3: 2}   # K slot -> R coordinate in u
    r = {0: 1, 2: 3}   # r slot -> r coordinate in u
    rho0 = rho(u)
    out = np.zeros_like(rho0, dtype=complex)
    for i in range(4):
        for j in range(4):
            m = M[i, j]
            if m == 0:
                continue
            if i in r and j in r:
                term = u[..., r[j]] * _d1(rho, u, r[i], h)
            elif i in r and j in R:
                term = 1j * _d2(rho, u, R[j], r[i], h)
            elif i in R and j in r:
                term = 1j * u[..., R[i]] * u[..., r[j]] * rho0
            else:
                term = -((i == j) * rho0 + u[..., R[i]] * _d1(rho, u, R[j], h))
            out = out - m * term
    rvec = u[..., [1, 3]]
    out = out - np.einsum("...i,ij,...j->...", rvec, Dm, rvec) * rho0
    return out


def pde_residual(model, density, t, points, h=1e-4, tol=1e-4, name="pde_residual", seed=None):
    """Relative residual max|d_t rho - rhs| / max|d_t rho| of ``density(t, u)`` at ``points``."""
    u = np.asarray(points, dtype=float)
    dt = (-density(t + 2 * h, u) + 8 * density(t + h, u) - 8 * density(t - h, u)
          + density(t - 2 * h, u)) / (12 * h)
    rhs = master_equation_rhs(model, lambda x: density(t, x), u, h)
    res = np.abs(dt - rhs)
    scale = np.max(np.abs(dt))
    return OracleReport.from_errors(name, res.max(), res.max() / scale, len(u), tol, seed=seed)


# ---------------------------------------------------------------- single oscillator pipeline

def single_oscillator_forms(m, omega, gamma, T, centers, amplitudes, sigma, t, h_norm=1e-3):
    """Scalar Gaussian data of a single damped oscillator from RK4 + Simpson.

    Returns a list of (a, b, c, alpha, beta, const) per component pair, meaning
    rho~(r, K) = exp(-(a r^2 + 2 b r K + c K^2) + alpha r + beta K + const).
    """
    M = np.array([[2 * gamma, -1 / m], [m * omega ** 2, 0.0]])
    D = 2 * m * gamma * T
    q = np.asarray(centers, dtype=float)
    P = np.asarray(amplitudes, dtype=complex)
    ov = sigma * math.sqrt(math.pi / 2) * np.exp(-(q[:, None] - q[None, :]) ** 2 / (2 * sigma ** 2))
    N = float(np.real(P @ ov @ P.conj()))
    if t > 0:
        steps = steps_for(M, t, h_norm)
        steps += steps % 2
        traj = rk4_trajectory(-M, np.eye(2), t, steps)
        E = traj[-1]
        w = simpson_weights(steps, t / steps)
        W = D * np.einsum("n,ni,nj->ij", w, traj[:, 0, :], traj[:, 0, :])
    else:
        E, W = np.eye(2), np.zeros((2, 2))
    Q0 = np.diag([1 / (2 * sigma ** 2), sigma ** 2 / 8])
    Q = E.T @ Q0 @ E + W
    out = []
    for ia in range(len(q)):
        for ib in range(len(q)):
            d, s = q[ia] - q[ib], q[ia] + q[ib]
            L = np.array([-d / sigma ** 2, -0.5j * s]) @ E
            const = np.log(P[ia] * np.conj(P[ib]) * sigma / (2 * N) + 0j) - d ** 2 / (2 * sigma ** 2)
            out.append((Q[0, 0], Q[0, 1], Q[1, 1], L[0], L[1], const))
    return out


def single_oscillator_density(forms, R, r):
    """Inverse transform (1/sqrt(2pi)) int exp(-iKR) rho~ dK of the scalar forms."""
    R, r = np.broadcast_arrays(np.asarray(R, float), np.asarray(r, float))
    total = np.zeros(R.shape, dtype=complex)
    for a, b, c, alpha, beta, const in forms:
        J = beta - 2 * b * r - 1j * R
        total += np.sqrt(np.pi / c) / np.sqrt(2 * np.pi) * np.exp(const - a * r ** 2 + alpha * r + J ** 2 / (4 * c))
    return total


def single_oscillator_log_peak(form):
    """log of the maximum modulus over real (R, r) of one scalar pair term."""
    a, b, c, alpha, beta, const = form
    ar, br = alpha.real, beta.real
    # maximum over R removes the imaginary part of beta; then a 1D quadratic in r
    k = a - b * b / c
    rs = (ar - b * br / c) / (2 * k)
    val = const.real - a * rs ** 2 + ar * rs + (br - 2 * b * rs) ** 2 / (4 * c)
    return val + 0.5 * math.log(math.pi / c) - 0.5 * math.log(2 * math.pi)


def single_oscillator_log_decoherence(m, omega, gamma, T, q, sigma, t):
    """log D(t) of a two-component cat at +-q on a lone damped oscillator."""
    def rel(tt):
        f = single_oscillator_forms(m, omega, gamma, T, [q, -q], [1, 1], sigma, tt)
        lp = [single_oscillator_log_peak(x) for x in f]
        return lp[1] - 0.5 * (lp[0] + lp[3])
    return rel(t) - rel(0.0)
