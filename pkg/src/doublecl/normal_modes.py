"""Normal modes and stability of the coupled oscillator pair.

The authoritative frequencies come from the classical equations of motion
z' = J H z over z = (q1, p1, q2, p2). The printed closed forms for the
coupling strengths g, the frequencies and the stability inequalities are
evaluated alongside as audit diagnostics only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Unstable
from .model import ModelParams, as_params

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
J4 = np.kron(np.eye(2), J2)
# inverse of J4; the canonical antisymmetric form
OMEGA_FORM = -J4

DEGENERATE_TOL = 1e-10


def hamiltonian_matrix(p: ModelParams) -> np.ndarray:
    """Hessian H of the system Hamiltonian, H_sys = z^T H z / 2 with z = (q1, p1, q2, p2)."""
    p = as_params(p)
    o, c = p.oscillators, p.couplings
    H = np.diag([o.m_1 * o.omega_1 ** 2, 1.0 / o.m_1, o.m_2 * o.omega_2 ** 2, 1.0 / o.m_2])
    H[0, 2] = H[2, 0] = c.lambda_11
    H[0, 3] = H[3, 0] = c.lambda_12
    H[2, 1] = H[1, 2] = c.lambda_21
    H[1, 3] = H[3, 1] = c.lambda_22
    return H


def dynamical_matrix(p: ModelParams) -> np.ndarray:
    return J4 @ hamiltonian_matrix(p)


def coupling_strengths(p: ModelParams) -> tuple[complex, complex]:
    """(g1, g2) exactly as printed in the appendix normal-mode derivation."""
    p = as_params(p)
    o, c = p.oscillators, p.couplings
    s = math.sqrt(o.m_1 * o.omega_1 * o.m_2 * o.omega_2)
    base = (c.lambda_11 - 1j * c.lambda_21 * o.m_1 * o.omega_1) / s
    extra = s * (c.lambda_22 + 1j * c.lambda_12 / (o.m_1 * o.omega_1))
    return (complex(base - extra), complex(base + extra))


def printed_frequencies_sq(p: ModelParams) -> tuple[float, float]:
    """Printed closed form for Omega_l^2 built on the printed g values. NaN if the radicand is negative."""
    p = as_params(p)
    w1, w2 = p.oscillators.omegas
    g1, g2 = (abs(g) ** 2 for g in coupling_strengths(p))
    rad = ((w1 ** 2 - w2 ** 2) / 2) ** 2 - g1 * (w1 - w2) ** 2 + g2 * (w1 + w2) ** 2
    if rad < 0:
        return (math.nan, math.nan)
    base = (w1 ** 2 + w2 ** 2) / 2 - g1 + g2
    # (-1)^l with l = 1, 2
    return (base + math.sqrt(rad), base - math.sqrt(rad))


def printed_inequalities(p: ModelParams) -> tuple[bool, bool]:
    p = as_params(p)
    w1, w2 = p.oscillators.omegas
    g1, g2 = (abs(g) ** 2 for g in coupling_strengths(p))
    b = ((w1 - w2) / 2) ** 2 + g2 >= g1 * ((w1 - w2) / (w1 + w2)) ** 2
    c = (g2 - g1) ** 2 + (w1 * w2) ** 2 >= 2 * w1 * w2 * (g1 + g2)
    return bool(b), bool(c)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    omega_sq: tuple
    reason: str
    printed_12b: bool
    printed_12c: bool
    printed_omega_sq: tuple
    printed_agrees: bool

    def __bool__(self):
        return self.stable


def _frequency_invariants(A: np.ndarray):
    A2 = A @ A
    s = -0.5 * np.trace(A2)          # Omega1^2 + Omega2^2
    det = float(np.linalg.det(A))    # Omega1^2 * Omega2^2
    disc = s * s - 4.0 * det
    return A2, s, det, disc


def stability_check(p: ModelParams) -> StabilityReport:
    """Stable iff J H has four nonzero, purely imaginary, semisimple eigenvalues.

    Uses the invariants of the characteristic polynomial u^2 - s u + det with
    u = Omega^2, which avoids thresholding eigenvalue real parts.
    """
    p = as_params(p)
    A = dynamical_matrix(p)
    A2, s, det, disc = _frequency_invariants(A)
    scale = max(s * s, np.max(np.abs(A2)) ** 2, 1e-300)
    reason = ""
    omega_sq = (math.nan, math.nan)
    if not np.all(np.isfinite(A)):
        reason = "non-finite dynamical matrix"
    elif s <= 0 or det <= 1e-14 * scale:
        reason = f"Omega^2 not both positive (sum {s:.6g}, product {det:.6g})"
    elif disc < -1e-12 * scale:
        reason = f"complex Omega^2 (discriminant {disc:.6g})"
    else:
        root = math.sqrt(max(disc, 0.0))
        hi = 0.5 * (s + root)
        lo = det / hi
        omega_sq = (hi, lo)
        if abs(disc) <= 1e-10 * scale:
            # double root: stable only if A^2 = -Omega^2 I (no Jordan block)
            u = 0.5 * s
            if np.max(np.abs(A2 + u * np.eye(4))) > 1e-7 * max(u, 1.0):
                reason = "degenerate normal modes with a Jordan block (secular growth)"
                omega_sq = (math.nan, math.nan)
    b, c = printed_inequalities(p)
    pw = printed_frequencies_sq(p)
    agrees = bool(np.all(np.isfinite(pw)) and np.all(np.isfinite(omega_sq))
                  and np.allclose(pw, omega_sq, rtol=1e-10, atol=1e-12))
    return StabilityReport(not reason, omega_sq, reason, b, c, pw, agrees)


def normal_mode_frequencies(p: ModelParams) -> tuple[float, float]:
    """(Omega1, Omega2) with Omega1 >= Omega2 > 0; raises Unstable."""
    rep = stability_check(p)
    if not rep.stable:
        raise Unstable(rep.reason)
    return (math.sqrt(rep.omega_sq[0]), math.sqrt(rep.omega_sq[1]))


@dataclass(frozen=True)
class NormalModes:
    Omega_1: float
    Omega_2: float
    g_1: complex
    g_2: complex
    # z = from_normal @ zeta, zeta = (Q1, P1, Q2, P2)
    from_normal: np.ndarray
    transform: np.ndarray
    signature: tuple
    degenerate: bool
    audit: dict = field(default_factory=dict)

    @property
    def Omega(self):
        return (self.Omega_1, self.Omega_2)


def _mode_columns(w: np.ndarray, Om: float, A: np.ndarray):
    """Canonical pair (e_Q, e_P) from an eigenvector w of A with eigenvalue i*Om."""
    a, b = w.real, w.imag
    f = float(a @ OMEGA_FORM @ b)
    s = 1 if f < 0 else -1
    alpha = 1.0 / math.sqrt(Om * abs(f))
    e_P = alpha * b
    e_Q = s * alpha * Om * a
    return e_Q, e_P, s


def build_mode_transform(p: ModelParams) -> NormalModes:
    """Real symplectic map to normal coordinates.

    With T = from_normal, T^T H T = diag(s1 Om1^2, s1, s2 Om2^2, s2) where
    s = +1 for positive-energy modes. s = -1 only occurs when H is indefinite
    yet the dynamics is stable (gyroscopic coupling).
    """
    p = as_params(p)
    Om1, Om2 = normal_mode_frequencies(p)
    A = dynamical_matrix(p)
    lam, vec = np.linalg.eig(A)
    up = [k for k in range(4) if lam[k].imag > 0]
    up.sort(key=lambda k: -lam[k].imag)
    W = vec[:, up]
    degenerate = abs(Om1 - Om2) < DEGENERATE_TOL
    if degenerate or len(up) != 2:
        # A^2 = -Om^2 I, so the columns of A + i Om I span the i Om eigenspace
        Om = math.sqrt(0.5 * (Om1 ** 2 + Om2 ** 2))
        U, _, _ = np.linalg.svd(A + 1j * Om * np.eye(4))
        W = U[:, :2]
        Kf = W.conj().T @ OMEGA_FORM @ W / 2j
        _, U = np.linalg.eigh(0.5 * (Kf + Kf.conj().T))
        W = W @ U
    cols, sig = [], []
    for k, Om in enumerate((Om1, Om2)):
        e_Q, e_P, s = _mode_columns(W[:, k], Om, A)
        cols += [e_Q, e_P]
        sig.append(s)
    T = np.column_stack(cols)
    g1, g2 = coupling_strengths(p)
    return NormalModes(Om1, Om2, g1, g2, T, np.linalg.inv(T), tuple(sig), degenerate,
                       printed_audit(p, (Om1, Om2)))


def is_symplectic(T: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(T.T @ OMEGA_FORM @ T - OMEGA_FORM)) <= tol * max(1.0, np.max(np.abs(T)) ** 2))


def printed_audit(p: ModelParams, Omega=None) -> dict:
    """Printed appendix quantities: xi, theta, phi, Delta(Omega), N. NaN where undefined."""
    p = as_params(p)
    o, c = p.oscillators, p.couplings
    m, w = o.masses, o.omegas
    lam = {(1, 1): c.lambda_11, (1, 2): c.lambda_12, (2, 1): c.lambda_21, (2, 2): c.lambda_22}
    root = math.sqrt(m[0] * m[1] * w[0] * w[1])
    xi = {
        (1, 1): lam[1, 1] / (2 * root),
        (2, 2): lam[2, 2] * root / 2,
        (1, 2): lam[1, 2] / 2 * math.sqrt(m[0] * w[0] / (m[1] * w[1])),
        (2, 1): lam[2, 1] / 2 * math.sqrt(m[1] * w[1] / (m[0] * w[0])),
    }
    theta = []
    for l in (1, 2):
        num = xi[1, 1] + (-1) ** l * xi[2, 2]
        den = num ** 2 * (xi[1, 2] + xi[2, 1]) ** 2
        x = num / den if den != 0 else math.nan
        theta.append(math.acos(x) if -1 <= x <= 1 else math.nan)
    phi = [(theta[0] - (-1) ** l * theta[1]) / 2 for l in (1, 2)]

    g = coupling_strengths(p)
    ag = [abs(x) for x in g]
    if Omega is None:
        Omega = (math.nan, math.nan)

    def delta(l, lp, Om):
        other = ag[(l + 1 if l == 1 else l - 1) - 1]  # g_{l - (-1)^l}
        d = lambda a, b: 1.0 if a == b else 0.0
        return (2 * d(lp, 1) * ag[1] * other * w[1]
                + (d(lp, 2) * other - d(l, 1) * d(lp, 1) * (Om - w[1]))
                * (ag[0] ** 2 - ag[1] ** 2 + (Om - w[0]) * (Om + (-1) ** (l + lp) * w[1])))

    Delta = np.array([[[delta(l, lp, Om) for lp in (1, 2)] for l in (1, 2)] for Om in Omega])
    N = []
    for k in range(2):
        inv_sq = sum((-1) ** l * Delta[k, l - 1, lp - 1] ** 2 for l in (1, 2) for lp in (1, 2))
        N.append(1 / math.sqrt(inv_sq) if inv_sq > 0 else math.nan)
    return {
        "g": g,
        "printed_omega_sq": printed_frequencies_sq(p),
        "xi": xi,
        "theta": tuple(theta),
        "phi": tuple(phi),
        "Delta": Delta,
        "N": tuple(N),
    }
