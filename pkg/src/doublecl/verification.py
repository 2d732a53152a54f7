"""Cross-checks of the closed-form paths against the brute-force oracles.

Each check returns an OracleReport. ``run_suite`` is what the ``verify``
subcommand executes; the acceptance tests call the same functions with
larger sampling plans.
"""

from __future__ import annotations

import math

import numpy as np

from . import oracle
from .decoherence import (BASE_GAMMA, BASE_OSCILLATORS, BASE_T, DecoherenceEvaluator, StateKind,
                          build_state, figure_scenarios, reservoir_for)
from .errors import DoubleCLError
from .master_eq import build_drift_system, effective_damping
from .model import CouplingParams, ModelParams, OscillatorParams, ReservoirSpec, Topology, check
from .normal_modes import dynamical_matrix, stability_check
from .propagator import Propagator, initial_density_fourier, initial_density_position
from .spectral import eigendecompose, propagate_characteristics, z_function

DEFAULT_SEED = 20240611


def random_model(rng, topology=None, gamma_range=(0.01, 0.2), lam=0.3) -> ModelParams:
    """A random stable, valid model; redraws until ``check`` passes."""
    while True:
        topo = Topology(topology or rng.choice(["distinct", "common"]))
        m1 = rng.uniform(0.5, 2.0)
        m2 = m1 if topo is Topology.COMMON else rng.uniform(0.5, 2.0)
        osc = OscillatorParams(m1, m2, rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))
        cp = CouplingParams(*rng.uniform(-lam, lam, 4))
        g1 = rng.uniform(*gamma_range)
        T1 = rng.uniform(50.0, 500.0)
        if topo is Topology.COMMON:
            res = ReservoirSpec.common(g1, T1)
        else:
            res = ReservoirSpec.distinct(g1, rng.uniform(*gamma_range), T1, rng.uniform(50.0, 500.0))
        p = ModelParams(osc, cp, res)
        if not check(p):
            return p


def interior_points(form, rng, n, spread=1.5, floor=1e-8, max_tries=200):
    """Points within a few widths of the pair peaks where |rho| > floor * peak."""
    pos = form.position
    G = pos.G.real
    widths = 1.0 / np.sqrt(2.0 * np.abs(np.diag(G)))
    peaks = [pos.peak(p)[0] for p in range(len(form.pairs))]
    peak_val = max(abs(pos(loc)) for loc in peaks)
    out = []
    for _ in range(max_tries):
        base = np.array(peaks)[rng.integers(len(peaks), size=4 * n)]
        u = base + rng.uniform(-spread, spread, size=base.shape) * widths
        keep = np.abs(pos(u)) > floor * peak_val
        out.extend(u[keep])
        if len(out) >= n:
            return np.array(out[:n])
    raise DoubleCLError("could not find enough interior points")


def check_characteristics(models, n_vectors, rng, horizon=10.0, tol=1e-6, name="characteristics"):
    """propagate_characteristics vs RK4 at t in (0, horizon / gamma~]."""
    errs_abs, errs_rel, n = [], [], 0
    for p in models:
        M = build_drift_system(p).M
        s = eigendecompose(M)
        t = horizon / max(effective_damping(p))
        V = rng.normal(size=(4, n_vectors))
        ref = oracle.rk4_propagate(M, V, t, oracle.steps_for(M, t))
        got = propagate_characteristics(s, V, t)
        scale = np.linalg.norm(ref, axis=0)
        d = np.linalg.norm(got - ref, axis=0)
        errs_abs.append(d.max())
        errs_rel.append((d / scale).max())
        n += n_vectors
    return oracle.OracleReport.from_errors(name, max(errs_abs), max(errs_rel), n, tol)


def check_z(models, n_vectors, rng, horizon=10.0, tol=1e-6, name="z_function"):
    """Closed-form Z vs Simpson along an RK4 characteristic, at t = horizon / gamma~."""
    errs_abs, errs_rel, n = [], [], 0
    for p in models:
        ds = build_drift_system(p)
        s = eigendecompose(ds.M)
        t = horizon / max(effective_damping(p))
        steps = oracle.steps_for(ds.M, t)
        V = rng.normal(size=(4, n_vectors))
        # Simpson on a trajectory holding all vectors at once
        steps += steps % 2
        traj = oracle.rk4_trajectory(ds.M, V, t, steps)
        r = traj[:, [0, 2], :]
        integrand = np.einsum("nik,ij,njk->nk", r, ds.diffusion, r)
        ref = oracle.simpson_weights(steps, t / steps) @ integrand
        for k in range(n_vectors):
            c0 = s.epsilon @ V[:, k]
            got = z_function(s, ds.diffusion, c0, t).value
            errs_abs.append(abs(got - ref[k]))
            errs_rel.append(abs(got - ref[k]) / abs(ref[k]))
        n += n_vectors
    return oracle.OracleReport.from_errors(name, max(errs_abs), max(errs_rel), n, tol)


def check_fourier_initial(state, rng, n=20, tol=1e-8, name="fourier_initial"):
    """Transformed initial density vs a quadrature transform of the position-space one."""
    st = getattr(state, "realized", state)
    q = st.centers
    s = st.sigmas
    box = [(-q[:, l].max() - 8 * s[l], -q[:, l].min() + 8 * s[l]) for l in range(2)]
    worst_a = worst_r = 0.0
    for _ in range(n):
        r1, r2 = rng.uniform(-s[0], s[0]), rng.uniform(-s[1], s[1])
        K = rng.uniform(-1.5 / s, 1.5 / s, size=(1, 2))
        f = lambda R1, R2: initial_density_position(st, R1, r1, R2, r2)
        ref = oracle.fourier_quadrature(f, "forward", K, box, n=600)[0]
        got = initial_density_fourier(st, K[0, 0], r1, K[0, 1], r2)
        d = abs(got - ref)
        worst_a = max(worst_a, d)
        worst_r = max(worst_r, d / max(abs(ref), 1e-300))
    return oracle.OracleReport.from_errors(name, worst_a, worst_a, n, tol, mode="abs")


def check_pde(model, state, t, rng, n=50, tol=1e-4, name="pde_residual", seed=None):
    prop = Propagator(model)
    st = getattr(state, "realized", state)
    pts = interior_points(prop.evolve(st, t), rng, n)
    density = lambda tt, u: prop.evolve(st, tt).position(u)
    return oracle.pde_residual(model, density, t, pts, h=1e-4, tol=tol,
                               name=name, seed=seed)


def check_cl_limit(times_scaled=(1e-6, 1e-5, 3e-5, 1e-4, 1e-3), tol=1e-6, name="cl_limit"):
    """Decoupled cat on distinct reservoirs vs the single-oscillator RK4 pipeline."""
    model = ModelParams(BASE_OSCILLATORS, CouplingParams(), reservoir_for("distinct"))
    state = build_state(StateKind.CAT, model=model)
    ev = DecoherenceEvaluator(model, state)
    q = state.params["q"] * state.params["sigma_1"]
    sig = state.params["sigma"] * state.params["sigma_1"]
    o = BASE_OSCILLATORS
    errs_a, errs_r = [], []
    for ts in times_scaled:
        t = ts / BASE_GAMMA
        got = ev.at(t).log_d
        ref = oracle.single_oscillator_log_decoherence(o.m_1, o.omega_1, BASE_GAMMA, BASE_T, q, sig, t)
        # compare D itself where it is representable, log D beyond
        if ref > -700:
            a = abs(math.exp(got) - math.exp(ref))
            errs_a.append(a)
            errs_r.append(a / math.exp(ref))
        else:
            errs_a.append(abs(got - ref))
            errs_r.append(abs(got - ref) / abs(ref))
    return oracle.OracleReport.from_errors(name, max(errs_a), max(errs_r), len(times_scaled), tol)


def check_stability(rng, n=1000, name="stability_gate"):
    """stability_check vs eigenvalues of the dynamical matrix; printed inequalities as diagnostics."""
    disagree = 0
    printed_disagree = 0
    for _ in range(n):
        osc = OscillatorParams(*rng.uniform(0.2, 3.0, 4))
        cp = CouplingParams(*rng.uniform(-1.5, 1.5, 4))
        p = ModelParams(osc, cp)
        if abs(1 - cp.lambda_22 ** 2 * osc.m_1 * osc.m_2) < 1e-6:
            continue
        rep = stability_check(p)
        ev = np.linalg.eigvals(dynamical_matrix(p))
        oracle_stable = bool(np.max(np.abs(ev.real)) <= 1e-7 * np.max(np.abs(ev)) and np.min(np.abs(ev)) > 1e-9)
        disagree += rep.stable != oracle_stable
        printed_disagree += (rep.printed_12b and rep.printed_12c) != oracle_stable
    rep = oracle.OracleReport.from_errors(name, disagree, disagree / n, n, 0.0, mode="abs")
    return rep, printed_disagree


def run_suite(seed: int = DEFAULT_SEED, quick: bool = True) -> list[oracle.OracleReport]:
    """The shipped verification suite over the figure presets plus random models."""
    rng = np.random.default_rng(seed)
    n_models = 10 if quick else 100
    reports = []
    models = [random_model(rng) for _ in range(n_models)]
    reports.append(check_characteristics(models, 10, rng))
    reports.append(check_z(models[: max(2, n_models // 5)], 10, rng))
    reports.append(check_fourier_initial(build_state(StateKind.PSI1), rng))
    for fig in (1, 4):
        for sc in figure_scenarios(fig)[1:]:
            t = 1.0 / max(effective_damping(sc.model))
            reports.append(check_pde(sc.model, sc.state, t, rng, name=f"pde_fig{fig}_{sc.label}", seed=seed))
    reports.append(check_cl_limit())
    stab, _ = check_stability(rng, n=200 if quick else 1000)
    reports.append(stab)
    return reports

