"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (bypassing capture) with
the measured error and runtime, then asserts. Run as a script to get the
lines without pytest.
"""

import math
import sys
import time

import numpy as np
import pytest

from doublecl.decoherence import (BASE_GAMMA, DecoherenceEvaluator, StateKind, build_state, decoherence_series,
                                  decoherence_time, figure_scenarios, mean_energy, peak_distance, reservoir_for,
                                  scaled_grid)
from doublecl.decoherence import _pair_log_ratio
from doublecl.master_eq import build_drift_system, effective_damping
from doublecl.model import CouplingParams, ModelParams, OscillatorParams, ReservoirSpec
from doublecl.oracle import single_oscillator_density, single_oscillator_forms
from doublecl.propagator import Propagator, initial_density_position, marginal_form
from doublecl.verification import (DEFAULT_SEED, check_characteristics, check_cl_limit, check_pde, check_stability,
                                   check_z, random_model)

_capsys = None


@pytest.fixture(autouse=True)
def _grab_capsys(capsys):
    global _capsys
    _capsys = capsys
    yield
    _capsys = None


def verdict(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    if _capsys is not None:
        with _capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


def gamma_tilde(model):
    return max(effective_damping(model))


def test_c01_effective_damping():
    t0 = time.perf_counter()
    got = []
    for l22 in (0.0, 0.1, 0.5):
        p = ModelParams(OscillatorParams(1.0, 1.0, 1.0, 2.0), CouplingParams(lambda_22=l22),
                        ReservoirSpec.distinct(1e-3, 1e-3, 1000.0, 1000.0))
        got.append(effective_damping(p)[0])
    dt = time.perf_counter() - t0
    ref = [1e-3, 1e-3 / 0.99, 1e-3 / 0.75]
    err = max(abs(g - r) / r for g, r in zip(got, ref))
    verdict(1, err <= 1e-12 and dt < 1e-3,
            f"rel err {err:.2e}, values {[f'{g:.7e}' for g in got]}, {dt * 1e3:.3f} ms")


def test_c02_state_resources():
    t0 = time.perf_counter()
    model = ModelParams(OscillatorParams(1.0, 1.0, 1.0, 2.0))
    states = [build_state(k) for k in (StateKind.PSI1, StateKind.PSI2, StateKind.PSI3)]
    E = [mean_energy(s, model) for s in states]
    d = [peak_distance(s) for s in states]
    dt = time.perf_counter() - t0
    spread = max(E) / min(E) - 1
    off158 = max(abs(e / 158 - 1) for e in E)
    derr = max(abs(x - 5 * math.sqrt(2)) for x in d)
    ok = spread <= 0.02 and off158 <= 0.02 and derr <= 1e-12 and dt < 1.0
    verdict(2, ok, f"E = {[round(e, 4) for e in E]}, spread {spread:.2e}, |E/158-1| <= {off158:.2e}, "
                   f"d = {[round(x, 6) for x in d]}, max |d - 5 sqrt2| {derr:.2e}, {dt:.2f} s")


def test_c03_t0_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(DEFAULT_SEED)
    models = [random_model(rng, topology="distinct" if i % 2 else "common") for i in range(20)]
    worst = worst_g = worst_d = 0.0
    for kind in StateKind:
        for p in models:
            st = build_state(kind, model=p).realized
            form = Propagator(p).evolve(st, 0.0)
            q, s = st.centers, st.sigmas
            lo = q.min(0) - 4 * s
            hi = q.max(0) + 4 * s
            n = 10_000 // len(models)
            R = rng.uniform(lo, hi, size=(n, 2))
            r = rng.uniform(-4 * s, 4 * s, size=(n, 2))
            u = np.stack([R[:, 0], r[:, 0], R[:, 1], r[:, 1]], axis=-1)
            worst = max(worst, np.max(np.abs(form.position(u) - initial_density_position(st, *u.T))))
            ev = DecoherenceEvaluator(p, st)
            worst_g = max(worst_g, abs(ev.gamma_closed(0.0) - 1))
            worst_d = max(worst_d, abs(math.exp(_pair_log_ratio(form)) - 1))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and worst_g <= 1e-12 and worst_d <= 1e-12 and dt < 30
    verdict(3, ok, f"max |rho - rho0| {worst:.2e}, |Gamma(0)-1| {worst_g:.2e}, |D(0)-1| {worst_d:.2e}, "
                   f"{4 * 20 * (10_000 // 20)} points, {dt:.1f} s")


def _sampled_horizons(check, n_models, seed):
    rng = np.random.default_rng(seed)
    models = [random_model(rng) for _ in range(n_models)]
    reps = [check([p], 10, rng, horizon=rng.uniform(0.5, 10.0)) for p in models]
    return reps


def test_c04_characteristics():
    t0 = time.perf_counter()
    reps = _sampled_horizons(check_characteristics, 100, DEFAULT_SEED)
    reps += [check_characteristics([random_model(np.random.default_rng(DEFAULT_SEED + 1))], 10,
                                   np.random.default_rng(1), horizon=10.0)]
    dt = time.perf_counter() - t0
    err = max(r.max_rel_err for r in reps)
    verdict(4, err <= 1e-6 and dt < 60, f"max rel err {err:.2e} over {sum(r.points_tested for r in reps)} "
                                        f"vectors, {dt:.1f} s")


def test_c05_z_function():
    t0 = time.perf_counter()
    reps = _sampled_horizons(check_z, 100, DEFAULT_SEED + 5)
    dt = time.perf_counter() - t0
    err = max(r.max_rel_err for r in reps)
    verdict(5, err <= 1e-6 and dt < 60, f"max rel err {err:.2e} over {sum(r.points_tested for r in reps)} "
                                        f"vectors, {dt:.1f} s")


def test_c06_pde_residual():
    t0 = time.perf_counter()
    rng = np.random.default_rng(DEFAULT_SEED)
    worst, names = 0.0, []
    for fig in (1, 4):
        for sc in figure_scenarios(fig):
            g = gamma_tilde(sc.model)
            for k in (0.5, 1.0, 2.0):
                rep = check_pde(sc.model, sc.state, k / g, rng, n=50)
                worst = max(worst, rep.max_rel_err)
                if not rep.passed:
                    names.append(f"fig{fig}:{sc.label}@{k}")
    dt = time.perf_counter() - t0
    verdict(6, worst <= 1e-4 and dt < 120, f"max rel residual {worst:.2e} over 30 cases x 50 points, "
                                            f"failing {names or 'none'}, {dt:.1f} s")


def test_c07_decoupled_limit():
    t0 = time.perf_counter()
    model = ModelParams(OscillatorParams(1.0, 1.0, 1.0, 2.0), CouplingParams(), reservoir_for("distinct"))
    state = build_state(StateKind.CAT, model=model)
    st = state.realized
    rng = np.random.default_rng(DEFAULT_SEED)
    q = st.centers[:, 0]
    worst = 0.0
    for ts in (1e-6, 1e-5, 1e-3, 0.5):
        t = ts / BASE_GAMMA
        form = Propagator(model).evolve(st, t)
        f1 = single_oscillator_forms(1.0, 1.0, BASE_GAMMA, 1000.0, q, [1, 1], st.sigmas[0], t)
        f2 = single_oscillator_forms(1.0, 2.0, BASE_GAMMA, 1000.0, [0.0], [1], st.sigmas[1], t)
        peaks = np.array([form.position.peak(p)[0] for p in range(4)])
        u = peaks[rng.integers(0, 4, 500)] + rng.normal(scale=0.05, size=(500, 4))
        joint = form.position(u)
        prod = single_oscillator_density(f1, u[:, 0], u[:, 1]) * single_oscillator_density(f2, u[:, 2], u[:, 3])
        worst = max(worst, np.max(np.abs(joint - prod)) / np.max(np.abs(prod)))
    cl = check_cl_limit()
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and cl.max_rel_err <= 1e-6
    verdict(7, ok, f"factorization rel err {worst:.2e}, D vs single-oscillator rel err {cl.max_rel_err:.2e}, "
                   f"{dt:.1f} s")


def test_c08_reservoir_coupling():
    t0 = time.perf_counter()
    common = ModelParams(OscillatorParams(1.0, 1.0, 1.0, 2.0), CouplingParams(), reservoir_for("common"))
    distinct = ModelParams(OscillatorParams(1.0, 1.0, 1.0, 2.0), CouplingParams(), reservoir_for("distinct"))
    Dc = build_drift_system(common).diffusion
    D = 2 * 1.0 * BASE_GAMMA * 1000.0
    st = build_state(StateKind.PSI1).realized
    g = gamma_tilde(common)
    cross_c, cross_d = [], []
    for k in (0.1, 0.5, 1.0, 5.0, 50.0):
        cross_c.append(abs(Propagator(common).evolve(st, k / g).Phi[0, 2]))
        cross_d.append(abs(Propagator(distinct).evolve(st, k / g).Phi[0, 2]))
    dt = time.perf_counter() - t0
    ok = Dc[0, 1] == D and Dc[1, 0] == D and min(cross_c) > 1e-6 and max(cross_d) <= 1e-10
    verdict(8, ok, f"cross diffusion {float(Dc[0, 1])!r} (D = {D!r}), common min |Phi13| {min(cross_c):.2e}, "
                   f"distinct max |Phi13| {max(cross_d):.2e}, {dt:.2f} s")


def _log_d(sc, grid):
    return decoherence_series(sc.model, sc.state, grid).log_d_t[1:]


def test_c09_figure_ordering():
    t0 = time.perf_counter()
    notes, ok = [], True
    grid = scaled_grid(BASE_GAMMA)

    # (a) lambda_11 = lambda_22 decays faster than lambda_12 = lambda_21 at lambda = 0.5
    for kind in (StateKind.PSI3, StateKind.PSI1):
        state = build_state(kind)
        for topo in ("distinct", "common"):
            scs = {c.label: c for c in figure_scenarios(4, 0.5)}
            qq = scs[f"{topo}_qq_pp"]
            qp = scs[f"{topo}_qp_pq"]
            a = _log_d(type(qq)(qq.label, qq.model, state), grid)
            b = _log_d(type(qp)(qp.label, qp.model, state), grid)
            bad = np.flatnonzero(~(a < b))
            if len(bad):
                ok = False
                notes.append(f"(a) {kind.value} {topo}: {len(bad)} of {len(a)} samples not faster, "
                             f"first at gamma_1 t = {grid[1:][bad[0]] * BASE_GAMMA:.3f}, "
                             f"max log D excess {np.max(a[bad] - b[bad]):.1e}")

    # (b) third-state curves decay faster than the matched first/second-state curves
    f3 = figure_scenarios(3)
    for ref_fig in (1, 2):
        for c3, cr in zip(f3[1:], figure_scenarios(ref_fig)[1:]):
            a, b = _log_d(c3, grid), _log_d(cr, grid)
            if not np.all(a < b):
                ok = False
                notes.append(f"(b) {c3.label} vs figure {ref_fig}")

    # (c) at lambda = 0.1 the 1/e decoherence times stay within a factor 3 of the cat and of each other
    for fig in (1, 2, 3):
        scs = {c.label: c for c in figure_scenarios(fig)}
        tau = {k: decoherence_time(c.model, c.state) * BASE_GAMMA for k, c in scs.items()}
        for k, v in tau.items():
            if k != "cat" and not (1 / 3 <= v / tau["cat"] <= 3):
                ok = False
                notes.append(f"(c) fig{fig} {k}: tau/tau_cat = {v / tau['cat']:.3g}")
        for form in ("qq_pp", "qp_pq"):
            r = tau[f"common_{form}"] / tau[f"distinct_{form}"]
            if not 1 / 3 <= r <= 3:
                ok = False
                notes.append(f"(c) fig{fig} {form}: common/distinct = {r:.3g}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 300
    verdict(9, ok, f"{'; '.join(notes) or 'all orderings hold'}, {dt:.1f} s")


def test_c10_hermiticity_trace():
    t0 = time.perf_counter()
    rng = np.random.default_rng(DEFAULT_SEED)
    herm = trace = 0.0
    for topo in ("distinct", "common"):
        for kind in StateKind:
            model = ModelParams(OscillatorParams(1.0, 1.0, 1.0, 2.0), CouplingParams(lambda_11=0.1, lambda_22=0.1),
                                reservoir_for(topo))
            st = build_state(kind, model=model).realized
            g = gamma_tilde(model)
            for t in (0.0, 1 / g, 5 / g):
                form = Propagator(model).evolve(st, t)
                peaks = np.array([form.position.peak(p)[0] for p in range(len(form.pairs))])
                u = peaks[rng.integers(0, len(peaks), 300)] + rng.normal(scale=0.3, size=(300, 4))
                w = u * np.array([1, -1, 1, -1])
                vals = form.position(u)
                herm = max(herm, np.max(np.abs(form.position(w) - np.conj(vals))) / max(1.0, np.max(np.abs(vals))))
                for which in (1, 2):
                    tr = np.sum(np.exp(marginal_form(form, which).marginalize((), 0, 1).g))
                    trace = max(trace, abs(tr - 1))
    dt = time.perf_counter() - t0
    verdict(10, herm <= 1e-10 and trace <= 1e-6,
            f"hermiticity err {herm:.2e}, max |trace - 1| {trace:.2e}, {dt:.2f} s")


def test_c11_stability_gate():
    t0 = time.perf_counter()
    rep, printed = check_stability(np.random.default_rng(DEFAULT_SEED), n=1000)
    dt = time.perf_counter() - t0
    verdict(11, rep.max_abs_err == 0, f"{int(rep.max_abs_err)} disagreements in {rep.points_tested} draws "
                                       f"(printed inequalities disagree in {printed}, diagnostic only), {dt:.1f} s")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
