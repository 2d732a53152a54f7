import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from doublecl.decoherence import StateKind, build_state
from doublecl.errors import GridTooLarge, InvalidAxis, InvalidMagnitudes
from doublecl.master_eq import effective_damping
from doublecl.model import CouplingParams, ModelParams, OscillatorParams, ReservoirSpec
from doublecl.oracle import fourier_quadrature, single_oscillator_density, single_oscillator_forms
from doublecl.propagator import (Component, GaussianSuperposition, GridSpec, Propagator, evolve_fourier,
                                 evolve_position, gaussian_coefficients, grid_eval, initial_density_fourier,
                                 initial_density_position, marginal_density, marginal_form, peak_widths,
                                 printed_coefficients)
from conftest import fig_model

PSI1 = build_state(StateKind.PSI1).realized
T_REF = 1 / effective_damping(fig_model())[0]


def unit_component():
    return GaussianSuperposition([Component(1.0, 0.0, 0.0)], 1.0, 1.0)


def test_invalid_states():
    with pytest.raises(InvalidMagnitudes):
        GaussianSuperposition([Component(1.0, 0, 0)], -1.0, 1.0)
    with pytest.raises(InvalidMagnitudes):
        GaussianSuperposition([], 1.0, 1.0)


def test_single_component_peak_value():
    # |psi|^2 = exp(-2 x^2) per axis integrates to pi/2 in 2D, so the peak density is 2/pi
    norm, _ = integrate.dblquad(lambda y, x: math.exp(-2 * x * x - 2 * y * y), -8, 8, -8, 8)
    assert initial_density_position(unit_component(), 0, 0, 0, 0).real == pytest.approx(1 / norm, rel=1e-10)
    assert initial_density_position(unit_component(), 0, 0, 0, 0).real == pytest.approx(2 / math.pi, rel=1e-12)


def test_diagonal_slice_nonnegative():
    R = np.linspace(-15, 15, 61)
    R1, R2 = np.meshgrid(R, R)
    vals = initial_density_position(PSI1, R1, 0.0, R2, 0.0)
    assert np.all(np.abs(vals.imag) < 1e-15) and np.all(vals.real >= 0)


def test_psi1_peak_against_wavefunction():
    # rho(x, y) = psi(x) psi*(y) / N evaluated directly at a diagonal peak
    x = np.array([-10.0, 5.0])
    direct = abs(PSI1.wavefunction(*x)) ** 2 / PSI1.norm()
    assert initial_density_position(PSI1, x[0], 0, x[1], 0).real == pytest.approx(direct, rel=1e-13)


def test_fourier_at_origin():
    val = initial_density_fourier(unit_component(), 0, 0, 0, 0)
    ref = fourier_quadrature(lambda a, b: initial_density_position(unit_component(), a, 0, b, 0),
                             "forward", np.zeros(2), ((-6, 6), (-6, 6)))
    assert val == pytest.approx(ref, abs=1e-12)
    assert val.real == pytest.approx(0.25 / (math.pi / 2), rel=1e-12)


def test_fourier_real_for_symmetric_state(rng):
    st_sym = build_state(StateKind.PSI3).realized
    pts = rng.normal(size=(20, 4))
    vals = initial_density_fourier(st_sym, *pts.T)
    assert np.max(np.abs(vals.imag)) <= 1e-14 * np.max(np.abs(vals))


def test_fourier_matches_quadrature(rng):
    for _ in range(4):
        K = rng.uniform(-1, 1, 2)
        r = rng.uniform(-1, 1, 2)
        f = lambda a, b: initial_density_position(PSI1, a, r[0], b, r[1])
        ref = fourier_quadrature(f, "forward", K, ((-20, 5), (-5, 20)), n=600)
        assert initial_density_fourier(PSI1, K[0], r[0], K[1], r[1]) == pytest.approx(ref, abs=1e-8)


def test_t0_identity(rng):
    u = rng.uniform(-15, 15, size=(2000, 4))
    for kind in StateKind:
        st = build_state(kind).realized
        got = evolve_position(fig_model(), st, 0.0, *u.T)
        ref = initial_density_position(st, *u.T)
        assert np.max(np.abs(got - ref)) <= 1e-10
        v = rng.normal(size=(200, 4))
        assert np.max(np.abs(evolve_fourier(fig_model(), st, 0.0, v[:, 1], v[:, 0], v[:, 3], v[:, 2])
                             - initial_density_fourier(st, v[:, 1], v[:, 0], v[:, 3], v[:, 2]))) <= 1e-12


def test_unitary_limit_preserves_modulus_along_characteristics():
    p = ModelParams(OscillatorParams(1, 1, 1, 2), CouplingParams(0.1, 0, 0, 0.1), ReservoirSpec(gamma_1=0, gamma_2=0))
    prop = Propagator(p)
    f0, f1 = prop.evolve(PSI1, 0.0), prop.evolve(PSI1, 3.7)
    v = np.array([0.2, -0.3, 0.1, 0.4])
    # the value at v and t equals the initial value at the characteristic preimage
    assert f1.fourier(v) == pytest.approx(f0.fourier(prop.preimage(3.7) @ v), rel=1e-12)


def test_evolved_matches_inverse_fourier_quadrature(rng):
    form = gaussian_coefficients(fig_model(), PSI1, 0.5 * T_REF)
    for _ in range(4):
        loc = form.position.peak(int(rng.integers(0, 4)))[0] + rng.normal(scale=0.05, size=4)
        R1, r1, R2, r2 = loc
        f = lambda a, b: form.fourier(np.stack([np.full_like(a, r1), a, np.full_like(a, r2), b], axis=-1))
        ref = fourier_quadrature(f, "inverse", np.array([R1, R2]), ((-2, 2), (-2, 2)), n=400)
        got = form.position(loc)
        assert abs(got - ref) <= 1e-6 * abs(ref)


def test_factorized_cross_coefficients_vanish():
    Phi = gaussian_coefficients(fig_model(lam=0.0), PSI1, 123.0).Phi
    for i, j in ((0, 2), (0, 3), (1, 2), (1, 3)):
        assert abs(Phi[i, j]) <= 1e-10


def test_common_reservoir_cross_coefficient():
    Phi = gaussian_coefficients(fig_model(lam=0.0, topology="common"), PSI1, 123.0).Phi
    assert abs(Phi[0, 2]) > 1e-6


def test_hermiticity(rng):
    for topo in ("distinct", "common"):
        form = gaussian_coefficients(fig_model(topology=topo), PSI1, 0.7 * T_REF).position
        u = rng.uniform(-5, 5, size=(500, 4))
        w = u * np.array([1, -1, 1, -1])
        assert np.max(np.abs(form(w) - np.conj(form(u)))) <= 1e-10 * max(1.0, np.max(np.abs(form(u))))


@pytest.mark.parametrize("t", [0.0, T_REF, 5 * T_REF])
def test_trace_preserved(t):
    form = gaussian_coefficients(fig_model(topology="common"), PSI1, t)
    total = form.position.marginalize((0,), 2, 3).marginalize((), 0, 1)
    assert np.sum(np.exp(total.g)).real == pytest.approx(1.0, abs=1e-8)
    for which in (1, 2):
        m = marginal_form(form, which)
        tr = m.marginalize((), 0, 1)
        assert abs(np.sum(np.exp(tr.g)) - 1) <= 1e-8


def test_peaks_dragged_to_origin():
    prop = Propagator(fig_model())
    norms = []
    for t in (0.0, 1 * T_REF, 3 * T_REF, 6 * T_REF):
        pos = prop.evolve(PSI1, t).position
        norms.append(np.linalg.norm(pos.peak(0)[0][[0, 2]]))
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_widths_at_t0():
    w = peak_widths(fig_model(), PSI1, 0.0)
    assert (w.sigma_11, w.sigma_22, w.Sigma_11, w.Sigma_22) == pytest.approx((1, 1, 1, 1), rel=1e-12)
    assert w.Sigma_12_inv_sq == 0 and w.sigma_12_inv_sq == 0


def test_widths_decoupled_cross_absent():
    w = peak_widths(fig_model(lam=0.0), PSI1, 2 * T_REF)
    assert w.Sigma_12_inv_sq == 0.0 and w.sigma_12_inv_sq == 0.0


def test_widths_stationary_long_time():
    a = peak_widths(fig_model(lam=0.0), PSI1, 20 * T_REF)
    b = peak_widths(fig_model(lam=0.0), PSI1, 40 * T_REF)
    assert a.Sigma_11 == pytest.approx(b.Sigma_11, rel=1e-6)
    # equilibrium position variance T/(m omega^2) for oscillator 1 -> Sigma_11^2 / 4
    assert a.Sigma_11 ** 2 / 4 == pytest.approx(1000.0, rel=1e-2)


def test_printed_widths_agree_where_defined():
    w = peak_widths(fig_model(), PSI1, 0.3 * T_REF)
    assert w.printed["Sigma"] == pytest.approx(w.Sigma, rel=1e-10)
    assert w.printed["Sigma_11"] == pytest.approx(w.Sigma_11, rel=1e-10)
    assert w.printed["Sigma_22"] == pytest.approx(w.Sigma_22, rel=1e-10)
    # the printed relative widths are inverse widths
    assert 1 / w.printed["sigma_11"] == pytest.approx(w.sigma_11, rel=1e-10)


def test_printed_coefficients_audit():
    prop = Propagator(fig_model())
    form = prop.evolve(PSI1, 0.2 * T_REF)
    audit = printed_coefficients(prop, PSI1, 0.2 * T_REF)
    # the printed offsets carry an extra (-1)^(l+1) per pair; the phase offsets also
    # flip sign under the transform convention used here
    for (a, b), th in audit["theta"].items():
        np.testing.assert_allclose(th, (-1) ** a * form.theta[form.pair_index(a, b)], atol=1e-9)
    for (a, b), th in audit["theta_tilde"].items():
        np.testing.assert_allclose(th, -(-1) ** a * form.theta_tilde[form.pair_index(a, b)], atol=1e-9)


def test_marginal_factorized_matches_single_oscillator():
    p = fig_model(lam=0.0)
    st = GaussianSuperposition([Component(1.0, 3.0, -2.0), Component(1.0, -3.0, -2.0)], 0.8, 1.2)
    t = 0.4 * T_REF
    R = np.linspace(-4, 4, 9)
    r = np.linspace(-0.2, 0.2, 9)
    got = marginal_density(p, st, t, 1, R, r)
    forms = single_oscillator_forms(1.0, 1.0, 1e-3, 1000.0, [3.0, -3.0], [1, 1], 0.8, t)
    ref = single_oscillator_density(forms, R, r)
    assert np.max(np.abs(got - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_product_state_factorizes(rng):
    p = fig_model(lam=0.0)
    st = GaussianSuperposition([Component(1.0, 1.0, -2.0)], 0.9, 1.3)
    form = gaussian_coefficients(p, st, 0.8 * T_REF)
    u = rng.uniform(-3, 3, size=(300, 4)) * np.array([1, 0.05, 1, 0.05])
    m1 = marginal_form(form, 1)(u[:, :2])
    m2 = marginal_form(form, 2)(u[:, 2:])
    assert np.max(np.abs(form.position(u) - m1 * m2)) <= 1e-8 * np.max(np.abs(m1 * m2))


def test_marginal_t0_against_quadrature():
    R, r = -7.0, 0.3
    ref, _ = integrate.quad(lambda R2: initial_density_position(PSI1, R, r, R2, 0.0).real, -30, 30, limit=200)
    im, _ = integrate.quad(lambda R2: initial_density_position(PSI1, R, r, R2, 0.0).imag, -30, 30, limit=200)
    got = marginal_density(fig_model(), PSI1, 0.0, 1, R, r)
    assert got == pytest.approx(ref + 1j * im, abs=1e-8)


def test_grid_single_point():
    g = GridSpec(("R1", "R2"), ((1.0, 1.0), (2.0, 2.0)), (1, 1), {"r1": 0.1})
    _, _, vals = grid_eval(fig_model(), PSI1, 3.0, g)
    assert vals.shape == (1, 1)
    assert vals[0, 0] == evolve_position(fig_model(), PSI1, 3.0, 1.0, 0.1, 2.0, 0.0)


def test_grid_riemann_sum():
    g = GridSpec(("R1", "R2"), ((-200, 200), (-200, 200)), (101, 101))
    A, B, vals = grid_eval(fig_model(), PSI1, 2 * T_REF, g)
    dA = (A[1, 0] - A[0, 0]) * (B[0, 1] - B[0, 0])
    assert np.sum(vals).real * dA == pytest.approx(1.0, abs=1e-3)
    assert np.min(vals.real) >= -1e-15


def test_grid_errors():
    with pytest.raises(GridTooLarge):
        grid_eval(fig_model(), PSI1, 0.0, GridSpec(counts=(4000, 4000)))
    with pytest.raises(InvalidAxis):
        GridSpec(("R1", "K1"))
    with pytest.raises(InvalidAxis):
        GridSpec(fixed={"R1": 0.0})


@given(st.floats(0.0, 3000.0), st.sampled_from(["distinct", "common"]))
def test_trace_property(t, topo):
    form = gaussian_coefficients(fig_model(topology=topo), PSI1, t)
    tr = marginal_form(form, 1).marginalize((), 0, 1)
    assert abs(np.sum(np.exp(tr.g)) - 1) <= 1e-8
