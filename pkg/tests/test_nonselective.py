import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import oracles
from corridors.grids import (
    HamiltonianSpec,
    ObservableSpec,
    SpatialGrid,
    TimeGrid,
    check_density_matrix,
    density_trace,
    gaussian_packet,
    pure_density,
    purity,
    short_time_kernel_matrix,
)
from corridors.medium import PathPair, influence_exact, influence_firstorder
from corridors.nonselective import (
    InfluenceKernelSpec,
    _decay_matrix,
    _pair_integral_gh,
    check_generalized_unitarity,
    influence_eval,
    lindblad_evolve,
    readout_average,
    superpropagate,
)
from corridors.readout import FormFactor


def _free_pointer_setup():
    # potential-only model: the decoherence law is exact and closed-form
    g = SpatialGrid(4.0, 8)
    tg = TimeGrid(1.2, 6)
    ham = HamiltonianSpec(mass=math.inf, potential=np.zeros(8))
    obs = ObservableSpec.position(g)
    psi0 = gaussian_packet(g, width=0.9)
    return g, tg, ham, obs, psi0, 0.7


def _coarse_setup():
    g = SpatialGrid(4.0, 4)
    tg = TimeGrid(0.8, 4)
    ham = HamiltonianSpec.from_potential(g, lambda q: 0.3 * q**2)
    obs = ObservableSpec.position(g)
    psi0 = gaussian_packet(g, center=-0.2, width=0.8)
    return g, tg, ham, obs, psi0, 1.2, FormFactor.gaussian(0.3)


def _medium_setup():
    g = SpatialGrid(3.0, 3)
    tg = TimeGrid(0.4, 2)
    ham = HamiltonianSpec.from_potential(g, lambda q: 0.5 * q**2, mass=1.3)
    obs = ObservableSpec.position(g)
    rho0 = pure_density(gaussian_packet(g, width=0.8))
    return g, tg, ham, obs, rho0, FormFactor.gaussian(0.35)


def test_per_step_pair_integral_closed_form():
    # the decay factor every averaged engine relies on, checked against
    # gauss-hermite quadrature and a plain trapezoid
    rng = np.random.default_rng(0)
    kappa, dt = 0.9, 0.15
    for _ in range(5):
        x, y = rng.normal(size=2) * 2.0
        closed = math.exp(-0.5 * kappa * dt * (x - y) ** 2)
        assert abs(_pair_integral_gh(x, y, kappa, dt) - closed) < 1e-13
        assert abs(oracles.pair_step_integral_numeric(x, y, kappa, dt) - closed) < 1e-12
    d = _decay_matrix(np.array([x, y]), kappa, dt)
    assert_allclose(d[0, 1], closed, rtol=1e-15)


def test_free_pointer_decoherence_law_all_engines():
    # with H = 0 every engine must reproduce
    # rho_t(q, q') = rho_0(q, q') exp(-kappa t (q - q')^2 / 2) exactly
    g, tg, ham, obs, psi0, kappa = _free_pointer_setup()
    rho0 = pure_density(psi0)
    q = g.coords
    law = rho0 * np.exp(-0.5 * kappa * tg.duration * (q[:, None] - q[None, :]) ** 2)
    lind = lindblad_evolve(rho0, kappa, ham, obs, g, tg)
    avg = readout_average(psi0, kappa, ham, obs, g, tg).rho
    sup = superpropagate(rho0, InfluenceKernelSpec("ideal", kappa), ham, obs, g, tg).rho
    for got in (lind, avg, sup):
        assert np.max(np.abs(got - law)) < 1e-13
    # quadrature averaging and the ideal superpropagator are one code path
    assert np.array_equal(avg, sup)


def test_lindblad_keeps_states_physical():
    g = SpatialGrid(12.0, 32)
    tg = TimeGrid(2.0, 40)
    ham = HamiltonianSpec.harmonic(g, omega=1.0)
    obs = ObservableSpec.position(g)
    rho0 = pure_density(gaussian_packet(g, center=1.0, width=0.8))
    purities = []
    rho = lindblad_evolve(
        rho0, 0.5, ham, obs, g, tg, observer=lambda i, r: purities.append(purity(r, g))
    )
    rep = check_density_matrix(rho, g, tol=1e-9)
    assert rep["ok"], rep
    # monitoring mixes the state monotonically in this regime
    assert purities[-1] < 0.9
    assert np.all(np.diff(purities) < 1e-10)


def test_readout_average_matches_numeric_record_integration():
    # the per-step record integral done by brute quadrature, nothing shared
    # with the closed form
    g = SpatialGrid(3.0, 5)
    tg = TimeGrid(0.6, 3)
    ham = HamiltonianSpec.harmonic(g, omega=1.2)
    obs = ObservableSpec.position(g)
    psi0 = gaussian_packet(g, center=0.3, width=0.7)
    kappa = 0.8
    got = readout_average(psi0, kappa, ham, obs, g, tg).rho
    kernel = short_time_kernel_matrix(ham, g, tg.dt)
    ref = oracles.average_density_numeric(
        pure_density(psi0), kernel, obs.values, kappa, tg.dt, tg.n_steps
    )
    assert np.max(np.abs(got - ref)) < 1e-12


def test_readout_average_approaches_lindblad_with_refinement():
    g = SpatialGrid(6.0, 8)
    ham = HamiltonianSpec.harmonic(g, omega=0.9)
    obs = ObservableSpec.position(g)
    psi0 = gaussian_packet(g, center=0.5, width=0.8)
    kappa, t_final = 0.6, 1.0
    gaps = []
    for n in (16, 32, 64):
        tg = TimeGrid(t_final, n)
        a = readout_average(psi0, kappa, ham, obs, g, tg).rho
        b = lindblad_evolve(pure_density(psi0), kappa, ham, obs, g, tg)
        gaps.append(np.max(np.abs(a - b)))
    assert gaps[2] < gaps[1] < gaps[0]
    order = math.log2(gaps[0] / gaps[2]) / 2.0
    assert order > 0.8  # boundary half-step conjugation: clean first order


def test_readout_average_quadrature_rejects_windows():
    g, tg, ham, obs, psi0, kappa, ff = _coarse_setup()
    with pytest.raises(ValueError, match="superpropagate"):
        readout_average(psi0, kappa, ham, obs, g, tg, form_factor=ff)
    # delta profile is fine
    readout_average(psi0, kappa, ham, obs, g, tg, form_factor=FormFactor.delta())


def test_readout_average_mc_agrees_with_quadrature():
    g, tg, ham, obs, psi0, kappa, _ = _coarse_setup()
    exact = readout_average(psi0, kappa, ham, obs, g, tg).rho
    mc = readout_average(psi0, kappa, ham, obs, g, tg, mode="mc", samples=1500, seed=7)
    err = np.abs(mc.rho - exact)
    assert np.all(err < 5.0 * np.maximum(mc.stderr, 1e-300))
    assert mc.n_samples == 1500
    again = readout_average(psi0, kappa, ham, obs, g, tg, mode="mc", samples=1500, seed=7)
    assert np.array_equal(mc.rho, again.rho)


def test_superpropagate_coarse_matches_path_enumeration():
    g, tg, ham, obs, psi0, kappa, ff = _coarse_setup()
    rho0 = pure_density(psi0)
    got = superpropagate(
        rho0, InfluenceKernelSpec("coarse", kappa, form_factor=ff), ham, obs, g, tg
    ).rho
    kernel = short_time_kernel_matrix(ham, g, tg.dt)
    ref = oracles.brute_superpropagator_final(
        rho0, kernel, obs.values, kappa, tg.dt, ff.window_matrix(tg.n_steps, tg.dt)
    )
    assert np.max(np.abs(got - ref)) < 1e-13
    # windowed averaging still preserves trace (record integral is unitary)
    assert_allclose(density_trace(got, g), 1.0, atol=1e-12)


def test_superpropagate_coarse_delta_is_bitwise_ideal():
    g, tg, ham, obs, psi0, kappa, _ = _coarse_setup()
    rho0 = pure_density(psi0)
    a = superpropagate(rho0, InfluenceKernelSpec("ideal", kappa), ham, obs, g, tg).rho
    b = superpropagate(
        rho0,
        InfluenceKernelSpec("coarse", kappa, form_factor=FormFactor.delta()),
        ham,
        obs,
        g,
        tg,
    ).rho
    assert np.array_equal(a, b)


def test_superpropagate_coarse_mc_agrees_within_errors():
    g, tg, ham, obs, psi0, kappa, ff = _coarse_setup()
    rho0 = pure_density(psi0)
    spec = InfluenceKernelSpec("coarse", kappa, form_factor=ff)
    exact = superpropagate(rho0, spec, ham, obs, g, tg).rho
    mc = superpropagate(rho0, spec, ham, obs, g, tg, mode="mc", samples=800, seed=3)
    err = np.abs(mc.rho - exact)
    assert np.all(err < 5.0 * np.maximum(mc.stderr, 1e-300))


def test_superpropagate_medium_kinds_match_pair_sums():
    g, tg, ham, obs, rho0, ff = _medium_setup()
    kappa, ell = 0.9, 1.4
    kernel = short_time_kernel_matrix(ham, g, tg.dt)
    paths = oracles.all_paths(g.n_points, tg.n_steps + 1)
    amps = oracles.path_amplitudes(np.ones(g.n_points), kernel, paths)

    def brute(weight_fn):
        out = np.zeros((g.n_points, g.n_points), dtype=complex)
        for i1 in range(len(paths)):
            for i2 in range(len(paths)):
                pp = PathPair(obs.values[paths[i1]], obs.values[paths[i2]])
                out[paths[i1, -1], paths[i2, -1]] += (
                    amps[i1] * np.conj(amps[i2]) * weight_fn(pp) * rho0[paths[i1, 0], paths[i2, 0]]
                )
        return out

    spec_e = InfluenceKernelSpec("medium_exact", kappa, form_factor=ff, ell=ell)
    got_e = superpropagate(rho0, spec_e, ham, obs, g, tg).rho
    ref_e = brute(lambda pp: influence_exact(pp, ff, kappa, ell, tg.dt))
    assert np.max(np.abs(got_e - ref_e)) < 1e-13

    spec_f = InfluenceKernelSpec("medium_firstorder", kappa, form_factor=ff, ell=ell)
    got_f = superpropagate(rho0, spec_f, ham, obs, g, tg).rho
    ref_f = brute(lambda pp: influence_firstorder(pp, ff, kappa, tg.dt))
    assert np.max(np.abs(got_f - ref_f)) < 1e-13


def test_superpropagate_medium_mc_agrees_within_errors():
    g, tg, ham, obs, rho0, ff = _medium_setup()
    spec = InfluenceKernelSpec("medium_exact", 0.9, form_factor=ff, ell=1.4)
    exact = superpropagate(rho0, spec, ham, obs, g, tg).rho
    mc = superpropagate(rho0, spec, ham, obs, g, tg, mode="mc", samples=3000, seed=5)
    err = np.abs(mc.rho - exact)
    assert np.all(err < 5.0 * np.maximum(mc.stderr, 3e-4))


def test_superpropagate_medium_cap():
    g, tg, ham, obs, rho0, ff = _medium_setup()
    spec = InfluenceKernelSpec("medium_exact", 0.9, form_factor=ff, ell=1.4)
    with pytest.raises(ValueError, match="mc"):
        superpropagate(rho0, spec, ham, obs, g, tg, cap=100)


def test_unitarity_ideal_is_machine_exact():
    g, tg, ham, obs, _, kappa, _ = _coarse_setup()
    rep = check_generalized_unitarity(kappa, ham, obs, g, tg)
    assert rep.mode == "exact" and rep.stderr is None
    assert rep.deviation < 1e-12
    assert rep.passed(1e-12)


def test_unitarity_coarse_exact_matches_enumeration():
    g, tg, ham, obs, _, kappa, ff = _coarse_setup()
    rep = check_generalized_unitarity(kappa, ham, obs, g, tg, form_factor=ff)
    assert rep.deviation < 1e-12
    kernel = short_time_kernel_matrix(ham, g, tg.dt)
    ref = oracles.brute_unitarity_matrix(
        kernel, obs.values, kappa, tg.dt, ff.window_matrix(tg.n_steps, tg.dt)
    )
    assert np.max(np.abs(rep.matrix - ref)) < 1e-12


def test_unitarity_mc_modes():
    g, tg, ham, obs, _, kappa, ff = _coarse_setup()
    rep = check_generalized_unitarity(
        kappa, ham, obs, g, tg, mode="mc", samples=400, seed=11
    )
    assert rep.stderr is not None and rep.n_samples == 400
    assert rep.deviation < 5.0 * rep.stderr + 0.05
    rep_c = check_generalized_unitarity(
        kappa, ham, obs, g, tg, form_factor=ff, mode="mc", samples=400, seed=12
    )
    assert rep_c.deviation < 5.0 * rep_c.stderr + 0.05


def test_unitarity_mc_nested_estimator_under_tiny_cap():
    # force the auxiliary-field fallback (window would not fit the cap) and
    # check the paired-independent-estimate product stays unbiased
    g, tg, ham, obs, _, kappa, ff = _coarse_setup()
    rep = check_generalized_unitarity(
        kappa, ham, obs, g, tg, form_factor=ff, mode="mc",
        samples=600, seed=13, cap=10, inner_samples=24,
    )
    assert rep.deviation < 5.0 * rep.stderr + 0.1


def test_influence_eval_step_kinds():
    dt, kappa = 0.2, 0.9
    rng = np.random.default_rng(1)
    p1, p2 = rng.normal(size=6), rng.normal(size=6)
    w = influence_eval(p1, p2, InfluenceKernelSpec("ideal", kappa), dt)
    manual = math.exp(-0.5 * kappa * dt * np.sum((p1[:-1] - p2[:-1]) ** 2))
    assert_allclose(w, manual, rtol=1e-14)
    # delta-window coarse collapses to ideal
    w_d = influence_eval(
        p1, p2, InfluenceKernelSpec("coarse", kappa, form_factor=FormFactor.delta()), dt
    )
    assert w_d == w
    ff = FormFactor.gaussian(0.3)
    w_c = influence_eval(
        p1, p2, InfluenceKernelSpec("coarse", kappa, form_factor=ff), dt
    )
    window = ff.window_matrix(5, dt)
    manual_c = math.exp(-0.5 * kappa * dt * np.sum((window @ (p1 - p2)) ** 2))
    assert_allclose(w_c, manual_c, rtol=1e-14)
    assert 0.0 < w_c <= 1.0


def test_influence_eval_medium_kinds_delegate():
    dt = 0.2
    rng = np.random.default_rng(2)
    p1, p2 = rng.normal(size=5), rng.normal(size=5)
    ff = FormFactor.gaussian(0.3)
    spec_e = InfluenceKernelSpec("medium_exact", 0.9, form_factor=ff, ell=1.1)
    assert_allclose(
        influence_eval(p1, p2, spec_e, dt),
        influence_exact(PathPair(p1, p2), ff, 0.9, 1.1, dt),
        rtol=1e-15,
    )
    spec_f = InfluenceKernelSpec("medium_firstorder", 0.9, form_factor=ff, ell=1.1)
    assert_allclose(
        influence_eval(p1, p2, spec_f, dt),
        influence_firstorder(PathPair(p1, p2), ff, 0.9, dt),
        rtol=1e-15,
    )


def test_influence_kernel_spec_validation():
    with pytest.raises(ValueError):
        InfluenceKernelSpec("bogus", 1.0)
    with pytest.raises(ValueError):
        InfluenceKernelSpec("coarse", 1.0)  # missing form factor
    with pytest.raises(ValueError):
        InfluenceKernelSpec("medium_exact", 1.0, form_factor=FormFactor.gaussian(0.3))
    with pytest.raises(ValueError):
        InfluenceKernelSpec("ideal", -1.0)
    with pytest.raises(ValueError):
        superpropagate(
            np.eye(2), InfluenceKernelSpec("ideal", 1.0), None, None,
            SpatialGrid(1.0, 2), TimeGrid(1.0, 1), mode="bogus",
        )
