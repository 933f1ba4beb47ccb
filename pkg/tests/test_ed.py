import numpy as np
import pytest
import scipy.linalg as la
from conftest import random_density, random_state

from xxzquench import ed
from xxzquench.ed import (
    DensityOperator,
    PureState,
    SectorBasis,
    energy,
    evolve_density,
    evolve_state,
    expectation,
    ground_state,
    partial_trace_pair,
    thermal_density,
    total_sz_expectation,
)
from xxzquench.errors import CapacityError, ParameterError
from xxzquench.model import ModelParams, build_h0, build_h1, dense_hamiltonian
from xxzquench.observables import (
    concurrence,
    rdm_from_correlators,
)

SINGLET = np.array([0, 1, -1, 0]) / np.sqrt(2)


def h0(N, Delta=1.0):
    return build_h0(ModelParams(N=N, Delta=Delta))


def h1(N, Delta=1.0, J1=-0.1):
    return build_h1(ModelParams(N=N, Delta=Delta, J1=J1))


def brute_partial_trace(vec, N, a, b):
    """Sum over every configuration of the traced sites, one basis index at a time."""
    rho = np.zeros((4, 4), dtype=complex)
    for i in range(2**N):
        for j in range(2**N):
            bi = [(i >> (N - 1 - k)) & 1 for k in range(N)]
            bj = [(j >> (N - 1 - k)) & 1 for k in range(N)]
            if any(bi[k] != bj[k] for k in range(N) if k not in (a - 1, b - 1)):
                continue
            r = 2 * bi[a - 1] + bi[b - 1]
            c = 2 * bj[a - 1] + bj[b - 1]
            rho[r, c] += vec[i] * np.conj(vec[j])
    return rho


def test_sector_dimensions():
    for N in (4, 7, 10):
        for sz2 in range(-N, N + 1, 2):
            b = SectorBasis.sector(N, sz2)
            assert np.all(np.diff(b.states) > 0)
            assert np.allclose(b.sz_of(), sz2 / 2)


def test_two_site_singlet_ground_state():
    state, e = ground_state(h0(2), 2)
    assert e == pytest.approx(-0.75, abs=1e-12)
    v = state.full_vector()
    assert abs(abs(np.vdot(SINGLET, v)) - 1) < 1e-12


def test_xx_point_two_sites():
    _, e = ground_state(h0(2, Delta=0.0), 2)
    assert e == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("N", [4, 6, 8])
@pytest.mark.parametrize("Delta", [-0.5, 0.0, 0.5, 1.0, 1.5, 2.0])
def test_ground_state_matches_full_diagonalization(N, Delta):
    terms = h0(N, Delta)
    state, e = ground_state(terms, N)
    full = np.linalg.eigvalsh(dense_hamiltonian(terms, N))[0]
    assert e == pytest.approx(full, abs=1e-10)
    assert state.basis.sz_twice == 0
    assert state.norm() == pytest.approx(1, abs=1e-10)


def test_ferromagnetic_side_is_degenerate_and_picks_zero_sz():
    terms = h0(6, Delta=-1.5)
    assert ed.is_ground_degenerate(terms, 6)
    state, e = ground_state(terms, 6)
    assert abs(state.basis.sz_twice) == 6 or e <= min(ed.sector_ground_energies(terms, 6).values()) + 1e-8
    energies = ed.sector_ground_energies(terms, 6)
    tied = [s for s, v in energies.items() if v - min(energies.values()) < 1e-8]
    assert state.basis.sz_twice == min(tied, key=lambda s: (abs(s), -s))


def test_ground_state_deterministic():
    a, _ = ground_state(h0(8), 8)
    b, _ = ground_state(h0(8), 8)
    assert np.array_equal(a.amplitudes, b.amplitudes)


def test_capacity():
    with pytest.raises(CapacityError):
        ground_state(h0(15), 15)
    with pytest.raises(CapacityError):
        thermal_density(h0(11), 11, 1.0)


def test_evolve_zero_time_is_identity():
    state, _ = ground_state(h0(6), 6)
    out = evolve_state(state, h1(6), 0.0)
    assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-13)


def test_eigenstate_is_stationary():
    terms = h1(6)
    state, _ = ground_state(terms, 6)
    for t in (0.7, 5.0, 31.0):
        out = evolve_state(state, terms, t)
        assert abs(abs(np.vdot(state.amplitudes, out.amplitudes)) - 1) < 1e-10
        assert expectation(out, {1: "z", 6: "z"}).real == pytest.approx(
            expectation(state, {1: "z", 6: "z"}).real, abs=1e-10
        )


def test_two_site_singlet_keeps_full_concurrence():
    state, _ = ground_state(h0(2), 2)
    for t in np.linspace(0, 20, 11):
        out = evolve_state(state, h1(2), t)
        assert concurrence(partial_trace_pair(out, 1, 2)) == pytest.approx(1.0, abs=1e-10)


def test_spectral_evolution_matches_expm():
    N = 6
    terms = h1(N, Delta=0.7, J1=0.3)
    psi = PureState.from_full(random_state(np.random.default_rng(1), 2**N), N)
    H = dense_hamiltonian(terms, N)
    for t in (0.3, 4.0):
        expected = la.expm(-1j * H * t) @ psi.amplitudes
        assert np.abs(evolve_state(psi, terms, t).amplitudes - expected).max() < 1e-10


def test_krylov_matches_spectral(monkeypatch):
    N = 10
    terms = h1(N)
    psi = PureState.from_full(random_state(np.random.default_rng(2), 2**N), N)
    exact = evolve_state(psi, terms, 3.7)
    monkeypatch.setattr(ed, "SPECTRAL_MAX_DIM", 16)
    krylov = evolve_state(psi, terms, 3.7)
    assert np.abs(krylov.amplitudes - exact.amplitudes).max() < 1e-9
    assert krylov.norm() == pytest.approx(1, abs=1e-9)


def test_conservation_along_trajectory():
    N = 8
    rng = np.random.default_rng(3)
    psi = PureState.from_full(random_state(rng, 2**N), N)
    terms = h1(N)
    e0, m0 = energy(psi, terms), total_sz_expectation(psi)
    for t in np.linspace(0, 30, 13):
        out = evolve_state(psi, terms, t)
        assert out.norm() == pytest.approx(1, abs=1e-9)
        assert energy(out, terms) == pytest.approx(e0, abs=1e-8)
        assert total_sz_expectation(out) == pytest.approx(m0, abs=1e-10)


def test_thermal_infinite_temperature():
    rho = thermal_density(h0(6), 6, 1e6)
    assert np.abs(rho.matrix - np.eye(64) / 64).max() < 1e-6
    for site in range(1, 7):
        for a in "xyz":
            assert abs(expectation(rho, {site: a})) < 1e-5


def test_thermal_two_site_boltzmann():
    kT = 1.0
    rho = thermal_density(h0(2), 2, kT)
    weights = np.exp(-np.array([-0.75, 0.25, 0.25, 0.25]) / kT)
    weights /= weights.sum()
    singlet_pop = SINGLET @ rho.matrix @ SINGLET
    assert singlet_pop.real == pytest.approx(weights[0], abs=1e-12)
    assert rho.matrix[0, 0].real == pytest.approx(weights[1], abs=1e-12)
    assert rho.trace() == pytest.approx(1, abs=1e-12)


def test_thermal_rejects_nonpositive_temperature():
    with pytest.raises(ParameterError):
        thermal_density(h0(4), 4, 0.0)


def test_density_evolution_identity_cases():
    N = 5
    rho = DensityOperator(N, np.eye(2**N) / 2**N)
    assert np.abs(evolve_density(rho, h1(N), 7.0).matrix - rho.matrix).max() < 1e-14
    r = DensityOperator(N, random_density(np.random.default_rng(4), 2**N))
    assert np.abs(evolve_density(r, h1(N), 0.0).matrix - r.matrix).max() < 1e-13


def test_density_purity_and_spectrum_preserved():
    N = 6
    rho = DensityOperator(N, random_density(np.random.default_rng(5), 2**N))
    p0 = rho.purity()
    ev0 = np.linalg.eigvalsh(rho.matrix)
    prop = ed.DensityPropagator(h1(N), N)
    for t in (0.5, 3.0, 25.0):
        out = prop.apply(rho, t)
        assert out.purity() == pytest.approx(p0, abs=1e-9)
        assert out.trace() == pytest.approx(1, abs=1e-9)
        assert np.abs(np.linalg.eigvalsh(out.matrix) - ev0).max() < 1e-9


def test_density_evolution_matches_pure_evolution():
    N = 6
    psi = PureState.from_full(random_state(np.random.default_rng(6), 2**N), N)
    rho = DensityOperator.from_pure(psi)
    out = evolve_density(rho, h1(N), 2.5)
    ref = DensityOperator.from_pure(evolve_state(psi, h1(N), 2.5))
    assert np.abs(out.matrix - ref.matrix).max() < 1e-9


def test_partial_trace_fixtures():
    singlet = PureState.from_full(SINGLET, 2)
    assert np.allclose(partial_trace_pair(singlet, 1, 2).matrix, np.outer(SINGLET, SINGLET), atol=1e-15)
    zero = np.zeros(2**5)
    zero[0] = 1
    rho = partial_trace_pair(PureState.from_full(zero, 5), 2, 4).matrix
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    assert np.array_equal(rho, expected)


@pytest.mark.parametrize("a,b", [(1, 5), (2, 3), (1, 2)])
def test_partial_trace_brute_force(a, b):
    N = 5
    vec = random_state(np.random.default_rng(7), 2**N)
    ours = partial_trace_pair(PureState.from_full(vec, N), a, b).matrix
    assert np.abs(ours - brute_partial_trace(vec, N, a, b)).max() < 1e-13
    dens = partial_trace_pair(DensityOperator.from_pure(PureState.from_full(vec, N)), a, b).matrix
    assert np.abs(dens - ours).max() < 1e-13


def test_partial_trace_index_errors():
    psi = PureState.from_full(random_state(np.random.default_rng(8), 8), 3)
    with pytest.raises(IndexError):
        partial_trace_pair(psi, 2, 2)
    with pytest.raises(IndexError):
        partial_trace_pair(psi, 0, 3)


def test_correlator_reconstruction_matches_partial_trace():
    N = 8
    rng = np.random.default_rng(9)
    for _ in range(5):
        psi = PureState.from_full(random_state(rng, 2**N), N)
        table = np.array([[expectation(psi, {1: a, N: b}) for b in "ixyz"] for a in "ixyz"])
        from xxzquench.observables import CorrelatorSet

        rho = rdm_from_correlators(CorrelatorSet.from_table(table))
        assert np.abs(rho.matrix - partial_trace_pair(psi, 1, N).matrix).max() < 1e-10


def test_expectation_fixtures():
    zero = np.zeros(2**4)
    zero[0] = 1
    assert expectation(PureState.from_full(zero, 4), {1: "z"}) == pytest.approx(1.0)
    singlet = PureState.from_full(SINGLET, 2)
    for a in "xyz":
        assert expectation(singlet, [(a, 1), (a, 2)]).real == pytest.approx(-1.0, abs=1e-14)
    gs, _ = ground_state(h0(8), 8)
    assert abs(expectation(gs, {1: "z"})) < 1e-9


def test_expectation_hermitian_is_real():
    N = 6
    rho = DensityOperator(N, random_density(np.random.default_rng(10), 2**N))
    assert abs(expectation(rho, {2: "x", 5: "y"}).imag) < 1e-10


def test_expectation_malformed():
    psi = PureState.from_full(SINGLET, 2)
    with pytest.raises(ParameterError):
        expectation(psi, {1: "q"})
    with pytest.raises(ParameterError):
        expectation(psi, {3: "x"})
