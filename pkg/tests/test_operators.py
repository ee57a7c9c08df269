import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

import jumpbounds as jb
from jumpbounds.errors import (
    DimensionMismatchError,
    NonErgodicModelError,
    SingularStateError,
)
from jumpbounds.operators import (
    drazin_inverse_time_integral,
    propagator_from_spectrum,
    sandwich_superoperator,
    trace_functional,
)

from oracles import liouvillian_gap


def random_hermitian(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (m + m.conj().T)


class TestVectorization:
    def test_identity_trace_overlap(self):
        vec = jb.vectorize(np.eye(2))
        assert trace_functional(2) @ vec == pytest.approx(2.0)

    def test_lowering_operator_single_entry(self):
        sm = np.array([[0, 1], [0, 0]], dtype=complex)
        vec = jb.vectorize(sm)
        nonzero = np.flatnonzero(np.abs(vec) > 0)
        assert len(nonzero) == 1
        assert abs(vec[nonzero[0]]) == pytest.approx(1.0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        m = random_hermitian(rng, 3)
        assert np.array_equal(jb.unvectorize(jb.vectorize(m)), m)

    def test_trace_identity_general(self):
        rng = np.random.default_rng(1)
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert trace_functional(3) @ jb.vectorize(m) == pytest.approx(np.trace(m))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            jb.unvectorize(np.ones(5))

    def test_sandwich_convention(self):
        rng = np.random.default_rng(2)
        a, b, x = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
        lhs = jb.unvectorize(sandwich_superoperator(a, b) @ jb.vectorize(x))
        assert np.allclose(lhs, a @ x @ b, atol=1e-12)


class TestLiouvillian:
    def test_pure_decay_rates(self, qubit_decay):
        liouv = jb.build_liouvillian(qubit_decay)
        excited = np.diag([0.0, 1.0]).astype(complex)
        drho = liouv.total.apply(excited)
        assert drho[1, 1] == pytest.approx(-1.0)
        assert drho[0, 0] == pytest.approx(1.0)

    def test_classical_population_eigenvalue(self, two_state_classical):
        # population sector of the 2-state network relaxes at a + b
        a, b = 1.0, 2.0
        liouv = jb.build_liouvillian(two_state_classical)
        diff = np.diag([1.0, -1.0]).astype(complex)
        out = liouv.total.apply(diff)
        assert np.allclose(out, -(a + b) * diff, atol=1e-12)

    def test_maser_trace_annihilation(self, maser):
        liouv = jb.build_liouvillian(maser)
        residual = np.abs(trace_functional(3) @ liouv.total.matrix).max()
        assert residual < 1e-10

    def test_group_parts_sum(self, maser):
        liouv = jb.build_liouvillian(maser)
        h_comm = jb.operators.commutator_superoperator(maser.hamiltonian.entries)
        total = h_comm + sum(p.matrix for p in liouv.dissipator_parts.values())
        assert np.allclose(total, liouv.total.matrix, atol=1e-12)
        part = liouv.group_parts[1].matrix
        assert np.allclose(part, h_comm + liouv.dissipator_parts[1].matrix, atol=1e-12)

    def test_kind_invariant_rejects_non_trace_annihilating(self):
        with pytest.raises(DimensionMismatchError):
            jb.Superoperator(np.eye(4), kind="liouvillian")


class TestSteadyState:
    def test_decay_only_ground(self, qubit_decay):
        rho = jb.steady_state(jb.build_liouvillian(qubit_decay).total)
        assert np.allclose(rho.entries, np.diag([1.0, 0.0]), atol=1e-10)

    def test_thermal_population(self):
        n = 0.7
        model = jb.build_driven_qubit(0.0, 0.0, 1.0, n)
        rho = jb.steady_state(jb.build_liouvillian(model).total)
        assert rho.entries[1, 1].real == pytest.approx(n / (2 * n + 1), abs=1e-12)

    def test_maser_full_rank_and_residual(self, maser):
        liouv = jb.build_liouvillian(maser)
        rho = jb.steady_state(liouv.total)
        assert np.linalg.norm(liouv.total.matrix @ jb.vectorize(rho)) < 1e-10
        assert np.linalg.eigvalsh(rho.entries).min() > 1e-6
        # cross-check against long-time propagation
        gap = liouvillian_gap(maser)
        long = jb.propagate(liouv.total, np.diag([0, 1.0, 0]).astype(complex), 40.0 / gap)
        assert np.max(np.abs(long.entries - rho.entries)) < 1e-8

    def test_degenerate_kernel_rejected(self):
        # two decoupled decay channels acting on separate blocks leave two fixed points
        l1 = np.zeros((4, 4))
        l1[0, 1] = 1.0
        l2 = np.zeros((4, 4))
        l2[2, 3] = 1.0
        ham = jb.Operator(np.zeros((4, 4)), hermitian=True)
        model = jb.LindbladModel(
            hamiltonian=ham,
            channels=(
                jb.JumpChannel(1, jb.Operator(l1), group=1),
                jb.JumpChannel(2, jb.Operator(l2), group=2),
            ),
        )
        with pytest.raises(NonErgodicModelError):
            jb.steady_state(jb.build_liouvillian(model).total)


class TestDrazin:
    def test_kernel_annihilation(self, maser):
        liouv = jb.build_liouvillian(maser)
        rho = jb.steady_state(liouv.total)
        dz = jb.drazin_inverse(liouv.total, rho)
        assert np.max(np.abs(dz.matrix @ jb.vectorize(rho))) < 1e-10

    def test_classical_eigenmode_inverse(self, two_state_classical):
        a, b = 1.0, 2.0
        liouv = jb.build_liouvillian(two_state_classical)
        rho = jb.steady_state(liouv.total)
        dz = jb.drazin_inverse(liouv.total, rho)
        diff = jb.vectorize(np.diag([1.0, -1.0]))
        assert np.allclose(dz.matrix @ diff, -diff / (a + b), atol=1e-10)

    def test_identities(self, qubit):
        liouv = jb.build_liouvillian(qubit)
        rho = jb.steady_state(liouv.total)
        dz = jb.drazin_inverse(liouv.total, rho)
        m = liouv.total.matrix
        proj = np.eye(4) - np.outer(jb.vectorize(rho), trace_functional(2))
        assert np.max(np.abs(m @ dz.matrix - proj)) < 1e-9
        assert np.max(np.abs(dz.matrix @ m - proj)) < 1e-9
        assert np.max(np.abs(m @ dz.matrix @ m - m)) < 1e-9
        assert np.max(np.abs(trace_functional(2) @ dz.matrix)) < 1e-9

    def test_time_integral_oracle(self, maser):
        liouv = jb.build_liouvillian(maser)
        rho = jb.steady_state(liouv.total)
        dz = jb.drazin_inverse(liouv.total, rho)
        gap = liouvillian_gap(maser)
        approx = drazin_inverse_time_integral(liouv.total, rho, horizon=45.0 / gap, steps=8192)
        assert np.max(np.abs(approx - dz.matrix)) < 1e-6


class TestPropagation:
    def test_zero_time_identity(self, qubit):
        liouv = jb.build_liouvillian(qubit)
        rho0 = np.diag([0.3, 0.7]).astype(complex)
        assert np.allclose(jb.propagate(liouv.total, rho0, 0.0).entries, rho0, atol=1e-14)

    def test_decay_population(self, qubit_decay):
        liouv = jb.build_liouvillian(qubit_decay)
        rho = jb.propagate(liouv.total, np.diag([0.0, 1.0]).astype(complex), 1.0)
        assert rho.entries[1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-9)

    def test_long_time_reaches_steady_state(self, qubit):
        liouv = jb.build_liouvillian(qubit)
        rho_ss = jb.steady_state(liouv.total)
        gap = liouvillian_gap(qubit)
        rho = jb.propagate(liouv.total, np.diag([1.0, 0.0]).astype(complex), 40.0 / gap)
        assert np.max(np.abs(rho.entries - rho_ss.entries)) < 1e-8

    def test_negative_time_rejected(self, qubit):
        liouv = jb.build_liouvillian(qubit)
        with pytest.raises(ValueError):
            jb.propagate(liouv.total, np.eye(2) / 2, -0.1)
        with pytest.raises(ValueError):
            jb.matrix_exponential(np.eye(2), -1.0)

    def test_no_jump_propagator_contracts(self, qubit):
        u = jb.matrix_exponential(qubit.effective_hamiltonian(), 0.8)
        psi = np.array([0.6, 0.8], dtype=complex)
        assert np.linalg.norm(u @ psi) <= 1.0 + 1e-12

    def test_trace_and_hermiticity_preservation(self, qubit, maser, two_state_classical):
        rng = np.random.default_rng(3)
        for model in (qubit, maser, two_state_classical):
            liouv = jb.build_liouvillian(model)
            d = model.dim
            m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            rho0 = m @ m.conj().T
            rho0 = rho0 / np.trace(rho0)
            for t in (0.1, 1.0, 10.0):
                rho_t = jb.propagate(liouv.total, rho0, t).entries
                assert np.trace(rho_t).real == pytest.approx(1.0, abs=1e-10)
                prop = scipy.linalg.expm(liouv.total.matrix * t)
                raw = jb.unvectorize(prop @ jb.vectorize(rho0))
                assert np.max(np.abs(raw - raw.conj().T)) < 1e-10


class TestSpectral:
    def test_reconstruction_matches_expm(self, qubit, maser):
        for model in (qubit, maser):
            liouv = jb.build_liouvillian(model)
            sd = jb.spectral_data(liouv.total)
            for t in (0.5, 3.0, 10.0):
                direct = scipy.linalg.expm(liouv.total.matrix * t)
                assert np.max(np.abs(propagator_from_spectrum(sd, t) - direct)) < 1e-8

    def test_biorthogonality(self, maser):
        sd = jb.spectral_data(jb.build_liouvillian(maser).total)
        gram = sd.left @ sd.right
        assert np.max(np.abs(gram - np.eye(gram.shape[0]))) < 1e-8

    def test_unique_zero_mode(self, qubit):
        sd = jb.spectral_data(jb.build_liouvillian(qubit).total)
        zero = np.abs(sd.eigenvalues) < 1e-9
        assert zero.sum() == 1
        others = np.delete(sd.eigenvalues.real, sd.zero_index)
        assert np.all(others < 0)


class TestMatrixLog:
    def test_maximally_mixed(self):
        out = jb.matrix_log(np.eye(2) / 2)
        assert np.allclose(out.entries, -np.log(2.0) * np.eye(2), atol=1e-12)

    def test_diagonal(self):
        out = jb.matrix_log(np.diag([0.75, 0.25]).astype(complex))
        assert np.allclose(out.entries, np.diag(np.log([0.75, 0.25])), atol=1e-12)

    def test_round_trip_on_steady_state(self, maser):
        rho = jb.steady_state(jb.build_liouvillian(maser).total)
        logm = jb.matrix_log(rho)
        assert np.max(np.abs(scipy.linalg.expm(logm.entries) - rho.entries)) < 1e-9

    def test_singular_state_rejected(self):
        with pytest.raises(SingularStateError):
            jb.matrix_log(np.diag([1.0, 0.0]).astype(complex))


class TestOperatorType:
    def test_hermiticity_enforced(self):
        with pytest.raises(DimensionMismatchError):
            jb.Operator(np.array([[0.0, 1.0], [0.0, 0.0]]), hermitian=True)

    def test_non_finite_rejected(self):
        with pytest.raises(DimensionMismatchError):
            jb.Operator(np.array([[np.inf, 0.0], [0.0, 0.0]]))

    def test_dimension_floor(self):
        with pytest.raises(DimensionMismatchError):
            jb.Operator(np.ones((1, 1)))
