import numpy as np
import pytest

import jumpbounds as jb


@pytest.fixture(scope="session")
def qubit():
    # working point of the driven-qubit experiments: resonant drive, unit bath coupling
    return jb.build_driven_qubit(delta=0.0, omega=1.0, gamma=1.0, n=1.0)


@pytest.fixture(scope="session")
def qubit_decay():
    return jb.build_driven_qubit(delta=0.0, omega=0.0, gamma=1.0, n=0.0)


@pytest.fixture(scope="session")
def maser():
    return jb.build_three_level_maser(delta=0.0, omega=1.0, gamma1=1.0, gamma2=1.0, n1=5.0, n2=0.01)


@pytest.fixture(scope="session")
def two_state_classical():
    # 1 -> 2 at rate a = 1 (group 1), 2 -> 1 at rate b = 2 (group 2)
    rates = np.array([[0.0, 2.0], [1.0, 0.0]])
    groups = np.array([[0, 2], [1, 0]])
    return jb.build_classical_network(rates, groups)


@pytest.fixture(scope="session")
def three_state_cycle():
    # unidirectional cycle with unit rates; alternating group labels
    rates = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    groups = np.array([[0, 0, 1], [1, 0, 0], [0, 2, 0]])
    return jb.build_classical_network(rates, groups)


@pytest.fixture(scope="session")
def bidirectional_classical():
    # both directions of each edge present and grouped together (current-type ready)
    rates = np.array([[0.0, 2.0, 0.5], [1.0, 0.0, 1.5], [0.7, 1.2, 0.0]])
    groups = np.array([[0, 1, 2], [1, 0, 2], [2, 2, 0]])
    return jb.build_classical_network(rates, groups)


@pytest.fixture(scope="session")
def qubit_defs():
    return (jb.ObservableDef("absorb", {1: 1.0}), jb.ObservableDef("emit", {2: 1.0}))


@pytest.fixture(scope="session")
def maser_current_defs():
    return (jb.ObservableDef("heat1", {1: 1.0, 2: -1.0}), jb.ObservableDef("heat2", {3: 1.0, 4: -1.0}))


@pytest.fixture(scope="session")
def maser_counting_defs():
    return (jb.ObservableDef("count1", {1: 1.0, 2: 1.0}), jb.ObservableDef("count2", {3: 1.0, 4: 1.0}))


def ground_state(dim: int) -> np.ndarray:
    psi = np.zeros(dim, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def basis_state(dim: int, index: int) -> np.ndarray:
    psi = np.zeros(dim, dtype=np.complex128)
    psi[index] = 1.0
    return psi
