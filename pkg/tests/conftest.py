import numpy as np
import pytest
import scipy.sparse as sp

from eddypar.excitation import ExcitationSignal
from eddypar.model import (
    Materials,
    SemiDiscreteSystem,
    assemble,
    partition,
    reduce_schur,
    window_transformer_grid,
)


@pytest.fixture(scope="session")
def desk_problem():
    """Default window-transformer system used across the suite."""
    grid = window_transformer_grid()
    sys = assemble(grid, Materials())
    red = reduce_schur(partition(sys))
    return grid, sys, red


@pytest.fixture(scope="session")
def desk_signals():
    fine = ExcitationSignal(kind="pwm", I0=10.0, f_sin=50.0, f_pwm=1000.0, m_a=0.8)
    coarse = ExcitationSignal(kind="sine", I0=10.0, f_sin=50.0, f_pwm=1000.0, m_a=0.8)
    return fine, coarse


def random_dae_system(rng, n=None, conducting_fraction=0.5):
    """Random small DAE: SPD stiffness, partially zero lumped mass, winding
    supported on the non-conducting block."""
    if n is None:
        n = int(rng.integers(5, 51))
    B = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.3)
    K = B @ B.T + n * np.eye(n)
    mass = rng.uniform(0.5, 2.0, n)
    zero = rng.permutation(n)[: max(1, int(n * (1.0 - conducting_fraction)))]
    mass[zero] = 0.0
    if np.count_nonzero(mass) == 0:
        mass[0] = 1.0
    X = np.where(mass == 0.0, rng.standard_normal(n), 0.0)
    return SemiDiscreteSystem.from_matrices(mass, sp.csr_matrix(K), X)


def two_dof_system():
    """M = diag(1, 0), K = [[2, -1], [-1, 2]], X = (0, 1)."""
    return SemiDiscreteSystem.from_matrices(
        [1.0, 0.0], [[2.0, -1.0], [-1.0, 2.0]], [0.0, 1.0]
    )
