import math

import numpy as np
import pytest

from somor.metrics import FrequencyGrid
from somor.system import StructuredSystem, SyntheticModelSpec, generate_synthetic


def chain(n, kind="chainA-rayleigh", seed=0, **params):
    return generate_synthetic(SyntheticModelSpec(kind, n, seed=seed, params=params))


def oscillator(m=1.0, c=1.0, k=1.0, f=1.0, g=1.0):
    return StructuredSystem(mass=[[[m]]], damping=[[[c]]], stiffness=[[[k]]], inputs=[[[f]]],
                            output=[[g]])


def random_second_order(n, m=1, p=1, seed=0, complex_=False):
    """Stable random system: SPD M and K, proportional-plus-noise damping."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    M = A @ A.T / n + np.eye(n)
    B = rng.standard_normal((n, n))
    K = B @ B.T + n * np.eye(n)
    C = 0.05 * M + 0.01 * K
    F = rng.standard_normal((n, m))
    G = rng.standard_normal((p, n))
    if complex_:
        F = F + 1j * rng.standard_normal((n, m))
    return StructuredSystem(mass=[M], damping=[C], stiffness=[K], inputs=[F], output=G)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b))


def principal_angle_sin(A, B):
    """Largest sine of the principal angles between span(A) and span(B)."""
    Qa = np.linalg.qr(A)[0]
    Qb = np.linalg.qr(B)[0]
    return np.linalg.norm(Qb - Qa @ (Qa.conj().T @ Qb), 2)


@pytest.fixture
def chain30():
    return chain(30, seed=3)


@pytest.fixture
def chain100():
    return chain(100, seed=1)


@pytest.fixture
def band_grid():
    return FrequencyGrid.linspace_hz(1.0, 250.0, 120)


@pytest.fixture
def shift50():
    return 2j * math.pi * 50.0
