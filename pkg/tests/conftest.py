from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vdcexo.scenario import bundled, load_scenario

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def default_cfg():
    return load_scenario(bundled("default_sim"))


@pytest.fixture(scope="session")
def geom(default_cfg):
    return default_cfg.geometry


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    A = rng.normal(size=(3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_phi(rng, size=None):
    """Physically consistent parameters from a random mass, COM and PD inertia."""
    shape = () if size is None else (size,)
    m = rng.uniform(0.2, 3.0, size=shape)
    c = rng.normal(scale=0.1, size=shape + (3,))
    # second moment of the mass distribution about the COM, then inertia from it
    A = rng.normal(scale=0.1, size=shape + (3, 3))
    Sc = A @ np.swapaxes(A, -1, -2) + 1e-3 * np.eye(3)
    Ic = np.trace(Sc, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) - Sc
    cc = np.einsum("...i,...i->...", c, c)
    I = Ic + m[..., None, None] * (cc[..., None, None] * np.eye(3)
                                   - c[..., :, None] * c[..., None, :])
    h = m[..., None] * c
    return np.concatenate([m[..., None], h, I[..., 0, 0, None], I[..., 1, 1, None],
                           I[..., 2, 2, None], I[..., 0, 1, None], I[..., 1, 2, None],
                           I[..., 0, 2, None]], axis=-1)


def point_cloud(rng, k=6):
    m = rng.uniform(0.1, 2.0, size=k)
    p = rng.normal(scale=0.2, size=(k, 3))
    return m, p


def cloud_phi(m, p):
    I = sum(mi * (pi @ pi * np.eye(3) - np.outer(pi, pi)) for mi, pi in zip(m, p))
    h = (m[:, None] * p).sum(0)
    return np.array([m.sum(), *h, I[0, 0], I[1, 1], I[2, 2], I[0, 1], I[1, 2], I[0, 2]])


def cloud_wrench(m, p, V, A, g):
    """Newton-Euler on point masses: wrench about the frame origin needed for accel ``A``."""
    v, w = V[:3], V[3:]
    a, alpha = A[:3], A[3:]
    f = np.zeros(3)
    tq = np.zeros(3)
    for mi, pi in zip(m, p):
        acc = a + np.cross(alpha, pi) + np.cross(w, v) + np.cross(w, np.cross(w, pi))
        fi = mi * (acc - g)
        f += fi
        tq += np.cross(pi, fi)
    return np.concatenate([f, tq])


def ideal_config(cfg, **overrides):
    """Exact parameters, estimators frozen, no disturbance and no actuator limits."""
    est = replace(cfg.estimator, initial_fraction=1.0, adapt=False)
    return cfg.with_overrides(estimator=est, constraints_enabled=False,
                              disturbance=replace(cfg.disturbance,
                                                  link_scale=np.zeros(cfg.geometry.n)),
                              **overrides)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
