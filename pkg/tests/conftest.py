import numpy as np
import pytest

from geomc.manifolds import ManifoldSpec, PhaseState, sample_tangent_gaussian


def random_point(m, rng):
    if m.kind == "stiefel":
        q, r = np.linalg.qr(rng.standard_normal((m.p, m.k)))
        return q * np.sign(np.diag(r))
    x = rng.standard_normal(m.shape)
    return x / np.linalg.norm(x)


def random_state(m, rng, speed=1.0):
    q = random_point(m, rng)
    v = sample_tangent_gaussian(m, q, rng)
    v *= speed / np.linalg.norm(v)
    return PhaseState(q, v)


def fb_s2_moments(params, n=800):
    """Mean and second moment of a Fisher-Bingham on S^2 by product quadrature."""
    # Gauss-Legendre in cos(theta), uniform in phi: exact for smooth periodic phi.
    z, wz = np.polynomial.legendre.leggauss(n // 4)
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    Z, P = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1 - Z**2)
    X = np.stack([s * np.cos(P), s * np.sin(P), Z], axis=-1)
    logp = X @ params.c + np.einsum("...i,ij,...j->...", X, params.A, X)
    w = np.exp(logp - logp.max()) * wz[:, None]
    w /= w.sum()
    mean = np.einsum("ij,ija->a", w, X)
    second = np.einsum("ij,ija,ijb->ab", w, X, X)
    return mean, second


MANIFOLDS = [
    ManifoldSpec.sphere(1),
    ManifoldSpec.sphere(2),
    ManifoldSpec.sphere(5),
    ManifoldSpec.so3(),
    ManifoldSpec.stiefel(1, 3),
    ManifoldSpec.stiefel(2, 4),
    ManifoldSpec.stiefel(3, 5),
]


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


# -- acceptance report -------------------------------------------------------

_CRITERIA = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion, shown after the run."""

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
        _CRITERIA.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA):
        terminalreporter.write_line(line)
