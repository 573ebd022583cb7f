import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from detmodes.spectral import TorusGrid, VectorField, dealias, leray_project

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def _set_mode(grid, c, k, vec):
    """Place the real cosine/sine pair with amplitude vector ``vec`` at +-k."""
    k = np.asarray(k)
    if k[2] < 0 or (k[2] == 0 and (k[1] < 0 or (k[1] == 0 and k[0] < 0))):
        k, vec = -k, np.conj(vec)
    c[:, k[0] % grid.N, k[1] % grid.N, k[2]] += vec
    if k[2] == 0:
        c[:, -k[0] % grid.N, -k[1] % grid.N, 0] += np.conj(vec)


def sine_mode(grid: TorusGrid, amplitude: float = 1.0, k: int = 1, component: int = 1) -> VectorField:
    """u_component = A sin(2 pi k x / L), built exactly in spectral space."""
    c = np.zeros((3,) + grid.half_shape, dtype=complex)
    vec = np.zeros(3, dtype=complex)
    vec[component] = -0.5j * amplitude
    _set_mode(grid, c, (k, 0, 0), vec)
    return VectorField(grid, c, divergence_free=component != 0)


def single_mode(grid: TorusGrid, k, amplitude: float = 1.0) -> VectorField:
    """Divergence-free real field A cos(2 pi k.x / L) e with e perpendicular to k."""
    kf = np.asarray(k, dtype=float)
    e = np.cross(kf, [0.0, 0.0, 1.0]) if (kf[0] or kf[1]) else np.array([1.0, 0.0, 0.0])
    e /= np.linalg.norm(e)
    c = np.zeros((3,) + grid.half_shape, dtype=complex)
    _set_mode(grid, c, tuple(int(x) for x in k), 0.5 * amplitude * e.astype(complex))
    return VectorField(grid, c, divergence_free=True)


def random_real_field(grid: TorusGrid, rng, divergence_free=True, dealiased=True) -> VectorField:
    u = VectorField.from_physical(grid, rng.standard_normal((3,) + grid.shape))
    if dealiased:
        u = dealias(u)
    if divergence_free:
        u = leray_project(u)
    c = np.array(u.coeffs)
    c[:, 0, 0, 0] = 0
    return u.with_coeffs(c)


def shell_packet(grid: TorusGrid, q: int, rng, localized: bool) -> VectorField:
    """Random divergence-free field supported on shell q.

    ``localized`` builds a phi_q-weighted wavepacket at a random centre with a
    random polarization; otherwise the shell coefficients are random normal.
    """
    from detmodes.littlewood_paley import shell_multiplier

    m = shell_multiplier(grid, q) * grid.dealias_mask
    kx, ky, kz = grid.k_half
    if localized:
        x0 = rng.uniform(0, grid.L, 3)
        e = rng.standard_normal(3)
        phase = np.exp(-2j * np.pi * (kx * x0[0] + ky * x0[1] + kz * x0[2]) / grid.L)
        c = np.stack([e[i] * m * phase for i in range(3)])
    else:
        shape = (3,) + grid.half_shape
        c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * m
    u = leray_project(VectorField(grid, c))
    # round trip through physical space restores exact Hermitian symmetry
    return VectorField.from_physical(grid, u.physical)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
