"""Fourier discretization of vector fields on the periodic box [0, L]^3.

Fields are stored by their Fourier-series coefficients

    u(x) = sum_k u_hat(k) exp(i 2 pi k.x / L),

kept in the real-FFT ("half") layout: array axes are (component, x, y, z)
and only wavenumbers k_z >= 0 are stored.  The full coefficient array over
all integer wavevectors is available through :attr:`VectorField.full_coeffs`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np
import scipy.fft as sfft

__all__ = [
    "TorusGrid",
    "VectorField",
    "forward_transform",
    "inverse_transform",
    "leray_project",
    "dealias",
    "lebesgue_norm",
    "lebesgue_norms",
    "sobolev_norm",
    "inner_product",
    "gradient",
    "divergence_residual",
]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform N^3 grid on the torus of side L."""

    N: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 8, got {self.N}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def k_max_dealias(self) -> int:
        # largest K with 3K < N: keeps cubic products alias-free on the grid
        return (self.N - 1) // 3

    @property
    def lambda0(self) -> float:
        return 1.0 / self.L

    @property
    def kappa0(self) -> float:
        return 2 * np.pi / self.L

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def shape(self):
        return (self.N, self.N, self.N)

    @property
    def half_shape(self):
        return (self.N, self.N, self.N // 2 + 1)

    @cached_property
    def k_half(self):
        """Integer wavevector components broadcastable over the half layout.

        The last axis holds k_z = 0 .. N/2; the entry N/2 is the Nyquist
        plane, which aliases -N/2.
        """
        N = self.N
        kx = np.fft.fftfreq(N, 1.0 / N).astype(np.int64).reshape(N, 1, 1)
        ky = kx.reshape(1, N, 1)
        kz = np.arange(N // 2 + 1, dtype=np.int64).reshape(1, 1, N // 2 + 1)
        return kx, ky, kz

    @cached_property
    def k_sq(self) -> np.ndarray:
        """|k|^2 of the integer wavevector on the half layout."""
        kx, ky, kz = self.k_half
        return kx * kx + ky * ky + kz * kz

    @cached_property
    def k_mag(self) -> np.ndarray:
        return np.sqrt(self.k_sq.astype(float))

    @cached_property
    def k_deriv(self):
        """Integer wavevector with Nyquist components zeroed.

        Used for odd operations (derivatives, divergence, Leray projection)
        so that they map real fields to real fields.
        """
        N = self.N
        out = []
        for k in self.k_half:
            k = k.copy()
            k[k == -N // 2] = 0
            k[k == N // 2] = 0
            out.append(k)
        return tuple(out)

    @cached_property
    def kappa_sq(self) -> np.ndarray:
        """|2 pi k / L|^2 on the half layout."""
        return self.k_sq * (2 * np.pi / self.L) ** 2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        K = self.k_max_dealias
        kx, ky, kz = self.k_half
        return (np.abs(kx) <= K) & (np.abs(ky) <= K) & (kz <= K)

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each stored coefficient in full-spectrum sums."""
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w.reshape(1, 1, -1)

    @cached_property
    def q_max(self) -> int:
        """Largest dyadic shell index that meets the dealiased band."""
        kmax = self.k_max_dealias * np.sqrt(3.0)
        q = 0
        while 0.75 * 2 ** (q + 1) < kmax:
            q += 1
        return q

    def lambda_q(self, q) -> float:
        return 2.0 ** np.asarray(q, dtype=float) / self.L

    def coordinates(self):
        """Grid points x, y, z as broadcastable arrays."""
        x = np.arange(self.N) * self.dx
        return x.reshape(-1, 1, 1), x.reshape(1, -1, 1), x.reshape(1, 1, -1)


def forward_transform(samples, grid: TorusGrid) -> np.ndarray:
    """Fourier coefficients (half layout) of real samples of shape (3, N, N, N)."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (3,) + grid.shape:
        raise ValueError(f"expected samples of shape {(3,) + grid.shape}, got {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples contain non-finite values")
    return sfft.rfftn(samples, axes=(1, 2, 3), norm="forward")


def inverse_transform(coeffs, grid: TorusGrid) -> np.ndarray:
    """Physical samples from half-layout coefficients."""
    return sfft.irfftn(coeffs, s=grid.shape, axes=(1, 2, 3), norm="forward")


class VectorField:
    """Real 3-component field on a :class:`TorusGrid`.

    ``coeffs`` is the canonical (half layout) spectral representation and is
    read-only.  Physical samples are computed on first access and cached.
    """

    def __init__(self, grid: TorusGrid, coeffs, divergence_free: bool = False):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.shape != (3,) + grid.half_shape:
            raise ValueError(f"expected coefficients of shape {(3,) + grid.half_shape}, got {coeffs.shape}")
        coeffs.setflags(write=False)
        self.grid = grid
        self.coeffs = coeffs
        self.divergence_free = divergence_free
        self._physical = None

    @classmethod
    def from_physical(cls, grid: TorusGrid, samples, divergence_free: bool = False):
        field = cls(grid, forward_transform(samples, grid), divergence_free)
        phys = np.array(samples, dtype=float)
        phys.setflags(write=False)
        field._physical = phys
        return field

    @classmethod
    def zeros(cls, grid: TorusGrid):
        return cls(grid, np.zeros((3,) + grid.half_shape, dtype=complex), divergence_free=True)

    @property
    def representation(self) -> str:
        return "spectral" if self._physical is None else "both"

    @property
    def physical(self) -> np.ndarray:
        if self._physical is None:
            phys = inverse_transform(self.coeffs, self.grid)
            phys.setflags(write=False)
            self._physical = phys
        return self._physical

    @cached_property
    def full_coeffs(self) -> np.ndarray:
        """Coefficients on the full integer lattice, axes indexed by k mod N."""
        N = self.grid.N
        full = np.empty((3, N, N, N), dtype=complex)
        full[..., : N // 2 + 1] = self.coeffs
        # k_z < 0 from Hermitian symmetry u_hat(-k) = conj(u_hat(k))
        neg = np.arange(N // 2 + 1, N)
        idx = (-np.arange(N)) % N
        mirror = self.coeffs[:, idx][:, :, idx][..., (N - neg)]
        full[..., neg] = np.conj(mirror)
        return full

    def coefficient(self, k) -> np.ndarray:
        """u_hat at integer wavevector k (any sign convention mod N)."""
        N = self.grid.N
        i, j, l = (int(c) % N for c in k)
        return self.full_coeffs[:, i, j, l].copy()

    def with_coeffs(self, coeffs, divergence_free: bool | None = None) -> "VectorField":
        if divergence_free is None:
            divergence_free = self.divergence_free
        return VectorField(self.grid, coeffs, divergence_free)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs, self.divergence_free and other.divergence_free)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs, self.divergence_free and other.divergence_free)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"VectorField(N={self.grid.N}, L={self.grid.L:g}, {self.representation})"


def leray_project(u: VectorField) -> VectorField:
    """Project onto divergence-free fields: u_hat <- (I - k k^T/|k|^2) u_hat."""
    kx, ky, kz = u.grid.k_deriv
    k2 = kx * kx + ky * ky + kz * kz
    c = u.coeffs
    kdotu = kx * c[0] + ky * c[1] + kz * c[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(k2 > 0, kdotu / np.where(k2 > 0, k2, 1), 0)
    out = np.stack([c[0] - kx * s, c[1] - ky * s, c[2] - kz * s])
    return u.with_coeffs(out, divergence_free=True)


def dealias(u: VectorField) -> VectorField:
    """Zero every mode with some |k_i| above the 2/3-rule cutoff."""
    return u.with_coeffs(u.coeffs * u.grid.dealias_mask)


def divergence_residual(u: VectorField) -> float:
    """max_k |k.u_hat(k)| / max_k |k||u_hat(k)| (0 for the zero field)."""
    kx, ky, kz = u.grid.k_deriv
    c = u.coeffs
    div = np.abs(kx * c[0] + ky * c[1] + kz * c[2]).max()
    k = np.sqrt((kx * kx + ky * ky + kz * kz).astype(float))
    scale = (k * np.sqrt(np.sum(np.abs(c) ** 2, axis=0))).max()
    return float(div / scale) if scale > 0 else 0.0


def gradient(u: VectorField) -> np.ndarray:
    """Spectral coefficients of du_i/dx_j, shape (3, 3, ...) indexed [i, j]."""
    s = 2j * np.pi / u.grid.L
    return np.stack([np.stack([s * k * u.coeffs[i] for k in u.grid.k_deriv]) for i in range(3)])


def _spectral_sum(grid: TorusGrid, values) -> float:
    """Sum a nonnegative per-mode quantity over the full lattice."""
    return float(np.sum(values * grid.half_weights))


def inner_product(u: VectorField, v: VectorField) -> float:
    """L^2 inner product (u, v) computed spectrally."""
    g = u.grid
    dot = np.sum(np.conj(u.coeffs) * v.coeffs, axis=0).real
    return _spectral_sum(g, dot) * g.L ** 3


def band_indices(K: int, n: int) -> np.ndarray:
    """Positions of wavenumbers 0..K, -K..-1 on an axis of length n."""
    return np.concatenate([np.arange(K + 1), np.arange(-K, 0)]) % n


def band_extract(coeffs, N: int, K: int) -> np.ndarray:
    """Restrict half-layout coefficients to the cube |k_i| <= K.

    The result has shape (3, 2K+1, 2K+1, K+1) with x and y in FFT order.
    """
    idx = band_indices(K, N)
    return coeffs[:, idx][:, :, idx][..., : K + 1]


def band_embed(sub, N: int, K: int) -> np.ndarray:
    out = np.zeros((3, N, N, N // 2 + 1), dtype=complex)
    idx = band_indices(K, N)
    out[np.ix_(range(3), idx, idx, range(K + 1))] = sub
    return out


def band_to_physical(sub, K: int, M: int) -> np.ndarray:
    """Samples on the M^3 grid of a field given on the cube |k_i| <= K < M/2.

    Pruned inverse transform: only lines that can hold nonzero data are
    transformed along y and x before the final real transform along z.
    """
    idx = band_indices(K, M)
    a = np.zeros((sub.shape[0], sub.shape[1], M, K + 1), dtype=complex)
    a[:, :, idx, :] = sub
    a = sfft.ifft(a, axis=2, norm="forward", overwrite_x=True)
    b = np.zeros((sub.shape[0], M, M, M // 2 + 1), dtype=complex)
    b[:, idx, :, : K + 1] = a
    b[..., : K + 1] = sfft.ifft(b[..., : K + 1], axis=1, norm="forward")
    return sfft.irfft(b, n=M, axis=3, norm="forward", overwrite_x=True)


def physical_to_band(samples, K: int) -> np.ndarray:
    """Fourier coefficients on the cube |k_i| <= K of samples on an M^3 grid."""
    M = samples.shape[1]
    idx = band_indices(K, M)
    a = sfft.rfft(samples, axis=3, norm="forward")[..., : K + 1]
    a = sfft.fft(a, axis=1, norm="forward", overwrite_x=True)[:, idx]
    return sfft.fft(a, axis=2, norm="forward", overwrite_x=True)[:, :, idx]


def support_extent(u: VectorField) -> int | None:
    """Smallest K with u supported on |k_i| <= K, or None if a Nyquist
    coefficient is nonzero."""
    nz = u.coeffs != 0
    N = u.grid.N
    K = 0
    for axis, k in zip((1, 2, 3), u.grid.k_half):
        other = tuple(a for a in (0, 1, 2, 3) if a != axis)
        used = np.any(nz, axis=other)
        if used.any():
            kk = int(np.abs(k.ravel()[used]).max())
            if kk >= N // 2:
                return None
            K = max(K, kk)
    return K


def padded_physical(u: VectorField, factor: int = 2) -> np.ndarray:
    """Trigonometric interpolant of u sampled on the (factor*N)^3 grid.

    Nyquist coefficients are split evenly between +N/2 and -N/2 so the
    interpolant is real.
    """
    N = u.grid.N
    M = factor * N
    K = support_extent(u)
    if K is not None:
        return band_to_physical(band_extract(u.coeffs, N, K), K, M)
    h = N // 2
    c = u.coeffs
    # axis 3 (half layout): k_z = 0..h-1 copied, Nyquist halved into +N/2
    a = np.zeros((3, N, N, M // 2 + 1), dtype=complex)
    a[..., :h] = c[..., :h]
    a[..., h] = 0.5 * c[..., h]
    for axis in (1, 2):
        shape = list(a.shape)
        shape[axis] = M
        b = np.zeros(shape, dtype=complex)
        src = [slice(None)] * 4
        dst = [slice(None)] * 4
        src[axis], dst[axis] = slice(0, h), slice(0, h)
        b[tuple(dst)] = a[tuple(src)]
        src[axis], dst[axis] = slice(h + 1, N), slice(M - h + 1, M)
        b[tuple(dst)] = a[tuple(src)]
        src[axis] = h
        nyq = 0.5 * a[tuple(src)]
        dst[axis] = h
        b[tuple(dst)] = nyq
        dst[axis] = M - h
        b[tuple(dst)] = nyq
        a = b
    return sfft.irfftn(a, s=(M, M, M), axes=(1, 2, 3), norm="forward")


@numba.njit(cache=True)
def _magnitude_stats(p, r):
    """(sum |p|^r, max |p|) over the grid, |.| the Euclidean vector norm."""
    total = 0.0
    peak = 0.0
    for i in range(p.shape[1]):
        for j in range(p.shape[2]):
            for l in range(p.shape[3]):
                m2 = p[0, i, j, l] ** 2 + p[1, i, j, l] ** 2 + p[2, i, j, l] ** 2
                if m2 > peak:
                    peak = m2
                if r > 0:
                    total += m2 ** (0.5 * r)
    return total, np.sqrt(peak)


def physical_norms(samples, rs, L: float) -> list[float]:
    """Rectangle-rule L^r norms (r = inf: grid max) of samples on a uniform grid."""
    cell = (L / samples.shape[1]) ** 3
    cache = {}
    out = []
    for r in rs:
        key = 0.0 if np.isinf(r) else float(r)
        if key not in cache:
            cache[key] = _magnitude_stats(samples, key)
        total, peak = cache[key]
        out.append(float(peak) if np.isinf(r) else float((total * cell) ** (1.0 / r)))
    return out


def _check_r(r):
    r = float(r)
    if not r >= 1:
        raise ValueError(f"Lebesgue exponent must satisfy r >= 1, got {r}")
    return r


def lebesgue_norms(u: VectorField, rs) -> list[float]:
    """||u||_r for several exponents sharing one padded transform.

    r = 2 uses Parseval exactly; other exponents use the rectangle rule on
    the 2x zero-padded grid; r = inf is the padded-grid maximum of |u|.
    """
    rs = [_check_r(r) for r in rs]
    g = u.grid
    out = [0.0] * len(rs)
    other = [i for i, r in enumerate(rs) if r != 2]
    if other:
        vals = physical_norms(padded_physical(u), [rs[i] for i in other], g.L)
        for i, v in zip(other, vals):
            out[i] = v
    for i, r in enumerate(rs):
        if r == 2:
            out[i] = float(np.sqrt(_spectral_sum(g, np.sum(np.abs(u.coeffs) ** 2, axis=0)) * g.L ** 3))
    return out


def lebesgue_norm(u: VectorField, r) -> float:
    """||u||_{L^r} of the Euclidean magnitude of u."""
    return lebesgue_norms(u, [r])[0]


def sobolev_norm(u: VectorField, s: float) -> float:
    """Sharp Fourier H^s norm (sum_{k != 0} |2 pi k/L|^{2s} |u_hat|^2 L^3)^(1/2)."""
    g = u.grid
    # the mean is ignored either way; a negative order only rejects a mean
    # that is more than transform roundoff
    scale = np.max(np.abs(u.coeffs), initial=0.0)
    if s < 0 and np.max(np.abs(u.coeffs[:, 0, 0, 0])) > 1e-13 * scale:
        raise ValueError("negative-order Sobolev norm requires a zero-mean field")
    k2 = g.kappa_sq
    with np.errstate(divide="ignore"):
        w = np.where(k2 > 0, np.where(k2 > 0, k2, 1.0) ** s, 0.0)
    e = np.sum(np.abs(u.coeffs) ** 2, axis=0) * w
    return float(np.sqrt(_spectral_sum(g, e) * g.L ** 3))
