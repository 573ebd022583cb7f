"""Pseudo-spectral integration of the forced incompressible Navier-Stokes
equations on the torus.

The Leray-projected system

    d u_hat/dt = -nu |kappa|^2 u_hat - P[(u.grad)u]^ + f_hat

is advanced with the fourth-order exponential time differencing scheme of
Cox & Matthews; the viscous factor exp(-nu |kappa|^2 dt) is applied exactly
and the phi-function coefficients are evaluated by contour averaging
(Kassam & Trefethen).  Pressure is never formed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
import scipy.fft as sfft

from .spectral import (
    TorusGrid,
    VectorField,
    band_embed,
    band_extract,
    band_indices,
    band_to_physical,
    dealias,
    inner_product,
    lebesgue_norm,
    leray_project,
    physical_to_band,
    sobolev_norm,
)

__all__ = [
    "ForcingSpec",
    "SolverState",
    "EnergyBudget",
    "SolverDivergence",
    "NavierStokesSolver",
    "nonlinear_term",
    "energy_budget",
    "random_field",
    "relax_to_steady",
    "SteadyStateNotReached",
]

log = logging.getLogger(__name__)


class SolverDivergence(RuntimeError):
    """Non-finite values appeared during a step.

    ``last_good`` holds the state before the failing step.
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class SteadyStateNotReached(RuntimeError):
    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


FORCING_KINDS = ("none", "steady-low-mode", "custom-coefficients")
FORCING_PATTERNS = ("taylor-green", "abc", "shear")


@dataclass(frozen=True)
class ForcingSpec:
    """Steady body force.

    ``steady-low-mode`` uses a fixed pattern scaled by ``amplitude``:
    ``taylor-green`` (modes |k| = sqrt 3), ``abc`` (Arnold-Beltrami-Childress,
    |k| = 1) or ``shear`` (f_x = sin(2 pi y / L)).  ``custom-coefficients``
    takes ``modes`` as rows (kx, ky, kz, Re fx, Im fx, Re fy, Im fy, Re fz, Im fz);
    the conjugate modes are filled in automatically.
    """

    kind: str = "none"
    amplitude: float = 0.0
    pattern: str = "taylor-green"
    modes: tuple = ()

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ValueError(f"forcing kind must be one of {FORCING_KINDS}, got {self.kind!r}")
        if self.pattern not in FORCING_PATTERNS:
            raise ValueError(f"forcing pattern must be one of {FORCING_PATTERNS}, got {self.pattern!r}")

    def field(self, grid: TorusGrid) -> VectorField:
        if self.kind == "none" or (self.kind == "steady-low-mode" and self.amplitude == 0):
            return VectorField.zeros(grid)
        if self.kind == "steady-low-mode":
            x, y, z = (2 * np.pi * c / grid.L for c in grid.coordinates())
            f = np.zeros((3,) + grid.shape)
            if self.pattern == "taylor-green":
                f[0] = np.sin(x) * np.cos(y) * np.cos(z)
                f[1] = -np.cos(x) * np.sin(y) * np.cos(z)
            elif self.pattern == "abc":
                f[0] = np.sin(z) + np.cos(y)
                f[1] = np.sin(x) + np.cos(z)
                f[2] = np.sin(y) + np.cos(x)
            else:
                f[0] = np.sin(y) + 0 * x + 0 * z
            field = VectorField.from_physical(grid, self.amplitude * f)
        else:
            full = np.zeros((3,) + grid.shape, dtype=complex)
            N = grid.N
            for row in self.modes:
                k = np.array(row[:3], dtype=int)
                a = np.array(row[3:9], dtype=float)
                amp = a[0::2] + 1j * a[1::2]
                if not k.any():
                    raise ValueError("forcing must have zero mean (k = 0 mode given)")
                i = tuple(k % N)
                j = tuple(-k % N)
                full[(slice(None),) + i] += amp
                full[(slice(None),) + j] += np.conj(amp)
            phys = sfft.ifftn(full, axes=(1, 2, 3), norm="forward").real
            field = VectorField.from_physical(grid, phys)
        out = dealias(leray_project(field))
        c = np.array(out.coeffs)
        c[:, 0, 0, 0] = 0
        return out.with_coeffs(c, divergence_free=True)


@dataclass
class SolverState:
    t: float
    u: VectorField
    step: int = 0


class EnergyBudget(tuple):
    __slots__ = ()

    def __new__(cls, energy, enstrophy, dissipation, injection):
        return super().__new__(cls, (energy, enstrophy, dissipation, injection))

    energy = property(lambda self: self[0])
    enstrophy = property(lambda self: self[1])
    dissipation = property(lambda self: self[2])
    injection = property(lambda self: self[3])


def energy_budget(u: VectorField, f: VectorField, nu: float) -> EnergyBudget:
    """(1/2 ||u||^2, ||grad u||^2, nu ||grad u||^2, (f, u)), all spectral."""
    ens = sobolev_norm(u, 1) ** 2
    return EnergyBudget(0.5 * lebesgue_norm(u, 2) ** 2, ens, nu * ens, inner_product(f, u))


@numba.njit(cache=True)
def _curl(c, kx, ky, kz, out):
    """out = i kappa x c on the half layout (kx, ky, kz already scaled)."""
    for i in range(c.shape[1]):
        for j in range(c.shape[2]):
            for l in range(c.shape[3]):
                a, b, d = c[0, i, j, l], c[1, i, j, l], c[2, i, j, l]
                out[0, i, j, l] = 1j * (ky[j] * d - kz[l] * b)
                out[1, i, j, l] = 1j * (kz[l] * a - kx[i] * d)
                out[2, i, j, l] = 1j * (kx[i] * b - ky[j] * a)


@numba.njit(cache=True)
def _cross(om, u, out):
    """out = om x u pointwise; returns max |u|^2."""
    umax = 0.0
    for i in range(u.shape[1]):
        for j in range(u.shape[2]):
            for l in range(u.shape[3]):
                u0, u1, u2 = u[0, i, j, l], u[1, i, j, l], u[2, i, j, l]
                w0, w1, w2 = om[0, i, j, l], om[1, i, j, l], om[2, i, j, l]
                out[0, i, j, l] = w1 * u2 - w2 * u1
                out[1, i, j, l] = w2 * u0 - w0 * u2
                out[2, i, j, l] = w0 * u1 - w1 * u0
                m = u0 * u0 + u1 * u1 + u2 * u2
                if m > umax:
                    umax = m
    return umax


@numba.njit(cache=True)
def _project(c, kx, ky, kz, mx, my, mz, sign, f, out):
    """out = sign * P[c] * mask + f, P the Leray projector, mask the 2/3 rule."""
    for i in range(c.shape[1]):
        for j in range(c.shape[2]):
            for l in range(c.shape[3]):
                if not (mx[i] and my[j] and mz[l]):
                    out[0, i, j, l] = 0.0
                    out[1, i, j, l] = 0.0
                    out[2, i, j, l] = 0.0
                    continue
                a, b, d = c[0, i, j, l], c[1, i, j, l], c[2, i, j, l]
                k2 = kx[i] * kx[i] + ky[j] * ky[j] + kz[l] * kz[l]
                s = 0.0j
                if k2 > 0:
                    s = (kx[i] * a + ky[j] * b + kz[l] * d) / k2
                out[0, i, j, l] = sign * (a - kx[i] * s) + f[0, i, j, l]
                out[1, i, j, l] = sign * (b - ky[j] * s) + f[1, i, j, l]
                out[2, i, j, l] = sign * (d - kz[l] * s) + f[2, i, j, l]


def _etd_coefficients(z, contour_points=64):
    """exp(z), exp(z/2) and the ETDRK4 weights divided by dt, for real z <= 0."""
    roots = np.exp(1j * np.pi * (np.arange(contour_points) + 0.5) / contour_points)
    lr = z[:, None] + roots[None, :]
    e = np.exp(lr)
    q = np.mean((np.exp(lr / 2) - 1) / lr, axis=1).real
    f1 = np.mean((-4 - lr + e * (4 - 3 * lr + lr ** 2)) / lr ** 3, axis=1).real
    f2 = np.mean((2 + lr + e * (lr - 2)) / lr ** 3, axis=1).real
    f3 = np.mean((-4 - 3 * lr - lr ** 2 + e * (4 - lr)) / lr ** 3, axis=1).real
    return np.exp(z), np.exp(z / 2), q, f1, f2, f3


class NavierStokesSolver:
    """ETDRK4 integrator for a fixed grid, viscosity, time step and force."""

    def __init__(self, grid: TorusGrid, nu: float, dt: float, forcing: ForcingSpec | VectorField | None = None):
        if nu <= 0 or dt <= 0:
            raise ValueError("nu and dt must be positive")
        self.grid = grid
        self.nu = nu
        self.dt = dt
        if forcing is None:
            forcing = ForcingSpec()
        self.force = forcing.field(grid) if isinstance(forcing, ForcingSpec) else forcing
        # The state is advanced on the retained cube |k_i| <= K only; products
        # are formed on the N^3 grid, which is alias-free for 3K < N.
        K = grid.k_max_dealias
        self._K = K
        idx = band_indices(K, grid.N)

        def band(a):
            return a[..., idx, :, :][..., idx, :][..., : K + 1]

        self._f = band(self.force.coeffs)
        k2 = band(grid.k_sq)
        levels, inverse = np.unique(k2, return_inverse=True)
        z = -nu * (2 * np.pi / grid.L) ** 2 * dt * levels.astype(float)
        coef = _etd_coefficients(z)
        shape = k2.shape
        self._E, self._E2, q, f1, f2, f3 = (c[inverse].reshape(shape) for c in coef)
        self._Q, self._f1, self._f2, self._f3 = (dt * c for c in (q, f1, f2, f3))
        kx, ky, kz = (2 * np.pi / grid.L * k.ravel().astype(float) for k in grid.k_deriv)
        self._k1 = (kx[idx], ky[idx], kz[: K + 1])
        self._m1 = tuple(np.ones(len(k), dtype=bool) for k in self._k1)
        self._zero = np.zeros_like(self._f)
        self._cfl_warned = False
        self._umax = 0.0

    def to_band(self, coeffs) -> np.ndarray:
        return band_extract(np.asarray(coeffs), self.grid.N, self._K)

    def from_band(self, sub) -> np.ndarray:
        return band_embed(sub, self.grid.N, self._K)

    def _project(self, c, sign=1.0, f=None):
        out = np.empty_like(c)
        _project(c, *self._k1, *self._m1, sign, self._zero if f is None else f, out)
        return out

    def _nonlinear(self, c):
        """-P[(u.grad)u]^ + f_hat.

        Evaluated in rotational form: (u.grad)u = omega x u + grad(|u|^2/2),
        and the gradient is annihilated by P.  With the 2/3 cutoff the two
        forms agree exactly on the retained modes.
        """
        both = np.empty((6,) + c.shape[1:], dtype=complex)
        both[:3] = c
        _curl(c, *self._k1, both[3:])
        phys = band_to_physical(both, self._K, self.grid.N)
        cross = np.empty_like(phys[:3])
        umax2 = _cross(phys[3:], phys[:3], cross)
        self._umax = max(self._umax, float(np.sqrt(umax2)))
        return self._project(physical_to_band(cross, self._K), -1.0, self._f)

    def nonlinear(self, u: VectorField) -> VectorField:
        """Leray-projected, dealiased -P[(u.grad)u] (the force is not included)."""
        out = self._nonlinear(self.to_band(u.coeffs)) - self._f
        if not np.all(np.isfinite(out)):
            raise SolverDivergence("non-finite nonlinear term")
        return u.with_coeffs(self.from_band(out), divergence_free=True)

    def _advance(self, v):
        Nv = self._nonlinear(v)
        a = self._E2 * v + self._Q * Nv
        Na = self._nonlinear(a)
        b = self._E2 * v + self._Q * Na
        Nb = self._nonlinear(b)
        c = self._E2 * a + self._Q * (2 * Nb - Nv)
        Nc = self._nonlinear(c)
        out = self._E * v + self._f1 * Nv + 2 * self._f2 * (Na + Nb) + self._f3 * Nc
        return self._project(out)

    def step(self, state: SolverState) -> SolverState:
        self._umax = 0.0
        new = self._advance(self.to_band(state.u.coeffs))
        if not np.all(np.isfinite(new)):
            raise SolverDivergence(f"non-finite velocity at step {state.step + 1} (t={state.t + self.dt:g})",
                                   last_good=state)
        new[:, 0, 0, 0] = 0
        self._check_cfl()
        return SolverState(state.t + self.dt, state.u.with_coeffs(self.from_band(new), divergence_free=True),
                           state.step + 1)

    def _check_cfl(self):
        if self._umax > 0 and self.dt > 0.5 * self.grid.dx / self._umax and not self._cfl_warned:
            log.warning("dt=%g exceeds the advective CFL bound 0.5*dx/|u|_inf=%g",
                        self.dt, 0.5 * self.grid.dx / self._umax)
            self._cfl_warned = True

    def advance(self, state: SolverState, n_steps: int) -> SolverState:
        """n_steps steps, staying in the band layout between them."""
        if n_steps <= 0:
            return state
        c = self.to_band(state.u.coeffs)
        for i in range(n_steps):
            self._umax = 0.0
            new = self._advance(c)
            if not np.all(np.isfinite(new)):
                last = SolverState(state.t + i * self.dt, state.u.with_coeffs(self.from_band(c)), state.step + i)
                raise SolverDivergence(f"non-finite velocity at step {state.step + i + 1}", last_good=last)
            new[:, 0, 0, 0] = 0
            self._check_cfl()
            c = new
        return SolverState(state.t + n_steps * self.dt,
                           state.u.with_coeffs(self.from_band(c), divergence_free=True), state.step + n_steps)

    def initial_state(self, u: VectorField, t: float = 0.0) -> SolverState:
        u = dealias(leray_project(u))
        c = np.array(u.coeffs)
        c[:, 0, 0, 0] = 0
        return SolverState(t, u.with_coeffs(c, divergence_free=True), 0)

    def budget(self, state: SolverState) -> EnergyBudget:
        return energy_budget(state.u, self.force, self.nu)


def nonlinear_term(u: VectorField) -> VectorField:
    """-P[(u.grad)u] computed pseudo-spectrally with 2/3-rule dealiasing."""
    return NavierStokesSolver(u.grid, 1.0, 1.0).nonlinear(u)


def random_field(grid: TorusGrid, seed: int, energy: float = 0.5, k_peak: float = 2.0,
                 k_box: int | None = None) -> VectorField:
    """Seeded random divergence-free field with spectrum E(k) ~ k^4 exp(-k^2/k_peak^2).

    Coefficients are drawn on the fixed box |k_i| <= k_box (default 4 k_peak)
    independently of N, so one seed gives the same field on every grid that
    resolves the box.  The result is scaled to the requested energy
    1/2 ||u||_2^2.
    """
    if k_box is None:
        k_box = int(math.ceil(4 * k_peak))
    n = 2 * k_box + 1
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, n, n, n)) + 1j * rng.standard_normal((3, n, n, n))
    # box index i <-> k = i - k_box; reversing every axis maps k -> -k
    z = 0.5 * (z + np.conj(z[:, ::-1, ::-1, ::-1]))
    k1 = np.arange(-k_box, k_box + 1)
    kk = np.sqrt(k1[:, None, None] ** 2 + k1[None, :, None] ** 2 + k1[None, None, :] ** 2)
    amp = kk * np.exp(-kk ** 2 / (2 * k_peak ** 2))
    z *= amp
    N = grid.N
    full = np.zeros((3, N, N, N), dtype=complex)
    lim = min(k_box, N // 2 - 1)
    sel = np.arange(-lim, lim + 1)
    full[np.ix_(range(3), sel % N, sel % N, sel % N)] = z[np.ix_(range(3), sel + k_box, sel + k_box, sel + k_box)]
    phys = sfft.ifftn(full, axes=(1, 2, 3), norm="forward").real
    u = dealias(leray_project(VectorField.from_physical(grid, phys)))
    c = np.array(u.coeffs)
    c[:, 0, 0, 0] = 0
    u = u.with_coeffs(c, divergence_free=True)
    e = 0.5 * lebesgue_norm(u, 2) ** 2
    if e == 0:
        return u
    return u * math.sqrt(energy / e)


def relax_to_steady(forcing: ForcingSpec, grid: TorusGrid, nu: float, tol: float = 1e-10,
                    dt: float | None = None, max_steps: int = 200_000, check_every: int = 10,
                    u0: VectorField | None = None) -> VectorField:
    """Time-march from the Stokes solution until
    ||u(t + D) - u(t)||_2 / D <= tol nu lambda0^2 ||u||_2 with D = check_every*dt.
    """
    f = forcing.field(grid)
    if not np.any(f.coeffs):
        return VectorField.zeros(grid)
    from .diagnostics import grashof

    G = grashof(f, nu)
    if G > 1:
        log.warning("Grashof number %.3g > 1: a stable steady state may not exist", G)
    k2 = grid.kappa_sq
    if u0 is None:
        u0 = f.with_coeffs(np.where(k2 > 0, f.coeffs / (nu * np.where(k2 > 0, k2, 1)), 0))
    if dt is None:
        umax = max(lebesgue_norm(u0, np.inf), 1e-300)
        dt = min(0.25 * grid.dx / umax, 0.5 / (nu * grid.kappa0 ** 2))
    solver = NavierStokesSolver(grid, nu, dt, f)
    state = solver.initial_state(u0)
    lam0 = grid.lambda0
    residuals = []
    span = check_every * dt
    while state.step < max_steps:
        prev = state.u
        state = solver.advance(state, check_every)
        norm = lebesgue_norm(state.u, 2)
        res = lebesgue_norm(state.u - prev, 2) / span
        residuals.append(res)
        if res <= tol * nu * lam0 ** 2 * norm:
            return state.u
    raise SteadyStateNotReached(f"no steady state within {max_steps} steps (last residual {residuals[-1]:.3e})",
                                residuals)
