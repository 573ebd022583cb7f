"""Smooth dyadic partition of unity and Littlewood-Paley shell projections.

The radial cutoff ``chi`` equals 1 on [0, 3/4] and 0 on [1, inf) with a
C-infinity transition built from exp(-1/t).  Shell multipliers are
``phi(2^-q |k|)`` with ``phi(xi) = chi(xi/2) - chi(xi)``; the multiplier
argument is the integer wavevector magnitude, so shell q lives on
3/4 * 2^q < |k| < 2^(q+1).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .spectral import TorusGrid, VectorField, lebesgue_norm, lebesgue_norms

__all__ = [
    "chi",
    "phi",
    "shell_multiplier",
    "below_multiplier",
    "project_shell",
    "project_below",
    "ShellDecomposition",
    "decompose",
    "shell_norms",
    "bernstein_ratio",
    "partition_error",
]


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def chi(xi):
    """Radial cutoff: 1 for xi <= 3/4, 0 for xi >= 1, nonincreasing between."""
    xi = np.asarray(xi, dtype=float)
    t = np.clip((xi - 0.75) * 4.0, 0.0, 1.0)
    a = _h(1.0 - t)
    return a / (a + _h(t))


def phi(xi):
    return chi(np.asarray(xi, dtype=float) / 2.0) - chi(xi)


def _frozen(a):
    a.setflags(write=False)
    return a


@lru_cache(maxsize=256)
def shell_multiplier(grid: TorusGrid, q: int) -> np.ndarray:
    """phi(2^-q |k|) on the half layout (chi(|k|) for q = -1); read-only, cached."""
    if q < -1:
        raise ValueError(f"shell index must be >= -1, got {q}")
    if q == -1:
        return _frozen(chi(grid.k_mag))
    return _frozen(phi(grid.k_mag / 2.0 ** q))


@lru_cache(maxsize=256)
def below_multiplier(grid: TorusGrid, Q: int) -> np.ndarray:
    """Multiplier of u_{<=Q} = sum_{q=-1}^{Q} u_q, i.e. chi(2^-(Q+1) |k|)."""
    if Q < -1:
        raise ValueError(f"shell index must be >= -1, got {Q}")
    return _frozen(chi(grid.k_mag / 2.0 ** (Q + 1)))


def project_shell(u: VectorField, q: int) -> VectorField:
    """The q-th Littlewood-Paley block Delta_q u."""
    return u.with_coeffs(u.coeffs * shell_multiplier(u.grid, q))


def project_below(u: VectorField, Q: int) -> VectorField:
    return u.with_coeffs(u.coeffs * below_multiplier(u.grid, Q))


@dataclass
class ShellDecomposition:
    """Shells u_q for q = -1 .. q_max of one field, with a norm cache."""

    source: VectorField
    shells: dict = field(default_factory=dict)
    _norms: dict = field(default_factory=dict, repr=False)

    @property
    def q_max(self) -> int:
        return self.source.grid.q_max

    def norm(self, q: int, r) -> float:
        if q > self.q_max:
            return 0.0
        key = (q, float(r))
        if key not in self._norms:
            self._norms[key] = lebesgue_norm(self.shells[q], r)
        return self._norms[key]

    def reconstruct(self) -> VectorField:
        total = sum(self.shells[q].coeffs for q in range(-1, self.q_max + 1))
        return self.source.with_coeffs(total)


def decompose(u: VectorField) -> ShellDecomposition:
    shells = {q: project_shell(u, q) for q in range(-1, u.grid.q_max + 1)}
    return ShellDecomposition(u, shells)


def shell_norms(u: VectorField, r) -> dict:
    """Map q -> ||u_q||_r for q = -1 .. q_max (shells beyond q_max are zero)."""
    r = float(r)
    if not r > 1:
        raise ValueError(f"shell norms need r in (1, inf], got {r}")
    return {q: lebesgue_norm(project_shell(u, q), r) for q in range(-1, u.grid.q_max + 1)}


def bernstein_ratio(u_q: VectorField, q: int, s, r) -> float:
    """||u_q||_r / (lambda_q^{3(1/s - 1/r)} ||u_q||_s) for r >= s >= 1."""
    s, r = float(s), float(r)
    if not (r >= s >= 1):
        raise ValueError(f"need r >= s >= 1, got s={s}, r={r}")
    ns, nr = lebesgue_norms(u_q, [s, r])
    if ns == 0:
        raise ValueError("Bernstein ratio undefined for a zero shell")
    if s == r:
        return 1.0
    lam = u_q.grid.lambda_q(q)
    return float(nr / (lam ** (3 * (1 / s - 1 / r)) * ns))


def partition_error(grid: TorusGrid) -> float:
    """max over the resolved band of |sum_{q=-1}^{q_max} phi_q(|k|) - 1|."""
    total = sum(shell_multiplier(grid, q) for q in range(-1, grid.q_max + 1))
    band = grid.dealias_mask
    return float(np.abs(total - 1.0)[band].max())
