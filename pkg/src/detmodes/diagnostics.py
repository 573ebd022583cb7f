"""Determining and dissipation wavenumbers, local Reynolds numbers and the
time-averaged quantities they are compared against (Kolmogorov wavenumber,
intermittency dimension, Grashof number).

Dyadic wavenumbers are lambda_q = 2^q / L.  Conditions are evaluated for
q = 0 .. q_max; shells above q_max vanish identically on the grid, so the
"for all p > q" quantifier is vacuous there.  When no admissible q exists
on the grid the wavenumber is reported as saturated with Q = q_max + 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .littlewood_paley import below_multiplier, project_below, project_shell, shell_multiplier
from .spectral import (
    TorusGrid,
    VectorField,
    _magnitude_stats,
    _spectral_sum,
    lebesgue_norm,
    lebesgue_norms,
    padded_physical,
    sobolev_norm,
)

__all__ = [
    "Wavenumber",
    "WavenumberRecord",
    "AveragedDiagnostics",
    "BoundRow",
    "IntermittencyEstimate",
    "determining_wavenumber",
    "dissipation_wavenumber",
    "reynolds_profiles",
    "shell_profile",
    "analyze_field",
    "grashof",
    "time_average",
    "energy_dissipation_rate",
    "kolmogorov_wavenumber",
    "intermittency_dimension",
    "average_records",
    "bound_reports",
    "bernstein_constant",
    "calibrated_c0",
]


class Wavenumber(NamedTuple):
    Lambda: float
    Q: int
    saturated: bool


def _check_r(r):
    if not 2 < r < 3:
        raise ValueError(f"r must lie in the open interval (2,3), got {r}")


# Relative margin below which a cheap bound is not trusted to decide a test.
_MARGIN = 1e-9


def _cheap_bounds(v: VectorField, r: float):
    """Bounds on the padded-grid norms of v that need no transform.

    Returns (lower, upper) for ||v||_r, r in (2, inf].  The padded grid
    integrates |v|^2 exactly, so its L^2 equals the Parseval value; Holder on
    the normalized grid measure gives the lower bound and
    max|v| <= sum_k |v_hat(k)| (Wiener) gives the upper one.
    """
    g = v.grid
    c = v.coeffs
    mag2 = np.sum(c.real ** 2 + c.imag ** 2, axis=0)
    l2 = math.sqrt(_spectral_sum(g, mag2) * g.L ** 3)
    wiener = _spectral_sum(g, np.sqrt(mag2))
    if np.isinf(r):
        return l2 / g.L ** 1.5, wiener
    vol = g.L ** 3
    return l2 * vol ** (1 / r - 0.5), l2 ** (2 / r) * (wiener * vol ** (1 / r)) ** (1 - 2 / r)


def _below(v: VectorField, r: float, scale: float, thr: float) -> bool:
    """scale * ||v||_r < thr, deciding from cheap bounds when they are conclusive."""
    lo, hi = _cheap_bounds(v, r)
    if scale * hi < thr * (1 - _MARGIN):
        return True
    if scale * lo >= thr * (1 + _MARGIN):
        return False
    return scale * lebesgue_norm(v, r) < thr


def determining_wavenumber(u: VectorField, r: float, c_r: float, nu: float) -> Wavenumber:
    """Smallest lambda_q such that
    lambda_p^(-1+3/r) ||u_p||_r < c_r nu for all p > q and
    lambda_q^(-1) ||u_{<=q}||_inf < c_r nu.

    Shells are scanned from the top down: the first failing shell p bounds
    q from below, after which only the low-mode condition needs checking.
    """
    _check_r(r)
    if c_r <= 0 or nu <= 0:
        raise ValueError("c_r and nu must be positive")
    g = u.grid
    thr = c_r * nu
    q_lo = 0
    for p in range(g.q_max, 0, -1):
        if not _below(project_shell(u, p), r, g.lambda_q(p) ** (-1 + 3 / r), thr):
            q_lo = p
            break
    for q in range(q_lo, g.q_max + 1):
        if _below(project_below(u, q), np.inf, 1 / g.lambda_q(q), thr):
            return Wavenumber(float(g.lambda_q(q)), q, False)
    return Wavenumber(float(g.lambda_q(g.q_max + 1)), g.q_max + 1, True)


def dissipation_wavenumber(u: VectorField, c0: float, nu: float) -> Wavenumber:
    """Smallest lambda_q with lambda_p^(-1) ||u_p||_inf < c0 nu for all p > q."""
    if c0 <= 0 or nu <= 0:
        raise ValueError("c0 and nu must be positive")
    g = u.grid
    for p in range(g.q_max, 0, -1):
        if not _below(project_shell(u, p), np.inf, 1 / g.lambda_q(p), c0 * nu):
            return Wavenumber(float(g.lambda_q(p)), p, False)
    return Wavenumber(float(g.lambda_q(0)), 0, False)


@dataclass
class ShellProfile:
    """Per-shell norms of one field for q = 0 .. q_max."""

    r: float
    Lr: np.ndarray
    L2: np.ndarray
    Linf: np.ndarray
    below_Linf: np.ndarray

    @property
    def q(self):
        return np.arange(len(self.Lr))


def shell_profile(u: VectorField, r: float) -> ShellProfile:
    """All shell norms of u from one padded transform per shell.

    ||u_{<=q}||_inf is taken from the running sum of padded shell samples.
    """
    g = u.grid
    n = g.q_max + 1
    Lr, L2, Linf, below = (np.zeros(n) for _ in range(4))
    running = padded_physical(u.with_coeffs(u.coeffs * shell_multiplier(g, -1)))
    cell = (g.L / running.shape[1]) ** 3
    for q in range(n):
        shell = project_shell(u, q)
        p = padded_physical(shell)
        total, Linf[q] = _magnitude_stats(p, float(r))
        Lr[q] = (total * cell) ** (1.0 / r)
        L2[q] = lebesgue_norm(shell, 2)
        running += p
        below[q] = _magnitude_stats(running, 0.0)[1]
    return ShellProfile(float(r), Lr, L2, Linf, below)


def _wavenumbers_from_profile(prof: ShellProfile, grid: TorusGrid, r, c_r, c0, nu):
    lam = grid.lambda_q(prof.q)
    high = lam ** (-1 + 3 / r) * prof.Lr < c_r * nu
    low = prof.below_Linf / lam < c_r * nu
    dis = prof.Linf / lam < c0 * nu
    n = len(lam)
    Q = Qd = None
    for q in range(n):
        if Q is None and low[q] and high[q + 1:].all():
            Q = q
        if Qd is None and dis[q + 1:].all():
            Qd = q
    sat = Q is None
    if sat:
        Q = n
    return Wavenumber(float(grid.lambda_q(Q)), Q, sat), Wavenumber(float(grid.lambda_q(Qd)), Qd, False)


def reynolds_profiles(u: VectorField, nu: float):
    """R^h_q = l_q ||u_q||_inf / nu and R^l_q = l_q ||u_{<=q}||_inf / nu, q = 0..q_max."""
    g = u.grid
    lq = 1.0 / g.lambda_q(np.arange(g.q_max + 1))
    Rh = np.array([lebesgue_norm(project_shell(u, q), np.inf) for q in range(g.q_max + 1)])
    Rl = np.array([lebesgue_norm(project_below(u, q), np.inf) for q in range(g.q_max + 1)])
    return lq * Rh / nu, lq * Rl / nu


@dataclass
class WavenumberRecord:
    t: float
    Lambda: float
    Q: int
    Lambda_dis: float
    Q_dis: int
    enstrophy: float
    energy: float
    saturated: bool
    Rh: np.ndarray = field(repr=False)
    Rl: np.ndarray = field(repr=False)
    shell_Lr: np.ndarray = field(repr=False)
    shell_L2: np.ndarray = field(repr=False)


def analyze_field(u: VectorField, t: float, r: float, c_r: float, c0: float, nu: float,
                  profile: bool = True) -> WavenumberRecord:
    """All per-snapshot diagnostics of one velocity field.

    With ``profile=False`` only the two wavenumbers and the energies are
    computed (through the lazy scans); the per-shell arrays are left empty.
    """
    _check_r(r)
    g = u.grid
    if profile:
        prof = shell_profile(u, r)
        lam, lam_dis = _wavenumbers_from_profile(prof, g, r, c_r, c0, nu)
        lq = 1.0 / g.lambda_q(prof.q)
        arrays = dict(Rh=lq * prof.Linf / nu, Rl=lq * prof.below_Linf / nu, shell_Lr=prof.Lr, shell_L2=prof.L2)
    else:
        lam = determining_wavenumber(u, r, c_r, nu)
        lam_dis = dissipation_wavenumber(u, c0, nu)
        arrays = dict(Rh=np.empty(0), Rl=np.empty(0), shell_Lr=np.empty(0), shell_L2=np.empty(0))
    return WavenumberRecord(
        t=float(t),
        Lambda=lam.Lambda,
        Q=lam.Q,
        Lambda_dis=lam_dis.Lambda,
        Q_dis=lam_dis.Q,
        enstrophy=sobolev_norm(u, 1) ** 2,
        energy=0.5 * lebesgue_norm(u, 2) ** 2,
        saturated=lam.saturated,
        **arrays,
    )


def grashof(f: VectorField, nu: float) -> float:
    """G = ||f||_{H^-1} / (nu^2 kappa0^(1/2)), kappa0 = 2 pi / L."""
    return sobolev_norm(f, -1) / (nu ** 2 * math.sqrt(f.grid.kappa0))


def time_average(t, values) -> float:
    """Trapezoidal time average on (possibly nonuniform) samples."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot average an empty series")
    if values.size == 1 or t[-1] == t[0]:
        return float(values.mean())
    return float(np.trapezoid(values, t) / (t[-1] - t[0]))


def energy_dissipation_rate(t, enstrophy, nu: float, d: float, L: float) -> float:
    """eps = nu lambda0^d <||grad u||_2^2>."""
    if not 0 <= d <= 3:
        raise ValueError(f"intermittency dimension must lie in [0,3], got {d}")
    return nu * L ** (-d) * time_average(t, enstrophy)


def kolmogorov_wavenumber(eps: float, nu: float, d: float) -> float:
    return (eps / nu ** 3) ** (1.0 / (d + 1))


class IntermittencyEstimate(NamedTuple):
    d: float
    constant: float


def _intermittency_ratio(t, Lr, L2, Q, r, L):
    """d -> <sum_{q<=Q} lambda_q^(-1+6/r+d(1-2/r)) ||u_q||_r^2> /
             (lambda0^(d(1-2/r)) <sum_{q<=Q} lambda_q^2 ||u_q||_2^2>)."""
    Lr = np.asarray(Lr, dtype=float)
    L2 = np.asarray(L2, dtype=float)
    nq = Lr.shape[1]
    q = np.arange(nq)
    lam = 2.0 ** q / L
    keep = q[None, :] <= np.asarray(Q)[:, None]
    alpha = 1 - 2 / r
    a = np.where(keep, lam ** (-1 + 6 / r) * Lr ** 2, 0.0)
    rhs = time_average(t, np.sum(np.where(keep, lam ** 2 * L2 ** 2, 0.0), axis=1))

    def ratio(d):
        lhs = time_average(t, np.sum(a * (2.0 ** q) ** (d * alpha), axis=1))
        if rhs == 0:
            return 0.0 if lhs == 0 else np.inf
        return lhs / rhs

    return ratio


def intermittency_dimension(t, shell_Lr, shell_L2, Q, r: float, L: float, tol: float = 1e-3) -> IntermittencyEstimate:
    """Largest d in [0, 3] for which the averaged shell inequality holds with
    constant 1; ``constant`` is the measured left/right ratio at that d.

    The ratio is nondecreasing in d, so the feasible set is an interval
    [0, d*] and d* is located by bisection.  If even d = 0 is infeasible the
    estimate is 0 and the reported constant exceeds 1.
    """
    t = np.asarray(t, dtype=float)
    if t.size == 0:
        raise ValueError("empty series")
    Q = np.minimum(np.asarray(Q), np.asarray(shell_Lr).shape[1] - 1)
    ratio = _intermittency_ratio(t, shell_Lr, shell_L2, Q, r, L)
    if ratio(0.0) > 1:
        return IntermittencyEstimate(0.0, float(ratio(0.0)))
    if ratio(3.0) <= 1:
        return IntermittencyEstimate(3.0, float(ratio(3.0)))
    lo, hi = 0.0, 3.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ratio(mid) <= 1:
            lo = mid
        else:
            hi = mid
    return IntermittencyEstimate(lo, float(ratio(lo)))


@dataclass
class AveragedDiagnostics:
    T: float
    mean_Lambda: float
    mean_Lambda_excess: float
    mean_enstrophy: float
    eps: float
    kappa_d: float
    d: float
    d_constant: float
    G: float | None
    lambda0: float
    n_records: int
    n_saturated: int


def _resolved(records):
    return [rec for rec in records if not rec.saturated]


def average_records(records: Sequence[WavenumberRecord], nu: float, r: float, L: float,
                    G: float | None = None, d_override: float | None = None) -> AveragedDiagnostics:
    """Time averages over the unsaturated records.

    ``mean_Lambda_excess`` is the conditional average <1_{Lambda > lambda0} Lambda>.
    """
    if not records:
        raise ValueError("no records to average")
    ok = _resolved(records)
    if not ok:
        raise ValueError("every record is saturated; nothing to average")
    lam0 = 1.0 / L
    t = np.array([rec.t for rec in ok])
    Lam = np.array([rec.Lambda for rec in ok])
    ens = np.array([rec.enstrophy for rec in ok])
    if d_override is None:
        est = intermittency_dimension(t, [rec.shell_Lr for rec in ok], [rec.shell_L2 for rec in ok],
                                      [rec.Q for rec in ok], r, L)
        d, const = est.d, est.constant
    else:
        d, const = float(d_override), float("nan")
    eps = energy_dissipation_rate(t, ens, nu, d, L)
    return AveragedDiagnostics(
        T=float(t[-1] - t[0]),
        mean_Lambda=time_average(t, Lam),
        mean_Lambda_excess=time_average(t, np.where(Lam > lam0, Lam, 0.0)),
        mean_enstrophy=time_average(t, ens),
        eps=eps,
        kappa_d=kolmogorov_wavenumber(eps, nu, d),
        d=d,
        d_constant=const,
        G=G,
        lambda0=lam0,
        n_records=len(records),
        n_saturated=len(records) - len(ok),
    )


class BoundRow(NamedTuple):
    name: str
    lhs: float
    rhs: float
    ratio: float


def _ratio(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return a / b


def bound_reports(records: Sequence[WavenumberRecord], avg: AveragedDiagnostics, r: float, nu: float,
                  kappa0: float) -> list[BoundRow]:
    """Measured left side, constant-free right side and their ratio for each
    bound on the determining wavenumber.  Saturated records are excluded.

    The pointwise row reports the run maximum of Lambda nu^2 / ||grad u||^2.
    """
    ok = [rec for rec in _resolved(records) if rec.enstrophy > 0]
    rows = []
    if ok:
        ratios = [rec.Lambda * nu ** 2 / rec.enstrophy for rec in ok]
        i = int(np.argmax(ratios))
        rows.append(BoundRow("pointwise: Lambda(t) vs |grad u(t)|^2/nu^2",
                             ok[i].Lambda, ok[i].enstrophy / nu ** 2, float(ratios[i])))
    excess = avg.mean_Lambda - avg.lambda0
    rhs = avg.mean_enstrophy / nu ** 2
    rows.append(BoundRow("average: <Lambda>-lambda0 vs <|grad u|^2>/nu^2", excess, rhs, _ratio(excess, rhs)))
    d, lam0 = avg.d, avg.lambda0
    alpha = 1 - 2 / r
    rhs = (avg.eps / nu ** 3) ** (1 / (1 + d * alpha)) * lam0 ** (-2 * d / (r + d * (r - 2)))
    rows.append(BoundRow(f"intermittent (d={d:.3f}): <Lambda>-lambda0 vs (eps/nu^3)^(1/(1+d(1-2/r))) "
                         "lambda0^(-2d/(r+d(r-2)))", excess, rhs, _ratio(excess, rhs)))
    if avg.G is not None:
        G = avg.G
        T = avg.T if avg.T > 0 else math.inf
        rhs = G ** 2 / (T * nu ** 2 * kappa0) + kappa0 * G ** 2
        rows.append(BoundRow("Grashof: <Lambda>-lambda0 vs G^2/(T nu^2 kappa0) + kappa0 G^2",
                             excess, rhs, _ratio(excess, rhs)))
    return rows


def _kernel_candidates(grid: TorusGrid, q: int):
    """Shell-q fields concentrated at the origin: the flat-spectrum kernel on
    the shell support and the phi_q-weighted kernel."""
    m = shell_multiplier(grid, q) * grid.dealias_mask
    for weights in ((m > 0).astype(float), m):
        c = np.zeros((3,) + grid.half_shape, dtype=complex)
        c[0] = weights
        yield VectorField(grid, c)


def bernstein_constant(grid: TorusGrid, r: float) -> float:
    """Measured sup over shells of ||g||_inf / (lambda_q^(3/r) ||g||_r)
    across origin-concentrated shell kernels, the extremal profiles for the
    L^inf / L^r Bernstein inequality."""
    best = 0.0
    for q in range(grid.q_max + 1):
        for g in _kernel_candidates(grid, q):
            linf, lr = lebesgue_norms(g, [np.inf, r])
            if lr > 0:
                best = max(best, linf / (grid.lambda_q(q) ** (3 / r) * lr))
    return float(best)


def calibrated_c0(grid: TorusGrid, r: float, c_r: float) -> float:
    """c0 for which the determining wavenumber dominates the dissipation one:
    lambda_p^-1 ||u_p||_inf <= C_B lambda_p^(-1+3/r) ||u_p||_r < C_B c_r nu."""
    return bernstein_constant(grid, r) * c_r
