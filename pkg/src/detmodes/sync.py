"""Twin-solution experiments: two trajectories whose low Fourier modes are
made identical after every step, and the decay of their difference."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import determining_wavenumber
from .solver import NavierStokesSolver, SolverState, random_field, relax_to_steady
from .spectral import VectorField, leray_project, lebesgue_norm, sobolev_norm
from .storage import write_csv

__all__ = [
    "TwinState",
    "DecayReport",
    "enforce_low_mode_equality",
    "fit_decay_rate",
    "run_twin_experiment",
    "run_steady_reference_experiment",
]

log = logging.getLogger(__name__)

W_NORM_HEADER = [
    "t (time)",
    "w_L2 (L2 norm)",
    "w_H1 (H1 seminorm)",
    "Q (shell index)",
    "Lambda_u (1/length)",
    "Lambda_v (1/length)",
    "saturated_flag (0/1)",
]


def enforce_low_mode_equality(u: VectorField, v: VectorField, Q: int) -> VectorField:
    """v with its coefficients on |k| < 2^(Q+1) replaced by those of u.

    A v not already flagged divergence-free is Leray-projected first, and
    the copy is done afterwards, so the copied coefficients are bit-identical
    to u's.  Solver output is left as is: re-projecting it would perturb the
    kept modes by roundoff and break exact determinism of twin runs.
    """
    if u.grid != v.grid:
        raise ValueError("u and v live on different grids")
    c = np.array(v.coeffs if v.divergence_free else leray_project(v).coeffs)
    mask = u.grid.k_mag < 2.0 ** (Q + 1)
    c[:, mask] = u.coeffs[:, mask]
    return v.with_coeffs(c, divergence_free=True)


def fit_decay_rate(t, w_L2, transient: float = 0.1, floor: float = 0.0) -> float:
    """sigma in ||w(t)||_2^2 ~ C exp(-sigma t), fitted by least squares on
    log ||w||^2 after discarding the first ``transient`` fraction of the run.

    Samples from the first one with ||w|| <= ``floor`` onwards are roundoff
    and are dropped.  If that leaves fewer than two samples in the window,
    w reached numerical zero and sigma = inf.
    """
    t = np.asarray(t, dtype=float)
    w = np.asarray(w_L2, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples to fit a decay rate")
    start = t[0] + transient * (t[-1] - t[0])
    hit = np.flatnonzero(w <= floor)
    end = hit[0] if hit.size else t.size
    keep = t[:end] >= start
    if np.count_nonzero(keep) < 2:
        if hit.size:
            return math.inf
        raise ValueError("fewer than two samples after the transient")
    slope = np.polyfit(t[:end][keep], 2 * np.log(w[:end][keep]), 1)[0]
    return float(-slope)


# ||w|| at or below this multiple of the field norm is treated as roundoff
ROUNDOFF = 1e-12


@dataclass
class TwinState:
    """Both trajectories plus the enforcement and difference histories."""

    u: SolverState
    v: SolverState
    Q_history: list = field(default_factory=list)
    w_norm_history: list = field(default_factory=list)

    def difference(self) -> VectorField:
        return self.u.u - self.v.u

    def record(self, Q: int):
        w = self.difference()
        self.Q_history.append(Q)
        self.w_norm_history.append((self.u.t, lebesgue_norm(w, 2), sobolev_norm(w, 1)))


@dataclass
class DecayReport:
    kind: str
    t: np.ndarray
    w_L2: np.ndarray
    w_H1: np.ndarray
    Q: np.ndarray
    Lambda_u: np.ndarray
    Lambda_v: np.ndarray
    saturated: np.ndarray
    sigma: float
    envelope: float
    envelope_name: str
    c_r: float
    r: float
    nu: float

    @property
    def reduction(self) -> float:
        """||w(T)||_2 / ||w(0)||_2."""
        if self.w_L2[0] == 0:
            return 0.0
        return float(self.w_L2[-1] / self.w_L2[0])

    def rows(self):
        for i in range(len(self.t)):
            yield (self.t[i], self.w_L2[i], self.w_H1[i], int(self.Q[i]), self.Lambda_u[i],
                   self.Lambda_v[i], bool(self.saturated[i]))

    def summary(self) -> str:
        ratio = self.sigma / self.envelope if self.envelope > 0 else math.inf
        lines = [
            f"experiment: {self.kind}",
            f"fitted decay rate sigma (of ||w||_2^2): {self.sigma:.10g}",
            f"envelope {self.envelope_name}: {self.envelope:.10g}",
            f"sigma / envelope: {ratio:.6g}",
            f"||w(T)||_2 / ||w(0)||_2: {self.reduction:.6g}",
            f"c_r: {self.c_r:.10g}",
            f"r: {self.r:.10g}",
            f"nu: {self.nu:.10g}",
            f"steps with saturated wavenumber: {int(np.sum(self.saturated))} of {len(self.t)}",
            f"Q range: {int(np.min(self.Q))}..{int(np.max(self.Q))}",
        ]
        return "\n".join(lines) + "\n"

    def write(self, output_dir) -> tuple[Path, Path]:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = write_csv(out / "w_norm.csv", W_NORM_HEADER, self.rows())
        txt_path = out / "decay_report.txt"
        txt_path.write_text(self.summary(), encoding="utf-8")
        return csv_path, txt_path


def _initial_field(cfg, grid, seed):
    return random_field(grid, seed, energy=cfg.initial_energy, k_peak=cfg.k_peak)


def _report(kind, twin, lam_u, lam_v, sat, cfg, envelope, envelope_name, scale) -> DecayReport:
    t, w2, wh = (np.array(col) for col in zip(*twin.w_norm_history))
    return DecayReport(
        kind=kind, t=t, w_L2=w2, w_H1=wh, Q=np.array(twin.Q_history), Lambda_u=np.array(lam_u),
        Lambda_v=np.array(lam_v), saturated=np.array(sat, dtype=bool), sigma=fit_decay_rate(t, w2, floor=ROUNDOFF * scale),
        envelope=envelope, envelope_name=envelope_name, c_r=cfg.c_r, r=cfg.r, nu=cfg.nu,
    )


def run_twin_experiment(cfg, u0: VectorField | None = None, v0: VectorField | None = None,
                        progress=None) -> DecayReport:
    """Advance u and v, enforcing u_{<=Q} = v_{<=Q} after every step with
    Q the larger determining-wavenumber index of the two fields.

    The first row holds the raw initial difference; every later row is taken
    after enforcement.  A saturated wavenumber on either field is flagged and
    the whole resolved spectrum is copied (Q = q_max).
    """
    grid = cfg.grid()
    solver = NavierStokesSolver(grid, cfg.nu, cfg.dt, cfg.forcing)
    u = solver.initial_state(u0 if u0 is not None else _initial_field(cfg, grid, cfg.seed_u))
    v = solver.initial_state(v0 if v0 is not None else _initial_field(cfg, grid, cfg.seed_v))
    twin = TwinState(u, v)
    scale = max(lebesgue_norm(u.u, 2), lebesgue_norm(v.u, 2))
    lam_u, lam_v, sat = [], [], []

    def enforce(record_before: bool):
        wu = determining_wavenumber(twin.u.u, cfg.r, cfg.c_r, cfg.nu)
        wv = determining_wavenumber(twin.v.u, cfg.r, cfg.c_r, cfg.nu)
        saturated = wu.saturated or wv.saturated
        Q = grid.q_max if saturated else max(wu.Q, wv.Q)
        if record_before:
            twin.record(Q)
        twin.v = SolverState(twin.v.t, enforce_low_mode_equality(twin.u.u, twin.v.u, Q), twin.v.step)
        if not record_before:
            twin.record(Q)
        lam_u.append(wu.Lambda)
        lam_v.append(wv.Lambda)
        sat.append(saturated)

    enforce(record_before=True)
    for i in range(cfg.n_steps):
        twin.u = solver.step(twin.u)
        twin.v = solver.step(twin.v)
        enforce(record_before=False)
        if progress is not None:
            progress(i + 1, twin)
    if any(sat):
        log.warning("determining wavenumber saturated on %d of %d steps", sum(sat), len(sat))
    return _report("twin", twin, lam_u, lam_v, sat, cfg, cfg.nu * grid.kappa0 ** 2, "nu kappa0^2",
                   scale)


def run_steady_reference_experiment(cfg, perturbation: VectorField | None = None,
                                    reference: VectorField | None = None, progress=None) -> DecayReport:
    """Hold the steady state v of the forced problem fixed and evolve
    u(0) = v + perturbation, copying v's modes |k| < 2^(Q+1) into u after
    every step.  Q comes from the determining wavenumber of v alone, so it is
    computed once.
    """
    grid = cfg.grid()
    if reference is None:
        reference = relax_to_steady(cfg.forcing, grid, cfg.nu)
    solver = NavierStokesSolver(grid, cfg.nu, cfg.dt, cfg.forcing)
    v = solver.initial_state(reference)
    if perturbation is None:
        perturbation = _initial_field(cfg, grid, cfg.seed_u)
    u = solver.initial_state(reference + perturbation)
    wv = determining_wavenumber(v.u, cfg.r, cfg.c_r, cfg.nu)
    Q = grid.q_max if wv.saturated else wv.Q
    twin = TwinState(u, v)
    scale = max(lebesgue_norm(u.u, 2), lebesgue_norm(v.u, 2))
    lam_u, lam_v, sat = [], [], []

    def record():
        twin.record(Q)
        lam_u.append(determining_wavenumber(twin.u.u, cfg.r, cfg.c_r, cfg.nu).Lambda)
        lam_v.append(wv.Lambda)
        sat.append(wv.saturated)

    record()
    twin.u = SolverState(u.t, enforce_low_mode_equality(v.u, u.u, Q), u.step)
    for i in range(cfg.n_steps):
        new = solver.step(twin.u)
        twin.u = SolverState(new.t, enforce_low_mode_equality(v.u, new.u, Q), new.step)
        twin.v = SolverState(new.t, v.u, new.step)
        record()
        if progress is not None:
            progress(i + 1, twin)
    return _report("steady-reference", twin, lam_u, lam_v, sat, cfg, cfg.nu * grid.kappa0, "kappa0 nu", scale)
