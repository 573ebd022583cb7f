"""Command line entry point: ``detmodes {simulate,sync,analyze,spectrum}``.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 divergence.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .diagnostics import (
    analyze_field,
    average_records,
    bound_reports,
    grashof,
    kolmogorov_wavenumber,
    shell_profile,
)
from .littlewood_paley import shell_multiplier
from .solver import NavierStokesSolver, SolverDivergence, random_field
from .spectral import lebesgue_norm
from .storage import SnapshotError, read_snapshot, write_csv, write_snapshot
from .sync import run_steady_reference_experiment, run_twin_experiment

log = logging.getLogger("detmodes")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_DIVERGENCE = 0, 1, 2, 3

ENERGY_HEADER = ["t (time)", "energy (L^5/T^2)", "enstrophy (L^3/T^2)", "dissipation (L^5/T^3)",
                 "injection (L^5/T^3)"]
WAVENUMBER_HEADER = ["t (time)", "Lambda (1/length)", "Q (shell index)", "Lambda_dis (1/length)",
                     "enstrophy (L^3/T^2)", "energy (L^5/T^2)", "saturated (0/1)"]
SPECTRUM_HEADER = ["q (shell index)", "lambda_q (1/length)", "shell_L2 (L2 norm)", "shell_Lr (Lr norm)",
                   "shell_Linf (velocity)"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("config overrides")
    for name, typ in (("nu", float), ("L", float), ("N", int), ("dt", float), ("T_total", float),
                      ("snapshot_interval", float), ("r", float), ("c_r", float), ("seed_u", int),
                      ("seed_v", int), ("output_dir", str), ("T_avg", float), ("d_override", float),
                      ("initial_energy", float), ("k_peak", float)):
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    g.add_argument("--c0", dest="c0", default=None, help='number or "calibrated"')


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="detmodes", description="Determining-wavenumber diagnostics for 3D Navier-Stokes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="integrate one trajectory and write snapshots")
    s.add_argument("--config", required=True, type=Path)
    _config_flags(s)

    s = sub.add_parser("sync", help="run a twin synchronization experiment")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--mode", choices=("twin", "steady"), default="twin")
    _config_flags(s)

    s = sub.add_parser("analyze", help="wavenumber time series and bound report from snapshots")
    s.add_argument("snapshots", nargs="+", type=Path, help="snapshot files or directories")
    s.add_argument("--config", type=Path)
    _config_flags(s)

    s = sub.add_parser("spectrum", help="per-shell norms of one snapshot as CSV")
    s.add_argument("snapshot", type=Path)
    s.add_argument("--r", type=float, default=2.5)
    s.add_argument("--output", type=Path, help="CSV path (default: stdout)")
    return p


def _overrides(args) -> dict:
    keys = ("nu", "L", "N", "dt", "T_total", "snapshot_interval", "r", "c_r", "seed_u", "seed_v",
            "output_dir", "T_avg", "d_override", "initial_energy", "k_peak")
    out = {k: getattr(args, k) for k in keys}
    if args.c0 is not None:
        if args.c0 == "calibrated":
            out["c0"] = "calibrated"
        else:
            try:
                out["c0"] = float(args.c0)
            except ValueError:
                raise ConfigError(f'c0 must be a number > 0 or "calibrated", got {args.c0!r}') from None
    return out


def _load(args) -> ExperimentConfig:
    return load_config(args.config).with_overrides(**_overrides(args))


def _resolution_check(cfg: ExperimentConfig, u, solver):
    ens = solver.budget(solver.initial_state(u)).enstrophy
    eps = cfg.nu * ens
    if eps > 0:
        kd = kolmogorov_wavenumber(eps, cfg.nu, 3.0)
        kmax = cfg.grid().k_max_dealias * cfg.grid().kappa0
        level = logging.INFO if kd <= kmax else logging.WARNING
        log.log(level, "resolution: kappa_d=%.4g (from the initial enstrophy), dealiased kappa_max=%.4g", kd, kmax)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = Path(cfg.output_dir)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    grid = cfg.grid()
    solver = NavierStokesSolver(grid, cfg.nu, cfg.dt, cfg.forcing)
    state = solver.initial_state(random_field(grid, cfg.seed_u, cfg.initial_energy, cfg.k_peak))
    _resolution_check(cfg, state.u, solver)
    every = cfg.snapshot_every
    rows = []

    def emit(st):
        b = solver.budget(st)
        rows.append((st.t, b.energy, b.enstrophy, b.dissipation, b.injection))
        if every is not None and st.step % every == 0:
            write_snapshot(snap_dir / f"snap_{st.step:08d}.bin", st.u, st.t, cfg.nu, cfg.seed_u)

    emit(state)
    try:
        for _ in range(cfg.n_steps):
            state = solver.step(state)
            emit(state)
    except SolverDivergence as exc:
        last = exc.last_good
        write_snapshot(snap_dir / f"last_good_{last.step:08d}.bin", last.u, last.t, cfg.nu, cfg.seed_u)
        write_csv(out / "energy.csv", ENERGY_HEADER, rows)
        log.error("%s; last good state written", exc)
        return EXIT_DIVERGENCE
    write_csv(out / "energy.csv", ENERGY_HEADER, rows)
    log.info("simulated %d steps to t=%g; output in %s", cfg.n_steps, state.t, out)
    return EXIT_OK


def cmd_sync(args) -> int:
    cfg = _load(args)
    if args.mode == "twin":
        report = run_twin_experiment(cfg)
    else:
        report = run_steady_reference_experiment(cfg)
    csv_path, txt_path = report.write(cfg.output_dir)
    sys.stdout.write(report.summary())
    log.info("wrote %s and %s", csv_path, txt_path)
    return EXIT_OK


def _snapshot_paths(items):
    paths = []
    for item in items:
        if item.is_dir():
            paths.extend(sorted(p for p in item.glob("*.bin")))
        elif item.exists():
            paths.append(item)
        else:
            raise ConfigError(f"no such snapshot file or directory: {item}")
    if not paths:
        raise ConfigError("no snapshot files found")
    return paths


def cmd_analyze(args) -> int:
    snaps = sorted((read_snapshot(p) for p in _snapshot_paths(args.snapshots)), key=lambda s: s.t)
    first = snaps[0]
    if any(s.N != first.N or s.L != first.L or s.nu != first.nu for s in snaps):
        raise ConfigError("snapshots disagree on N, L or nu")
    if args.config is not None:
        cfg = _load(args)
    else:
        cfg = ExperimentConfig(nu=first.nu, L=first.L, N=first.N, dt=1.0, T_total=1.0).with_overrides(
            **_overrides(args))
    if (cfg.N, cfg.L, cfg.nu) != (first.N, first.L, first.nu):
        raise ConfigError("configuration N, L or nu does not match the snapshots")
    c0 = cfg.resolved_c0()
    records = [analyze_field(s.field(), s.t, cfg.r, cfg.c_r, c0, cfg.nu) for s in snaps]
    if cfg.T_avg is not None:
        t_end = records[-1].t
        window = [rec for rec in records if rec.t >= t_end - cfg.T_avg]
    else:
        window = records
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "wavenumbers.csv", WAVENUMBER_HEADER,
              ((rec.t, rec.Lambda, rec.Q, rec.Lambda_dis, rec.enstrophy, rec.energy, rec.saturated)
               for rec in records))
    grid = cfg.grid()
    f = cfg.forcing.field(grid)
    G = grashof(f, cfg.nu) if np.any(f.coeffs) else None
    lines = [f"snapshots: {len(records)} (averaging window: {len(window)})", f"nu: {cfg.nu:.10g}",
             f"r: {cfg.r:.10g}", f"c_r: {cfg.c_r:.10g}", f"c0: {c0:.10g}"]
    try:
        avg = average_records(window, cfg.nu, cfg.r, cfg.L, G=G, d_override=cfg.d_override)
    except ValueError as exc:
        lines.append(f"averages unavailable: {exc}")
    else:
        lines += [
            f"T: {avg.T:.10g}",
            f"<Lambda>: {avg.mean_Lambda:.10g}",
            f"<Lambda>_>lambda0: {avg.mean_Lambda_excess:.10g}",
            f"lambda0: {avg.lambda0:.10g}",
            f"<|grad u|^2>: {avg.mean_enstrophy:.10g}",
            f"eps: {avg.eps:.10g}",
            f"kappa_d: {avg.kappa_d:.10g}",
            f"d: {avg.d:.4f} (constant {avg.d_constant:.6g})",
            f"G: {'n/a' if G is None else format(G, '.10g')}",
            f"saturated records excluded: {avg.n_saturated}",
            "",
            "bound | lhs | rhs | ratio",
        ]
        for row in bound_reports(window, avg, cfg.r, cfg.nu, grid.kappa0):
            lines.append(f"{row.name} | {row.lhs:.10g} | {row.rhs:.10g} | {row.ratio:.6g}")
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def spectrum_rows(u, r: float):
    prof = shell_profile(u, r)
    g = u.grid
    low = u.with_coeffs(u.coeffs * shell_multiplier(g, -1))
    linf_low = lebesgue_norm(low, np.inf)
    rows = [(-1, g.lambda_q(-1), lebesgue_norm(low, 2), lebesgue_norm(low, r), linf_low)]
    for q in prof.q:
        rows.append((int(q), g.lambda_q(q), prof.L2[q], prof.Lr[q], prof.Linf[q]))
    return rows


def cmd_spectrum(args) -> int:
    if not 1 < args.r <= math.inf:
        raise ConfigError(f"r must be > 1, got {args.r}")
    snap = read_snapshot(args.snapshot)
    rows = spectrum_rows(snap.field(), args.r)
    write_csv(args.output if args.output is not None else sys.stdout, SPECTRUM_HEADER, rows)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sync": cmd_sync, "analyze": cmd_analyze, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
