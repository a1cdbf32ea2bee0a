"""Command-line scenario runner.

Subcommands: ``ground-state``, ``simulate``, ``classify``, ``certify`` and
``verify``.  Exit codes:

    0  completed (or all checks passed / blow-up certified)
    1  configuration or parameter error, raised before any computation
    2  blowup_detected or overflow
    3  unstable (energy drift above tolerance)
    4  no converged ground state, or no blow-up certificate
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .blowup import (
    AuxiliaryParams,
    classify_initial_data,
    detect_blowup,
    negative_energy_construct,
    scaled_ground_state,
    thm61_construct,
    zero_energy_construct,
)
from .config import ScenarioConfig
from .errors import ConfigError, KgelabError
from .evolve import BLOWUP_DETECTED, COMPLETED, CSV_COLUMNS, OVERFLOW, UNSTABLE, Sample, simulate
from .grid import load_field, save_field
from .groundstate import GroundStateResult, gaussian_init, multi_start
from .model import StateVector

log = logging.getLogger("kgelab")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_UNSTABLE = 3
EXIT_NOT_CONVERGED = 4

TERMINAL_EXIT = {COMPLETED: EXIT_OK, BLOWUP_DETECTED: EXIT_BLOWUP, OVERFLOW: EXIT_BLOWUP, UNSTABLE: EXIT_UNSTABLE}


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_json_value(obj), indent=2, sort_keys=True) + "\n")


class Scenario:
    """A validated config plus the library objects built from it."""

    def __init__(self, cfg: ScenarioConfig, out: str | None = None, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.grid = cfg.make_grid()
        self.params = cfg.make_params()
        self.pot = cfg.make_potential(self.grid)
        self.out = Path(out if out is not None else cfg.output.directory)
        self._ground_state: GroundStateResult | None = None

    def outdir(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out

    def ground_state(self, starts: int | None = None) -> GroundStateResult:
        if self._ground_state is None:
            ini = self.cfg.initial_data
            if ini.phi_file:
                Phi = self._load(ini.phi_file)
                Psi = self._load(ini.psi_file)
                self._ground_state = GroundStateResult(Phi, Psi, math.nan, math.nan, 0, True)
            else:
                n = starts or self.cfg.groundstate.starts
                best, _ = multi_start(self.params, self.pot, self.grid, self.cfg.make_gs_options(), n, self.seed)
                self._ground_state = best
        return self._ground_state

    def _load(self, rel: str) -> np.ndarray:
        g, f = load_field(self.cfg.resolve_path(rel))
        if g.points != self.grid.points or g.lengths != self.grid.lengths:
            raise ConfigError(f"{rel}: snapshot grid {g.points}/{g.lengths} does not match the config grid")
        return f

    def initial_state(self) -> StateVector:
        ini = self.cfg.initial_data
        kind = ini.kind
        if kind == "file":
            u, v = self._load(ini.u_file), self._load(ini.v_file)
            ut = self._load(ini.ut_file) if ini.ut_file else np.zeros_like(u)
            vt = self._load(ini.vt_file) if ini.vt_file else np.zeros_like(v)
            return StateVector(u, ut, v, vt)
        if kind == "gamma_perturbed":
            gs = self.ground_state()
            return scaled_ground_state(gs.Phi, gs.Psi, ini.gamma)
        u, v = gaussian_init(self.grid, ini.width, tuple(ini.amplitudes))
        s = ini.velocity_scale
        shape = StateVector(u, s * u, v, s * v)
        if kind == "gaussian_bumps":
            return shape
        if kind == "negative_energy_construct":
            return negative_energy_construct(shape, self.params, self.pot, self.grid, ini.overshoot)
        if kind == "zero_energy_construct":
            return zero_energy_construct(shape, self.params, self.pot, self.grid)
        return thm61_construct(shape, self.params, self.pot, self.grid, ini.position,
                               widen=lambda k: self._wider_shape(k))

    def _wider_shape(self, attempt: int) -> StateVector:
        ini = self.cfg.initial_data
        u, v = gaussian_init(self.grid, ini.width * 1.5**attempt, tuple(ini.amplitudes))
        return StateVector.at_rest(u, v)

    def known_d(self, d_file: str | None) -> float | None:
        if d_file:
            try:
                rec = json.loads(Path(d_file).read_text())
                return float(rec["d"])
            except (OSError, ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"cannot read d from {d_file}: {exc}") from exc
        if self._ground_state is not None and math.isfinite(self._ground_state.d):
            return self._ground_state.d
        return None


# -- subcommands ------------------------------------------------------------------------


def run_ground_state(sc: Scenario, starts: int | None = None) -> int:
    if sc.cfg.initial_data.phi_file:
        log.info("ignoring initial_data.phi_file/psi_file for ground-state")
    n = starts or sc.cfg.groundstate.starts
    best, results = multi_start(sc.params, sc.pot, sc.grid, sc.cfg.make_gs_options(), n, sc.seed)
    out = sc.outdir()
    save_field(out / "Phi.field", sc.grid, best.Phi)
    save_field(out / "Psi.field", sc.grid, best.Psi)
    record = best.record()
    record["starts"] = [r.record() for r in results]
    record["seed"] = sc.seed
    write_json(out / "groundstate.json", record)
    print(f"d = {best.d!r}")
    print(f"residual = {best.residual!r}")
    if not best.converged:
        summary = ", ".join(f"start {k}: residual {r.residual:.3e} after {r.iterations} iterations"
                            for k, r in enumerate(results))
        print(f"no start converged ({summary})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _format(x: float) -> str:
    return repr(float(x))


def _run(sc: Scenario, d_file: str | None = None):
    """Simulate the configured scenario; returns ``(trajectory, classification)``."""
    state0 = sc.initial_state()
    report = classify_initial_data(state0, sc.params, sc.pot, sc.grid, d=sc.known_d(d_file))
    aux = AuxiliaryParams(**report.aux) if report.aux else None
    out = sc.outdir()
    every = sc.cfg.output.snapshot_every

    with open(out / sc.cfg.output.csv, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        fh.flush()

        def on_sample(sample: Sample) -> None:
            row = sample.row()
            fh.write(",".join(_format(row[c]) for c in CSV_COLUMNS) + "\n")
            fh.flush()

        def on_step(n: int, state: StateVector) -> None:
            if every and n % every == 0:
                _snapshot(out, f"step{n:08d}", sc, state)

        traj = simulate(state0, sc.cfg.make_integrator(), sc.params, sc.pot, sc.grid, aux,
                        on_sample=on_sample, on_step=on_step if every else None)
    _snapshot(out, "final", sc, traj.final_state)
    return traj, report


def _snapshot(out: Path, tag: str, sc: Scenario, state: StateVector) -> None:
    for name in ("u", "ut", "v", "vt"):
        save_field(out / f"{tag}_{name}.field", sc.grid, getattr(state, name))


def _detection(traj, sc: Scenario):
    finite = sum(1 for s in traj.samples if math.isfinite(s.G))
    if finite < 10:
        return None
    return detect_blowup(traj, sc.params)


def run_simulate(sc: Scenario, d_file: str | None = None) -> int:
    traj, report = _run(sc, d_file)
    det = _detection(traj, sc) if traj.terminal in (BLOWUP_DETECTED, OVERFLOW) else None
    summary = {
        "terminal": traj.terminal,
        "t_final": traj.t_final,
        "t_terminal": traj.t_terminal,
        "dt": traj.dt,
        "E_drift": traj.e_drift,
        "blowup_estimate": det.t_estimate if det else None,
        "tmax_bound": report.tmax_bound,
        "tmax_regime": report.tmax_regime,
    }
    write_json(sc.outdir() / "summary.json", summary)
    print(f"terminal = {traj.terminal}, t_final = {traj.t_final:.6g}, E_drift = {traj.e_drift:.3e}")
    if det:
        print(f"blowup_estimate = {det.t_estimate}, tmax_bound = {report.tmax_bound}")
    return TERMINAL_EXIT[traj.terminal]


def run_classify(sc: Scenario, d_file: str | None = None) -> int:
    state0 = sc.initial_state()
    d = sc.known_d(d_file)
    if d is None:
        log.warning("no ground-state level d available; Gamma verdicts are unknown (pass --d-file)")
    report = classify_initial_data(state0, sc.params, sc.pot, sc.grid, d=d)
    data = report.to_dict()
    write_json(sc.outdir() / "classification.json", data)
    print(json.dumps(_json_value(data), indent=2, sort_keys=True))
    return EXIT_OK


def run_certify(sc: Scenario, d_file: str | None = None) -> int:
    traj, report = _run(sc, d_file)
    det = _detection(traj, sc)
    record = {
        "terminal": traj.terminal,
        "t_final": traj.t_final,
        "E_drift": traj.e_drift,
        "tmax_bound": report.tmax_bound,
        "classification": report.verdicts,
        "detection": det.to_dict() if det else None,
    }
    write_json(sc.outdir() / "certification.json", record)
    if det is None:
        print("too few samples for a blow-up certificate", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    print(det.summary)
    if traj.terminal == UNSTABLE:
        return EXIT_UNSTABLE
    return EXIT_OK if det.certified else EXIT_NOT_CONVERGED


def run_verify() -> int:
    from .verify import run_checks

    rows = run_checks()
    width = max(len(r.name) for r in rows)
    print(f"{'check':<{width}}  {'tolerance':>10}  {'observed':>12}  status")
    for r in rows:
        print(f"{r.name:<{width}}  {r.tolerance:>10.1e}  {r.observed:>12.3e}  {'PASS' if r.passed else 'FAIL'}")
    failed = [r.name for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return 1 if failed else 0


# -- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgelab", description="Coupled Klein-Gordon numerical lab.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="seed for randomized starts (overrides seed)")
        return p

    gs = scenario("ground-state", "compute the ground state and its level d")
    gs.add_argument("--starts", type=int, help="number of minimisation starts")
    for name, help_ in (("simulate", "evolve the initial data and write diagnostics"),
                        ("classify", "evaluate the blow-up / global-existence criteria"),
                        ("certify", "simulate and collect blow-up evidence")):
        p = scenario(name, help_)
        p.add_argument("--d-file", help="groundstate.json holding the level d")
    sub.add_parser("verify", help="run the built-in invariant checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        return run_verify()
    try:
        cfg = ScenarioConfig.load(args.config)
        sc = Scenario(cfg, args.out, args.seed)
        if args.command == "ground-state":
            if args.starts is not None and args.starts < 1:
                raise ConfigError("--starts must be >= 1")
            return run_ground_state(sc, args.starts)
        if args.command == "simulate":
            return run_simulate(sc, args.d_file)
        if args.command == "classify":
            return run_classify(sc, args.d_file)
        return run_certify(sc, args.d_file)
    except (KgelabError, ValueError) as exc:
        key = getattr(exc, "key", None)
        print(f"kgelab: error: {exc}" + (f" [key: {key}]" if key else ""), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
