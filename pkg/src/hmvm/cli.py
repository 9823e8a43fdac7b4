"""hmvm command line: ``hmvm run <scenario>`` and ``hmvm compare <scenario>``.

Exit status: 0 on success, 2 when the physics aborts (positivity loss,
Picard non-convergence), 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_PHYSICS = 0, 1, 2

log = logging.getLogger("hmvm")

# flag name -> ScenarioConfig field
_FLAGS = {
    "scheme": str,
    "N": int,
    "Nx": int,
    "Ny": int,
    "M": int,
    "cfl": float,
    "t_end": float,
    "diag_every": int,
    "snapshot_every": int,
    "out_dir": str,
    "threads": int,
    "k": float,
    "A": float,
    "u0": float,
    "T0": float,
    "dvm_Nv": int,
    "dvm_vmax": float,
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hmvm", description="Hermite moment Vlasov-Maxwell solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one scenario"), ("compare", "moment solver vs discrete-velocity oracle")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("scenario", nargs="?", help="landau, two-stream, weibel or orszag-tang")
        s.add_argument("--scenario", dest="scenario_opt")
        s.add_argument("--config", help="INI file with a [run] section")
        for key, typ in _FLAGS.items():
            flag = "--" + key.replace("_", "-")
            kw = {"type": typ, "default": None}
            if key == "scheme":
                kw["choices"] = ["1", "2", "va"]
            s.add_argument(flag, dest=key, **kw)
        s.add_argument("--compare-dvm", action="store_true", default=None)
    return p


def build_config(args):
    from .scenarios import SCENARIOS, ScenarioConfig, load_config

    cfg = load_config(args.config) if args.config else ScenarioConfig()
    scen = args.scenario_opt or args.scenario
    if scen:
        cfg.scenario = scen
    if cfg.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {cfg.scenario!r}; choose from {', '.join(SCENARIOS)}")
    for key in _FLAGS:
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.compare_dvm:
        cfg.compare_dvm = True
    if args.command == "compare":
        cfg.compare_dvm = True
    return cfg.resolved()


def _moment_history(records) -> dict:
    import numpy as np

    return {
        "t": np.array([r.t for r in records]),
        "E_K": np.array([sum(r.kinetic) for r in records]),
        "E_E": np.array([r.E_E for r in records]),
        "E_B": np.array([r.E_B for r in records]),
    }


def _write_joint_csv(path, moment: dict, reference: dict) -> None:
    import csv

    import numpy as np

    from .dvm import CHANNELS

    t = reference["t"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{c}_moment" for c in CHANNELS] + [f"{c}_dvm" for c in CHANNELS])
        for i, ti in enumerate(t):
            row = [repr(float(ti))]
            row += [repr(float(np.interp(ti, moment["t"], moment[c]))) for c in CHANNELS]
            row += [repr(float(reference[c][i])) for c in CHANNELS]
            w.writerow(row)


def execute(cfg, out=None) -> dict:
    """Run the configured scenario; returns a summary dict."""
    out = out or sys.stdout
    from .diagnostics import CsvWriter, damping_fit, species_mass_drift
    from .dvm import compare_histories, dvm_run
    from .moments import write_snapshot
    from .scenarios import build, dump_config
    from .simulation import Simulation

    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, outdir / "config.ini")
    data = build(cfg)
    if cfg.compare_dvm and (data.grid.ndim != 1 or len(data.species) != 1):
        raise UsageError(f"scenario {cfg.scenario!r} is not supported by the discrete-velocity oracle")
    sim = Simulation.from_initial(data)
    nsteps = sim.plan(cfg.t_end)
    print(f"{cfg.scenario}: scheme {sim.scheme}, {data.grid.shape} cells, M={cfg.M}, dt={sim.dt:.6g}, {nsteps} steps", file=out)

    def snap(s, tag):
        for st, sp in zip(s.states, s.species):
            write_snapshot(outdir / f"snapshot_{sp.name}_{tag:07d}.bin", st)

    with CsvWriter(outdir / "diagnostics.csv") as csvw:
        sim.records.append(sim.audit())
        csvw.write(sim.records[-1])
        if cfg.snapshot_every > 0:
            snap(sim, 0)
        for i in range(1, nsteps + 1):
            sim.step()
            if i % cfg.diag_every == 0 or i == nsteps:
                sim.records.append(sim.audit())
                csvw.write(sim.records[-1])
            if cfg.snapshot_every > 0 and (i % cfg.snapshot_every == 0 or i == nsteps):
                snap(sim, i)

    recs = sim.records
    summary = {
        "steps": sim.step_count,
        "t": sim.t,
        "dt_changes": sim.dt_changes,
        "V_mass": max(r.V_mass for r in recs),
        "V_energy": max(r.V_energy for r in recs),
        "mass_species": dict(zip([sp.name for sp in sim.species], species_mass_drift(recs))),
    }
    if sim.picard_iters:
        summary["picard_max"] = max(sim.picard_iters)
    print(f"steps {sim.step_count}  t {sim.t:.6g}  dt changes {sim.dt_changes}", file=out)
    print(f"mass drift {summary['V_mass']:.3e}  energy drift {summary['V_energy']:.3e}", file=out)
    for name, v in summary["mass_species"].items():
        print(f"  species {name}: mass drift {v:.3e}", file=out)
    if cfg.scenario == "landau":
        t = [r.t for r in recs]
        E = [r.E_E for r in recs]
        try:
            summary["slope"] = damping_fit(t, E)
            print(f"fitted damping slope {summary['slope']:.5f}", file=out)
        except ValueError as exc:
            print(f"damping fit unavailable: {exc}", file=out)
    if cfg.compare_dvm:
        ref = dvm_run(build(cfg), cfg.dvm_Nv, cfg.dvm_vmax or None, cfg.t_end, sample_every=0.25)
        ref.pop("solver")
        mom = _moment_history(recs)
        _write_joint_csv(outdir / "comparison.csv", mom, ref)
        dist = compare_histories(mom, ref, cfg.t_end)
        summary["distance"] = dist
        for ch, v in dist.items():
            print(f"log-L2 distance {ch}: {100 * v:.3f}%", file=out)
    return summary


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads and args.threads > 1:
        # must be set before the kernels are compiled
        os.environ.setdefault("HMVM_PARALLEL", "1")
    try:
        cfg = build_config(args)
    except (UsageError, ValueError, OSError, KeyError) as exc:
        print(f"hmvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    from . import kernels
    from .em import SchemeError
    from .moments import PositivityError

    kernels.set_threads(cfg.threads)
    try:
        execute(cfg)
    except UsageError as exc:
        print(f"hmvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PositivityError, SchemeError, FloatingPointError) as exc:
        print(f"hmvm: physics abort: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
