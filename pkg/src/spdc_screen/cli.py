"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input validation failure,
3 numerical failure.  ``SPDC_SCREEN_JOBS`` overrides ``--jobs``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .crystal import PumpConfig, filter_candidates, load_crystal, load_whitelist
from .errors import InputError, NumericalError
from .frames import orient_crystal
from .nonlinearity import deff_map
from .pipeline import RunConfig, build_report, filtered_row, screen_batch, screen_one, wavelength_sweep
from .report import crystal_g2, emit_report, row_record, sweep_report, write_deff_map, write_g2, write_plot_data

log = logging.getLogger("spdc_screen")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid(text):
    try:
        a, b = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NPHIxNTHETA, got {text!r}") from None
    if a < 2 or b < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points per axis")
    return a, b


def _span(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP:STEP, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("need STOP >= START and STEP > 0")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def _add_physics(p, pump=True):
    if pump:
        p.add_argument("--pump-nm", type=float, default=532.0, help="pump wavelength in nm (signal at twice it)")
    p.add_argument("--length-mm", type=float, default=None, help="crystal length (default: from the record)")
    p.add_argument("--power-mw", type=float, default=1.0, help="pump power in mW")
    p.add_argument("--pump-waist-um", type=float, default=50.0)
    p.add_argument("--collection-waist-um", type=float, default=50.0)
    p.add_argument("--detector-bw", type=float, default=None, metavar="RAD_PER_S",
                   help="Gaussian detector bandwidth sigma (default: 5x the first sinc zero)")
    p.add_argument("--no-kleinman", action="store_true", help="use chi2 as given, without Kleinman symmetrisation")


def build_parser():
    parser = _Parser(prog="spdc-screen", description="Screen nonlinear crystals as type-I SPDC pair sources")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="screen a single crystal record")
    p.add_argument("--crystal", required=True, type=Path)
    _add_physics(p)
    p.add_argument("--out", type=Path, help="directory for the row and per-crystal plot data")

    p = sub.add_parser("batch", help="screen every record in a directory")
    p.add_argument("--dir", required=True, type=Path)
    _add_physics(p)
    p.add_argument("--out", required=True, type=Path, help="report file (.csv, or .json with --json)")
    p.add_argument("--json", action="store_true", help="write JSON instead of CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--whitelist", type=Path, help="refcodes that bypass the band-gap filter, one per line")
    p.add_argument("--sort-key", choices=("rate", "d_eff", "tau_c", "refcode"), default="rate")
    p.add_argument("--plot-dir", type=Path, help="also write band-gap scatter data here")

    p = sub.add_parser("map", help="d_eff over (theta, phi) with the phase-matching locus")
    p.add_argument("--crystal", required=True, type=Path)
    p.add_argument("--pump-nm", type=float, default=532.0)
    p.add_argument("--grid", type=_grid, default=(361, 91), help="NPHIxNTHETA (default 361x91)")
    p.add_argument("--no-kleinman", action="store_true")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("sweep", help="screen one crystal across signal wavelengths")
    p.add_argument("--crystal", required=True, type=Path)
    p.add_argument("--signal-nm", required=True, type=_span, help="START:STOP:STEP in nm")
    _add_physics(p, pump=False)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("g2", help="G2(tau) profile at the phase-matched direction")
    p.add_argument("--crystal", required=True, type=Path)
    _add_physics(p)
    p.add_argument("--out", required=True, type=Path)
    return parser


def _config(args, pump_nm=None, **extra):
    pump = PumpConfig(pump_wavelength=pump_nm or getattr(args, "pump_nm", 532.0), pump_power=args.power_mw,
                      pump_waist=args.pump_waist_um, collection_waist=args.collection_waist_um,
                      detector_bandwidth=args.detector_bw)
    return RunConfig(pump=pump, length_mm=args.length_mm, kleinman=not args.no_kleinman, **extra)


def _cmd_compute(args):
    record = load_crystal(args.crystal)
    config = _config(args, output=None if args.out is None else str(args.out))
    rejected = filter_candidates([record], config.pump, config.whitelist).rejected
    row = filtered_row(rejected[0], config) if rejected else screen_one(record, config)
    print(json.dumps(row_record(row), indent=2))
    if args.out is not None:
        emit_report(build_report([row], config), args.out / f"{record.refcode}.csv")
        if row.status != "filtered":
            write_plot_data(record, config, args.out)
    return EXIT_NUMERICAL if row.status == "error" else EXIT_OK


def _cmd_batch(args):
    whitelist = tuple(load_whitelist(args.whitelist)) if args.whitelist else ()
    config = _config(args, whitelist=whitelist, sort_key=args.sort_key, jobs=args.jobs,
                     output=str(args.out))
    report = screen_batch(args.dir, config)
    emit_report(report, args.out, fmt="json" if args.json else "csv", plot_dir=args.plot_dir)
    s = report.summary
    log.info("screened %d records: %d ok, %d not phase-matchable, %d filtered, %d errors",
             s["total"], s["ok"], s["not-phase-matchable"], s["filtered"], s["error"])
    return EXIT_OK


def _cmd_map(args):
    record = load_crystal(args.crystal)
    pump = PumpConfig(pump_wavelength=args.pump_nm)
    crystal = orient_crystal(record, pump.signal_wavelength,
                             window=(0.8 * pump.pump_wavelength, 1.2 * pump.signal_wavelength))
    n_phi, n_theta = args.grid
    dmap = deff_map(crystal, pump, n_theta=n_theta, n_phi=n_phi, kleinman=not args.no_kleinman)
    write_deff_map(dmap, args.out)
    return EXIT_OK


def _cmd_sweep(args):
    record = load_crystal(args.crystal)
    config = _config(args, pump_nm=args.signal_nm[0] / 2.0, output=str(args.out))
    rows = wavelength_sweep(record, args.signal_nm, config)
    emit_report(sweep_report(rows, config), args.out, fmt="json" if args.json else "csv")
    return EXIT_OK


def _cmd_g2(args):
    record = load_crystal(args.crystal)
    config = _config(args, output=str(args.out))
    row = screen_one(record, config)
    if row.status != "ok":
        raise NumericalError(f"no G2 profile for {record.refcode}: {row.status} ({row.detail})")
    write_g2(crystal_g2(record, config, row), args.out)
    print(f"tau_c = {row.tau_c_fs:.4f} fs")
    return EXIT_OK


COMMANDS = {"compute": _cmd_compute, "batch": _cmd_batch, "map": _cmd_map, "sweep": _cmd_sweep, "g2": _cmd_g2}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, OSError) as exc:
        print(f"spdc-screen: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"spdc-screen: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # remaining ValueErrors come from invalid parameter values
        print(f"spdc-screen: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
