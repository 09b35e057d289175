"""Command-line front end: traces, spectra, precision and QFI reports,
scaling and robustness sweeps, and the validation suite.

Every run writes a single text artifact: `#`-prefixed JSON metadata lines
(command echo, seed where one is used, package version) followed by the
payload, either CSV rows with a header or a JSON document.  Identical
invocations produce byte-identical artifacts; worker count never changes
the output, only how fast sweep points are computed.

Exit codes: 0 success; 2 bad flags or flag combinations; 3 numerical or
validation failure; 4 estimation outside its regime (under-resolved
spectrum, ambiguous signs, field violating Bx > By + Bz >= 0).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .estimation import (
    AmbiguousSignError,
    OutOfRegimeError,
    UnderResolvedError,
    minimized_delta_b,
    recover_from_trace,
    sample_signal,
    scaling_fit,
)
from .pulses import DDSchedule, NoiseModel, fidelity_f2
from .schemes import (
    SchemeConfig,
    closed_form_jz,
    final_state,
    jz_moments,
    precision_report,
    qfi_analytic,
    qfi_numeric,
)
from .spin import AXES, EnsembleDims, FieldVector
from .validation import CRITERION_NAMES, DEFAULT_SEED, run_all

ESTIMATION_ERRORS = {
    UnderResolvedError: "under-resolved",
    OutOfRegimeError: "out-of-regime",
    AmbiguousSignError: "ambiguous-signs",
}


# ---------------------------------------------------------------- flag types

def _angle(text: str) -> float:
    """Plain float, or a pi multiple written like `0.06pi` or `pi`."""
    text = text.strip().lower()
    try:
        if text.endswith("pi"):
            head = text[:-2].strip()
            return (float(head) if head else 1.0) * math.pi
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a number or a pi multiple like 0.06pi, got {text!r}")


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected three comma-separated numbers, got {text!r}")
    return tuple(_angle(p) for p in parts)


def _grid(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected start:stop:points, got {text!r}")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected start:stop:points, got {text!r}")
    if points < 2 or stop <= start:
        raise argparse.ArgumentTypeError(
            f"need stop > start and points >= 2, got {text!r}")
    return start, stop, points


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(
            f"expected positive integers, got {text!r}")
    return values


def _angle_list(text: str) -> tuple[float, ...]:
    values = tuple(_angle(p) for p in text.split(","))
    if any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"angles must be >= 0, got {text!r}")
    return values


# ------------------------------------------------------------- output pieces

def _fmt(value) -> str:
    """Shortest digit string that round-trips the double exactly."""
    return repr(float(value))


def _metadata_line(command: str, params: dict, **extra) -> str:
    doc = {"command": command, "version": __version__, "params": params}
    doc.update(extra)
    return "# " + json.dumps(doc, sort_keys=True, separators=(",", ":"),
                             allow_nan=False)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write_artifact(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _error_json(kind: str, exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": kind, "reason": str(exc)},
                                sort_keys=True) + "\n")


def _json_num(value):
    value = float(value)
    return value if math.isfinite(value) else None


# ----------------------------------------------------------------- workers

def _resolve_workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("VECMAG_WORKERS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            sys.stderr.write(f"ignoring malformed VECMAG_WORKERS={env!r}\n")
    return os.cpu_count() or 1


def _map_ordered(func, items, workers: int) -> list:
    """Run func over items on a bounded pool, results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


# ------------------------------------------------------------- subcommands

def cmd_simulate(args) -> int:
    parser = args.parser
    if args.scheme == "parallel" and args.axis is None:
        parser.error("--axis is required with --scheme parallel")
    if args.scheme == "sequential" and args.axis is not None:
        parser.error("--axis only applies to --scheme parallel")
    if args.evolution == "exact" and args.tau is None:
        parser.error("--tau is required with --evolution exact")
    if args.evolution != "exact" and args.tau is not None:
        parser.error("--tau only applies to --evolution exact")
    if args.probe == "ghz" and args.N % 2 and args.evolution == "analytic":
        parser.error("--evolution analytic needs even --N for the ghz probe")
    field = FieldVector(*args.B)
    start, stop, points = args.grid
    times = np.linspace(start, stop, points)
    if args.evolution == "analytic":
        phases = [field.coupling(ax) * times for ax in AXES]
        values = np.asarray(closed_form_jz(args.scheme, args.probe, args.N,
                                           *phases, axis=args.axis), dtype=float)
    else:
        dims = EnsembleDims(args.N)

        def jz_at(t: float) -> float:
            cfg = SchemeConfig(args.scheme, args.probe, dims, field,
                               (t, t, t), evolution=args.evolution, tau=args.tau)
            return jz_moments(final_state(cfg, args.axis))[0]

        workers = _resolve_workers(args.workers)
        values = _map_ordered(jz_at, (float(t) for t in times), workers)
    params = {"scheme": args.scheme, "probe": args.probe, "N": args.N,
              "B": list(args.B), "axis": args.axis,
              "grid": [start, stop, points], "evolution": args.evolution,
              "tau": args.tau}
    text = (_metadata_line("simulate", params) + "\n"
            + _csv_text(["T", "jz"],
                        ((_fmt(t), _fmt(v)) for t, v in zip(times, values))))
    _write_artifact(text, args.output)
    return 0


def cmd_spectrum(args) -> int:
    parser = args.parser
    if args.M < 2 or args.M & (args.M - 1):
        parser.error("--M must be a power of two >= 2")
    field = FieldVector(*args.B)
    scale = float(args.N) if args.probe == "ghz" else 1.0
    t_max = args.t_max
    if t_max is None:
        top = scale * sum(abs(b) for b in args.B)
        if top <= 0:
            parser.error("--t-max is required when --B is all zero")
        # keep the largest line at a quarter of the Nyquist frequency
        t_max = math.pi * args.M / (4.0 * top)
    cfg = SchemeConfig("sequential", args.probe, EnsembleDims(args.N), field,
                       (1.0, 1.0, 1.0))
    try:
        trace = sample_signal(cfg, t_max, args.M)
        recovered, spectrum, peaks = recover_from_trace(
            trace, method=args.method, on_tie=args.on_tie)
    except tuple(ESTIMATION_ERRORS) as exc:
        _error_json(ESTIMATION_ERRORS[type(exc)], exc)
        return 4
    params = {"probe": args.probe, "N": args.N, "B": list(args.B),
              "M": args.M, "t_max": t_max, "method": args.method,
              "on_tie": args.on_tie}
    text = (_metadata_line("spectrum", params,
                           recovered=recovered.to_json_dict(),
                           peaks=[[p.omega, p.amplitude] for p in peaks]) + "\n"
            + _csv_text(["omega", "magnitude"],
                        ((_fmt(w), _fmt(m)) for w, m in spectrum)))
    _write_artifact(text, args.output)
    if args.recovered_output is not None:
        body = json.dumps(recovered.to_json_dict(), sort_keys=True, indent=2)
        _write_artifact(body + "\n", args.recovered_output)
    return 0


def _require_even_for_ghz(args) -> None:
    if args.probe == "ghz" and args.N % 2:
        args.parser.error("the ghz probe needs even --N for closed-form analysis")


def cmd_precision(args) -> int:
    _require_even_for_ghz(args)
    cfg = SchemeConfig(args.scheme, args.probe, EnsembleDims(args.N),
                       FieldVector(*args.B), args.T)
    try:
        report = precision_report(cfg, eta=args.repetitions)
    except ArithmeticError as exc:
        _error_json("bound-violation", exc)
        return 3
    params = {"scheme": args.scheme, "probe": args.probe, "N": args.N,
              "B": list(args.B), "T": list(args.T),
              "repetitions": args.repetitions}
    body = json.dumps(report.to_json_dict(), sort_keys=True, indent=2)
    _write_artifact(_metadata_line("precision", params) + "\n" + body + "\n",
                    args.output)
    return 0


def cmd_qfi(args) -> int:
    _require_even_for_ghz(args)
    cfg = SchemeConfig(args.scheme, args.probe, EnsembleDims(args.N),
                       FieldVector(*args.B), args.T)
    table = {}
    for axis in AXES:
        variants = qfi_analytic(cfg, axis)
        numeric = qfi_numeric(cfg, axis)
        qcrb = 1.0 / math.sqrt(numeric) if numeric > 0 else math.inf
        table[axis] = {"main": _json_num(variants.main),
                       "appendix": _json_num(variants.appendix),
                       "numeric": _json_num(numeric),
                       "qcrb_single_shot": _json_num(qcrb)}
    params = {"scheme": args.scheme, "probe": args.probe, "N": args.N,
              "B": list(args.B), "T": list(args.T)}
    body = json.dumps(table, sort_keys=True, indent=2)
    _write_artifact(_metadata_line("qfi", params) + "\n" + body + "\n",
                    args.output)
    return 0


def cmd_scaling(args) -> int:
    probes = ("scs", "ghz") if args.probe == "both" else (args.probe,)
    cells = [(probe, n) for probe in probes for n in args.N]

    def cell(item):
        probe, n = item
        try:
            values = [minimized_delta_b(args.scheme, probe, n, axis,
                                        duration=args.duration)
                      for axis in AXES]
            return probe, n, values, ""
        except ValueError as exc:  # odd-N cat probe has no closed forms
            return probe, n, None, f"skipped: {exc}"

    workers = _resolve_workers(args.workers)
    results = _map_ordered(cell, cells, workers)
    rows = []
    for probe, n, values, note in results:
        cols = [_fmt(v) for v in values] if values else ["", "", ""]
        rows.append([str(n), probe, *cols, note])
    fits = {}
    for probe in probes:
        points = {axis: [] for axis in AXES}
        for row_probe, n, values, _ in results:
            if row_probe == probe and values:
                for axis, v in zip(AXES, values):
                    points[axis].append((n, v))
        if all(len(pts) >= 3 for pts in points.values()):
            fits[probe] = {
                axis: {"slope": fit.slope, "r_squared": fit.r_squared}
                for axis, fit in ((ax, scaling_fit(points[ax])) for ax in AXES)}
    params = {"scheme": args.scheme, "probe": args.probe, "N": list(args.N),
              "duration": args.duration}
    text = (_metadata_line("scaling", params, fits=fits) + "\n"
            + _csv_text(["N", "probe", "db_x", "db_y", "db_z", "note"], rows))
    _write_artifact(text, args.output)
    return 0


def cmd_robustness(args) -> int:
    dims = EnsembleDims(args.N)
    field = FieldVector(*args.B)
    modes = (("alternating", "identical") if args.mode == "both"
             else (args.mode,))
    cells = [(eta, mode) for eta in args.eta for mode in modes]

    def cell(item):
        eta, mode = item
        schedules = [DDSchedule(axis, args.pairs, args.tau, mode)
                     for axis in ("z", "y", "x")]
        noise = NoiseModel(eta=eta, trials=args.trials, seed=args.seed,
                           paired_error=(args.error_draws == "paired"))
        return fidelity_f2(dims, field, schedules, noise)

    workers = _resolve_workers(args.workers)
    results = _map_ordered(cell, cells, workers)
    rows = []
    summary = []
    for (eta, mode), res in zip(cells, results):
        summary.append({"eta": eta, "mode": mode,
                        "mean_trajectory_min": res.mean_trajectory_minimum})
        for t, mean, std in zip(res.times, res.mean, res.std):
            rows.append([_fmt(eta), mode, _fmt(t), _fmt(mean), _fmt(std)])
    params = {"N": args.N, "B": list(args.B), "tau": args.tau,
              "pairs": args.pairs, "trials": args.trials,
              "eta": list(args.eta), "mode": args.mode,
              "error_draws": args.error_draws, "seed": args.seed}
    text = (_metadata_line("robustness", params, summary=summary) + "\n"
            + _csv_text(["eta", "mode", "t", "f2_mean", "f2_std"], rows))
    _write_artifact(text, args.output)
    return 0


def cmd_validate(args) -> int:
    parser = args.parser
    indices = None
    if args.only:
        wanted = set()
        for token in args.only:
            for part in token.split(","):
                part = part.strip().lower()
                if not part:
                    continue
                if part.isdigit():
                    if not 1 <= int(part) <= len(CRITERION_NAMES):
                        parser.error(f"--only index {part} out of range 1..10")
                    wanted.add(int(part))
                else:
                    matches = [i + 1 for i, name in enumerate(CRITERION_NAMES)
                               if part in name]
                    if not matches:
                        parser.error(f"--only {part!r} matches no criterion name")
                    wanted.update(matches)
        indices = sorted(wanted)
    results = run_all(only=indices, seed=args.seed)
    rows = [[str(r.index), r.name, "true" if r.passed else "false", r.detail]
            for r in results]
    all_passed = all(r.passed for r in results)
    params = {"only": indices, "seed": args.seed}
    text = (_metadata_line("validate", params, all_passed=all_passed) + "\n"
            + _csv_text(["index", "name", "passed", "detail"], rows))
    _write_artifact(text, args.output)
    return 0 if all_passed else 3


# ------------------------------------------------------------------ parser

def _add_common(sub, scheme_flag=True, b_required=True, durations=False):
    if scheme_flag:
        sub.add_argument("--scheme", choices=("parallel", "sequential"),
                         required=True, help="readout scheme")
    sub.add_argument("--probe", choices=("scs", "ghz"), required=True,
                     help="initial collective state")
    sub.add_argument("--N", type=_positive_int, default=10,
                     help="ensemble size (default 10)")
    sub.add_argument("--B", type=_triple, required=b_required,
                     help="field components bx,by,bz (pi literals allowed)")
    if durations:
        sub.add_argument("--T", type=_triple, default=(1.0, 1.0, 1.0),
                         help="per-axis interrogation times tx,ty,tz (default 1,1,1)")
    sub.add_argument("--output", "-o", default=None,
                     help="artifact path (default stdout)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecmag",
        description="Vector magnetometry with collective-spin probes: "
                    "simulate, analyze, and validate.")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="write a (T, jz) trace")
    _add_common(sim)
    sim.add_argument("--axis", choices=AXES, default=None,
                     help="readout axis (parallel scheme only)")
    sim.add_argument("--grid", type=_grid, required=True,
                     help="time grid start:stop:points")
    sim.add_argument("--evolution", choices=("analytic", "effective", "exact"),
                     default="analytic", help="trace source (default analytic)")
    sim.add_argument("--tau", type=_angle, default=None,
                     help="pulse spacing for --evolution exact")
    sim.add_argument("--workers", type=_positive_int, default=None,
                     help="sweep workers (default VECMAG_WORKERS or CPU count)")
    sim.set_defaults(func=cmd_simulate, parser=sim)

    spect = subs.add_parser("spectrum",
                           help="FFT a sequential trace and recover the field")
    _add_common(spect, scheme_flag=False)
    spect.add_argument("--M", type=_positive_int, default=4096,
                      help="sample count, power of two (default 4096)")
    spect.add_argument("--t-max", dest="t_max", type=_angle, default=None,
                      help="trace length (default: quarter-Nyquist rule)")
    spect.add_argument("--method",
                      choices=("amplitude-rule", "pair-spread-rule"),
                      default="amplitude-rule", help="peak-inversion rule")
    spect.add_argument("--on-tie", dest="on_tie",
                      choices=("positive", "error"), default="positive",
                      help="sign policy when the fit ties (default positive)")
    spect.add_argument("--recovered-output", default=None,
                      help="also write the recovered field as standalone JSON")
    spect.set_defaults(func=cmd_spectrum, parser=spect)

    prec = subs.add_parser("precision",
                           help="per-axis precision report as JSON")
    _add_common(prec, durations=True)
    prec.add_argument("--repetitions", type=_positive_int, default=1,
                      help="independent repetitions in the Cramer-Rao bound")
    prec.set_defaults(func=cmd_precision, parser=prec)

    qfi = subs.add_parser("qfi", help="per-axis Fisher-information report")
    _add_common(qfi, durations=True)
    qfi.set_defaults(func=cmd_qfi, parser=qfi)

    scal = subs.add_parser("scaling",
                           help="minimized precision versus ensemble size")
    scal.add_argument("--scheme", choices=("parallel", "sequential"),
                      default="sequential", help="readout scheme")
    scal.add_argument("--probe", choices=("scs", "ghz", "both"),
                      default="both", help="probe sweep (default both)")
    scal.add_argument("--N", type=_int_list,
                      default=tuple(range(4, 41, 2)),
                      help="comma-separated ensemble sizes (default evens 4..40)")
    scal.add_argument("--duration", type=_angle, default=1.0,
                      help="interrogation time per axis (default 1)")
    scal.add_argument("--workers", type=_positive_int, default=None)
    scal.add_argument("--output", "-o", default=None)
    scal.set_defaults(func=cmd_scaling, parser=scal)

    rob = subs.add_parser("robustness",
                          help="pulse-error Monte Carlo, F2 versus time")
    rob.add_argument("--N", type=_positive_int, default=10)
    rob.add_argument("--B", type=_triple, default=(4.0, 5.0, 6.0))
    rob.add_argument("--tau", type=_angle, default=1e-3,
                     help="pulse spacing (default 1e-3)")
    rob.add_argument("--pairs", type=_positive_int, default=1000,
                     help="pulse pairs per axis block (default 1000)")
    rob.add_argument("--trials", type=_positive_int, default=20)
    rob.add_argument("--eta", type=_angle_list, default=(0.06 * math.pi,),
                     help="comma-separated error amplitudes, pi literals allowed")
    rob.add_argument("--mode", choices=("alternating", "identical", "both"),
                     default="alternating")
    rob.add_argument("--error-draws", dest="error_draws",
                     choices=("paired", "independent"), default="paired",
                     help="one draw per pulse pair, or per pulse")
    rob.add_argument("--seed", type=int, default=7)
    rob.add_argument("--workers", type=_positive_int, default=None)
    rob.add_argument("--output", "-o", default=None)
    rob.set_defaults(func=cmd_robustness, parser=rob)

    val = subs.add_parser("validate", help="run the acceptance suite")
    val.add_argument("--only", action="append", default=None,
                     help="criterion index or name fragment; repeatable")
    val.add_argument("--seed", type=int, default=DEFAULT_SEED)
    val.add_argument("--output", "-o", default=None)
    val.set_defaults(func=cmd_validate, parser=val)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader closed the pipe (e.g. | head); hand exit-time flushes a sink
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
