"""Command-line front end.

Exit codes: 0 success, 1 I/O failure, 2 usage or configuration error,
3 malformed input data, 4 physics-domain error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .bell import MODELS as CHSH_MODELS
from .bell import OptimizerConfig, cp_bounds, maximize_chsh
from .config import PhysicsConfig, load_config
from .dataio import ingest_csv, write_dataset, write_table
from .decoherence import (
    DEFAULT_DESIGN,
    asymmetry_lambda,
    asymmetry_qm,
    fit_decoherence,
    synth_dataset,
)
from .entanglement import measure_report
from .errors import ConfigError, DataFormatError, DomainError, KaonlabError
from .meson import named_state
from .pair import Outcome, expectation_from_probabilities, joint_probabilities

__all__ = ["build_parser", "dispatch", "main", "ingest_csv"]

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_DATA, EXIT_DOMAIN = 0, 1, 2, 3, 4

_STATES = ("K0", "K0bar", "KS", "KL", "K1", "K2")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _physics_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("physics constants (override the config file)")
    g.add_argument("--config", metavar="PATH", help="key=value file; default $KAONLAB_CONFIG or ./kaonlab.conf")
    g.add_argument("--delta-m-tau-s", type=float, help="mass difference times tau_S")
    g.add_argument("--tau-l-over-tau-s", type=float, help="lifetime ratio tau_L/tau_S")
    g.add_argument("--eps-abs", type=float, help="|epsilon|")
    g.add_argument("--eps-phase-deg", type=float, help="phase of epsilon in degrees")
    g.add_argument("--system-label", choices=("kaon", "B", "D", "Bs", "custom"))
    p.add_argument("--out", "-o", default="-", metavar="PATH", help="output file, '-' for stdout")
    return p


def _format_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kaonlab", description="Entangled neutral-meson calculations.")
    parser.add_argument("--version", action="version", version=f"kaonlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    common = _physics_flags()

    p = sub.add_parser("probabilities", parents=[common], help="joint Yes/No probabilities on a time grid")
    p.add_argument("--t-from", type=float, default=0.0)
    p.add_argument("--t-to", type=float, default=5.0)
    p.add_argument("--steps", type=_nonneg_int, default=20)
    p.add_argument("--left", choices=_STATES, default="K0", help="quasi-spin asked on the left")
    p.add_argument("--right", choices=_STATES, default="K0", help="quasi-spin asked on the right")
    _format_flag(p)

    p = sub.add_parser("chsh-scan", parents=[common], help="maximal CHSH value against x")
    p.add_argument("--model", choices=CHSH_MODELS, required=True)
    p.add_argument("--x-from", type=float, required=True)
    p.add_argument("--x-to", type=float, required=True)
    p.add_argument("--steps", type=_nonneg_int, required=True)
    d = OptimizerConfig()
    p.add_argument("--t-max", type=float, default=d.t_max)
    p.add_argument("--n-uniform", type=_nonneg_int, default=d.n_uniform)
    p.add_argument("--n-log", type=int, default=d.n_log)
    p.add_argument("--n-refine", type=int, default=d.n_refine)
    _format_flag(p)

    sub.add_parser("cp-bounds", parents=[common], help="CP-violation constraints from local realism (JSON)")

    p = sub.add_parser("asym-curve", parents=[common], help="asymmetry against time separation")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--t-first", type=float, required=True)
    p.add_argument("--dt-from", type=float, default=0.0)
    p.add_argument("--dt-to", type=float, default=10.0)
    p.add_argument("--steps", type=_nonneg_int, default=101)
    _format_flag(p)

    p = sub.add_parser("fit", parents=[common], help="fit a decoherence model to asymmetry data (JSON)")
    p.add_argument("--input", required=True, metavar="FILE")
    p.add_argument("--model", choices=("lambda", "zeta"), default="lambda")
    p.add_argument("--scan-max", type=float, default=None)

    p = sub.add_parser("synth", parents=[common], help="synthetic asymmetry dataset (CSV)")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise", type=float, required=True, help="Gaussian sigma on the asymmetry")
    p.add_argument("--time-pairs", metavar="FILE", help="CSV with t_l,t_r columns; default built-in design")

    p = sub.add_parser("measures", parents=[common], help="entanglement measures against time")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--t-from", type=float, default=0.0)
    p.add_argument("--t-to", type=float, default=2.0)
    p.add_argument("--steps", type=_nonneg_int, default=41)
    _format_flag(p)
    return parser


def _physics(args) -> PhysicsConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(
        delta_m_tau_s=args.delta_m_tau_s,
        tau_l_over_tau_s=args.tau_l_over_tau_s,
        eps_abs=args.eps_abs,
        eps_phase_deg=args.eps_phase_deg,
        system_label=args.system_label,
    )


def _cp_invariant_params(phys: PhysicsConfig):
    """Parameters for the decoherence commands, which assume epsilon = 0."""
    if "eps_abs" in phys.explicit and phys.eps_abs != 0:
        raise DomainError("the decoherence model assumes epsilon = 0; pass --eps-abs 0 or drop eps_abs")
    return phys.params(cp_invariant=True)


def _linspace(a: float, b: float, n: int) -> np.ndarray:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("grid bounds must be finite")
    return np.linspace(a, b, n)


def _report(argv, params, result) -> str:
    doc = {
        "tool": "kaonlab",
        "version": __version__,
        "command": list(argv),
        "params": params,
        "result": result,
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _table(args, argv, params, header, rows) -> str:
    if getattr(args, "format", "csv") == "json":
        return _report(argv, params, {"columns": list(header), "rows": [list(map(float, r)) for r in rows]})
    buf = io.StringIO()
    write_table(buf, header, rows)
    return buf.getvalue()


def _cmd_probabilities(args, argv) -> str:
    phys = _physics(args)
    params = phys.params()
    k_l, k_r = named_state(args.left), named_state(args.right)
    ts = _linspace(args.t_from, args.t_to, args.steps)
    rows = []
    yes, no = Outcome.YES, Outcome.NO
    for t_l in ts:
        for t_r in ts:
            pr = joint_probabilities(k_l, t_l, k_r, t_r, params)
            rows.append(
                (t_l, t_r, pr[(yes, yes)], pr[(no, no)], pr[(yes, no)], pr[(no, yes)], expectation_from_probabilities(pr))
            )
    header = ("t_l", "t_r", "P_YY", "P_NN", "P_YN", "P_NY", "E")
    return _table(args, argv, params.to_dict(), header, rows)


def _cmd_chsh_scan(args, argv) -> str:
    phys = _physics(args)
    cfg = OptimizerConfig(
        t_max=args.t_max,
        n_uniform=args.n_uniform,
        n_log=args.n_log,
        n_refine=args.n_refine,
        tau_ratio=phys.tau_l_over_tau_s,
    )
    rows = []
    for x in _linspace(args.x_from, args.x_to, args.steps):
        r = maximize_chsh(float(x), args.model, cfg)
        rows.append((r.x, r.s_max, *r.argmax.as_tuple()))
    header = ("x", "s_max", "t_a", "t_b", "t_a'", "t_b'")
    meta = {"model": args.model, "tau_l_over_tau_s": phys.tau_l_over_tau_s, "t_max": cfg.t_max}
    return _table(args, argv, meta, header, rows)


def _cmd_cp_bounds(args, argv) -> str:
    params = _physics(args).params()
    return _report(argv, params.to_dict(), cp_bounds(params).to_dict())


def _cmd_asym_curve(args, argv) -> str:
    params = _cp_invariant_params(_physics(args))
    dts = _linspace(args.dt_from, args.dt_to, args.steps)
    t_r = np.full_like(dts, args.t_first)
    t_l = args.t_first + np.abs(dts)
    a_qm = asymmetry_qm(t_l, t_r, params)
    a_lam = asymmetry_lambda(t_l, t_r, args.lam, params)
    rows = list(zip(dts, t_l, t_r, a_qm, a_lam))
    meta = params.to_dict() | {"lambda": args.lam}
    return _table(args, argv, meta, ("dt", "t_l", "t_r", "asym_qm", "asym"), rows)


def _cmd_fit(args, argv) -> str:
    params = _cp_invariant_params(_physics(args))
    data = ingest_csv(args.input)
    result = fit_decoherence(data, args.model, params, scan_max=args.scan_max)
    payload = result.to_dict() | {"n_points": len(data), "source": data.source}
    return _report(argv, params.to_dict(), payload)


def _cmd_synth(args, argv) -> str:
    params = _cp_invariant_params(_physics(args))
    if args.time_pairs:
        pairs = _read_time_pairs(args.time_pairs)
    else:
        pairs = DEFAULT_DESIGN
    data = synth_dataset(args.lam, pairs, args.noise, args.seed, params)
    buf = io.StringIO()
    write_dataset(buf, data)
    return buf.getvalue()


def _read_time_pairs(path: str) -> np.ndarray:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"t_l", "t_r"} <= set(reader.fieldnames):
            missing = "t_l" if not reader.fieldnames or "t_l" not in reader.fieldnames else "t_r"
            raise DataFormatError(f"missing column {missing!r}", line=1, column=missing)
        pairs = []
        for row in reader:
            try:
                pairs.append((float(row["t_l"]), float(row["t_r"])))
            except (TypeError, ValueError):
                raise DataFormatError("time is not a number", line=reader.line_num) from None
    if not pairs:
        raise DataFormatError("no time pairs")
    return np.array(pairs)


def _cmd_measures(args, argv) -> str:
    params = _cp_invariant_params(_physics(args))
    if args.lam < 0:
        raise DomainError("lambda must be >= 0")
    rows = []
    for t in _linspace(args.t_from, args.t_to, args.steps):
        r = measure_report(float(t), args.lam, params)
        rows.append((r.t, r.entropy_S, 1.0 - r.eof_E, r.concurrence_C, r.fef_f, r.zeta))
    meta = {"lambda": args.lam}
    return _table(args, argv, meta, ("t", "entropy", "one_minus_E", "C", "f", "zeta"), rows)


_COMMANDS = {
    "probabilities": _cmd_probabilities,
    "chsh-scan": _cmd_chsh_scan,
    "cp-bounds": _cmd_cp_bounds,
    "asym-curve": _cmd_asym_curve,
    "fit": _cmd_fit,
    "synth": _cmd_synth,
    "measures": _cmd_measures,
}


def _emit(text: str, path: str, stdout) -> None:
    if path == "-":
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def dispatch(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    """Run one command and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(stderr)
        stderr.write("kaonlab: error: a command is required\n")
        return EXIT_USAGE
    try:
        text = _COMMANDS[args.command](args, argv)
        _emit(text, args.out, stdout)
    except ConfigError as exc:
        stderr.write(f"kaonlab: config error: {exc}\n")
        return EXIT_USAGE
    except DataFormatError as exc:
        stderr.write(f"kaonlab: data error: {exc}\n")
        return EXIT_DATA
    except KaonlabError as exc:
        stderr.write(f"kaonlab: {exc}\n")
        return EXIT_DOMAIN
    except OSError as exc:
        stderr.write(f"kaonlab: {exc}\n")
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
