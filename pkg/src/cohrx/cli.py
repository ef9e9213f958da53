"""Command-line surface: closed-form tables, sweep simulation, plots.

Exit codes follow the scripting contract: 0 success, 2 validation
failure, 3 I/O failure, 4 parse failure.  Simulation output is CSV
with LF line endings and floats fixed to 9 significant digits, so a
fixed (preset, seed, trials) run is byte-identical across executions
and worker counts.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

from .analytic import (
    dolinar_error,
    helstrom_bound,
    kennedy_error,
    sh_error,
    sh_optimal_theta,
)
from .detector import DetectorModel
from .montecarlo import RECEIVERS, TrialConfig, sweep
from .presets import DEFAULT_SEED, DEFAULT_TRIALS, PRESETS
from .receivers import FeedbackModel
from .signal import BinaryAlphabet, SignalEnvelope

CSV_HEADER = (
    "sweep_var",
    "value",
    "receiver",
    "trials",
    "errors",
    "p_hat",
    "ci_low",
    "ci_high",
    "analytic_ref",
)

# physics knobs a named preset pins; only `custom` may set them
_PHYSICS_KEYS = (
    "sweep_var",
    "grid",
    "receiver",
    "nbar",
    "eta",
    "duration",
    "xi1",
    "dark_rate",
    "dead_time",
    "afterpulse_prob",
    "max_count_rate",
    "delay",
    "phase_error",
)
_CONFIG_KEYS = _PHYSICS_KEYS + ("preset", "out", "trials", "seed")


class _ParseError(Exception):
    """Malformed input file (config or CSV); maps to exit code 4."""


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _cmd_analytic(args: argparse.Namespace) -> int:
    xi1 = args.xi1
    xi0 = 1.0 - xi1
    rows = []
    for nbar in args.nbar:
        for eta in args.eta:
            if args.theta is not None:
                theta = args.theta
            elif nbar == 0.0:
                # coinciding codewords: every rotation performs alike
                theta = 0.0
            else:
                theta = sh_optimal_theta(xi0, xi1, math.exp(-0.5 * nbar))
            values = (
                helstrom_bound(xi0, xi1, nbar, eta),
                kennedy_error(xi1, nbar, eta),
                sh_error(xi0, xi1, nbar, eta, theta),
                dolinar_error(xi0, xi1, nbar, eta),
            )
            rows.append(
                (f"{nbar:g}", f"{eta:g}", f"{xi1:g}", f"{theta:.6f}")
                + tuple(f"{p:.6f}" for p in values)
            )
    # all rows computed before any output, so validation failures never
    # leave a partial table behind
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(
        ("nbar", "eta", "xi1", "theta", "helstrom", "kennedy", "sasaki_hirota", "dolinar")
    )
    writer.writerows(rows)
    return 0


def _read_config(path: str) -> dict[str, str]:
    """Flat key=value file; # starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not sep or not key or not value:
                raise _ParseError(f"{path}: line {lineno}: expected key=value, got {raw.strip()!r}")
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _merged(args: argparse.Namespace, file_cfg: dict[str, str], key: str):
    """Flag value if given, else config-file value (still a string)."""
    flag = getattr(args, key, None)
    return flag if flag is not None else file_cfg.get(key)


def _custom_jobs(args, file_cfg, trials, seed):
    missing = [k for k in _PHYSICS_KEYS if _merged(args, file_cfg, k) is None]
    # feedback knobs are only required when the feedback receiver runs
    receivers_raw = _merged(args, file_cfg, "receiver")
    if receivers_raw is not None and "dolinar" not in receivers_raw:
        missing = [k for k in missing if k not in ("delay", "phase_error")]
    if missing:
        raise ValueError(
            "custom experiments take no defaults; missing: " + ", ".join(missing)
        )

    def val(key: str) -> float:
        return float(_merged(args, file_cfg, key))

    sweep_var = _merged(args, file_cfg, "sweep_var")
    grid = [float(x) for x in str(_merged(args, file_cfg, "grid")).split(",")]
    receivers = receivers_raw if isinstance(receivers_raw, list) else receivers_raw.split(",")
    unknown = set(receivers) - set(RECEIVERS)
    if unknown:
        raise ValueError(f"unknown receivers: {sorted(unknown)}")

    xi1 = val("xi1")
    alphabet = BinaryAlphabet(
        SignalEnvelope(duration=val("duration"), mean_photons=val("nbar")),
        xi0=1.0 - xi1,
        xi1=xi1,
    )
    detector = DetectorModel(
        efficiency=val("eta"),
        dark_rate=val("dark_rate"),
        dead_time=val("dead_time"),
        afterpulse_prob=val("afterpulse_prob"),
        max_count_rate=val("max_count_rate"),
    )
    feedback = None
    if "dolinar" in receivers:
        feedback = FeedbackModel(delay=val("delay"), phase_error=val("phase_error"))
    jobs = tuple(
        (
            name,
            TrialConfig(
                receiver=name,
                alphabet=alphabet,
                detector=detector,
                trials=trials,
                master_seed=seed,
                feedback=feedback if name == "dolinar" else None,
            ),
        )
        for name in receivers
    )
    return sweep_var, grid, jobs


def _cmd_simulate(args: argparse.Namespace) -> int:
    file_cfg = _read_config(args.config) if args.config else {}
    preset_name = args.preset or file_cfg.get("preset")
    if preset_name is None:
        raise ValueError("no preset selected; pass --preset or put preset= in the config")
    out_path = args.out or file_cfg.get("out")
    if out_path is None:
        raise ValueError("no output path; pass --out or put out= in the config")
    trials = int(_merged(args, file_cfg, "trials") or DEFAULT_TRIALS)
    seed = int(_merged(args, file_cfg, "seed") or DEFAULT_SEED)

    if preset_name == "custom":
        sweep_var, grid, jobs = _custom_jobs(args, file_cfg, trials, seed)
    elif preset_name in PRESETS:
        given = [k for k in _PHYSICS_KEYS if _merged(args, file_cfg, k) is not None]
        if given:
            raise ValueError(
                f"preset {preset_name!r} fixes the physics; drop {', '.join(given)} "
                "or use --preset custom"
            )
        preset = PRESETS[preset_name]
        sweep_var = preset.sweep_variable
        grid = list(preset.grid)
        jobs = preset.jobs(trials, seed)
    else:
        raise ValueError(
            f"unknown preset {preset_name!r}; choose from "
            f"{', '.join([*PRESETS, 'custom'])}"
        )

    rows = []
    for label, config in jobs:
        curve = sweep(config, sweep_var, grid)
        for (x, _), est in zip(curve.points, curve.estimates):
            rows.append(
                (
                    sweep_var,
                    _fmt(x),
                    label,
                    str(est.trials),
                    str(est.errors),
                    _fmt(est.p_hat),
                    _fmt(est.ci_low),
                    _fmt(est.ci_high),
                    _fmt(est.analytic_ref),
                )
            )
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    return 0


def _read_rows(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise _ParseError(f"{path}: line 1: empty file") from None
        if tuple(header) != CSV_HEADER:
            raise _ParseError(
                f"{path}: line 1: expected header {','.join(CSV_HEADER)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise _ParseError(f"{path}: line {lineno}: expected 9 fields, got {len(row)}")
            try:
                rows.append(
                    {
                        "sweep_var": row[0],
                        "value": float(row[1]),
                        "receiver": row[2],
                        "trials": int(row[3]),
                        "errors": int(row[4]),
                        "p_hat": float(row[5]),
                        "ci_low": float(row[6]),
                        "ci_high": float(row[7]),
                        "analytic_ref": float(row[8]),
                    }
                )
            except ValueError as exc:
                raise _ParseError(f"{path}: line {lineno}: {exc}") from None
    return rows


def _cmd_plot(args: argparse.Namespace) -> int:
    rows = _read_rows(args.csv_path)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = list(dict.fromkeys(r["receiver"] for r in rows))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    # fixed hash salt and no Date metadata keep the SVG bytes a pure
    # function of the input CSV
    with plt.rc_context({"svg.hashsalt": "cohrx"}):
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        for i, label in enumerate(labels):
            pts = [r for r in rows if r["receiver"] == label]
            xs = [r["value"] for r in pts]
            ps = [r["p_hat"] for r in pts]
            err_lo = [r["p_hat"] - r["ci_low"] for r in pts]
            err_hi = [r["ci_high"] - r["p_hat"] for r in pts]
            color = colors[i % len(colors)]
            ax.errorbar(
                xs, ps, yerr=(err_lo, err_hi),
                marker="o", markersize=3.5, linewidth=1.0, capsize=2.0,
                color=color, label=label,
            )
            ax.plot(xs, [r["analytic_ref"] for r in pts],
                    linestyle="--", linewidth=0.9, alpha=0.6, color=color)
        if rows:
            ax.set_xlabel(rows[0]["sweep_var"])
        ax.set_ylabel("error probability")
        if args.logy:
            ax.set_yscale("log")
        ax.grid(alpha=0.3)
        if labels:
            ax.legend()
        fig.savefig(args.out, format="svg", metadata={"Date": None})
        plt.close(fig)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohrx",
        description="Binary coherent-state receiver toolkit: closed forms, "
        "Monte Carlo sweeps, plots.",
    )
    sub = parser.add_subparsers(dest="command")

    p_an = sub.add_parser("analytic", help="print closed-form error probabilities as CSV")
    p_an.add_argument("--nbar", type=float, nargs="+", default=[1.0])
    p_an.add_argument("--eta", type=float, nargs="+", default=[1.0])
    p_an.add_argument("--xi1", type=float, default=0.5)
    p_an.add_argument("--theta", type=float, default=None,
                      help="rotation angle; default is the optimal one")
    p_an.set_defaults(func=_cmd_analytic)

    p_sim = sub.add_parser("simulate", help="run a sweep experiment and write CSV")
    p_sim.add_argument("--preset", choices=[*PRESETS, "custom"])
    p_sim.add_argument("--out")
    p_sim.add_argument("--trials", type=int)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--config", help="key=value file; flags override it")
    p_sim.add_argument("--sweep-var", dest="sweep_var",
                       choices=("mean_photons", "efficiency", "phase_error"))
    p_sim.add_argument("--grid", help="comma-separated, strictly increasing")
    p_sim.add_argument("--receiver", action="append", choices=RECEIVERS)
    p_sim.add_argument("--nbar", type=float)
    p_sim.add_argument("--eta", type=float)
    p_sim.add_argument("--duration", type=float)
    p_sim.add_argument("--xi1", type=float)
    p_sim.add_argument("--dark-rate", dest="dark_rate", type=float)
    p_sim.add_argument("--dead-time", dest="dead_time", type=float)
    p_sim.add_argument("--afterpulse-prob", dest="afterpulse_prob", type=float)
    p_sim.add_argument("--max-count-rate", dest="max_count_rate", type=float)
    p_sim.add_argument("--delay", type=float)
    p_sim.add_argument("--phase-error", dest="phase_error", type=float)
    p_sim.set_defaults(func=_cmd_simulate)

    p_plot = sub.add_parser("plot", help="render a simulate CSV as an SVG figure")
    p_plot.add_argument("csv_path")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--logy", action="store_true")
    p_plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except _ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
