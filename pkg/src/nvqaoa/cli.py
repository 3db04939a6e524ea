"""Command-line interface.

Subcommands: ``landscape`` (grid scan to CSV), ``optimize`` (parameter
search), ``reconstruct`` (one-off population recovery from recorded means),
``convergence`` (checkpoint-resolved estimates at a single point) and
``rerun`` (replay a manifest bit for bit).

Angles are accepted in radians ("1.5708") or as pi multiples ("0.5pi");
ranges are START:STOP:STEP in either form. Exit codes: 0 success, 2 usage or
malformed configuration, 3 degenerate calibration, 4 unreadable or unwritable
files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiment import (
    DEFAULT_CHECKPOINT_EVERY,
    DEFAULT_REALIZATIONS,
    DEFAULT_SEED,
    DEFAULT_SHOTS,
    ConvergenceProfile,
    QaoaParams,
    ScanConfig,
    config_from_dict,
    config_to_dict,
    convergence_profile,
    landscape_error,
    optimize,
    run_scan,
    scan_summary,
    write_convergence_csv,
    write_landscape_csv,
)
from .graph_problem import brute_force, load_graph
from .readout import load_calibration
from .reconstruction import DegenerateCalibrationError, reconstruct
from ._bitstrings import all_bitstrings, bits_to_index

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4

SEED_ENV_VAR = "NVQAOA_SEED"

DEFAULT_BETA_RANGE_TEXT = "0.1pi:0.6pi:0.025pi"
DEFAULT_GAMMA_RANGE_TEXT = "0.1pi:2.1pi:0.05pi"


class UsageError(ValueError):
    """Bad flags or malformed configuration content; maps to exit code 2."""


def parse_angle(text: str) -> float:
    """Parse an angle in radians ("1.57") or pi multiples ("0.5pi", "pi", "-pi")."""
    token = text.strip().lower()
    if not token:
        raise UsageError("empty angle")
    if token.endswith("pi"):
        head = token[:-2].strip()
        if head in ("", "+"):
            factor = 1.0
        elif head == "-":
            factor = -1.0
        else:
            try:
                factor = float(head)
            except ValueError:
                raise UsageError(f"cannot parse angle {text!r}") from None
        return factor * math.pi
    try:
        return float(token)
    except ValueError:
        raise UsageError(f"cannot parse angle {text!r}") from None


def parse_range(text: str) -> tuple[float, float, float]:
    """Parse START:STOP:STEP where each field is an angle token."""
    fields = text.split(":")
    if len(fields) != 3:
        raise UsageError(f"range must be START:STOP:STEP, got {text!r}")
    start, stop, step = (parse_angle(f) for f in fields)
    if step <= 0:
        raise UsageError(f"range step must be positive, got {text!r}")
    if stop < start:
        raise UsageError(f"range stop precedes start in {text!r}")
    return (start, stop, step)


def format_angle(value: float) -> str:
    """Radians at full precision; parse_angle round-trips the output exactly."""
    return format(float(value), ".17g")


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _add_scan_arguments(sub: argparse.ArgumentParser, default_mode: str) -> None:
    sub.add_argument("--graph", required=True, help="graph file ('n <count>' header, 'u v [w]' lines)")
    sub.add_argument("--p", type=int, default=1, help="number of ansatz layers")
    sub.add_argument("--beta-range", default=DEFAULT_BETA_RANGE_TEXT, metavar="START:STOP:STEP")
    sub.add_argument("--gamma-range", default=DEFAULT_GAMMA_RANGE_TEXT, metavar="START:STOP:STEP")
    sub.add_argument("--mode", choices=("ideal", "sampled"), default=default_mode)
    sub.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    sub.add_argument("--realizations", type=int, default=DEFAULT_REALIZATIONS)
    sub.add_argument("--cal", help="calibration file ('<bitstring> <intensity>' lines); required in sampled mode")
    sub.add_argument("--checkpoint-every", type=int, default=DEFAULT_CHECKPOINT_EVERY)
    sub.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV_VAR} or {DEFAULT_SEED})")
    sub.add_argument("--exact-calibration", action="store_true", help="reconstruct with the true intensities")
    sub.add_argument("--depolarizing", type=float, default=0.0, help="per-qubit Pauli error probability per gate")
    sub.add_argument("--overrotation", type=float, default=0.0, help="fractional rotation-angle scaling")
    sub.add_argument("--phase-offset", type=parse_angle, default=0.0, help="RZ on qubit 0 after two-qubit gates")
    sub.add_argument("--cal-sigma", type=float, default=0.0, help="relative jitter on the true intensities")
    sub.add_argument("--noise-seed", type=int, default=0)
    sub.add_argument("--force", action="store_true", help="overwrite existing output files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvqaoa",
        description="Simulated variational MAX-CUT experiments with fluorescence-style readout.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    landscape = commands.add_parser("landscape", help="scan the (beta, gamma) cost landscape to CSV")
    _add_scan_arguments(landscape, default_mode="ideal")
    landscape.add_argument("--out", required=True, help="output directory")
    landscape.add_argument("--threads", type=int, default=1)
    landscape.add_argument("--svg", action="store_true", help="also render a grayscale heatmap")
    landscape.set_defaults(func=_cmd_landscape)

    opt = commands.add_parser("optimize", help="search for the minimum-cost angles")
    _add_scan_arguments(opt, default_mode="ideal")
    opt.add_argument("--strategy", choices=("grid_then_refine", "simplex"), default="grid_then_refine")
    opt.add_argument("--out", help="optional output directory for the evaluation trace")
    opt.set_defaults(func=_cmd_optimize)

    rec = commands.add_parser("reconstruct", help="recover populations from recorded flip-pattern means")
    rec.add_argument("--cal", required=True)
    rec.add_argument("--means", required=True, help="file of '<bitstring> <mean>' lines")
    rec.set_defaults(func=_cmd_reconstruct)

    conv = commands.add_parser("convergence", help="checkpoint-resolved estimates at one parameter point")
    _add_scan_arguments(conv, default_mode="sampled")
    conv.add_argument("--beta", required=True, type=parse_angle)
    conv.add_argument("--gamma", required=True, type=parse_angle)
    conv.add_argument("--out", required=True)
    conv.set_defaults(func=_cmd_convergence)

    rerun = commands.add_parser("rerun", help="replay a manifest; outputs are bit-identical")
    rerun.add_argument("--manifest", required=True)
    rerun.add_argument("--out", help="output directory (default: the manifest's directory)")
    rerun.add_argument("--threads", type=int, default=1)
    rerun.add_argument("--force", action="store_true")
    rerun.set_defaults(func=_cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed; normalize to an int return
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateCalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main(sys.argv[1:]))


def _config_dict_from_args(args) -> dict:
    """Resolve flags and files into the fully inlined manifest configuration."""
    if args.mode == "sampled" and not args.cal:
        raise UsageError("sampled mode requires --cal")
    graph = load_graph(args.graph)
    calibration = load_calibration(args.cal) if args.cal else None
    noise = None
    if args.depolarizing or args.overrotation or args.phase_offset or args.cal_sigma:
        noise = {
            "depolarizing_prob": args.depolarizing,
            "overrotation_frac": args.overrotation,
            "phase_offset": args.phase_offset,
            "calibration_sigma": args.cal_sigma,
            "seed": args.noise_seed,
        }
    config = {
        "graph": {"num_vertices": graph.num_vertices, "edges": [[i, j, w] for i, j, w in graph.edges()]},
        "p": args.p,
        "beta_range": list(parse_range(args.beta_range)),
        "gamma_range": list(parse_range(args.gamma_range)),
        "shots": args.shots,
        "realizations": args.realizations,
        "mode": args.mode,
        "noise": noise,
        "calibration": [float(v) for v in calibration.intensities] if calibration is not None else None,
        "master_seed": _resolve_seed(args),
        "checkpoint_every": args.checkpoint_every,
        "exact_calibration": args.exact_calibration,
    }
    config_from_dict(config)  # validate now so failures precede any output
    return config


def _prepare_out(out, force: bool, filenames: list[str]) -> Path:
    out_dir = Path(out)
    existing = [name for name in filenames if (out_dir / name).exists()]
    if existing and not force:
        raise UsageError(f"{', '.join(existing)} already exist(s) in {out_dir}; pass --force to overwrite")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest(command: str, config: dict, options: dict, artifacts: list[str], duration: float) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": config,
        "options": options,
        "artifacts": artifacts,
        "duration_seconds": duration,
    }


def _cmd_landscape(args) -> int:
    config = _config_dict_from_args(args)
    options = {"svg": bool(args.svg)}
    return _run_landscape(config, options, args.out, args.force, args.threads)


def _run_landscape(config: dict, options: dict, out: str, force: bool, threads: int) -> int:
    cfg = config_from_dict(config)
    artifacts = ["landscape.csv", "summary.txt"]
    if options.get("svg"):
        artifacts.append("landscape.svg")
    out_dir = _prepare_out(out, force, artifacts + ["manifest.txt"])
    started = time.perf_counter()
    grid = run_scan(cfg, threads=threads)
    duration = time.perf_counter() - started
    write_landscape_csv(grid, out_dir / "landscape.csv")
    summary = scan_summary(grid, cfg)
    _write_json(out_dir / "summary.txt", summary)
    if options.get("svg"):
        (out_dir / "landscape.svg").write_text(_landscape_svg(grid))
    _write_json(out_dir / "manifest.txt", _manifest("landscape", config, options, artifacts, duration))
    invalid = summary["points_invalid"]
    total = summary["points_total"]
    if invalid > 0:
        print(f"warning: {invalid}/{total} points invalid (degenerate calibration)", file=sys.stderr)
        if invalid / total > 0.01:
            return EXIT_DEGENERATE
    print(f"wrote {out_dir / 'landscape.csv'} ({total} rows)")
    return EXIT_OK


def _cmd_optimize(args) -> int:
    config = _config_dict_from_args(args)
    options = {"strategy": args.strategy}
    return _run_optimize(config, options, args.out, args.force)


def _run_optimize(config: dict, options: dict, out, force: bool) -> int:
    cfg = config_from_dict(config)
    result = optimize(cfg, strategy=options["strategy"])
    report = brute_force(cfg.graph)
    for k, (beta, gamma) in enumerate(zip(result.best_params.betas, result.best_params.gammas)):
        print(f"beta[{k}]: {beta:.10g} rad ({beta / math.pi:.10g} pi)")
        print(f"gamma[{k}]: {gamma:.10g} rad ({gamma / math.pi:.10g} pi)")
    print(f"best F: {result.best_F:.10g}")
    print(f"evaluations: {result.evaluations}")
    print(f"best cut strings: {' '.join(report.best_strings)}")
    print(f"best cut cost: {report.best_cost:.10g}")
    if report.best_cost < 0:
        print(f"approximation ratio: {result.best_F / report.best_cost:.10g}")
    else:
        print("approximation ratio: undefined (graph has no cut to make)")
    if out:
        p = cfg.p
        artifacts = ["trace.csv", "summary.txt"]
        out_dir = _prepare_out(out, force, artifacts + ["manifest.txt"])
        header = (
            ["index"]
            + [f"beta{k}" for k in range(p)]
            + [f"gamma{k}" for k in range(p)]
            + ["F"]
        )
        lines = [",".join(header)]
        for i, (betas, gammas, value) in enumerate(result.trace):
            row = [str(i)]
            row += [format(b, ".10g") for b in betas]
            row += [format(g, ".10g") for g in gammas]
            row.append(format(value, ".10g"))
            lines.append(",".join(row))
        (out_dir / "trace.csv").write_text("\n".join(lines) + "\n")
        summary = {
            "best_betas": list(result.best_params.betas),
            "best_gammas": list(result.best_params.gammas),
            "best_F": result.best_F,
            "evaluations": result.evaluations,
            "best_cut_strings": list(report.best_strings),
            "best_cut_cost": report.best_cost,
            "config": config,
        }
        _write_json(out_dir / "summary.txt", summary)
        _write_json(out_dir / "manifest.txt", _manifest("optimize", config, options, artifacts, 0.0))
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    calibration = load_calibration(args.cal)
    means = _load_means(args.means, calibration.num_qubits)
    estimate = reconstruct(calibration, means)  # DegenerateCalibrationError -> exit 3
    labels = all_bitstrings(calibration.num_qubits)
    for label, value in zip(labels, estimate.pops):
        print(f"population {label} {value:.10g}")
    for label, value in zip(labels, estimate.correlators):
        print(f"correlator {label} {value:.10g}")
    print(f"norm {estimate.norm:.10g}")
    return EXIT_OK


def _load_means(path, num_qubits: int) -> np.ndarray:
    text = Path(path).read_text()
    size = 1 << num_qubits
    values: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise UsageError(f"{path}: line {lineno}: expected '<bitstring> <mean>', got {line!r}")
        label, value = fields
        try:
            index = bits_to_index(label)
        except ValueError:
            raise UsageError(f"{path}: line {lineno}: bad basis label {label!r}") from None
        if len(label) != num_qubits:
            raise UsageError(f"{path}: line {lineno}: label width {len(label)} does not match calibration")
        if index in values:
            raise UsageError(f"{path}: line {lineno}: duplicate flip pattern {label}")
        try:
            values[index] = float(value)
        except ValueError:
            raise UsageError(f"{path}: line {lineno}: bad mean {value!r}") from None
    if sorted(values) != list(range(size)):
        raise UsageError(f"{path}: means must cover every flip pattern exactly once")
    return np.array([values[k] for k in range(size)])


def _cmd_convergence(args) -> int:
    if args.mode != "sampled":
        raise UsageError("convergence requires --mode sampled")
    config = _config_dict_from_args(args)
    options = {"beta": float(args.beta), "gamma": float(args.gamma)}
    return _run_convergence(config, options, args.out, args.force)


def _run_convergence(config: dict, options: dict, out: str, force: bool) -> int:
    cfg = config_from_dict(config)
    params = QaoaParams((options["beta"],) * cfg.p, (options["gamma"],) * cfg.p)
    artifacts = ["convergence.csv", "summary.txt"]
    out_dir = _prepare_out(out, force, artifacts + ["manifest.txt"])
    started = time.perf_counter()
    profile = convergence_profile(cfg, params)
    duration = time.perf_counter() - started
    write_convergence_csv(profile, out_dir / "convergence.csv")
    summary = {
        "checkpoints": int(profile.checkpoint_shots.size),
        "final_shots": int(profile.checkpoint_shots[-1]),
        "final_norm_mean": _json_float(profile.mean_norm[-1]),
        "final_norm_std": _json_float(profile.std_norm[-1]),
        "realizations": profile.realizations,
        "config": config,
        "point": options,
    }
    _write_json(out_dir / "summary.txt", summary)
    _write_json(out_dir / "manifest.txt", _manifest("convergence", config, options, artifacts, duration))
    print(f"wrote {out_dir / 'convergence.csv'} ({profile.checkpoint_shots.size} checkpoints)")
    return EXIT_OK


def _cmd_rerun(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        data = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{manifest_path}: not a valid manifest: {exc}") from None
    for key in ("command", "config", "options"):
        if key not in data:
            raise UsageError(f"{manifest_path}: manifest is missing the {key!r} field")
    out = args.out or str(manifest_path.parent)
    command = data["command"]
    if command == "landscape":
        return _run_landscape(data["config"], data["options"], out, args.force, args.threads)
    if command == "optimize":
        return _run_optimize(data["config"], data["options"], out, args.force)
    if command == "convergence":
        return _run_convergence(data["config"], data["options"], out, args.force)
    raise UsageError(f"{manifest_path}: cannot rerun command {command!r}")


def _json_float(value: float):
    return None if math.isnan(value) else float(value)


def _landscape_svg(grid) -> str:
    """Self-contained grayscale heatmap of the realization-averaged measured cost."""
    n_beta = grid.betas.size
    n_gamma = grid.gammas.size
    reals = grid.realizations
    cell = 12
    margin_left, margin_top, margin_bottom = 70, 30, 46
    width = margin_left + n_gamma * cell + 20
    height = margin_top + n_beta * cell + margin_bottom

    averaged = np.full((n_beta, n_gamma), math.nan)
    for bi in range(n_beta):
        for gi in range(n_gamma):
            start = (bi * n_gamma + gi) * reals
            values = [pt.F_measured for pt in grid.points[start : start + reals] if pt.valid]
            if values:
                averaged[bi, gi] = float(np.mean(values))
    finite = averaged[np.isfinite(averaged)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = hi - lo or 1.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{margin_left}" y="18" font-family="monospace" font-size="12">'
        f"F from {lo:.4g} (black) to {hi:.4g} (white)</text>",
    ]
    for bi in range(n_beta):
        # low beta at the bottom, like a conventional landscape plot
        y = margin_top + (n_beta - 1 - bi) * cell
        for gi in range(n_gamma):
            x = margin_left + gi * cell
            value = averaged[bi, gi]
            if math.isnan(value):
                fill = "rgb(255,0,0)"
            else:
                level = int(round(255 * (value - lo) / span))
                fill = f"rgb({level},{level},{level})"
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
    axis_y = margin_top + n_beta * cell
    parts.append(
        f'<text x="{margin_left}" y="{axis_y + 16}" font-family="monospace" font-size="11">'
        f"gamma {grid.gammas[0]:.4g} .. {grid.gammas[-1]:.4g} rad</text>"
    )
    parts.append(
        f'<text x="6" y="{margin_top + 12}" font-family="monospace" font-size="11">'
        f"beta</text>"
    )
    parts.append(
        f'<text x="6" y="{margin_top + 28}" font-family="monospace" font-size="11">'
        f"{grid.betas[-1]:.4g}</text>"
    )
    parts.append(
        f'<text x="6" y="{axis_y}" font-family="monospace" font-size="11">'
        f"{grid.betas[0]:.4g}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
