"""Batch front-end: config-file driven runs emitting deterministic CSV.

Usage:

    splitac <command> --config <path> --out <dir> [--seed N] [--check]

Commands: ``lemmas`` (randomized flow/increment bound suites),
``simulate`` (one trajectory with snapshots), ``strong`` / ``weak``
(convergence tables with fitted slope), ``localize`` (sup-norm
threshold diagnostics).

The config format is flat ``key = value`` text, one key per line, with
``#`` comments.  Outputs are a pure function of (config, seed): every
CSV starts with a comment header carrying a hash of the semantic config
keys (the ``threads`` worker cap is excluded) and the effective seed,
numbers are printed with 17 significant digits, and replicas are always
reduced in index order, so rerunning a config byte-reproduces the CSV
for any worker count.  Wall-clock and other run metadata go to
``summary.txt``, which is not byte-stable.
"""

import argparse
import hashlib
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    ConvergenceTable,
    ExperimentConfig,
    initial_condition,
    localization_scan,
    strong_table,
    telescoped_rows,
    weak_table,
)
from .flows import run_lemma_suites
from .grid import Mesh
from .noise import NoisePlan
from .schemes import SchemeSpec, run_trajectory

COMMANDS = ("lemmas", "simulate", "strong", "weak", "localize")

# key -> (parser, default); None default means required-if-used
_KEY_SPECS = {
    "t_final": (float, 1.0),
    "n_interior": (int, 127),
    "dt_list": ("float_list", ()),
    "dt": (float, None),
    "n_replicas": (int, 2000),
    "method": (str, "m1"),
    "linear": (str, "imp"),
    "master_seed": (int, 0),
    "test_function": (str, "exp_neg5_h2"),
    "x0": (str, "zero"),
    "x0_scale": (float, 1.0),
    "noise_amplitude": (float, 1.0),
    "threads": (int, 1),
    "n_cases": (int, 1_000_000),
    "snapshot_times": ("float_list", ()),
    "replica": (int, 0),
    "m_list": ("float_list", (3.0, 5.0, 8.0)),
    "check_slope_min": (float, None),
    "check_slope_max": (float, None),
}

_HASH_EXCLUDED = {"threads"}


class ConfigError(Exception):
    """Raised for unreadable, unparsable, or inconsistent configs."""


def _parse_value(key: str, raw: str, line_no: int):
    kind = _KEY_SPECS[key][0]
    try:
        if kind == "float_list":
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: bad value for {key!r}: {raw!r}") from exc


def parse_config(path: Path) -> dict:
    """Read a flat key=value config; unknown keys are errors."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEY_SPECS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = _parse_value(key, raw, line_no)
    for key, (_, default) in _KEY_SPECS.items():
        values.setdefault(key, default)
    return values


def config_hash(values: dict) -> str:
    """Hash of the semantic config keys (seed included, threads not)."""
    parts = []
    for key in sorted(values):
        if key in _HASH_EXCLUDED:
            continue
        parts.append(f"{key}={values[key]!r}")
    digest = hashlib.sha256("\n".join(parts).encode()).hexdigest()
    return digest[:16]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


@dataclass
class RunManifest:
    """Metadata echoed to summary.txt (the human-readable side channel)."""

    command: str
    config_hash: str
    master_seed: int
    version: str
    wall_seconds: float
    lines: list

    def render(self) -> str:
        head = [
            f"command: {self.command}",
            f"config_hash: {self.config_hash}",
            f"master_seed: {self.master_seed}",
            f"version: {self.version}",
            f"wall_seconds: {self.wall_seconds:.3f}",
            "",
        ]
        return "\n".join(head + self.lines) + "\n"


def _csv(header_cols, rows, chash, seed, footer=None) -> str:
    lines = [f"# config_hash={chash} seed={seed}"]
    lines.append(",".join(header_cols))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    if footer:
        lines.append(footer)
    return "\n".join(lines) + "\n"


def _experiment_config(values: dict) -> ExperimentConfig:
    if not values["dt_list"]:
        raise ConfigError("dt_list is required for this command")
    scheme = SchemeSpec(values["method"], values["linear"], values["dt_list"][0])
    return ExperimentConfig(
        T=values["t_final"],
        mesh=Mesh(values["n_interior"]),
        dt_list=values["dt_list"],
        n_replicas=values["n_replicas"],
        scheme=scheme,
        master_seed=values["master_seed"],
        test_function=values["test_function"],
        x0_kind=values["x0"],
        x0_scale=values["x0_scale"],
        noise_amplitude=values["noise_amplitude"],
        threads=values["threads"],
    )


def _table_csv(table: ConvergenceTable, chash, seed) -> str:
    rows = [
        (r.dt, r.estimate, r.stderr, r.n_valid, r.n_blowup) for r in table.rows
    ]
    footer = (
        f"# slope={_fmt(table.slope)} half_width={_fmt(table.slope_half_width)}"
    )
    return _csv(
        ("dt", "estimate", "stderr", "n_valid", "n_blowup"),
        rows,
        chash,
        seed,
        footer,
    )


def _slope_check(table, values, default_lo, default_hi):
    lo = values["check_slope_min"]
    hi = values["check_slope_max"]
    lo = default_lo if lo is None else lo
    hi = default_hi if hi is None else hi
    problems = []
    if not all(r.valid for r in table.rows):
        problems.append("one or more rows invalid (blow-up fraction above 1%)")
    if not np.isfinite(table.slope):
        problems.append("slope could not be fitted")
    elif not lo <= table.slope <= hi:
        problems.append(f"slope {table.slope:.4f} outside [{lo}, {hi}]")
    return problems


def _cmd_lemmas(values, chash):
    reports = run_lemma_suites(values["n_cases"], values["master_seed"])
    rows = [
        (r.name, r.n_cases, _fmt(r.worst_margin), r.n_violations, int(r.passed))
        for r in reports
    ]
    csv_text = _csv(
        ("suite", "n_cases", "worst_margin", "n_violations", "passed"),
        rows,
        chash,
        values["master_seed"],
    )
    lines = [
        f"{r.name}: {'PASS' if r.passed else 'FAIL'} "
        f"(violations={r.n_violations}, worst_margin={r.worst_margin:.3e})"
        for r in reports
    ]
    problems = [f"suite {r.name} failed" for r in reports if not r.passed]
    return {"lemmas.csv": csv_text}, lines, problems


def _cmd_simulate(values, chash):
    dt = values["dt"] if values["dt"] is not None else (
        values["dt_list"][0] if values["dt_list"] else None
    )
    if dt is None:
        raise ConfigError("simulate needs a 'dt' (or 'dt_list') key")
    mesh = Mesh(values["n_interior"])
    spec = SchemeSpec(values["method"], values["linear"], dt)
    plan = NoisePlan(
        values["master_seed"], values["replica"], mesh, dt, n_levels=1
    )
    x0 = initial_condition(mesh, values["x0"], values["x0_scale"])
    times = values["snapshot_times"] or (values["t_final"],)
    stats = run_trajectory(
        spec, x0, plan, values["t_final"],
        snapshot_times=times,
        noise_amplitude=values["noise_amplitude"],
    )
    header = ["xi"] + [f"u_t{_fmt(t)}" for t, _ in stats.snapshots]
    cols = [mesh.nodes] + [snap.values for _, snap in stats.snapshots]
    rows = list(zip(*cols))
    csv_text = _csv(header, rows, chash, values["master_seed"])
    lines = [
        f"steps: {stats.n_steps}",
        f"sup_norm_e: {stats.sup_norm_e:.6g}",
        f"sup_norm_h: {stats.sup_norm_h:.6g}",
        f"blown_up: {stats.blown_up}",
    ]
    problems = ["trajectory blew up"] if stats.blown_up else []
    return {"simulate.csv": csv_text}, lines, problems


def _cmd_strong(values, chash):
    config = _experiment_config(values)
    table = strong_table(config)
    csv_text = _table_csv(table, chash, values["master_seed"])
    lines = [
        f"rows: {len(table.rows)}",
        f"slope: {table.slope:.4f} +- {table.slope_half_width:.4f}",
    ]
    problems = _slope_check(table, values, 0.35, 0.65)
    return {"strong.csv": csv_text}, lines, problems


def _cmd_weak(values, chash):
    config = _experiment_config(values)
    table = weak_table(config)
    files = {
        "weak.csv": _table_csv(table, chash, values["master_seed"]),
        "weak_telescoped.csv": _csv(
            ("dt", "estimate", "stderr", "n_valid", "n_blowup"),
            [
                (r.dt, r.estimate, r.stderr, r.n_valid, r.n_blowup)
                for r in telescoped_rows(table)
            ],
            chash,
            values["master_seed"],
        ),
    }
    lines = [
        f"rows: {len(table.rows)}",
        f"slope(|increment|): {table.slope:.4f} +- {table.slope_half_width:.4f}",
    ]
    problems = _slope_check(table, values, 0.3, 0.7)
    return files, lines, problems


def _cmd_localize(values, chash):
    config = _experiment_config(values)
    rows = []
    problems = []
    for dt in config.dt_list:
        for st in localization_scan(config, dt, values["m_list"]):
            rows.append(
                (dt, st.M, st.prob_exceed, st.localized_mse, st.n_valid, st.n_blowup)
            )
            if st.n_blowup > 0.01 * config.n_replicas:
                problems.append(f"blow-up fraction above 1% at dt={dt}")
    csv_text = _csv(
        ("dt", "M", "prob_exceed", "localized_mse", "n_valid", "n_blowup"),
        rows,
        chash,
        values["master_seed"],
    )
    lines = [f"rows: {len(rows)}"]
    return {"localize.csv": csv_text}, lines, problems


_HANDLERS = {
    "lemmas": _cmd_lemmas,
    "simulate": _cmd_simulate,
    "strong": _cmd_strong,
    "weak": _cmd_weak,
    "localize": _cmd_localize,
}


def run(command: str, config_path, out_dir, seed=None, check=False) -> int:
    """Execute one command; returns the process exit status.

    2 on config errors (nothing written), 1 when ``check`` is set and a
    threshold fails, 0 otherwise.  All output files are rendered before
    anything is written, so failures never leave partial files.
    """
    t_start = time.perf_counter()
    try:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        values = parse_config(Path(config_path))
        if seed is not None:
            values["master_seed"] = int(seed)
        chash = config_hash(values)
        files, lines, problems = _HANDLERS[command](values, chash)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    manifest = RunManifest(
        command=command,
        config_hash=chash,
        master_seed=values["master_seed"],
        version=__version__,
        wall_seconds=time.perf_counter() - t_start,
        lines=lines + [f"check: {p}" for p in problems],
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_bytes(text.encode())
    (out / "summary.txt").write_text(manifest.render())

    for line in lines:
        print(line)
    if problems:
        for p in problems:
            print(f"check: {p}", file=sys.stderr)
        if check:
            return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="splitac",
        description="Splitting-scheme experiments for the stochastic "
        "Allen-Cahn equation.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--check", action="store_true",
        help="exit 1 when a validity or slope threshold fails",
    )
    args = parser.parse_args(argv)
    return run(args.command, args.config, args.out, seed=args.seed, check=args.check)


if __name__ == "__main__":
    sys.exit(main())
