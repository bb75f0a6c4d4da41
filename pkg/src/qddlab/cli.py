"""Command-line front end: configuration, experiments, and diagnostics.

Subcommands
-----------
steady      print the steady state table with its constants
spectrum    print spectral gap, convexity modulus, and the two edge-rate moduli
cdi-check   sample random densities and report the worst dissipation margin
fp-run      evolve the linear flow, emit the diagnostic CSV
qdd-run     evolve the fourth-order flow, emit the diagnostic CSV
bls         plateau-undershoot experiment (d=2, flat potential, bump datum)
decay       equilibration experiment (d=2, quadratic potential, regular datum)

File formats
------------
config      key=value per line, '#' starts a comment; CLI flags override
CSV         '# key=value' reference lines, a header row, one row per step
snapshot    '# t=<t> d=<d> n=<n>' then one cell value per line in flat order

Exit status: 0 success, 1 numeric failure, 2 configuration error.  All output
is deterministic for a fixed configuration.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import _RECORD_COLUMNS, RunRecord, StepFailure, StepperConfig, evolve
from .functionals import cdi_margin
from .grid import Grid, discretize, require_positive
from .markov import Generator, assemble, cdpp_modulus, mielke_modulus, spectral_gap
from .potential import Quadratic, SteadyState, lambda_h, steady_state

__all__ = ["Config", "ConfigError", "parse_config", "main"]


class ConfigError(ValueError):
    """Bad configuration: unknown key, malformed value, or out of range."""


@dataclass
class Config:
    dim: int = 2
    n: int = 30
    lam: float = 0.0
    xbar: tuple[float, ...] | None = None  # None: all 0.5
    tau: float | None = None  # None: subcommand default
    steps: int | None = None
    init: str | None = None  # bls | regular | uniform | file:<path>
    snapshot_every: int | None = None
    output_prefix: str | None = None
    mode: str | None = None  # qdd | fp; normally implied by the subcommand
    damping: str = "halving"
    jacobian: str = "analytic"
    newton_tol: float | None = None
    samples: int = 1000  # cdi-check sample count
    seed: int = 0


def _parse_xbar(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(","))


# config key -> (Config field, parser from string)
_KEYS = {
    "dim": ("dim", int),
    "n": ("n", int),
    "lambda": ("lam", float),
    "xbar": ("xbar", _parse_xbar),
    "tau": ("tau", float),
    "steps": ("steps", int),
    "init": ("init", str),
    "snapshot_every": ("snapshot_every", int),
    "output_prefix": ("output_prefix", str),
    "mode": ("mode", str),
    "damping": ("damping", str),
    "jacobian": ("jacobian", str),
    "newton_tol": ("newton_tol", float),
    "samples": ("samples", int),
    "seed": ("seed", int),
}

_INITS = ("bls", "regular", "uniform")


def _validate(cfg: Config, require_init: bool) -> None:
    def bad(key: str, why: str):
        raise ConfigError(f"config key '{key}': {why}")

    if cfg.dim < 1:
        bad("dim", f"must be >= 1, got {cfg.dim}")
    if cfg.n < 2:
        bad("n", f"must be >= 2, got {cfg.n}")
    if cfg.lam < 0.0:
        bad("lambda", f"must be >= 0, got {cfg.lam}")
    if cfg.xbar is not None:
        if len(cfg.xbar) != cfg.dim:
            bad("xbar", f"needs {cfg.dim} comma-separated entries, got {len(cfg.xbar)}")
        if any(not 0.0 <= x <= 1.0 for x in cfg.xbar):
            bad("xbar", "entries must lie in [0, 1]")
    if cfg.tau is not None and not cfg.tau > 0.0:
        bad("tau", f"must be positive, got {cfg.tau}")
    if cfg.steps is not None and cfg.steps < 0:
        bad("steps", f"must be >= 0, got {cfg.steps}")
    if cfg.snapshot_every is not None and cfg.snapshot_every < 0:
        bad("snapshot_every", f"must be >= 0, got {cfg.snapshot_every}")
    if cfg.mode is not None and cfg.mode not in ("qdd", "fp"):
        bad("mode", f"must be qdd or fp, got {cfg.mode!r}")
    if cfg.damping not in ("halving", "undamped"):
        bad("damping", f"must be halving or undamped, got {cfg.damping!r}")
    if cfg.jacobian not in ("analytic", "finite_difference"):
        bad("jacobian", f"must be analytic or finite_difference, got {cfg.jacobian!r}")
    if cfg.newton_tol is not None and not cfg.newton_tol > 0.0:
        bad("newton_tol", f"must be positive, got {cfg.newton_tol}")
    if cfg.samples < 1:
        bad("samples", f"must be >= 1, got {cfg.samples}")
    if cfg.init is not None:
        if cfg.init not in _INITS and not cfg.init.startswith("file:"):
            bad("init", f"must be one of {', '.join(_INITS)} or file:<path>, got {cfg.init!r}")
    elif require_init:
        raise ConfigError("config key 'init' is required")


def parse_config(text: str, overrides=None, *, require_init: bool = True) -> Config:
    """Parse key=value lines, apply string-valued overrides, validate."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = value
    for key, value in (overrides or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            raw[key] = value
    cfg = Config()
    for key, value in raw.items():
        field, convert = _KEYS[key]
        try:
            setattr(cfg, field, convert(value))
        except ValueError:
            raise ConfigError(f"config key {key!r}: cannot parse value {value!r}") from None
    _validate(cfg, require_init)
    return cfg


# ---------------------------------------------------------------- problem setup

_PLATEAU = 1e-4
_COS16_MEAN = math.comb(16, 8) / 4**8  # integral of cos^16(pi x) over [0,1]


def _bls_datum(x1, x2):
    z = 2.0 * _COS16_MEAN / (1.0 - _PLATEAU)
    return (np.cos(np.pi * x1) ** 16 + np.cos(np.pi * x2) ** 16) / z + _PLATEAU


def _regular_datum(x1, x2):
    trig = np.sin(3.0 * np.pi * x1) ** 2 * np.sin(2.0 * np.pi * x2) ** 2
    return (4.0 / 3.0) * trig + (1.0 + x1 + x2) / 3.0


def _build(cfg: Config) -> tuple[Grid, SteadyState, Generator]:
    grid = Grid(cfg.dim, cfg.n)
    xbar = cfg.xbar if cfg.xbar is not None else (0.5,) * cfg.dim
    steady = steady_state(tuple(Quadratic(cfg.lam, x) for x in xbar), grid)
    return grid, steady, assemble(steady)


def initial_density(cfg: Config, grid: Grid) -> np.ndarray:
    if cfg.init == "uniform":
        return np.ones(grid.size)
    if cfg.init in ("bls", "regular"):
        if grid.d != 2:
            raise ConfigError(f"config key 'init': the {cfg.init} datum needs dim=2")
        datum = _bls_datum if cfg.init == "bls" else _regular_datum
        U, _ = discretize(grid, datum)
        return U
    if cfg.init is not None and cfg.init.startswith("file:"):
        _, d, n, values = read_snapshot(cfg.init[len("file:"):])
        if (d, n) != (grid.d, grid.n):
            raise ConfigError(
                f"config key 'init': snapshot is d={d} n={n}, run wants d={grid.d} n={grid.n}"
            )
        return require_positive(grid, values)
    raise ConfigError("config key 'init' is required")


# ------------------------------------------------------------------- file output

def write_snapshot(path, t: float, grid: Grid, U) -> None:
    lines = [f"# t={float(t)!r} d={grid.d} n={grid.n}"]
    lines.extend(repr(float(v)) for v in np.asarray(U))
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[float, int, int, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ConfigError(f"{path}: not a snapshot file")
    fields = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    try:
        t = float(fields["t"])
        d = int(fields["d"])
        n = int(fields["n"])
    except (KeyError, ValueError):
        raise ConfigError(f"{path}: malformed snapshot header {lines[0]!r}") from None
    values = np.array([float(s) for s in lines[1:] if s.strip()])
    if values.size != n**d:
        raise ConfigError(f"{path}: expected {n**d} values, found {values.size}")
    return t, d, n, values


def write_record_csv(stream, record: RunRecord, refs: dict[str, float]) -> None:
    for key, value in refs.items():
        stream.write(f"# {key}={value!r}\n")
    stream.write(",".join(_RECORD_COLUMNS) + "\n")
    ints = ("step", "newton_iters")
    for i in range(len(record)):
        cells = [
            str(int(getattr(record, name)[i]))
            if name in ints
            else repr(float(getattr(record, name)[i]))
            for name in _RECORD_COLUMNS
        ]
        stream.write(",".join(cells) + "\n")


# ------------------------------------------------------------------- subcommands

def _cmd_steady(cfg: Config) -> int:
    grid, steady, _ = _build(cfg)
    print(f"# d={grid.d} n={grid.n}")
    print(f"# gamma_h={steady.gamma_h!r}")
    print(f"# lambda_h={steady.lambda_h!r}")
    for value in steady.values:
        print(repr(float(value)))
    return 0


def _flags(reports) -> str:
    names = []
    if any(r.empty for r in reports):
        names.append("empty")
    if any(r.nonconvex for r in reports):
        names.append("nonconvex")
    return ",".join(names)


def _cmd_spectrum(cfg: Config) -> int:
    _, steady, gen = _build(cfg)
    cdpp = [cdpp_modulus(f) for f in gen.factors]
    mielke = [mielke_modulus(f) for f in gen.factors]
    print(f"lambda_star_h={spectral_gap(gen)!r}")
    print(f"lambda_h={steady.lambda_h!r}")
    print(f"lambda_tilde_h={min(r.value for r in mielke)!r}")
    print(f"cdpp={min(r.value for r in cdpp)!r}")
    print(f"cdpp_flags={_flags(cdpp)}")
    print(f"mielke_flags={_flags(mielke)}")
    return 0


def _cmd_cdi_check(cfg: Config) -> int:
    grid, steady, gen = _build(cfg)
    rng = np.random.default_rng(cfg.seed)
    worst = math.inf
    worst_scaled = math.inf
    for _ in range(cfg.samples):
        U = rng.uniform(0.2, 2.0, grid.size)
        U /= grid.cell_volume * U.sum()
        J, bound = cdi_margin(U, steady, gen)
        margin = J - bound
        worst = min(worst, margin)
        worst_scaled = min(worst_scaled, margin / max(1.0, bound))
    ok = worst_scaled >= -1e-10
    print(f"samples={cfg.samples}")
    print(f"min_margin={worst!r}")
    print(f"min_margin_scaled={worst_scaled!r}")
    print(f"cdi_holds={int(ok)}")
    return 0 if ok else 1


def _run_refs(cfg: Config) -> dict[str, float]:
    return {
        "dim": cfg.dim,
        "n": cfg.n,
        "lambda": cfg.lam,
        "tau": cfg.tau,
        "steps": cfg.steps,
    }


def _execute_run(cfg, mode, grid, steady, gen, refs, extra_observer=None):
    """Evolve, write snapshots/CSV, and return (record, failure or None)."""
    U0 = initial_density(cfg, grid)
    steps = cfg.steps if cfg.steps is not None else 1000
    every = cfg.snapshot_every if cfg.snapshot_every is not None else 0
    stepper = StepperConfig(
        tau=cfg.tau,
        newton_tol=cfg.newton_tol if cfg.newton_tol is not None else 1e-11,
        damping=cfg.damping,
        jacobian=cfg.jacobian,
    )

    def observer(m, t, view):
        if cfg.output_prefix and every and m % every == 0:
            write_snapshot(f"{cfg.output_prefix}_step{m:06d}.txt", t, grid, view)
        if extra_observer is not None:
            extra_observer(m, t, view)

    failure = None
    try:
        record = evolve(U0, steady, gen, stepper, steps, observer=observer, mode=mode)
    except StepFailure as exc:
        record, failure = exc.record, exc
    if cfg.output_prefix:
        with open(f"{cfg.output_prefix}.csv", "w") as out:
            write_record_csv(out, record, refs)
    else:
        write_record_csv(sys.stdout, record, refs)
    if failure is not None:
        print(
            f"error: step {len(record)} failed: {failure} (residual={failure.residual!r})",
            file=sys.stderr,
        )
    return record, failure


def _check_mode(cfg: Config, mode: str) -> None:
    if cfg.mode is not None and cfg.mode != mode:
        raise ConfigError(f"config key 'mode': {cfg.mode!r} conflicts with this subcommand")


def _cmd_run(cfg: Config, mode: str) -> int:
    _check_mode(cfg, mode)
    if cfg.tau is None:
        raise ConfigError("config key 'tau' is required for run subcommands")
    grid, steady, gen = _build(cfg)
    _, failure = _execute_run(cfg, mode, grid, steady, gen, _run_refs(cfg))
    return 1 if failure is not None else 0


def _cmd_bls(cfg: Config) -> int:
    _check_mode(cfg, "qdd")
    if cfg.dim != 2:
        raise ConfigError("config key 'dim': the bls experiment is two-dimensional")
    if cfg.lam != 0.0:
        raise ConfigError("config key 'lambda': the bls experiment has a flat potential")
    if cfg.init is None:
        cfg.init = "bls"
    if cfg.tau is None:
        cfg.tau = 1e-7
    if cfg.steps is None:
        cfg.steps = 30
    if cfg.snapshot_every is None:
        cfg.snapshot_every = 5
    if cfg.newton_tol is None:
        cfg.newton_tol = 1e-12  # keeps 30-step mass drift well under 1e-9

    grid, steady, gen = _build(cfg)
    row = (cfg.n + 1) // 2  # 1-based lattice row nearest the x2 = 1/2 line
    sections: list[tuple[float, np.ndarray]] = []
    state = {"initial_min": None, "min_value": math.inf, "undershoot_time": None}

    def watch(m, t, view):
        low = float(view.min())
        if m == 0:
            state["initial_min"] = low
        else:
            state["min_value"] = min(state["min_value"], low)
            below = min(_PLATEAU, state["initial_min"])
            if low < below and state["undershoot_time"] is None:
                state["undershoot_time"] = t
        if cfg.snapshot_every and m % cfg.snapshot_every == 0:
            field = view.reshape((cfg.n, cfg.n), order="F")
            sections.append((t, field[:, row - 1].copy()))

    record, failure = _execute_run(cfg, "qdd", grid, steady, gen, _run_refs(cfg), watch)
    if cfg.output_prefix:
        with open(f"{cfg.output_prefix}_section.csv", "w") as out:
            out.write(f"# values along x1 at lattice row x2_index={row} of {cfg.n}\n")
            out.write("t," + ",".join(f"u{j}" for j in range(1, cfg.n + 1)) + "\n")
            for t, values in sections:
                out.write(",".join([repr(t)] + [repr(float(v)) for v in values]) + "\n")
        print(f"initial_min={state['initial_min']!r}")
        print(f"min_value={state['min_value']!r}")
        print(f"undershoot_time={state['undershoot_time']!r}")
        print(f"mass_drift={float(record.mass_drift.max())!r}")
    return 1 if failure is not None else 0


def _cmd_decay(cfg: Config) -> int:
    _check_mode(cfg, "qdd")
    if cfg.init is None:
        cfg.init = "regular"
    if cfg.init == "regular" and cfg.dim != 2:
        raise ConfigError("config key 'dim': the regular datum needs dim=2")
    if cfg.steps is None:
        cfg.steps = 1000
    if cfg.tau is None:
        lh = lambda_h(cfg.lam, 1.0 / cfg.n)
        cfg.tau = min(1e-5, 0.1 / (2.0 * lh) ** 2) if lh > 0.0 else 1e-5

    grid, steady, gen = _build(cfg)
    tilde = min(mielke_modulus(f).value for f in gen.factors)
    star = spectral_gap(gen)
    refs = _run_refs(cfg)
    refs["two_lambda_h_sq"] = (2.0 * steady.lambda_h) ** 2
    refs["two_lambda_tilde_h_sq"] = (2.0 * tilde) ** 2
    refs["two_lambda_star_h_sq"] = (2.0 * star) ** 2
    _, failure = _execute_run(cfg, "qdd", grid, steady, gen, refs)
    return 1 if failure is not None else 0


# -------------------------------------------------------------------- entry point

_SUBCOMMANDS = {
    "steady": (_cmd_steady, "print the steady state and its constants"),
    "spectrum": (_cmd_spectrum, "print spectral gap and convexity moduli"),
    "cdi-check": (_cmd_cdi_check, "sample densities, report worst dissipation margin"),
    "fp-run": (lambda cfg: _cmd_run(cfg, "fp"), "run the linear flow, emit CSV"),
    "qdd-run": (lambda cfg: _cmd_run(cfg, "qdd"), "run the fourth-order flow, emit CSV"),
    "bls": (_cmd_bls, "plateau-undershoot experiment (defaults: tau=1e-7, 30 steps)"),
    "decay": (_cmd_decay, "equilibration experiment (defaults: 1000 steps)"),
}

_OPTION_HELP = {
    "dim": "space dimension (default 2)",
    "n": "cells per direction (default 30)",
    "lambda": "convexity parameter of the quadratic potential (default 0)",
    "xbar": "potential minimum, comma-separated per direction (default 0.5,...)",
    "tau": "time step (required for fp-run/qdd-run; experiment defaults otherwise)",
    "steps": "number of implicit Euler steps (default 1000; bls: 30)",
    "init": "initial datum: bls | regular | uniform | file:<path>",
    "snapshot_every": "write a snapshot every K steps, 0 disables (bls default 5)",
    "output_prefix": "write <prefix>.csv and snapshots instead of stdout CSV",
    "mode": "flow selector qdd | fp (normally implied by the subcommand)",
    "damping": "Newton safeguard: halving | undamped (default halving)",
    "jacobian": "Newton Jacobian: analytic | finite_difference (default analytic)",
    "newton_tol": "Newton residual tolerance (default 1e-11; bls: 1e-12)",
    "samples": "cdi-check: number of random densities (default 1000)",
    "seed": "cdi-check: RNG seed (default 0)",
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file; flags override it")
    for key in _KEYS:
        field, _ = _KEYS[key]
        common.add_argument(
            f"--{key.replace('_', '-')}",
            dest=field,
            metavar="V",
            help=_OPTION_HELP[key],
        )
    parser = argparse.ArgumentParser(
        prog="qddlab",
        description="Structure-preserving lattice flows: steady states, spectra, and decay runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name, (_, help_text) in _SUBCOMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _collect_overrides(args: argparse.Namespace) -> dict[str, str]:
    return {
        key: getattr(args, field)
        for key, (field, _) in _KEYS.items()
        if getattr(args, field, None) is not None
    }


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        text = ""
        if args.config is not None:
            path = Path(args.config)
            if not path.is_file():
                raise ConfigError(f"config file {args.config!r} not found")
            text = path.read_text()
        require_init = args.command in ("fp-run", "qdd-run")
        cfg = parse_config(text, _collect_overrides(args), require_init=require_init)
        handler, _ = _SUBCOMMANDS[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StepFailure, RuntimeError, OverflowError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
