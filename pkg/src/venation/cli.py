"""Command-line front end: catalog listing, experiment drivers, file emitters.

Subcommands: list, run, accuracy, compare.  Exit codes: 0 success, 2 config
error, 3 numerical failure, 4 I/O failure.  CSV output uses full round-trip
decimal formatting so repeated runs are byte-identical; field files are
row-major (one line per j) behind a `# n=.. h=.. t=..` comment; heatmaps are
binary PGM with the data extrema recorded in the comment line.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import experiments
from .adi import run_simulation
from .dynamics import flux
from .errors import NumericsError
from .experiments import (
    CHECKPOINT_TIMES,
    TestCase,
    default_source,
    ic_recipe,
    initial_condition,
    lookup,
    magnitude_field,
    params_for,
    richardson_study,
    test_catalog,
)
from .grid import ScalarField, SymTensorField2, make_grid, tensor_field

BC_FLAGS = {"zero": "dirichlet_zero", "steady": "steady_state_flux"}
GRAD_FLAGS = {"mirror": "mirror", "one-sided": "one_sided"}
EMIT_CHOICES = ("fields", "heatmaps", "energy", "flux")


def _fmt(x) -> str:
    return repr(float(x))


def _tstr(t: float) -> str:
    return f"{t:g}"


def _eps_str(eps: float) -> str:
    return "-" if eps == 0.0 else f"{eps:g}"


# ---------------------------------------------------------------------------
# file emitters


def write_field_csv(field: ScalarField, path: Path, t: float) -> None:
    g = field.grid
    lines = [f"# n={g.n} h={_fmt(g.h)} t={_fmt(t)}"]
    v = field.values
    for j in range(g.n):
        lines.append(",".join(_fmt(v[i, j]) for i in range(g.n)))
    path.write_text("\n".join(lines) + "\n")


def write_heatmap(field: ScalarField, path: Path) -> None:
    """8-bit binary PGM; image rows run top-down so y increases upward.

    Linear min-max normalization; a constant field maps to mid-gray 128 and
    the extrema are recorded in the PGM comment line.
    """
    v = field.values
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        pix = np.rint(255.0 * (v - lo) / (hi - lo)).clip(0, 255).astype(np.uint8)
    else:
        pix = np.full(v.shape, 128, dtype=np.uint8)
    img = np.flip(pix.T, axis=0)  # row r holds y index n-1-r, columns follow x
    n = field.grid.n
    header = f"P5\n# min={_fmt(lo)} max={_fmt(hi)}\n{n} {n}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(img.tobytes())


def write_series_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(cells) for cells in rows)
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    test: str
    system: str  # "m", "C", or "both"
    n: int
    dt: float | None
    t_fin: float | None
    out: Path
    snap_every: float | None
    emit: tuple[str, ...]
    bc_mode: str
    grad_mode: str
    tol: float
    force: bool


def parse_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` lines; # starts a comment; keys use - or _ freely."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key = value): {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


_CONFIG_KEYS = ("test", "system", "n", "dt", "t_fin", "out", "snap_every", "emit", "bc", "grad", "tol")


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill flags the command line left unset from the config file."""
    if not getattr(args, "config", None):
        return args
    file_values = parse_config_file(args.config)
    unknown = set(file_values) - set(_CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    casts = {"n": int, "dt": float, "t_fin": float, "snap_every": float, "tol": float}
    for key, raw in file_values.items():
        if getattr(args, key, None) is None:
            cast = casts.get(key, str)
            setattr(args, key, cast(raw))
    return args


def _resolve_run_config(args: argparse.Namespace) -> tuple[TestCase, RunConfig]:
    if args.test is None:
        raise ValueError("no test selected: pass --test or set test = ... in a config file")
    test = lookup(args.test)
    system = {"m": "m", "c": "C", "both": "both"}[args.system] if args.system else test.system
    n = args.n if args.n is not None else test.n
    if args.emit is None:
        emit = ("energy",)
    else:
        emit = tuple(s.strip() for s in args.emit.split(",") if s.strip())
        bad = set(emit) - set(EMIT_CHOICES)
        if bad:
            raise ValueError(f"unknown emit flags: {', '.join(sorted(bad))}")
    cfg = RunConfig(
        test=test.name,
        system=system,
        n=int(n),
        dt=args.dt,
        t_fin=args.t_fin,
        out=Path(args.out) if args.out else Path(f"out_{test.name}"),
        snap_every=args.snap_every,
        emit=emit,
        bc_mode=BC_FLAGS[args.bc] if args.bc else "dirichlet_zero",
        grad_mode=GRAD_FLAGS[args.grad] if args.grad else "mirror",
        tol=args.tol if args.tol is not None else 1e-10,
        force=bool(args.force),
    )
    return test, cfg


def _prepare_out_dir(out: Path, force: bool) -> None:
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"output directory {out} already contains files (use --force)")
    out.mkdir(parents=True, exist_ok=True)


def _echo_config(cfg: RunConfig, path: Path) -> None:
    pairs = [
        ("test", cfg.test),
        ("system", cfg.system),
        ("n", cfg.n),
        ("dt", "" if cfg.dt is None else _fmt(cfg.dt)),
        ("t_fin", "" if cfg.t_fin is None else _fmt(cfg.t_fin)),
        ("out", cfg.out),
        ("snap_every", "" if cfg.snap_every is None else _fmt(cfg.snap_every)),
        ("emit", ",".join(cfg.emit)),
        ("bc_mode", cfg.bc_mode),
        ("grad_mode", cfg.grad_mode),
        ("tol", _fmt(cfg.tol)),
        ("force", cfg.force),
    ]
    path.write_text("".join(f"{k} = {v}\n" for k, v in pairs))


# ---------------------------------------------------------------------------
# subcommands


def cmd_list() -> int:
    for t in test_catalog():
        p = t.params
        row = (
            f"{t.name} α={p.alpha:g} c={p.c:g} D={p.D:g} ε={_eps_str(p.epsilon)} "
            f"γ={p.gamma:g} r={p.r:g} t_fin={p.t_fin:g} n={t.n} system={t.system} ic={t.ic}"
        )
        print(row)
        if t.params_c is not None:
            q = t.params_c
            print(f"    matched tensor side: α={q.alpha:g} c={q.c:g} γ={q.gamma:g}")
    return 0


def _system_dirs(cfg: RunConfig) -> list[tuple[str, Path]]:
    if cfg.system == "both":
        return [("m", cfg.out / "m"), ("C", cfg.out / "c")]
    return [(cfg.system, cfg.out)]


def _emit_snapshot(state, out: Path, emit: tuple[str, ...], grad_mode: str) -> None:
    t = state.t
    if hasattr(state, "m"):
        named = [("m1", state.m.c1), ("m2", state.m.c2), ("m_mag", magnitude_field(state))]
        m1, m2 = state.m.c1.values, state.m.c2.values
        g = state.m.grid
        cond = tensor_field(g, m1 * m1, m1 * m2, m2 * m2)
    else:
        named = [
            ("c11", state.C.c11),
            ("c12", state.C.c12),
            ("c22", state.C.c22),
            ("c_mag", magnitude_field(state)),
        ]
        cond = state.C
    named.append(("p", state.p))
    if "fields" in emit:
        for name, fld in named:
            write_field_csv(fld, out / f"field_{name}_t{_tstr(t)}.csv", t)
    if "heatmaps" in emit:
        for name, fld in named:
            write_heatmap(fld, out / f"heatmap_{name}_t{_tstr(t)}.pgm")
    if "flux" in emit:
        write_field_csv(flux(cond, state.p, grad_mode).magnitude, out / f"flux_mag_t{_tstr(t)}.csv", t)


def cmd_run(args: argparse.Namespace) -> int:
    test, cfg = _resolve_run_config(args)
    _prepare_out_dir(cfg.out, cfg.force)
    _echo_config(cfg, cfg.out / "config.txt")

    want_snaps = any(k in cfg.emit for k in ("fields", "heatmaps", "flux"))
    for system, out in _system_dirs(cfg):
        out.mkdir(parents=True, exist_ok=True)
        overrides = {"bc_mode": cfg.bc_mode, "grad_mode": cfg.grad_mode, "poisson_tol": cfg.tol}
        if cfg.t_fin is not None:
            overrides["t_fin"] = cfg.t_fin
        params = params_for(test, system, cfg.n, cfg.dt, **overrides)
        if params.D == 0.0:
            print(f"note: {system}-run in degenerate diffusion mode (D = 0, no line solves)")
        grid = make_grid(cfg.n)
        ic = initial_condition(ic_recipe(test, system), grid, params.bc_mode)
        source = default_source(grid)

        snaps: list = []
        observers = []
        if want_snaps and cfg.snap_every is not None:
            observers.append((cfg.snap_every, lambda s, acc=snaps: acc.append(s)))
        record = run_simulation(system, params, ic, source, observers=observers)
        if want_snaps:
            if not snaps or snaps[-1].t < record.state.t - 1e-9 * params.dt:
                snaps.append(record.state)
            seen = set()
            for s in snaps:
                key = _tstr(s.t)
                if key not in seen:
                    seen.add(key)
                    _emit_snapshot(s, out, cfg.emit, params.grad_mode)
        if "energy" in cfg.emit:
            rows = [(_fmt(t), _fmt(e)) for t, e in zip(record.times, record.energies)]
            write_series_csv(out / "energy.csv", "time,energy", rows)
        print(f"{test.name} {system}-run finished at t={_tstr(record.state.t)} ({len(record.times) - 1} steps)")
    return 0


def cmd_accuracy(args: argparse.Namespace) -> int:
    test, cfg = _resolve_run_config(args)
    if args.n_list:
        n_list = [int(s) for s in args.n_list.split(",") if s.strip()]
    else:
        raise ValueError("accuracy needs --n-list n1,n2,... with doubling resolutions")
    system = cfg.system
    if system == "both":
        raise ValueError("accuracy runs one system; pass --system m or --system c")
    _prepare_out_dir(cfg.out, cfg.force)
    _echo_config(cfg, cfg.out / "config.txt")

    rows = richardson_study(test, n_list, system=system)
    csv_rows = [(str(n_list[0]), "", "")]
    for row in rows:
        csv_rows.append((str(row.n), _fmt(row.error), "" if row.order is None else _fmt(row.order)))
    write_series_csv(cfg.out / "accuracy.csv", "n,error,order", csv_rows)
    for cells in csv_rows:
        print(" ".join(c for c in cells if c))
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    if args.test is None:
        args.test = "TestM"
    test, cfg = _resolve_run_config(args)
    _prepare_out_dir(cfg.out, cfg.force)
    _echo_config(cfg, cfg.out / "config.txt")

    if args.diff_ics:
        try:
            recipe_a, recipe_b = (s.strip() for s in args.diff_ics.split(","))
        except ValueError:
            raise ValueError("--diff-ics wants exactly two recipe names, e.g. m01,m02") from None
        overrides = {"bc_mode": cfg.bc_mode, "grad_mode": cfg.grad_mode, "poisson_tol": cfg.tol}
        if cfg.t_fin is not None:
            overrides["t_fin"] = cfg.t_fin
        params = params_for(test, "m", cfg.n, cfg.dt, **overrides)
        times, diffs = experiments.difference_run(params, recipe_a, recipe_b, cfg.n)
        rows = [(_fmt(t), _fmt(d)) for t, d in zip(times, diffs)]
        write_series_csv(cfg.out / "diff.csv", "time,diff", rows)
        print(f"diff({recipe_a},{recipe_b}) at t={_tstr(times[-1])}: {diffs[-1]:.6g}")
        return 0

    record = experiments.paired_run(test, n=cfg.n, dt=cfg.dt)
    rows = [(_fmt(0.0), _fmt(record.discrepancy[0]))]
    rows += [(_fmt(t), _fmt(v)) for t, v in record.at_checkpoints(CHECKPOINT_TIMES)]
    write_series_csv(cfg.out / "discrepancy.csv", "time,discrepancy", rows)
    for t, v in record.at_checkpoints(CHECKPOINT_TIMES):
        print(f"t={_tstr(t)}  ||B||={v:.6g}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--test", help="catalog test name (see `venation list`)")
    p.add_argument("--n", type=int, help="cells per side (default: catalog value)")
    p.add_argument("--dt", type=float, help="time step (default: h = 1/n)")
    p.add_argument("--t-fin", dest="t_fin", type=float, help="final time (default: catalog value)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--tol", type=float, help="pressure solve relative tolerance (default 1e-10)")
    p.add_argument("--bc", choices=sorted(BC_FLAGS), help="conductivity boundary condition (default zero)")
    p.add_argument("--grad", choices=sorted(GRAD_FLAGS), help="gradient boundary closure (default mirror)")
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--force", action="store_true", default=None, help="write into a non-empty output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="venation",
        description="Transport-network formation simulator (vector and tensor conductivity models)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="print the test catalog")

    p_run = sub.add_parser("run", help="run one catalog test")
    _add_shared(p_run)
    p_run.add_argument("--system", choices=("m", "c", "both"), help="which system(s) to run")
    p_run.add_argument("--snap-every", dest="snap_every", type=float, help="snapshot cadence in time units")
    p_run.add_argument("--emit", help="comma list of outputs: fields,heatmaps,energy,flux (default energy)")

    p_acc = sub.add_parser("accuracy", help="successive-refinement accuracy study")
    _add_shared(p_acc)
    p_acc.add_argument("--system", choices=("m", "c"), help="system to study (default: catalog)")
    p_acc.add_argument("--n-list", dest="n_list", help="comma list of doubling resolutions, e.g. 20,40,80,160")

    p_cmp = sub.add_parser("compare", help="matched vector/tensor comparison or two-IC difference run")
    _add_shared(p_cmp)
    p_cmp.add_argument("--diff-ics", dest="diff_ics", help="two IC recipes for a difference run, e.g. m01,m02")

    return parser


def _normalize(args: argparse.Namespace) -> argparse.Namespace:
    for attr in ("system", "snap_every", "emit", "n_list", "diff_ics"):
        if not hasattr(args, attr):
            setattr(args, attr, None)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _normalize(parser.parse_args(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "list":
            return cmd_list()
        args = _merge_config(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "accuracy":
            return cmd_accuracy(args)
        return cmd_compare(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
