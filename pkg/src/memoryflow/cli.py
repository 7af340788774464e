"""Command-line entry point.

Every run resolves its parameters from built-in defaults, an optional INI
file (one section per subcommand) and explicit flags, in increasing order
of precedence. Outputs go to ``--outdir`` together with ``manifest.json``,
which records the resolved configuration and a sha256 of every artifact;
``memoryflow rerun manifest.json`` replays a run and verifies the sums.

Exit status: 0 on success, 2 for invalid configuration, 3 for numerical
failure.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import field_solver as fs
from . import freespace, scalar_msd, walker
from .kernel import KernelSpec, load_tabulated_csv, normalized_fractional, truncated_caputo
from .memory_op import ConfigurationError, build_weights, weights_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# -- value parsers ------------------------------------------------------------

def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _range(text) -> tuple:
    """``a:b:n`` -> (a, b, n)."""
    if isinstance(text, (list, tuple)):
        a, b, n = text
        return float(a), float(b), int(n)
    parts = str(text).split(":")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("range needs n >= 1")
    return a, b, n


def _count(text) -> int:
    v = float(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(v)


def _fmt(v) -> str:
    return f"{v:.17g}"


@dataclass
class Table:
    columns: list
    rows: list

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps({"columns": self.columns, "rows": [[float(v) for v in r] for r in self.rows]}) + "\n"
        lines = [",".join(self.columns)]
        lines += [",".join(_fmt(v) for v in r) for r in self.rows]
        return "\n".join(lines) + "\n"


# -- option tables ---------------------------------------------------------------

def _opt(flag, type_=float, default=None, help_="", choices=None):
    return flag, type_, default, help_, choices


KERNEL_OPTS = [
    _opt("--alpha", float, 0.5, "fractional order in (0, 1)"),
    _opt("--delta", float, 0.2, "memory horizon"),
    _opt("--kernel", str, "normalized", "normalized | caputo | file:PATH (CSV with header s,rho)"),
]

OPTIONS = {
    "msd": KERNEL_OPTS + [
        _opt("--tau", float, None, "time step (default delta/128)"),
        _opt("--T", float, 100.0, "final time"),
        _opt("--history", str, "zero", "zero | affine:k | step:h,a,b"),
        _opt("--rhs", float, 2.0, "constant right-hand side"),
        _opt("--window", int, 5, "smoothing window for the crossover slope"),
    ],
    "solve": KERNEL_OPTS + [
        _opt("--dim", int, 1, "spatial dimension", [1, 2]),
        _opt("--model", str, "nonlocal", "time operator", ["nonlocal", "local", "fractional"]),
        _opt("--N", int, 200, "intervals per axis"),
        _opt("--extent", str, "0:1", "domain a:b per axis"),
        _opt("--tau", float, None, "time step (default delta/100)"),
        _opt("--T", float, 0.25, "final time"),
        _opt("--record", _floats, [0.05, 0.15, 0.25], "snapshot times"),
        _opt("--history", str, "dirac:0.5", "dirac:x0 | dirac-ring | file:PATH"),
        _opt("--caputo-scale", float, 1.0, "constant multiplying the Caputo derivative"),
    ],
    "compare": KERNEL_OPTS + [
        _opt("--dim", int, 1, "spatial dimension", [1, 2]),
        _opt("--N", int, 200, "intervals per axis"),
        _opt("--extent", str, "0:1", "domain a:b per axis"),
        _opt("--tau", float, None, "time step (default delta/100)"),
        _opt("--T", float, 0.25, "final time"),
        _opt("--record", _floats, [0.05, 0.15, 0.25], "snapshot times"),
        _opt("--history", str, "dirac:0.5", "dirac:x0 | dirac-ring | file:PATH"),
        _opt("--caputo-scale", float, 1.0, "constant multiplying the Caputo derivative"),
    ],
    "fundamental": KERNEL_OPTS + [
        _opt("--x-grid", _range, (-2.0, 2.0, 81), "positions a:b:n"),
        _opt("--times", _floats, [0.1, 0.5, 1.0], "evaluation times"),
        _opt("--nodes", int, 64, "contour node count"),
    ],
    "peak": KERNEL_OPTS + [
        _opt("--t-range", _range, (1e-6, 1e3, 91), "log-spaced times a:b:n"),
        _opt("--times", _floats, None, "explicit times (override --t-range)"),
        _opt("--nodes", int, 64, "contour node count"),
    ],
    "walk": [
        _opt("--alpha", float, 0.75, "fractional order in (0, 1)"),
        _opt("--delta", float, 0.2, "memory horizon"),
        _opt("--tau", float, None, "time step (default delta/1000)"),
        _opt("--particles", _count, 100000, "number of walkers"),
        _opt("--seed", _count, 1, "64-bit seed"),
        _opt("--times", _floats, [0.1, 0.2, 0.3, 0.4], "histogram times"),
        _opt("--msd-times", _floats, None, "MSD times (default: histogram times)"),
        _opt("--calibrate", str, "auto", "auto | h=VALUE"),
        _opt("--workers", int, None, "thread count (default MEMORYFLOW_THREADS or CPU count)"),
    ],
    "weights": KERNEL_OPTS + [
        _opt("--tau", float, None, "time step (default delta/128)"),
    ],
}

FIGURES = ["fig1", "fig2a", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"]


def _dest(flag):
    return flag.lstrip("-").replace("-", "_")


def _defaults(command):
    if command == "reproduce":
        return {"figure": None, "scale": "desk"}
    return {_dest(f): d for f, _, d, _, _ in OPTIONS[command]}


def _converters(command):
    if command == "reproduce":
        return {"figure": str, "scale": str}
    return {_dest(f): t for f, t, _, _, _ in OPTIONS[command]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memoryflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file; section names match subcommands")
    parser.add_argument("--outdir", default=".", help="directory for outputs and manifest")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name)
        for flag, type_, default, help_, choices in opts:
            p.add_argument(flag, type=type_, default=argparse.SUPPRESS, choices=choices,
                           help=f"{help_} (default: {default})")
    rp = sub.add_parser("reproduce", help="canned parameter sets for the figure suite")
    rp.add_argument("figure", choices=FIGURES + ["fig2"])
    rp.add_argument("--scale", choices=["desk", "quick"], default=argparse.SUPPRESS,
                    help="desk: published-size runs; quick: reduced resolution (default: desk)")
    rr = sub.add_parser("rerun", help="replay a manifest and verify its checksums")
    rr.add_argument("manifest")
    return parser


def _load_config(path, command) -> dict:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigurationError(f"cannot read config file {path}")
    if not cp.has_section(command):
        return {}
    conv = _converters(command)
    out = {}
    for key, raw in cp.items(command):
        dest = key.replace("-", "_")
        if dest not in conv:
            raise ConfigurationError(f"{path}: unknown key '{key}' in section [{command}]")
        try:
            out[dest] = conv[dest](raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigurationError(f"{path}: bad value for '{key}': {exc}") from None
    return out


def resolve(args, command) -> dict:
    cfg = _defaults(command)
    cfg.update(_load_config(getattr(args, "config", None), command))
    for key in cfg:
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    return cfg


# -- shared builders ---------------------------------------------------------------

def _kernel(cfg) -> KernelSpec:
    kind = cfg.get("kernel", "normalized")
    if kind == "normalized":
        return normalized_fractional(cfg["alpha"], cfg["delta"])
    if kind == "caputo":
        return truncated_caputo(cfg["alpha"], cfg["delta"])
    if kind.startswith("file:"):
        return load_tabulated_csv(kind[5:], cfg["delta"])
    raise ConfigurationError(f"kernel: expected normalized, caputo or file:PATH, got {kind!r}")


def _check_positive(cfg, *keys):
    for k in keys:
        if cfg.get(k) is not None and not cfg[k] > 0:
            raise ConfigurationError(f"{k} must be positive, got {cfg[k]}")


def _grid(cfg) -> fs.Grid:
    try:
        a, b = (float(v) for v in cfg["extent"].split(":"))
    except ValueError:
        raise ConfigurationError(f"extent: expected a:b, got {cfg['extent']!r}") from None
    return fs.Grid.line(a, b, cfg["N"]) if cfg["dim"] == 1 else fs.Grid.square(a, b, cfg["N"])


def _read_field_csv(path, grid):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = data[:, -1]
    if values.size != grid.size:
        raise ConfigurationError(f"history file {path} has {values.size} values, grid needs {grid.size}")
    return values.reshape(grid.shape)


def _history(cfg, grid) -> fs.HistoryField:
    text = cfg["history"]
    if text.startswith("dirac:"):
        x0 = [float(v) for v in text[6:].split(",")]
        return fs.HistoryField.dirac(grid, x0 if grid.dim == 2 else x0[0])
    if text == "dirac-ring":
        return fs.HistoryField.dirac_ring(grid)
    if text.startswith("file:"):
        return fs.HistoryField.constant(_read_field_csv(text[5:], grid), label="file")
    raise ConfigurationError(f"history: expected dirac:x0, dirac-ring or file:PATH, got {text!r}")


def _snapshot_table(grid, u) -> Table:
    if grid.dim == 1:
        return Table(["x", "u"], list(zip(grid.axis(0), u)))
    X, Y = grid.mesh()
    return Table(["x", "y", "u"], list(zip(X.ravel(), Y.ravel(), u.ravel())))


def _model(name, spec, cfg) -> fs.Model:
    if name == "nonlocal":
        return fs.Model.nonlocal_in_time(spec)
    if name == "local":
        return fs.Model.local()
    return fs.Model.fractional(cfg["alpha"], cfg["caputo_scale"])


# -- commands ------------------------------------------------------------------------
# each returns (artifacts: dict name -> Table or str, summary: dict)

def cmd_msd(cfg):
    _check_positive(cfg, "tau", "T", "delta")
    spec = _kernel(cfg)
    tau = cfg["tau"] if cfg["tau"] is not None else spec.delta / 128
    w = build_weights(spec, tau)
    hist = scalar_msd.parse_history(cfg["history"], spec.delta)
    series = scalar_msd.solve_scalar(w, hist, cfg["rhs"], cfg["T"])
    slope = scalar_msd.local_slope(series)
    summary = {}
    if spec.is_fractional:
        tc = scalar_msd.crossover_time(series, spec.alpha, cfg["window"])
        summary["crossover_time"] = "none" if tc is None else _fmt(tc)
    rows = list(zip(series.times, series.values, slope.values))
    return {"msd": Table(["t", "m", "alpha_eff"], rows)}, summary


def cmd_solve(cfg):
    _check_positive(cfg, "tau", "T", "delta")
    spec = _kernel(cfg)
    tau = cfg["tau"] if cfg["tau"] is not None else spec.delta / 100
    grid = _grid(cfg)
    traj = fs.solve(_model(cfg["model"], spec, cfg), grid, _history(cfg, grid), tau, cfg["T"], cfg["record"])
    out = {f"u_{i:03d}": _snapshot_table(grid, u) for i, u in enumerate(traj.fields)}
    times = tau * np.arange(traj.peak.size)
    cols = ["t", "peak", "mass"] + (["msd"] if traj.second_moment is not None else [])
    series = [times, traj.peak, traj.mass] + ([traj.second_moment] if traj.second_moment is not None else [])
    out["diagnostics"] = Table(cols, list(zip(*series)))
    return out, {"snapshots": ",".join(_fmt(t) for t in traj.times)}


def _pool():
    return ThreadPoolExecutor(max_workers=walker.default_workers())


def cmd_compare(cfg):
    _check_positive(cfg, "tau", "T", "delta")
    spec = _kernel(cfg)
    tau = cfg["tau"] if cfg["tau"] is not None else spec.delta / 100
    grid = _grid(cfg)
    history = _history(cfg, grid)
    names = ["nonlocal", "local", "fractional"]
    with _pool() as pool:
        trajs = list(pool.map(lambda n: fs.solve(_model(n, spec, cfg), grid, history, tau, cfg["T"],
                                                 cfg["record"]), names))
    coords = [grid.axis(0)] if grid.dim == 1 else [c.ravel() for c in grid.mesh()]
    rows = []
    for i, t in enumerate(trajs[0].times):
        cols = [tr.fields[i].ravel() for tr in trajs]
        rows += [(t, *c) for c in zip(*coords, *cols)]
    space = ["x"] if grid.dim == 1 else ["x", "y"]
    times = tau * np.arange(trajs[0].peak.size)
    peaks = Table(["t"] + names, list(zip(times, *[tr.peak for tr in trajs])))
    return {"compare": Table(["t"] + space + names, rows), "peaks": peaks}, {}


def _contour(cfg):
    if cfg["nodes"] < 12:
        raise ConfigurationError("nodes must be at least 12")
    return freespace.InversionContour(n_nodes=cfg["nodes"])


def cmd_fundamental(cfg):
    spec = _kernel(cfg)
    a, b, n = cfg["x_grid"]
    x = np.linspace(a, b, n)
    contour = _contour(cfg)
    rows = []
    for t in cfg["times"]:
        if not t > 0:
            raise ConfigurationError(f"times must be positive, got {t}")
        rows += [(xi, t, ui) for xi, ui in zip(x, np.atleast_1d(freespace.invert(spec, x, t, contour)))]
    return {"fundamental": Table(["x", "t", "u"], rows)}, {}


def cmd_peak(cfg):
    spec = _kernel(cfg)
    if cfg["times"]:
        t = np.asarray(cfg["times"], dtype=float)
    else:
        a, b, n = cfg["t_range"]
        if not 0 < a < b:
            raise ConfigurationError("t-range needs 0 < a < b")
        t = np.geomspace(a, b, n)
    u0 = freespace.peak_value(spec, t, _contour(cfg))
    small = freespace.peak_small_time(spec, t) if spec.is_fractional else np.full(t.shape, np.nan)
    large = freespace.peak_large_time(spec, t)
    return {"peak": Table(["t", "u0", "asymptote_small", "asymptote_large"], list(zip(t, u0, small, large)))}, {}


def _walk_config(cfg):
    _check_positive(cfg, "tau", "delta")
    tau = cfg["tau"] if cfg["tau"] is not None else cfg["delta"] / 1000
    cal = cfg["calibrate"]
    if cal == "auto":
        h = None
    elif cal.startswith("h="):
        try:
            h = float(cal[2:])
        except ValueError:
            raise ConfigurationError(f"calibrate: bad spacing {cal!r}") from None
    else:
        raise ConfigurationError(f"calibrate: expected auto or h=VALUE, got {cal!r}")
    msd_times = cfg["msd_times"] if cfg["msd_times"] else cfg["times"]
    return walker.WalkerConfig(alpha=cfg["alpha"], delta=cfg["delta"], tau=tau, N=cfg["particles"],
                               seed=cfg["seed"], record_times=tuple(cfg["times"]),
                               msd_times=tuple(msd_times), h=h)


def cmd_walk(cfg):
    wc = _walk_config(cfg)
    res = walker.simulate(wc, workers=cfg["workers"])
    summary = {"h": _fmt(res.h), "outside_window": str(res.outside)}
    return {"density": walker.density_csv(res), "msd": walker.msd_csv(res)}, summary


def cmd_weights(cfg):
    spec = _kernel(cfg)
    tau = cfg["tau"] if cfg["tau"] is not None else spec.delta / 128
    w = build_weights(spec, tau)
    return {"weights": weights_csv(w)}, {"W0": _fmt(w.W0)}


# -- figure suite -------------------------------------------------------------------

def fig1(quick):
    cfg = {"alpha": 0.2, "delta": 0.1, "kernel": "normalized", "times": None,
           "t_range": (1e-6, 1e3, 46 if quick else 91), "nodes": 64}
    return cmd_peak(cfg)


def fig2a(quick):
    cfg = {"alpha": 0.2, "delta": 0.5, "kernel": "normalized", "tau": 0.5 / (64 if quick else 128),
           "T": 100.0, "history": "zero", "rhs": 2.0, "window": 5}
    return cmd_msd(cfg)


def fig3(quick):
    spec = normalized_fractional(0.2, 0.5)
    w = build_weights(spec, spec.delta / (64 if quick else 128))
    runs = {"g1": scalar_msd.HistorySignal.affine(5.0), "g2": scalar_msd.HistorySignal.affine(0.5),
            "step": scalar_msd.parse_history("step", spec.delta)}
    series = {k: scalar_msd.solve_scalar(w, h, 2.0, 3.0) for k, h in runs.items()}
    times = series["g1"].times
    rows = list(zip(times, *[s.values for s in series.values()]))
    return {"msd_histories": Table(["t", *runs], rows)}, {}


def _line_compare(delta, alpha, extent, N, tau, T, record, x0):
    cfg = {"alpha": alpha, "delta": delta, "kernel": "normalized", "dim": 1, "N": N, "extent": extent,
           "tau": tau, "T": T, "record": record, "history": f"dirac:{x0}", "caputo_scale": 1.0}
    return cmd_compare(cfg)


def fig4(quick):
    return _line_compare(0.2, 0.5, "-4:4", 400 if quick else 1600, 0.2 / (50 if quick else 200),
                         1.0, [0.1, 0.5, 1.0], 0.0)


def fig5(quick):
    N = 128 if quick else 256
    deltas = [0.5, 0.25, 0.125, 0.0625]
    # a multiple of 5 keeps t = 0.1 on the step grid
    tau = 0.0625 / (20 if quick else 80)
    grid = fs.Grid.line(0.0, 1.0, N)
    hist = fs.HistoryField.dirac(grid, 0.5)
    record = [0.1, 0.5]
    models = [fs.Model.local()] + [fs.Model.nonlocal_in_time(normalized_fractional(0.5, d)) for d in deltas]
    with _pool() as pool:
        trajs = list(pool.map(lambda m: fs.solve(m, grid, hist, tau, 0.5, record), models))
    names = ["local"] + [f"delta_{d:g}" for d in deltas]
    rows = []
    for i, t in enumerate(record):
        rows += [(t, *r) for r in zip(grid.axis(0), *[tr.fields[i] for tr in trajs])]
    ref = trajs[0]
    gaps = [(d, *[float(np.max(np.abs(tr.fields[i] - ref.fields[i]))) for i in range(len(record))])
            for d, tr in zip(deltas, trajs[1:])]
    return ({"local_limit": Table(["t", "x", *names], rows),
             "local_gap": Table(["delta"] + [f"gap_t{t:g}" for t in record], gaps)}, {})


def fig6(quick):
    return _line_compare(0.1, 0.5, "0:1", 200 if quick else 400, 0.1 / (50 if quick else 200),
                         0.25, [0.05, 0.15, 0.25], 0.5)


def fig7(quick):
    cfg = {"alpha": 0.5, "delta": 1.0, "kernel": "normalized", "dim": 2, "N": 32 if quick else 64,
           "extent": "0:1", "tau": 1.0 / (10 if quick else 20), "T": 1.1, "record": [0.1, 0.5, 1.1],
           "history": "dirac-ring", "caputo_scale": 1.0}
    return cmd_compare(cfg)


def fig8(quick):
    alpha, delta = 0.75, 0.2
    tau = delta / 1000
    times = [0.1, 0.2, 0.3, 0.4]
    wc = walker.WalkerConfig(alpha, delta, tau, 10 ** 5 if quick else 10 ** 6, seed=1,
                             record_times=tuple(times), msd_times=tuple(times))
    res = walker.simulate(wc)
    n = res.half
    sub = 4
    grid = fs.Grid.line(-n * res.h, n * res.h, 2 * n * sub)
    traj = fs.solve(fs.Model.nonlocal_in_time(normalized_fractional(alpha, delta)), grid,
                    fs.HistoryField.dirac(grid, 0.0), tau, times[-1], times)
    rows, dists = [], []
    for i, t in enumerate(times):
        ref = np.interp(res.sites, grid.axis(0), traj.fields[i], left=0.0, right=0.0)
        dens = res.density(i)
        rows += list(zip([t] * dens.size, res.sites, dens, ref))
        dists.append((t, float(np.sum(np.abs(dens - ref)) * res.h)))
    return ({"walk_vs_fd": Table(["t", "x", "density", "u_fd"], rows),
             "l1_distance": Table(["t", "l1"], dists)}, {"h": _fmt(res.h)})


FIGURE_RUNNERS = {"fig1": fig1, "fig2a": fig2a, "fig2": fig2a, "fig3": fig3, "fig4": fig4,
                  "fig5": fig5, "fig6": fig6, "fig7": fig7, "fig8": fig8}


def cmd_reproduce(cfg):
    return FIGURE_RUNNERS[cfg["figure"]](cfg["scale"] == "quick")


COMMANDS = {"msd": cmd_msd, "solve": cmd_solve, "compare": cmd_compare, "fundamental": cmd_fundamental,
            "peak": cmd_peak, "walk": cmd_walk, "weights": cmd_weights, "reproduce": cmd_reproduce}


# -- driver ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def execute(command, cfg, outdir: Path, fmt: str) -> dict:
    """Run a command, write its artifacts and manifest; returns the manifest."""
    artifacts, summary = COMMANDS[command](cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    sums = {}
    for name, art in artifacts.items():
        if isinstance(art, Table):
            text, ext = art.render(fmt), fmt
        else:
            text, ext = art, "csv"
        fname = f"{name}.{ext}"
        data = text.encode()
        (outdir / fname).write_bytes(data)
        sums[fname] = hashlib.sha256(data).hexdigest()
    manifest = {"tool": "memoryflow", "version": __version__, "command": command, "format": fmt,
                "config": {k: _jsonable(v) for k, v in cfg.items()}, "artifacts": sums,
                "summary": summary}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _rerun(path, outdir: Path | None) -> int:
    src = Path(path)
    try:
        manifest = json.loads(src.read_text())
        command, cfg, fmt = manifest["command"], manifest["config"], manifest["format"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigurationError(f"cannot use manifest {path}: {exc}") from None
    if command not in COMMANDS:
        raise ConfigurationError(f"manifest names unknown command {command!r}")
    conv = _converters(command)
    unknown = set(cfg) - set(conv)
    if unknown:
        raise ConfigurationError(f"manifest config has unknown keys: {', '.join(sorted(unknown))}")
    cfg = {**_defaults(command), **cfg}
    target = outdir if outdir is not None else src.parent / "rerun"
    fresh = execute(command, cfg, target, fmt)
    bad = [f for f, s in manifest["artifacts"].items() if fresh["artifacts"].get(f) != s]
    if bad:
        print(f"rerun: checksum mismatch for {', '.join(bad)}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"rerun: {len(fresh['artifacts'])} artifacts reproduced in {target}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", freespace.InversionAccuracyWarning)
            if args.command == "rerun":
                explicit = "--outdir" in (argv if argv is not None else sys.argv[1:])
                return _rerun(args.manifest, Path(args.outdir) if explicit else None)
            cfg = resolve(args, args.command)
            manifest = execute(args.command, cfg, Path(args.outdir), args.format)
    # LinAlgError derives from ValueError, so it must be caught first
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"memoryflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"memoryflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for key, value in manifest["summary"].items():
        print(f"{key}={value}")
    for fname in manifest["artifacts"]:
        print(f"wrote {Path(args.outdir) / fname}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
