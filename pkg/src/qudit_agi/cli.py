"""Command-line front end: ``qudit-agi <command> [options]``.

Commands
--------
sweep          exact and perturbative infidelity over a coupling grid
plateau        plateau, curve shape and saturation point per gate
perturb        perturbative partial sums, relative errors and s_epsilon
haar-validate  spectral checks of the Haar sampler
fit            least-squares fit of two columns of a CSV file

Every output starts with a ``#`` header holding the tool version, the
full configuration and the seed. Work is spread over a thread pool, but
rows are always written in grid order, so the output bytes do not depend
on ``--threads``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 fit failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .asymptotics import (
    CurveShape,
    Model,
    default_grid,
    fit_model,
    log_grid,
    plateau_bounds,
    sweep_agi,
)
from .channel import agi_curve_values, evolve_diagnostics, propagate
from .errors import ConvergenceError, FitError, NumericRangeError, QuditAgiError
from .haar_stats import (
    Histogram,
    kl_divergence,
    level_density_chi2,
    sample_cue_spectrum,
    unfold_spacings,
    wigner_surmise,
)
from .perturbation import (
    convergence_cutoff,
    gate_independent_agi,
    series_traces,
)
from .qudit import GateKind, GateSpec, NoiseSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FIT = 4

THREADS_ENV = "QUDIT_AGI_THREADS"
_SMALL_DIM_INFO = 10


class ConfigError(ValueError):
    """Invalid command-line configuration (exit code 2)."""


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def parse_range(text: str, spacing: str = "log", default_points: int = 25) -> np.ndarray:
    """Parse ``VALUE`` or ``MIN:MAX[:N]`` into a grid.

    With log spacing ``N`` is points per decade; with linear spacing it is
    the total number of points. ``MIN == MAX`` is rejected.
    """
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts[:2]]
        n = int(parts[2]) if len(parts) == 3 else default_points
    except ValueError:
        raise ConfigError(f"cannot parse range '{text}'") from None
    if len(parts) > 3 or not all(math.isfinite(v) for v in nums):
        raise ConfigError(f"cannot parse range '{text}'")
    if len(parts) == 1:
        if nums[0] < 0:
            raise ConfigError("couplings must be >= 0")
        return np.array(nums)
    lo, hi = nums
    if not hi > lo:
        raise ConfigError(f"range '{text}' is empty: need MIN < MAX")
    if lo < 0:
        raise ConfigError("couplings must be >= 0")
    if spacing == "log":
        if lo <= 0:
            raise ConfigError("log spacing needs MIN > 0; use --spacing linear for ranges from 0")
        if n < 1:
            raise ConfigError("points per decade must be >= 1")
        return log_grid(lo, hi, n)
    if n < 2:
        raise ConfigError("a linear range needs at least 2 points")
    return np.linspace(lo, hi, n)


def _int_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse dimension list '{text}'") from None
    if not out or any(v < 2 for v in out):
        raise ConfigError("dimensions must be integers >= 2")
    return out


def _str_list(text: str) -> list[str]:
    out = [v.strip() for v in text.split(",") if v.strip()]
    if not out:
        raise ConfigError("empty list")
    return out


def _gates(names: list[str], d: int) -> list[GateSpec]:
    try:
        return [GateSpec.parse(n, d) for n in names]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _noise(name: str, d: int) -> NoiseSpec:
    try:
        return NoiseSpec(name, d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_threads(flag: int | None) -> int:
    """Thread count from the flag, else the environment, else 1."""
    if flag is not None:
        n = flag
    else:
        env = os.environ.get(THREADS_ENV)
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    if n < 1:
        raise ConfigError("threads must be >= 1")
    return n


def ordered_map(func, items, threads: int) -> list:
    """``[func(x) for x in items]``, optionally on a pool; order is preserved."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


@dataclass
class Table:
    """Column-ordered result table plus summary entries and free notes."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def render(table: Table, meta: dict, fmt: str) -> str:
    """Serialise a table with its header block as CSV or JSON text."""
    if fmt == "json":
        doc = {
            "meta": meta,
            "columns": {c: [_json_value(r[i]) for r in table.rows] for i, c in enumerate(table.columns)},
            "summary": _json_value(table.summary),
            "notes": table.notes,
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# tool: qudit-agi {meta['version']}\n")
    buf.write(f"# command: {meta['command']}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    buf.write(f"# seed: {meta['seed']}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    for k, v in table.summary.items():
        buf.write(f"# summary {k}: {_fmt(v) if not isinstance(v, (list, dict)) else json.dumps(_json_value(v))}\n")
    for note in table.notes:
        buf.write(f"# note: {note}\n")
    return buf.getvalue()


def read_table(path: str) -> dict[str, list[str]]:
    """Read a CSV written by this tool (``#`` lines skipped) into columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return {k: ["nan" if v is None else str(v) for v in col] for k, col in doc["columns"].items()}
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise ConfigError(f"{path} has no header row")
    cols: dict[str, list[str]] = {h: [] for h in header}
    for row in reader:
        for h, v in zip(header, row):
            cols[h].append(v)
    return cols


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> Table:
    dims = _int_list(args.dim)
    grid = parse_range(args.gamma_t, args.spacing or "log") if args.gamma_t else default_grid()
    if grid.size < 2:
        raise ConfigError("a sweep needs at least 2 coupling values")
    order = args.order if args.order is not None else 2
    if order < 2:
        raise ConfigError("--order must be >= 2 for sweep")
    cells = [(g, _noise(nz, d)) for d in dims for g in _gates(_str_list(args.gate), d)
             for nz in _str_list(args.noise)]

    def run(cell):
        gate, noise = cell
        d = gate.dim
        exact = agi_curve_values(gate, noise, grid)
        traces, _, _ = series_traces(gate, noise, order, cutoff=None)
        terms = -np.outer(grid, np.ones(order)) ** np.arange(1, order + 1) * traces / (d * (d + 1))
        partial = np.cumsum(terms, axis=1)
        diag = None
        if args.diagnostics:
            diag = [evolve_diagnostics(propagate(gate, noise, gt), args.n_states, (args.seed, i))
                    for i, gt in enumerate(grid)]
        return exact, partial, diag

    results = ordered_map(run, cells, args.threads)
    cols = ["dim", "gate", "eta", "noise", "gamma_t", "agi_exact"]
    cols += [f"agi_order{m}" for m in range(1, order + 1)]
    if args.diagnostics:
        cols += ["purity", "coherence"]
    table = Table(cols)
    for (gate, noise), (exact, partial, diag) in zip(cells, results):
        for i, gt in enumerate(grid):
            row = [gate.dim, gate.label, gate.eta, noise.label, gt, exact[i], *partial[i]]
            if diag is not None:
                row += list(diag[i])
            table.rows.append(row)
    table.notes.append("agi_orderM is the partial sum of the series through order M")
    return table


def cmd_plateau(args) -> Table:
    dims = _int_list(args.dim)
    grid = parse_range(args.gamma_t, args.spacing or "log") if args.gamma_t else default_grid()
    if grid.size < 3:
        raise ConfigError("a plateau study needs at least 3 coupling values")
    if args.n_gates is not None:
        if args.n_gates < 1:
            raise ConfigError("--n-gates must be >= 1")
        cells = [(GateSpec(GateKind.HAAR, d, seed=(args.seed, i)), _noise(args.noise, d))
                 for d in dims for i in range(args.n_gates)]
    else:
        cells = [(g, _noise(args.noise, d)) for d in dims for g in _gates(_str_list(args.gate), d)]
    epsilon = args.epsilon if args.epsilon is not None else 1e-8

    def run(cell):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return sweep_agi(cell[0], cell[1], grid, epsilon=epsilon)

    curves = ordered_map(run, cells, args.threads)
    table = Table(["dim", "gate", "noise", "plateau", "classification", "overshoot_height",
                   "saturation_point", "ambiguous"])
    rejected = []
    for (gate, noise), c in zip(cells, curves):
        if not c.converged:
            rejected.append(f"{gate.dim}:{gate.label}")
            continue
        table.rows.append([gate.dim, gate.label, noise.label, c.plateau, c.classification.value,
                           c.overshoot_height, c.saturation if c.saturation is not None else math.nan,
                           c.ambiguous])
    for d in dims:
        plats = np.array([r[3] for r in table.rows if r[0] == d])
        shapes = [r[4] for r in table.rows if r[0] == d]
        lo, mid, hi = plateau_bounds(d)
        s = {"n_accepted": len(plats)}
        if plats.size:
            s["mean"] = float(plats.mean())
            s["std"] = float(plats.std(ddof=1)) if plats.size > 1 else 0.0
            s["monotonic_fraction"] = shapes.count(CurveShape.MONOTONIC.value) / len(shapes)
        s.update({"bound_min": lo, "bound_mean": mid, "bound_max": hi})
        for k, v in s.items():
            table.summary[f"d{d}_{k}"] = v
    table.summary["n_rejected"] = len(rejected)
    table.summary["rejected"] = rejected
    return table


def _relative(gamma_t: float, exact: float, approx: float) -> float:
    if gamma_t == 0.0:
        # the exact value there is pure rounding; the limit of the ratio is zero
        return 0.0
    if exact == 0.0:
        return 0.0 if approx == 0.0 else math.inf
    return (exact - approx) / exact


def cmd_perturb(args) -> Table:
    epsilon = args.epsilon if args.epsilon is not None else 1e-8
    dims = _int_list(args.dim)
    if args.sweep_t:
        return _perturb_sweep_t(args, dims, epsilon)
    spacing = args.spacing or "linear"
    grid = parse_range(args.gamma_t, spacing, 11) if args.gamma_t else np.array([0.1])
    order = args.order if args.order is not None else 2
    if order < 1:
        raise ConfigError("--order must be >= 1")
    cells = [(g, _noise(args.noise, d)) for d in dims for g in _gates(_str_list(args.gate), d)]

    def run(cell):
        gate, noise = cell
        d = gate.dim
        exact = agi_curve_values(gate, noise, grid)
        traces, _, _ = series_traces(gate, noise, order, cutoff=None)
        try:
            s_eps = convergence_cutoff(gate, noise, epsilon=epsilon).s_epsilon
        except ConvergenceError:
            s_eps = None
        resummed = np.array([gate_independent_agi(noise, gt) for gt in grid])
        terms = -np.outer(grid, np.ones(order)) ** np.arange(1, order + 1) * traces / (d * (d + 1))
        return exact, np.cumsum(terms, axis=1), resummed, s_eps

    results = ordered_map(run, cells, args.threads)
    cols = ["dim", "gate", "noise", "gamma_t", "s_epsilon", "s_converged", "agi_exact"]
    cols += [f"partial_sum{m}" for m in range(1, order + 1)]
    cols += ["agi_gate_independent", "rel_err_resummed"]
    cols += [f"rel_err{m}" for m in range(1, order + 1)]
    table = Table(cols)
    for (gate, noise), (exact, partial, resummed, s_eps) in zip(cells, results):
        for i, gt in enumerate(grid):
            row = [gate.dim, gate.label, noise.label, gt, -1 if s_eps is None else s_eps,
                   s_eps is not None, exact[i], *partial[i], resummed[i], _relative(gt, exact[i], resummed[i])]
            row += [_relative(gt, exact[i], p) for p in partial[i]]
            table.rows.append(row)
    table.notes.append("rel_errM = (agi_exact - partial_sumM) / agi_exact; "
                       "rel_err_resummed uses the gate-independent closed form")
    return table


def _perturb_sweep_t(args, dims, epsilon) -> Table:
    ts = parse_range(args.sweep_t, "linear", 9)
    if ts.size < 2:
        raise ConfigError("--sweep-t needs a range")
    if np.any(ts <= 0):
        raise ConfigError("gate times must be > 0")
    cells = [(g, _noise(args.noise, d), t) for d in dims for g in _gates(_str_list(args.gate), d) for t in ts]

    def run(cell):
        gate, noise, t = cell
        try:
            return convergence_cutoff(gate, noise, t=t, epsilon=epsilon, rescale_control=False).s_epsilon
        except ConvergenceError:
            return None

    values = ordered_map(run, cells, args.threads)
    table = Table(["dim", "gate", "noise", "t", "s_epsilon", "s_converged"])
    for (gate, noise, t), s in zip(cells, values):
        table.rows.append([gate.dim, gate.label, noise.label, t, -1 if s is None else s, s is not None])
    for d in dims:
        for gate in _gates(_str_list(args.gate), d):
            pts = [(r[3], r[4]) for r in table.rows if r[0] == d and r[1] == gate.label and r[5]]
            key = f"d{d}_{gate.label}"
            if len(pts) >= 3:
                x, y = map(np.array, zip(*pts))
                try:
                    fit = fit_model(x, y.astype(float), Model.LINEAR)
                except FitError as exc:
                    table.notes.append(f"{key}: linear fit failed: {exc}")
                    continue
                if fit.model is Model.LINEAR:
                    table.summary[f"{key}_slope"] = float(fit.params[0])
                    table.summary[f"{key}_intercept"] = float(fit.params[1])
                else:
                    table.summary[f"{key}_slope"] = 0.0
                    table.summary[f"{key}_intercept"] = float(fit.params[0])
                table.summary[f"{key}_r_squared"] = fit.r_squared
    table.notes.append("control Hamiltonian held fixed while t varies")
    return table


def cmd_haar_validate(args) -> Table:
    d = _int_list(args.dim)
    if len(d) != 1:
        raise ConfigError("haar-validate takes a single dimension")
    d = d[0]
    if args.n_eigenvalues < 2 * d:
        raise ConfigError("--n-eigenvalues must be at least twice the dimension")
    n_mat = math.ceil(args.n_eigenvalues / d)
    sample = sample_cue_spectrum(d, n_mat, args.seed)
    bins = args.bins
    level = Histogram.from_values(sample.phases.ravel(), bins, (-np.pi, np.pi))
    spacing = Histogram.from_values(unfold_spacings(sample), bins, (0.0, args.max_spacing))
    uniform = lambda x: np.full_like(x, 1.0 / (2.0 * np.pi))  # noqa: E731
    chi2, p_value = level_density_chi2(sample, bins)
    kl_s = kl_divergence(spacing, wigner_surmise)
    kl_l = kl_divergence(level, uniform)

    table = Table(["histogram", "bin_lo", "bin_hi", "center", "count", "density", "reference"])
    for name, hist, ref in (("level_density", level, uniform(level.centers)),
                            ("spacing", spacing, wigner_surmise(spacing.centers))):
        for i in range(hist.counts.size):
            table.rows.append([name, hist.edges[i], hist.edges[i + 1], hist.centers[i],
                               int(hist.counts[i]), hist.normalized_density[i], ref[i]])
    table.summary.update({
        "n_matrices": n_mat,
        "n_eigenvalues": n_mat * d,
        "chi2": chi2,
        "chi2_p_value": p_value,
        "chi2_pass_1pct": p_value > 0.01,
        "kl_spacing_wigner": kl_s,
        "kl_level_uniform": kl_l,
        "kl_spacing_pass": kl_s < 0.01,
    })
    if d < _SMALL_DIM_INFO:
        table.notes.append(f"d={d} is small; the Wigner surmise is a large-d approximation, "
                           "so the spacing comparison is informational only")
    return table


def cmd_fit(args) -> Table:
    cols = read_table(args.input)
    for c in (args.x, args.y):
        if c not in cols:
            raise ConfigError(f"column '{c}' not found; have {sorted(cols)}")
    x = np.array([float(v) for v in cols[args.x]])
    y = np.array([float(v) for v in cols[args.y]])
    if args.where:
        key, _, val = args.where.partition("=")
        if key not in cols:
            raise ConfigError(f"column '{key}' not found")
        keep = np.array([v == val for v in cols[key]])
        x, y = x[keep], y[keep]
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    try:
        model = Model(args.model)
    except ValueError:
        raise ConfigError(f"unknown model '{args.model}'") from None
    try:
        res = fit_model(x, y, model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    table = Table(["x", "y", "fitted", "residual"])
    fitted = res.predict(x)
    for xi, yi, fi in zip(x, y, fitted):
        table.rows.append([xi, yi, fi, yi - fi])
    info = res.as_dict()
    table.summary.update({
        "model": info["model"],
        "params": info["params"],
        "r_squared": info["r_squared"],
        "residual_rms": info["residuals"]["rms"],
        "residual_max_abs": info["residuals"]["max_abs"],
        "n_points": info["residuals"]["n"],
    })
    if res.model is Model.CONSTANT and model is not Model.CONSTANT:
        table.notes.append("constant dataset; no fit performed")
    return table


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "sweep": cmd_sweep,
    "plateau": cmd_plateau,
    "perturb": cmd_perturb,
    "haar-validate": cmd_haar_validate,
    "fit": cmd_fit,
}

# Flags that change where or how fast results are produced, not what they are.
_NOT_IN_CONFIG = {"threads", "output", "func"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", default="-", help="output file ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("--epsilon", type=float, default=None)
    common.add_argument("--order", type=int, default=None)

    p = _Parser(prog="qudit-agi", description="Average gate infidelity of qudit gates under Lindblad noise.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def grid_opts(sp, default_noise="jz"):
        sp.add_argument("--dim", default="2", help="comma-separated dimensions")
        sp.add_argument("--noise", default=default_noise, help="jz, jx or jm")
        sp.add_argument("--gamma-t", default=None, help="VALUE or MIN:MAX[:N]")
        sp.add_argument("--spacing", choices=("log", "linear"), default=None)

    sp = sub.add_parser("sweep", parents=[common], help="infidelity over a coupling grid")
    grid_opts(sp)
    sp.add_argument("--gate", default="identity", help="comma-separated gates, e.g. x,qft,xpow:0.5")
    sp.add_argument("--diagnostics", action="store_true", help="add purity and coherence columns")
    sp.add_argument("--n-states", type=int, default=1000)

    sp = sub.add_parser("plateau", parents=[common], help="plateaus and saturation points")
    grid_opts(sp)
    sp.add_argument("--gate", default="identity")
    sp.add_argument("--n-gates", type=int, default=None, help="use this many Haar gates instead of --gate")

    sp = sub.add_parser("perturb", parents=[common], help="perturbative series and s_epsilon")
    grid_opts(sp)
    sp.add_argument("--gate", default="identity")
    sp.add_argument("--sweep-t", default=None, help="MIN:MAX[:N] gate times for s_epsilon(t)")

    sp = sub.add_parser("haar-validate", parents=[common], help="spectral checks of the Haar sampler")
    sp.add_argument("--dim", default="100")
    sp.add_argument("--n-eigenvalues", type=int, default=10000)
    sp.add_argument("--bins", type=int, default=50)
    sp.add_argument("--max-spacing", type=float, default=4.0)

    sp = sub.add_parser("fit", parents=[common], help="fit a model to two columns of a table")
    sp.add_argument("--input", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--model", default="powerlaw",
                    help="powerlaw, sigmoid, exponential, linear or constant")
    sp.add_argument("--where", default=None, help="COLUMN=VALUE row filter")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.threads = resolve_threads(args.threads)
        table = _COMMANDS[args.command](args)
        config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_IN_CONFIG}
        meta = {"tool": "qudit-agi", "version": __version__, "command": args.command,
                "config": config, "seed": args.seed}
        text = render(table, meta, args.format)
        if args.output == "-":
            sys.stdout.write(text)
        else:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except ConfigError as exc:
        print(f"qudit-agi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"qudit-agi: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (NumericRangeError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"qudit-agi: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, QuditAgiError) as exc:
        print(f"qudit-agi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"qudit-agi: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
