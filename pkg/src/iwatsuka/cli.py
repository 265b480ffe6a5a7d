"""
Command-line front end.

    iwatsuka [--config FILE] [--out FILE] [--n-max N] [--k-grid SPEC] [--quiet] COMMAND ...

Commands: ``bands``, ``asym``, ``current``, ``fields``, ``selftest``.
Exit status: 0 success, 1 numerical failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .asymptotics import heuristic_gap, mu_n
from .errors import AccuracyError, IwatsukaError, ProfileError
from .field import (
    PROFILE_KEYS,
    FlatContact,
    InfiniteContact,
    PowerTail,
    _parse_lines,
    format_profile,
    parse_profile,
    t_of_k,
    thresholds,
)
from .selftest import run_selftest
from .sweep import (
    BAND_CSV_HEADER,
    N_MAX_SWEEP,
    check_monotone,
    default_k_grid,
    format_float,
    loglog_fit,
    sweep,
    worker_count,
)
from .transport import (
    EnergyWindow,
    current_bounds,
    current_scaling,
    scaling_csv,
    scaling_fit,
    validate_deltas,
)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
RUN_KEYS = ("n_max", "k_grid", "deltas", "out", "band", "q", "window", "x_grid", "model")
DEFAULT_Q = (0.0, 2.0, 4.0, 6.0)
DEFAULT_X_GRID = "linear:-10:10:201"


class ConfigError(IwatsukaError, ValueError):
    """Malformed run configuration or command-line value."""


@dataclass
class RunConfig:
    profile: object = None
    n_max: int = 2
    k_grid: str | None = None
    deltas: tuple | None = None
    out: str | None = None
    band: int = 1
    q: tuple = DEFAULT_Q
    window: tuple | None = None
    x_grid: str = DEFAULT_X_GRID
    model: str | None = None
    quiet: bool = False
    extra: dict = field(default_factory=dict)


# -- value parsers ----------------------------------------------------------

def _float_list(key, text):
    try:
        vals = tuple(float(s) for s in text.replace(" ", "").split(",") if s)
    except ValueError:
        raise ConfigError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{key}: empty list")
    return vals


def _int(key, text, lo, hi):
    try:
        value = int(str(text))
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if not lo <= value <= hi:
        raise ConfigError(f"{key}: must be in [{lo}, {hi}], got {value}")
    return value


def _window(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window: expected 'delta_1:delta_2', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"window: cannot parse {text!r}") from None


def parse_grid_spec(spec, profile=None, name="k-grid"):
    """Expand ``linear:start:stop:count`` or ``geometric_offset:start:stop:count``.

    Geometric offsets are measured from a_inf for flat-type profiles and
    from 0 otherwise.
    """
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] not in ("linear", "geometric_offset"):
        raise ConfigError(
            f"{name}: expected 'linear:start:stop:count' or "
            f"'geometric_offset:start:stop:count', got {spec!r}"
        )
    try:
        start, stop = float(parts[1]), float(parts[2])
        count = int(parts[3])
    except ValueError:
        raise ConfigError(f"{name}: cannot parse numbers in {spec!r}") from None
    if count < 1:
        raise ConfigError(f"{name}: count must be >= 1")
    if parts[0] == "linear":
        if count > 1 and not start < stop:
            raise ConfigError(f"{name}: need start < stop")
        return np.linspace(start, stop, count).tolist()
    if not 0 < start < stop:
        raise ConfigError(f"{name}: geometric offsets need 0 < start < stop")
    base = profile.a_inf if profile is not None and profile.is_flat else 0.0
    return (base + np.geomspace(start, stop, count)).tolist()


def load_config(path):
    """Split a config file into profile entries and run settings."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    entries = _parse_lines(text)
    prof_entries = {k: v for k, v in entries.items() if k == "kind" or k in PROFILE_KEYS}
    run = {k: v for k, v in entries.items() if k not in prof_entries}
    unknown = sorted(set(run) - set(RUN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    cfg = RunConfig()
    if prof_entries:
        cfg.profile = parse_profile(prof_entries, base_dir=path.parent)
    return _apply(cfg, run)


def _apply(cfg, settings):
    for key, value in settings.items():
        if value is None:
            continue
        if key == "n_max":
            cfg.n_max = _int("n_max", value, 1, N_MAX_SWEEP)
        elif key == "band":
            cfg.band = _int("band", value, 1, N_MAX_SWEEP)
        elif key == "k_grid":
            cfg.k_grid = str(value)
        elif key == "deltas":
            cfg.deltas = _float_list("deltas", value)
        elif key == "q":
            cfg.q = _float_list("q", value)
        elif key == "window":
            cfg.window = _window(value)
        elif key == "x_grid":
            cfg.x_grid = str(value)
        elif key == "out":
            cfg.out = str(value)
        elif key == "model":
            if value not in ("flat", "power"):
                raise ConfigError(f"model: expected 'flat' or 'power', got {value!r}")
            cfg.model = value
        elif key == "quiet":
            cfg.quiet = bool(value)
    return cfg


# -- output helpers ---------------------------------------------------------

class _Reporter:
    def __init__(self, cfg):
        self.quiet = cfg.quiet
        self.stream = sys.stdout if cfg.out else sys.stderr

    def __call__(self, *lines):
        if not self.quiet:
            for line in lines:
                print(line, file=self.stream)


def _emit(cfg, text):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _require_profile(cfg):
    if cfg.profile is None:
        raise ConfigError("no field profile: pass --config with a 'kind = ...' description")
    return cfg.profile


def _k_values(cfg, profile):
    if cfg.k_grid:
        return parse_grid_spec(cfg.k_grid, profile)
    return default_k_grid(profile)


def _decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


# -- commands ---------------------------------------------------------------

def cmd_bands(cfg):
    profile = _require_profile(cfg)
    say = _Reporter(cfg)
    table = sweep(profile, _k_values(cfg, profile), cfg.n_max)
    _emit(cfg, table.to_csv())
    say("thresholds: " + ", ".join(format_float(e) for e in thresholds(profile, cfg.n_max)))
    status = EXIT_OK
    for n in range(1, cfg.n_max + 1):
        band = table.band(n)
        if not band:
            continue
        warn = sum("acc_warn" in r.flags for r in band)
        unres = sum("unresolved" in r.flags for r in band)
        say(f"band {n}: E in [{min(r.E for r in band):.12g}, {max(r.E for r in band):.12g}], "
            f"{len(band)} rows, {unres} unresolved, {warn} acc_warn")
        if any(not math.isfinite(r.E) for r in band):
            status = EXIT_NUMERIC
    violations = check_monotone(table)
    if violations:
        say(f"monotonicity violations: {violations}")
        status = EXIT_NUMERIC
    return status


def _asym_rows(profile, table, qs):
    flat = profile.is_flat
    header = list(BAND_CSV_HEADER) + ["mu_n", "b_plus_mu_n", "heuristic_gap"]
    header += [f"scaled_gap_q{q:g}" for q in qs]
    out = []
    for r in table.rows:
        mu = None
        scaled = [None] * len(qs)
        if flat and r.k > profile.a_inf and math.isfinite(r.gap):
            mu = mu_n(profile, r.k, r.n)
            tk = float(t_of_k(profile, r.k))
            if r.k > 0:
                scaled = [r.gap * math.exp(tk * tk) * r.k**q for q in qs]
        bmu = None if mu is None else profile.b_plus * mu
        vals = r.csv_fields() + [format_float(mu), format_float(bmu),
                                 format_float(heuristic_gap(profile, r.k, r.n))]
        vals += [format_float(s) for s in scaled]
        out.append((r, scaled, vals))
    return header, out


def cmd_asym(cfg):
    profile = _require_profile(cfg)
    say = _Reporter(cfg)
    table = sweep(profile, _k_values(cfg, profile), cfg.n_max)
    header, rows = _asym_rows(profile, table, cfg.q)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for _, _, vals in rows:
        writer.writerow(vals)
    _emit(cfg, buf.getvalue())
    for n in range(1, cfg.n_max + 1):
        band = [(r, s) for r, s, _ in rows if r.n == n]
        resolved = [(r, s) for r, s in band if "unresolved" not in r.flags and math.isfinite(r.gap)]
        if isinstance(profile, FlatContact):
            ratios = [(r.k, r.ratio) for r, _ in resolved if r.ratio is not None]
            if ratios:
                say(f"band {n}: gap/predicted from {ratios[0][1]:.4f} (k={ratios[0][0]:.4g}) "
                    f"to {ratios[-1][1]:.4f} (k={ratios[-1][0]:.4g})")
        elif isinstance(profile, PowerTail):
            pts = [(r.k, r.gap) for r, _ in resolved if r.k > 0 and r.gap != 0]
            if len(pts) >= 2:
                fit = loglog_fit([k for k, _ in pts], [g for _, g in pts])
                say(f"band {n}: log-log slope of |gap| vs k = {fit.slope:.4f} "
                    f"(prediction {-profile.M:g})")
        elif isinstance(profile, InfiniteContact):
            for j, q in enumerate(cfg.q):
                seq = [abs(s[j]) for r, s in resolved if s[j] is not None]
                trend = "decreasing" if len(seq) >= 2 and _decreasing(seq) else "not decreasing"
                say(f"band {n}: exp(t_k^2)|gap|k^{q:g} over {len(seq)} resolved rows: {trend}")
    if check_monotone(table) or any(not math.isfinite(r.E) for r in table.rows):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_current(cfg):
    profile = _require_profile(cfg)
    say = _Reporter(cfg)
    model = cfg.model or ("flat" if profile.is_flat else "power")
    deltas = cfg.deltas
    if deltas is None:
        deltas = np.geomspace(1e-8, 1e-4, 9) if model == "flat" else np.geomspace(1e-5, 1e-2, 7)
    validate_deltas(deltas)
    rows = current_scaling(profile, cfg.band, deltas, model=model)
    fit = scaling_fit(rows, model)
    _emit(cfg, scaling_csv(rows))
    regressor = "delta*sqrt|log delta|" if model == "flat" else "delta"
    say(f"band {cfg.band}: fitted exponent of E_n'(k(delta)) vs {regressor} = {fit.exponent:.4f} "
        f"(residual {fit.residual:.2e})")
    if model == "power" and isinstance(profile, PowerTail):
        say(f"expected 1 + 1/M = {1 + 1 / profile.M:.4f}")
    if cfg.window is not None:
        win = EnergyWindow.build(profile, cfg.band, *cfg.window)
        cb = current_bounds(profile, win)
        say(f"window ({win.lower!r}, {win.upper!r}): k in [{cb.k_low:.10g}, {cb.k_high:.10g}], "
            f"{cb.inf_slope:.6e} <= E_n' <= {cb.sup_slope:.6e}")
    return EXIT_OK


def cmd_fields(cfg):
    profile = _require_profile(cfg)
    say = _Reporter(cfg)
    xs = parse_grid_spec(cfg.x_grid, None, name="x-grid")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "b", "a"])
    for x in xs:
        writer.writerow([format_float(x), format_float(profile.b(x)), format_float(profile.a(x))])
    _emit(cfg, buf.getvalue())
    say(format_profile(profile).rstrip())
    say("thresholds: " + ", ".join(format_float(e) for e in thresholds(profile, cfg.n_max)))
    if profile.is_flat:
        say(f"contact point {profile.contact_point!r}, a_inf {profile.a_inf!r}")
    return EXIT_OK


def cmd_selftest(cfg, inject_fault=False):
    say = _Reporter(replace(cfg, out="-"))
    results = run_selftest(inject_fault=inject_fault)
    for r in results:
        say(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail} ({r.seconds:.2f} s)")
    failed = [r.name for r in results if not r.passed]
    if failed:
        say(f"failed: {', '.join(failed)}")
        return EXIT_NUMERIC
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default,
                        help="profile/run description (key = value lines)")
    parser.add_argument("--out", metavar="PATH", default=default,
                        help="write CSV here instead of stdout")
    parser.add_argument("--n-max", metavar="INT", default=default,
                        help=f"number of bands (1..{N_MAX_SWEEP})")
    parser.add_argument("--k-grid", metavar="SPEC", default=default,
                        help="linear:start:stop:count or geometric_offset:start:stop:count")
    parser.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="suppress the human-readable summary")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iwatsuka",
        description="Band functions of Iwatsuka magnetic Hamiltonians.",
    )
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        return p

    command("bands", "sweep band functions over a k-grid and write the band table")
    p = command("asym", "band table joined with asymptotic predictions and diagnostics")
    p.add_argument("--q", metavar="LIST", default=argparse.SUPPRESS,
                   help="powers q for the exp(t_k^2) gap k^q diagnostic (default 0,2,4,6)")
    p = command("current", "k(delta), E_n'(k(delta)) and the fitted scaling exponent")
    p.add_argument("--deltas", metavar="LIST", default=argparse.SUPPRESS,
                   help="comma-separated energy offsets below the threshold")
    p.add_argument("--band", metavar="INT", default=argparse.SUPPRESS, help="band index n")
    p.add_argument("--window", metavar="D1:D2", default=argparse.SUPPRESS,
                   help="also report current bounds on (b+ Lambda_n - D2, b+ Lambda_n - D1)")
    p.add_argument("--model", choices=("flat", "power"), default=argparse.SUPPRESS,
                   help="scaling regressor (default from the profile kind)")
    p = command("fields", "tabulate x, b(x), a(x) and list the thresholds")
    p.add_argument("--x-grid", metavar="SPEC", default=argparse.SUPPRESS,
                   help=f"linear:start:stop:count (default {DEFAULT_X_GRID})")
    p = command("selftest", "run the oracle suite")
    p.add_argument("--inject-fault", action="store_true", default=argparse.SUPPRESS,
                   help="degrade the eigensolver tolerance (the suite must then fail)")
    return parser


def _config_from_args(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        "n_max": getattr(args, "n_max", None),
        "k_grid": getattr(args, "k_grid", None),
        "out": getattr(args, "out", None),
        "deltas": getattr(args, "deltas", None),
        "band": getattr(args, "band", None),
        "q": getattr(args, "q", None),
        "window": getattr(args, "window", None),
        "x_grid": getattr(args, "x_grid", None),
        "model": getattr(args, "model", None),
        "quiet": getattr(args, "quiet", None) or None,
    }
    return _apply(cfg, overrides)


COMMANDS = {
    "bands": cmd_bands,
    "asym": cmd_asym,
    "current": cmd_current,
    "fields": cmd_fields,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        worker_count()
        cfg = _config_from_args(args)
        if args.command == "selftest":
            return cmd_selftest(cfg, inject_fault=getattr(args, "inject_fault", False))
        return COMMANDS[args.command](cfg)
    except AccuracyError as exc:
        print(f"iwatsuka: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IwatsukaError, ValueError) as exc:
        print(f"iwatsuka: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"iwatsuka: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
