"""Command line runner: ``height-census <command> --config <file> [--out <dir>] [--seed <u64>]``.

Each command reads a TOML config, runs the corresponding census and writes
``report.json``, ``rows.csv``, ``plot.csv`` and (when possible) ``plot.png``
into the output directory.

Exit status: 0 on success, 1 on input errors, 2 when a fit verdict fails,
3 when an enumeration could not be certified stable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import tomli

from . import __version__
from .census import CensusConfig, CensusRow, asymptotic_report, census_nondegenerate, count_height_ball
from .errors import HeightCensusError, InputError, TailUnstable
from .heights import format_rational, parse_rational
from .logspace import DEFAULT_SEED, MC_SAMPLES, c_USk_closed, volume_c_gamma
from .multgroup import (
    GroupDescriptor,
    analyze_group,
    check_place_separation,
    check_ratio_condition,
    in_group,
    s_unit_generators,
)
from .plotting import plot_points, render_census_figure
from .recurrence import RecurrenceSpec, count_bounded_terms, validate_recurrence
from .represent import CoefficientFamily, count_representable, predicted_constant, validate_family

log = logging.getLogger("height_census")

COMMANDS = ("volume", "census", "hball", "recurrence", "represent", "selftest")
CSV_COLUMNS = ("X", "count", "degenerate", "complete", "ratio")

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_INCOMPLETE = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    raw: dict[str, Any]
    ladder: list[Fraction] = field(default_factory=list)
    output_dir: Path = Path("out")
    tolerance: float = 0.15
    seed: int = DEFAULT_SEED
    census: CensusConfig = field(default_factory=CensusConfig)
    plot_dir: Path | None = None


# --------------------------------------------------------------------------- config parsing


def _rational(value: Any, key: str) -> Fraction:
    try:
        return parse_rational(value if not isinstance(value, int) else str(value))
    except InputError as exc:
        raise InputError(f"key '{key}': {exc}") from None


def _tuple(value: Any, key: str) -> tuple[Fraction, ...]:
    if not isinstance(value, list) or not value:
        raise InputError(f"key '{key}': expected a non-empty list of rational strings")
    return tuple(_rational(v, f"{key}[{i}]") for i, v in enumerate(value))


def _tuples(value: Any, key: str) -> list[tuple[Fraction, ...]]:
    if not isinstance(value, list) or not value:
        raise InputError(f"key '{key}': expected a non-empty list of tuples")
    return [_tuple(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _require(raw: dict, key: str) -> Any:
    if key not in raw:
        raise InputError(f"missing required key '{key}'")
    return raw[key]


def parse_ladder(raw: dict) -> list[Fraction]:
    value = raw.get("ladder")
    if value is None:
        return []
    if isinstance(value, list):
        xs = [_rational(v, f"ladder[{i}]") for i, v in enumerate(value)]
    elif isinstance(value, dict):
        base = _rational(_require(value, "base"), "ladder.base")
        rungs = value.get("rungs")
        if not isinstance(rungs, int) or rungs < 1:
            raise InputError("key 'ladder.rungs': expected a positive integer")
        start = value.get("start", 1)
        step = value.get("step", 1)
        if not isinstance(start, int) or not isinstance(step, int) or step < 1:
            raise InputError("keys 'ladder.start'/'ladder.step' must be integers, step >= 1")
        xs = [base ** (start + i * step) for i in range(rungs)]
    else:
        raise InputError("key 'ladder': expected a list of rationals or a table {base, rungs, start, step}")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InputError("key 'ladder': values must be strictly increasing")
    if any(x < 1 for x in xs):
        raise InputError("key 'ladder': values must be at least 1")
    return xs


def load_config(command: str, path: Path | None, out: Path | None, seed: int | None) -> RunConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise InputError(f"{path}: {exc}") from None
    cfg = RunConfig(command=command, raw=raw)
    cfg.ladder = parse_ladder(raw)
    cfg.output_dir = Path(out) if out is not None else Path(raw.get("output_dir", "out"))
    tol = raw.get("tolerance", 0.15)
    if not isinstance(tol, (int, float)) or tol <= 0:
        raise InputError("key 'tolerance': expected a positive number")
    cfg.tolerance = float(tol)
    s = seed if seed is not None else raw.get("seed", DEFAULT_SEED)
    if not isinstance(s, int) or not 0 <= s < 2**64:
        raise InputError("key 'seed': expected an unsigned 64-bit integer")
    cfg.seed = s
    section = raw.get("census", {})
    if not isinstance(section, dict):
        raise InputError("key 'census': expected a table")
    unknown = set(section) - {"slack_delta", "box_margin", "stability_rounds", "parallel_chunks"}
    if unknown:
        raise InputError(f"key 'census': unknown entries {sorted(unknown)}")
    try:
        cfg.census = CensusConfig(**section)
    except TypeError as exc:
        raise InputError(f"key 'census': {exc}") from None
    if "plot_dir" in raw:
        cfg.plot_dir = Path(raw["plot_dir"])
    return cfg


def parse_group(raw: dict) -> GroupDescriptor:
    k = _require(raw, "k")
    if not isinstance(k, int) or k < 1:
        raise InputError("key 'k': expected a positive integer")
    gens = _tuples(_require(raw, "generators"), "generators")
    for i, g in enumerate(gens):
        if len(g) != k:
            raise InputError(f"key 'generators[{i}]': expected {k} entries, got {len(g)}")
        if any(e == 0 for e in g):
            raise InputError(f"key 'generators[{i}]': entries must be non-zero")
    return analyze_group(k, gens)


# --------------------------------------------------------------------------- report helpers


def num(value: Any, provenance: str, error: float | None = None) -> dict[str, Any]:
    """A numeric report entry tagged with where it came from."""
    if isinstance(value, Fraction):
        value = format_rational(value)
    out: dict[str, Any] = {"value": value, "provenance": provenance}
    if error is not None:
        out["error"] = error
    return out


def volume_entry(v) -> dict[str, Any]:
    if v.method == "ClosedForm":
        d = num(v.value, "closed_form", v.abs_error_estimate)
        if v.exact_coefficient is not None:
            d["exact"] = {
                "coefficient": format_rational(v.exact_coefficient),
                "log_powers": {str(p): str(e) for p, e in v.log_powers},
            }
        return d
    if v.method == "MonteCarlo":
        return num(v.value, "heuristic", v.abs_error_estimate)
    d = num(v.value, "triangulation±err", v.abs_error_estimate)
    d["cells"] = v.cells_used
    if v.cross_check is not None:
        d["monte_carlo"] = num(v.cross_check.value, "heuristic", v.cross_check.abs_error_estimate)
    return d


def group_entry(desc: GroupDescriptor) -> dict[str, Any]:
    return {
        "k": desc.k,
        "generators": [[format_rational(e) for e in g] for g in desc.generators],
        "basis": [[format_rational(e) for e in u] for u in desc.basis],
        "torsion": [[format_rational(e) for e in t] for t in desc.torsion],
        "support": [str(v) for v in desc.support],
        "rank": num(desc.rank, "exact"),
        "torsion_order": num(desc.torsion_order, "exact"),
    }


def fit_entry(fit) -> dict[str, Any]:
    return {
        "ratios": [num(q, "heuristic") for q in fit.ratios],
        "slope": num(fit.slope, "heuristic"),
        "final_ratio": num(fit.final_ratio, "heuristic"),
        "monotone": fit.monotone,
        "tolerance": fit.tolerance,
        "verdict": fit.verdict,
        "notes": fit.notes,
    }


def rows_csv(rows: list[CensusRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        ratio = "" if row.ratio is None else repr(row.ratio)
        w.writerow([format_rational(row.X), row.count, row.degenerate_count, str(row.complete).lower(), ratio])
    return buf.getvalue()


def plot_csv(rows: list[CensusRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x", "y"))
    for x, y in plot_points([float(r.X) for r in rows], [r.count for r in rows]):
        w.writerow((repr(x), repr(y)))
    return buf.getvalue()


def _with_ratios(rows: list[CensusRow], c: float, r: int) -> list[CensusRow]:
    out = []
    for row in rows:
        lx = math.log(row.X)
        ratio = row.count / (c * lx**r) if lx > 0 else None
        out.append(CensusRow(row.X, row.count, row.degenerate_count, row.complete, ratio))
    return out


# --------------------------------------------------------------------------- commands


def _is_s_unit_power(desc: GroupDescriptor) -> bool:
    primes = [v.p for v in desc.support if not v.is_archimedean]
    if not primes:
        return False
    return all(in_group(desc, g) for g in s_unit_generators(primes, desc.k))


def cmd_volume(cfg: RunConfig) -> tuple[dict, list[CensusRow], int]:
    desc = parse_group(cfg.raw)
    if desc.rank < 1:
        raise InputError("key 'generators': the group has rank 0, c(Gamma) is undefined")
    mu, c = volume_c_gamma(desc, MC_SAMPLES, cfg.seed)
    report: dict[str, Any] = {"group": group_entry(desc), "mu": volume_entry(mu), "c": volume_entry(c)}
    status = EXIT_OK
    if _is_s_unit_power(desc):
        primes = [v.p for v in desc.support if not v.is_archimedean]
        closed = c_USk_closed(primes, desc.k)
        rel = abs(c.value - closed.value) / closed.value
        report["c_closed_form"] = volume_entry(closed)
        report["closed_form_relative_error"] = num(rel, "heuristic")
        report["verdict"] = "PASS" if rel <= 1e-6 else "FAIL"
        if rel > 1e-6:
            status = EXIT_FAIL
    return report, [], status


def _fit_status(fit, rows) -> int:
    if not all(r.complete for r in rows):
        return EXIT_INCOMPLETE
    return EXIT_OK if fit is None or fit.passed else EXIT_FAIL


def _need_ladder(cfg: RunConfig, minimum: int = 1) -> None:
    if len(cfg.ladder) < minimum:
        raise InputError(f"key 'ladder': at least {minimum} rungs required")


def cmd_hball(cfg: RunConfig):
    desc = parse_group(cfg.raw)
    _need_ladder(cfg)
    _, c = volume_c_gamma(desc, MC_SAMPLES, cfg.seed)
    rows = [CensusRow(X=x, count=count_height_ball(desc, x, cfg.census)) for x in cfg.ladder]
    rows = _with_ratios(rows, c.value, desc.rank)
    fit = asymptotic_report(rows, desc.rank, c, cfg.tolerance) if len(rows) >= 3 else None
    report = {"group": group_entry(desc), "c": volume_entry(c), "rows": _row_entries(rows, "exact")}
    if fit is not None:
        report["fit"] = fit_entry(fit)
    return report, rows, _fit_status(fit, rows), (c.value, desc.rank)


def cmd_census(cfg: RunConfig):
    desc = parse_group(cfg.raw)
    _need_ladder(cfg)
    a = _tuple(_require(cfg.raw, "a"), "a")
    if len(a) != desc.k:
        raise InputError(f"key 'a': expected {desc.k} entries")
    _, c = volume_c_gamma(desc, MC_SAMPLES, cfg.seed)
    rows = [census_nondegenerate(desc, a, x, cfg.census) for x in cfg.ladder]
    rows = _with_ratios(rows, c.value, desc.rank)
    fit = asymptotic_report(rows, desc.rank, c, cfg.tolerance) if len(rows) >= 3 else None
    report = {
        "group": group_entry(desc),
        "a": [format_rational(e) for e in a],
        "ratio_condition": {f"{i},{j}": ok for (i, j), ok in check_ratio_condition(desc).items()},
        "place_separation": all(check_place_separation(desc).values()),
        "c": volume_entry(c),
        "rows": _row_entries(rows, "heuristic"),
    }
    if fit is not None:
        report["fit"] = fit_entry(fit)
    return report, rows, _fit_status(fit, rows), (c.value, desc.rank)


def cmd_recurrence(cfg: RunConfig):
    _need_ladder(cfg)
    spec = RecurrenceSpec.from_strings(
        [list(p) for p in _tuples(_require(cfg.raw, "polys"), "polys")],
        list(_tuple(_require(cfg.raw, "roots"), "roots")),
    )
    val = validate_recurrence(spec)
    if not val.valid:
        pairs = ", ".join(f"({i},{j}) ratio {format_rational(q)}" for i, j, q in val.violations)
        raise InputError(f"key 'roots': ratio of roots is a root of unity for {pairs}")
    delta = cfg.raw.get("slack", 0.5)
    tail = cfg.raw.get("tail", 64)
    rows, scans = [], []
    for x in cfg.ladder:
        rep = count_bounded_terms(spec, x, delta, tail)
        rows.append(CensusRow(X=x, count=rep.count))
        scans.append(rep.scan_bound)
    c = 1.0 / math.log(val.H)
    rows = _with_ratios(rows, c, 1)
    fit = asymptotic_report(rows, 1, c, cfg.tolerance) if len(rows) >= 3 else None
    report = {
        "roots": [format_rational(r) for r in spec.roots],
        "polys": [[format_rational(e) for e in p] for p in spec.polys],
        "H": num(val.H, "exact"),
        "rows": _row_entries(rows, "exact"),
        "scan_bounds": [num(n, "exact") for n in scans],
    }
    if fit is not None:
        report["fit"] = fit_entry(fit)
    return report, rows, _fit_status(fit, rows), (c, 1)


def cmd_represent(cfg: RunConfig):
    gamma1 = parse_group(cfg.raw)
    if gamma1.k != 1:
        raise InputError("key 'k': represent expects Gamma_1 inside Q*, i.e. k = 1")
    _need_ladder(cfg)
    family = CoefficientFamily.of(
        _tuples(_require(cfg.raw, "A"), "A"), auto_close_permutations=bool(cfg.raw.get("auto_close_permutations", False))
    )
    bad = validate_family(family, gamma1)
    if bad:
        raise InputError("key 'A': " + "; ".join(v.describe() for v in bad))
    pred = predicted_constant(gamma1, family)
    exponent = family.k * gamma1.rank
    rows = []
    for x in cfg.ladder:
        n, complete = count_representable(gamma1, family, x, cfg.census)
        rows.append(CensusRow(X=x, count=n, complete=complete))
    rows = _with_ratios(rows, pred.constant.value, exponent)
    fit = asymptotic_report(rows, exponent, pred.constant, cfg.tolerance) if len(rows) >= 3 else None
    report = {
        "gamma1": group_entry(gamma1),
        "A": [[format_rational(e) for e in a] for a in family.tuples],
        "predicted_constant": volume_entry(pred.constant),
        "c_gamma1_k": volume_entry(pred.c_gamma_k),
        "rows": _row_entries(rows, "heuristic"),
    }
    if fit is not None:
        report["fit"] = fit_entry(fit)
    return report, rows, _fit_status(fit, rows), (pred.constant.value, exponent)


def _row_entries(rows: list[CensusRow], provenance: str) -> list[dict]:
    out = []
    for r in rows:
        out.append(
            {
                "X": format_rational(r.X),
                "count": num(r.count, provenance),
                "degenerate": num(r.degenerate_count, provenance),
                "complete": r.complete,
                "ratio": None if r.ratio is None else num(r.ratio, "heuristic"),
            }
        )
    return out


def write_outputs(cfg: RunConfig, report: dict, rows: list[CensusRow], fitinfo) -> None:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "rows.csv").write_text(rows_csv(rows))
    if rows:
        (out / "plot.csv").write_text(plot_csv(rows))
        plot_dir = cfg.plot_dir if cfg.plot_dir is not None else out
        if not plot_dir.is_dir():
            log.warning("plot directory %s does not exist; skipping figures", plot_dir)
            return
        c, r = fitinfo
        render_census_figure([float(x.X) for x in rows], [x.count for x in rows], c, r, plot_dir / "plot.png", cfg.command)


def run(cfg: RunConfig) -> int:
    handlers = {
        "volume": cmd_volume,
        "hball": cmd_hball,
        "census": cmd_census,
        "recurrence": cmd_recurrence,
        "represent": cmd_represent,
    }
    result = handlers[cfg.command](cfg)
    report, rows, status = result[:3]
    fitinfo = result[3] if len(result) > 3 else (None, 0)
    report = {
        "command": cfg.command,
        "version": __version__,
        "seed": cfg.seed,
        "exit_status": status,
        **report,
    }
    write_outputs(cfg, report, rows, fitinfo)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="height-census", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="TOML configuration file")
    p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="Monte Carlo seed (u64)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "selftest":
        from .acceptance import run_all

        return EXIT_OK if run_all(verbose=True) else EXIT_FAIL
    if args.config is None:
        print(f"error: command '{args.command}' needs --config", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.command, args.config, args.out, args.seed)
        return run(cfg)
    except TailUnstable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except (HeightCensusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
