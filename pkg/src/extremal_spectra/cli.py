"""Command-line front end: ``spectrum``, ``optimize``, ``diagnose`` and ``report``.

Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical failure, 4 audit violation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .diagnostics import audit_failures, diagnose, write_diagnostics
from .extremal import EXACT, FLOAT, TIE_TOL, ExtremalTable, TableFormatError, optimize, read_table, write_table
from .spectra import (
    BOUNDARY_CONDITIONS,
    DIRICHLET,
    GeneratorSpec,
    Spectrum,
    SpectrumFormatError,
    build_spectrum,
    write_spectrum,
    write_spectrum_csv,
)
from .special import BesselZeroError

log = logging.getLogger("extremal_spectra")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC, EXIT_AUDIT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    generators: list[GeneratorSpec]
    bc: str = DIRICHLET
    d: int = 2
    k_max: int | None = None
    count: int | None = None
    mode: str | None = None
    tolerances: dict = field(default_factory=lambda: {"root": 1e-12, "tie": TIE_TOL, "additivity": 1e-9})
    out: Path = Path(".")
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not self.generators:
            raise UsageError("at least one --generator is required")
        if self.k_max is not None and self.k_max < 1:
            raise UsageError("--kmax must be at least 1")
        if self.count is not None and self.count < 1:
            raise UsageError("--count must be at least 1")
        if self.mode == EXACT and any(g.kind != "box" for g in self.generators):
            raise UsageError("exact mode is only available when every generator is a box")
        if self.mode == EXACT and self.d % 2:
            raise UsageError("exact mode needs an even dimension")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--generator", action="append", metavar="SPEC",
                   help="square | rect:<p>:<q> | box:<r1>:...:<rd> | disk | file:<path>; repeatable")
    p.add_argument("--bc", choices=BOUNDARY_CONDITIONS)
    p.add_argument("--d", type=int, help="dimension (default 2, or taken from box generators)")
    p.add_argument("--mode", choices=(EXACT, FLOAT))
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--quiet", action="store_true", help="no progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="extremal-spectra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = sub.add_parser("spectrum", help="write generator spectra")
    _common(sp)
    sp.add_argument("--count", type=int)
    op = sub.add_parser("optimize", help="compute the extremal table")
    _common(op)
    op.add_argument("--kmax", type=int)
    dp = sub.add_parser("diagnose", help="indicators for an existing table")
    dp.add_argument("table", help="table CSV (sidecar JSON next to it)")
    dp.add_argument("--out")
    dp.add_argument("--seed", type=int, default=0)
    dp.add_argument("--skip-weyl", action="store_true", help="do not rebuild the spectrum for the Weyl fit")
    rp = sub.add_parser("report", help="spectrum, optimize and diagnose in one run")
    _common(rp)
    rp.add_argument("--kmax", type=int)
    rp.add_argument("--skip-weyl", action="store_true")
    return parser


def read_config_file(path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        out.setdefault(key.strip().replace("-", "_"), []).append(value.strip())
    return out


def _config_from_args(args) -> RunConfig:
    file_cfg = read_config_file(args.config) if getattr(args, "config", None) else {}

    def get(name, cast=str, default=None):
        val = getattr(args, name, None)
        if val is not None:
            return val
        if name in file_cfg:
            try:
                return cast(file_cfg[name][-1])
            except ValueError:
                raise UsageError(f"config value for {name!r} is invalid") from None
        return default

    tokens = args.generator or [t for v in file_cfg.get("generator", []) for t in v.split(",") if t]
    bc = get("bc", str, DIRICHLET)
    if bc not in BOUNDARY_CONDITIONS:
        raise UsageError(f"unknown boundary condition {bc!r}")
    d_given = get("d", int)
    try:
        gens = [GeneratorSpec.from_token(t, bc, d_given or 2) for t in tokens]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dims = {g.dimension for g in gens}
    if len(dims) > 1:
        raise UsageError(f"generators have different dimensions: {sorted(dims)}")
    d = dims.pop() if dims else (d_given or 2)
    if d_given is not None and d_given != d:
        raise UsageError(f"--d {d_given} does not match the generators' dimension {d}")
    mode = get("mode")
    if mode not in (None, EXACT, FLOAT):
        raise UsageError(f"unknown mode {mode!r}")
    return RunConfig(
        generators=gens,
        bc=bc,
        d=d,
        k_max=get("kmax", int),
        count=get("count", int),
        mode=mode,
        out=Path(get("out", str, ".")),
        seed=get("seed", int, 0),
        threads=max(1, get("threads", int, os.cpu_count() or 1)),
    )


def _progress(label: str, quiet: bool):
    if quiet:
        return None
    state = {"last": -1}

    def report(k, k_max):
        pct = 100 * k // k_max
        if pct != state["last"]:
            state["last"] = pct
            print(f"{label}: {pct:3d}% (k={k}/{k_max})", file=sys.stderr, flush=True)

    return report


def _spectra(cfg: RunConfig, min_count: int) -> list[Spectrum]:
    if len(cfg.generators) == 1 or cfg.threads == 1:
        return [build_spectrum(g, min_count) for g in cfg.generators]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(lambda g: build_spectrum(g, min_count), cfg.generators))


def _ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_spectrum(cfg: RunConfig) -> list[Path]:
    count = cfg.count if cfg.count is not None else cfg.k_max
    if count is None:
        raise UsageError("spectrum needs --count")
    spectra = _spectra(cfg, count)
    out = cfg.out
    written = []
    if len(spectra) == 1 and out.suffix:
        targets = [out]
        _ensure_dir(out.parent)
    else:
        _ensure_dir(out)
        targets = [out / f"{s.generator.label}.csv" for s in spectra]
    for s, path in zip(spectra, targets):
        if path.suffix == ".csv":
            write_spectrum_csv(s, path, count)
            if path.parent == out:
                write_spectrum(s, path.with_suffix(".txt"))
                written.append(path.with_suffix(".txt"))
        else:
            write_spectrum(s, path)
        written.append(path)
    return written


def cmd_optimize(cfg: RunConfig, quiet: bool = False) -> ExtremalTable:
    if cfg.k_max is None:
        raise UsageError("optimize needs --kmax")
    need = cfg.k_max if cfg.bc == DIRICHLET else cfg.k_max + 1
    try:
        spectra = _spectra(cfg, need)
        table = optimize(spectra, cfg.k_max, mode=cfg.mode, tol=cfg.tolerances["tie"],
                         progress=_progress("optimize", quiet))
    except (OverflowError, BesselZeroError, SpectrumFormatError):
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _ensure_dir(cfg.out)
    write_table(table, out / "table.csv", out / "table.json")
    return table


def _spectrum_for_fit(table: ExtremalTable) -> Spectrum | None:
    if len(table.generators) != 1:
        return None
    g = table.generators[0]
    need = table.k_max if table.bc == DIRICHLET else table.k_max + 1
    try:
        return build_spectrum(g, need)
    except (OSError, ValueError):
        log.warning("could not rebuild the spectrum of %s; skipping the Weyl fit", g.label)
        return None


def cmd_diagnose(table_path, out=None, seed: int = 0, skip_weyl: bool = False) -> tuple[dict, list[str]]:
    table_path = Path(table_path)
    table = read_table(table_path)
    spectrum = None if skip_weyl else _spectrum_for_fit(table)
    diag = diagnose(table, spectrum, seed=seed)
    out_dir = Path(out) if out else table_path.parent / "diagnostics"
    write_diagnostics(diag, out_dir)
    return diag, audit_failures(diag)


def cmd_report(cfg: RunConfig, quiet: bool = False, skip_weyl: bool = False) -> tuple[dict, list[str]]:
    if cfg.k_max is None:
        raise UsageError("report needs --kmax")
    root = _ensure_dir(cfg.out)
    spec_cfg = RunConfig(**{**cfg.__dict__, "out": root / "spectra", "count": cfg.k_max + 1})
    cmd_spectrum(spec_cfg)
    cmd_optimize(cfg, quiet)
    return cmd_diagnose(root / "table.csv", root / "diagnostics", cfg.seed, skip_weyl)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "diagnose":
            _, failures = cmd_diagnose(args.table, args.out, args.seed, args.skip_weyl)
        else:
            cfg = _config_from_args(args)
            failures = []
            if args.command == "spectrum":
                cmd_spectrum(cfg)
            elif args.command == "optimize":
                cmd_optimize(cfg, args.quiet)
            else:
                _, failures = cmd_report(cfg, args.quiet, args.skip_weyl)
    except UsageError as exc:
        print(f"extremal-spectra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, TableFormatError, SpectrumFormatError) as exc:
        print(f"extremal-spectra: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BesselZeroError, OverflowError, FloatingPointError, ArithmeticError) as exc:
        print(f"extremal-spectra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if failures:
        for line in failures:
            print(f"extremal-spectra: audit: {line}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
