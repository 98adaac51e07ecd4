"""Command-line front end: ``logtrop classify | build | export-plotdata``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .holomap import (CERTIFICATE_CAVEAT, ImmersionSearchError, TruncationError,
                      assemble_immersion, plot_triples, verify_equivalence)
from .thinning import MIN_H, split, thin, verify_chain_bounds, verify_separation
from .tropical import (ClassificationReport, TropicalSeries, classify, monomial_minorant)
from .weights import LogTransform, WeightSpec, WeightSpecError, make_weight

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INCONCLUSIVE = 2
EXIT_VERIFY_FAILED = 3

BUILDABLE = ("tropical_evidence", "non_rapid_polynomial")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    points: int

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be xmin:xmax:n, got {text!r}")
        try:
            g = cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise ConfigError(f"grid must be xmin:xmax:n, got {text!r}") from None
        if g.points < 2:
            raise ConfigError("grid needs at least 2 points")
        if not (math.isfinite(g.x_min) and math.isfinite(g.x_max) and g.x_min < g.x_max):
            raise ConfigError("grid needs finite xmin < xmax")
        return g

    def values(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.points)


@dataclass
class RunConfig:
    weight: WeightSpec
    h: float = MIN_H
    k_max: int = 64
    grid: GridSpec | None = None
    points: int = 1000
    phases: int = 64
    seed: int = 0
    out: Path | None = None
    format: str = "json"
    force: bool = False
    _w: LogTransform | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.h >= MIN_H:
            raise ConfigError("h must be ≥ 4")
        if self.k_max < 1:
            raise ConfigError("--kmax must be >= 1")
        if self.phases < 1:
            raise ConfigError("--phases must be >= 1")
        if self.points < 2:
            raise ConfigError("grid needs at least 2 points")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")

    @property
    def w(self) -> LogTransform:
        if self._w is None:
            self._w = make_weight(self.weight)
        return self._w

    def to_json(self) -> dict:
        return {"weight": self.weight.to_json(), "h": self.h, "k_max": self.k_max,
                "grid": None if self.grid is None else
                {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "points": self.grid.points},
                "phases": self.phases, "seed": self.seed}


def load_weight(text: str) -> WeightSpec:
    """``family:k=v,...`` or a path to a JSON weight spec."""
    if text.endswith(".json") or os.path.isfile(text):
        try:
            with open(text, encoding="utf-8") as fh:
                return WeightSpec.from_json(json.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read weight file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"weight file is not valid JSON: {exc}") from None
    return WeightSpec.parse(text)


def source_series(w: LogTransform) -> TropicalSeries:
    """The tropical series to thin: the weight's own lines when it is
    tropical, otherwise its monomial minorant."""
    if w.lines is not None and w.spec is not None and w.spec.family == "tropical":
        n, b = w.lines
        return TropicalSeries._from_filtered(n, b)
    return monomial_minorant(w)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=True) + "\n"


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _write_files(files: dict[Path, str]) -> None:
    for path, text in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write_files({out: text})


# -- commands --------------------------------------------------------------

def classify_exit_code(report: ClassificationReport) -> int:
    return EXIT_INCONCLUSIVE if report.verdict == "inconclusive" else EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    report = classify(cfg.w)
    if cfg.format == "csv":
        text = _csv_text(["n", "a_n", "d_n", "h_n"],
                         [(g.n, g.a_n, g.d_n, g.h_n) for g in report.gaps])
    else:
        text = _dumps({"config": cfg.to_json(), **report.to_json()})
    _emit(text, cfg.out)
    print(f"verdict: {report.verdict}", file=sys.stderr)
    return classify_exit_code(report)


def default_grid(w: LogTransform, chain, points: int) -> np.ndarray:
    """[x_floor, last breakpoint], clipped to where truncation is certified."""
    hi = float(chain.breakpoints[-1]) if len(chain) > 1 else w.x_floor + 1.0
    hi = min(hi, chain.certified_upper())
    if not hi > w.x_floor:
        hi = w.x_floor + 1.0
    return np.linspace(w.x_floor, hi, points)


def check_points(grid: np.ndarray, rng: np.random.Generator, n: int = 1000) -> np.ndarray:
    """z = 0 plus n points with log|z| uniform over the grid span (capped
    below double overflow) and uniform argument."""
    lo = float(np.min(grid)) - 5.0
    hi = min(float(np.max(grid)), 700.0)
    log_r = rng.uniform(lo, max(hi, lo + 1.0), n)
    z = np.exp(log_r) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))
    return np.concatenate([[0.0 + 0.0j], z])


class BuildRefused(RuntimeError):
    pass


def cmd_build(cfg: RunConfig) -> int:
    w = cfg.w
    report = classify(w)
    if report.verdict not in BUILDABLE and w.spec.family not in ("tropical", "table") \
            and not cfg.force:
        raise BuildRefused(f"weight classified {report.verdict}; refusing to build (use --force)")
    if cfg.out is None:
        raise ConfigError("build needs --out DIR")
    chain = thin(source_series(w), cfg.h, cfg.k_max)
    grid = cfg.grid.values() if cfg.grid is not None else default_grid(w, chain, cfg.points)
    rng = np.random.default_rng(cfg.seed)
    phases = np.concatenate([[0.0], rng.uniform(0.0, 2.0 * np.pi, cfg.phases - 1)])
    G = split(chain)

    bounds = verify_chain_bounds(chain, w, grid)
    sep = verify_separation(chain, grid)
    try:
        cert = verify_equivalence(G, w, cfg.h, grid, phases)
    except TruncationError as exc:
        raise ConfigError(f"{exc}; shrink --grid or raise --kmax") from None

    check = check_points(grid, rng)
    map_info: dict = {"seed": cfg.seed, "check_points": int(check.size),
                      "caveat": CERTIFICATE_CAVEAT}
    try:
        fmap = assemble_immersion(G, 1024, check)
        map_info.update(fmap.to_json())
        map_ok = True
    except ImmersionSearchError as exc:
        map_info["error"] = str(exc)
        map_ok = False

    cert_json = cert.to_json()
    cert_json.update(seed=cfg.seed, config=cfg.to_json(), classification=report.verdict,
                     chain_bounds=bounds.to_json(), separation=sep.to_json())
    out = cfg.out
    files = {
        out / "chain.json": _dumps(chain.to_json()),
        out / "series.json": _dumps({"G": [S.to_json() for S in G]}),
        out / "certificate.json": _dumps(cert_json),
        out / "map.json": _dumps(map_info),
    }
    if cfg.format == "csv":
        files[out / "plot.csv"] = _csv_text(["x", "phi", "log_sum_G"], plot_triples(G, w, grid))
    _write_files(files)
    ok = cert.passed and bounds.passed and sep.passed and map_ok
    print(f"chain: {len(chain)} lines, c_low={cert.c_low:.6g}, c_high={cert.c_high:.6g}, "
          f"{'verified' if ok else 'VERIFICATION FAILED'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def plotdata_rows(cfg: RunConfig) -> np.ndarray:
    w = cfg.w
    T = source_series(w)
    chain = thin(T, cfg.h, cfg.k_max)
    if cfg.grid is not None:
        grid = cfg.grid.values()
    else:
        hi = float(chain.breakpoints[-1]) if len(chain) > 1 else w.x_floor + 1.0
        grid = np.linspace(w.x_floor, hi, cfg.points)
    return np.column_stack([grid, w.phi(grid), T(grid), chain.envelope(grid)])


def cmd_export_plotdata(cfg: RunConfig) -> int:
    rows = plotdata_rows(cfg)
    header = ["x", "phi", "minorant", "chain_envelope"]
    if cfg.format == "json":
        text = _dumps({"columns": header, "rows": rows.tolist()})
    else:
        text = _csv_text(header, rows.tolist())
    _emit(text, cfg.out)
    return EXIT_OK


COMMANDS = {"classify": cmd_classify, "build": cmd_build, "export-plotdata": cmd_export_plotdata}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logtrop",
                                     description="Log-tropical weight toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("classify", "gather evidence on the weight's type"),
                            ("build", "thin, split and certify; writes chain/series/"
                                      "certificate/map files into --out DIR"),
                            ("export-plotdata", "CSV of x, Phi, minorant, chain envelope")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--weight", required=True,
                       help="family:key=value,... or path to a JSON weight spec")
        p.add_argument("--h", type=float, default=MIN_H, help="separation parameter (>= 4)")
        p.add_argument("--kmax", type=int, default=64, help="chain length cap")
        p.add_argument("--grid", default=None, help="xmin:xmax:n (default: certified range)")
        p.add_argument("--phases", type=int, default=64, help="number of phases (build)")
        p.add_argument("--seed", type=int, default=0, help="seed for random phases/check points")
        p.add_argument("--out", type=Path, default=None, help="output file (directory for build)")
        p.add_argument("--format", choices=("json", "csv"), default=None,
                       help="output format (default: from --out suffix, else "
                            f"{'csv' if name == 'export-plotdata' else 'json'})")
        if name == "build":
            p.add_argument("--force", action="store_true",
                           help="build even when classification does not support it")
    return parser


def _format(args: argparse.Namespace) -> str:
    if args.format is not None:
        return args.format
    if args.out is not None and args.out.suffix.lower() in (".csv", ".json"):
        return args.out.suffix.lower()[1:]
    return "csv" if args.command == "export-plotdata" else "json"


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(weight=load_weight(args.weight), h=args.h, k_max=args.kmax,
                     grid=None if args.grid is None else GridSpec.parse(args.grid),
                     phases=args.phases, seed=args.seed, out=args.out, format=_format(args),
                     force=getattr(args, "force", False))


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.w  # validate the weight before any work
        return COMMANDS[args.command](cfg)
    except BuildRefused as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (ConfigError, WeightSpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
