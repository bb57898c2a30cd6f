"""Command-line surface: ``rate``, ``scan`` and ``compare``.

Configuration files are flat ``key = value`` documents with dotted keys,
``#`` comments and blank lines, e.g.::

    channel.beta_db_per_km = 0.16
    protocol.e_dz = 0.10
    sweep.distances = 0:600:10
    sweep.protocols = cat-state-oneway, phase-randomized, plob
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from .channel import ChannelParams, OperatingPoint, protocol1_observables
from .decoy import LEVELS, DecoyIntensities, protocol2_observables, yield_bound_table
from .numerics import DomainError
from .optimizer import (
    CAT,
    DEFAULT_PROTOCOLS,
    PLOB,
    CurvePoint,
    SearchConfig,
    SweepSpec,
    evaluate_point,
    max_positive_distance,
    parse_variant,
    plob_crossing,
    run_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

CSV_COLUMNS = (
    "distance_km",
    "total_loss_db",
    "rate_p1_oneway",
    "rate_p1_k1",
    "rate_p1_k2",
    "rate_p2",
    "plob",
    "mu_opt_p1",
    "mu_opt_p2",
)
_RATE_COLUMNS = {
    "rate_p1_oneway": "cat-state-oneway",
    "rate_p1_k1": "cat-state-k1",
    "rate_p1_k2": "cat-state-k2",
    "rate_p2": "phase-randomized",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def fmt(v: Optional[float]) -> str:
    """Locale-independent, 12 significant digits; empty for missing values."""
    if v is None:
        return ""
    return format(float(v), ".12g")


def _float(lo=None, hi=None, lo_open=False, hi_open=False) -> Callable[[str], float]:
    def parse(text: str) -> float:
        v = float(text)
        if math.isnan(v):
            raise ValueError("not a number")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ValueError(f"must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise ValueError(f"must be {'<' if hi_open else '<='} {hi}")
        return v
    return parse


def _int(lo: int) -> Callable[[str], int]:
    def parse(text: str) -> int:
        v = int(text)
        if v < lo:
            raise ValueError(f"must be >= {lo}")
        return v
    return parse


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def parse_distances(text: str) -> tuple[float, ...]:
    """``"0, 50, 100"`` or an inclusive range ``"start:stop:step"``."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 9) for i in range(max(n, 0)))
    return tuple(float(p) for p in text.split(","))


def _protocols(text: str) -> tuple[str, ...]:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    for name in names:
        if name != PLOB:
            parse_variant(name)
    return names


def _format(text: str) -> str:
    t = text.strip().lower()
    if t not in ("csv", "json"):
        raise ValueError("must be csv or json")
    return t


_KEYS: dict[str, Callable[[str], Any]] = {
    "channel.beta_db_per_km": _float(0.0, lo_open=True),
    "channel.eta_d": _float(0.0, 1.0, lo_open=True),
    "channel.p_d": _float(0.0, 1.0),
    "protocol.e_dz": _float(0.0, 0.5),
    "protocol.f": _float(1.0),
    "decoy.omega": _float(0.0, lo_open=True),
    "decoy.nu": _float(0.0, lo_open=True),
    "decoy.n_cut": _int(2),
    "decoy.gains_file": str,
    "sweep.distances": parse_distances,
    "sweep.asymmetry_ratio": _float(0.0, 1.0, lo_open=True, hi_open=True),
    "sweep.protocols": _protocols,
    "sweep.k_max": _int(0),
    "sweep.rep_rate_hz": _float(0.0, lo_open=True),
    "sweep.workers": _int(1),
    "optimizer.mu_min": _float(0.0, lo_open=True),
    "optimizer.mu_max": _float(0.0, lo_open=True),
    "optimizer.grid_points": _int(3),
    "optimizer.tol": _float(0.0, lo_open=True),
    "bound.include_detector_efficiency": _bool,
    "output.path": str,
    "output.format": _format,
}


@dataclass
class RunConfig:
    beta: float = 0.16
    eta_d: float = 0.85
    p_d: float = 1e-7
    e_dZ: float = 0.03
    f: float = 1.16
    omega: float = 0.02
    nu: float = 0.1
    n_cut: int = 10
    gains_file: Optional[str] = None
    distances: tuple[float, ...] = parse_distances("0:600:10")
    asymmetry_ratio: float = 0.5
    protocols: tuple[str, ...] = DEFAULT_PROTOCOLS
    k_max: int = 2
    rep_rate_hz: Optional[float] = 1e9
    workers: int = 1
    mu_min: float = 1e-5
    mu_max: float = 1.0
    grid_points: int = 60
    tol: float = 1e-7
    bound_with_detector: bool = False
    out: str = "-"
    format: str = "csv"
    base_dir: Path = field(default=Path("."), repr=False)

    def selected_protocols(self) -> tuple[str, ...]:
        keep = []
        for name in self.protocols:
            if name == PLOB or parse_variant(name)[1] <= self.k_max:
                keep.append(name)
        return tuple(keep)

    def sweep_spec(self, distances: Optional[Sequence[float]] = None) -> SweepSpec:
        try:
            channel = ChannelParams(beta=self.beta, eta_d=self.eta_d, p_d=self.p_d)
        except DomainError as exc:
            raise ConfigError("channel", str(exc)) from None
        try:
            search = SearchConfig(self.mu_min, self.mu_max, self.grid_points, self.tol)
        except DomainError as exc:
            raise ConfigError("optimizer.mu_max", str(exc)) from None
        try:
            return SweepSpec(
                distances=self.distances if distances is None else distances,
                asymmetry_ratio=self.asymmetry_ratio,
                protocols=self.selected_protocols(),
                channel=channel,
                e_dZ=self.e_dZ,
                f=self.f,
                rep_rate_hz=self.rep_rate_hz,
                omega=self.omega,
                nu=self.nu,
                n_cut=self.n_cut,
                bound_with_detector=self.bound_with_detector,
                search=search,
            )
        except DomainError as exc:
            raise ConfigError("sweep.distances", str(exc)) from None


_ATTR = {
    "channel.beta_db_per_km": "beta",
    "channel.eta_d": "eta_d",
    "channel.p_d": "p_d",
    "protocol.e_dz": "e_dZ",
    "protocol.f": "f",
    "decoy.omega": "omega",
    "decoy.nu": "nu",
    "decoy.n_cut": "n_cut",
    "decoy.gains_file": "gains_file",
    "sweep.distances": "distances",
    "sweep.asymmetry_ratio": "asymmetry_ratio",
    "sweep.protocols": "protocols",
    "sweep.k_max": "k_max",
    "sweep.rep_rate_hz": "rep_rate_hz",
    "sweep.workers": "workers",
    "optimizer.mu_min": "mu_min",
    "optimizer.mu_max": "mu_max",
    "optimizer.grid_points": "grid_points",
    "optimizer.tol": "tol",
    "bound.include_detector_efficiency": "bound_with_detector",
    "output.path": "out",
    "output.format": "format",
}


def read_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse a flat ``key = value`` document."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", "expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out


def apply_settings(cfg: RunConfig, settings: dict[str, str]) -> RunConfig:
    updates = {}
    for key, text in settings.items():
        if key not in _KEYS:
            raise ConfigError(key, "unknown configuration key")
        try:
            updates[_ATTR[key]] = _KEYS[key](text)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    cfg = replace(cfg, **updates)
    if not cfg.omega < cfg.nu:
        raise ConfigError("decoy.nu", "must exceed decoy.omega")
    if not cfg.mu_min < cfg.mu_max:
        raise ConfigError("optimizer.mu_max", "must exceed optimizer.mu_min")
    d = cfg.distances
    if any(x < 0 for x in d):
        raise ConfigError("sweep.distances", "distances must be nonnegative")
    if any(b <= a for a, b in zip(d, d[1:])):
        raise ConfigError("sweep.distances", "distances must be strictly increasing")
    return cfg


def load_config(path: Optional[str], overrides: Optional[dict[str, str]] = None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``."""
    cfg = RunConfig()
    settings: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        settings.update(read_key_values(p.read_text(encoding="utf-8"), str(p)))
        cfg = replace(cfg, base_dir=p.parent)
    settings.update(overrides or {})
    return apply_settings(cfg, settings)


def load_gains(path: Path, omega: float, nu: float) -> DecoyIntensities:
    """Read a gains table: ``gain.<a>.<b> = value`` for a, b in {0, omega, nu}.

    ``omega`` and ``nu`` keys in the file override the configured levels.
    """
    kv = read_key_values(path.read_text(encoding="utf-8"), str(path))
    gains = {}
    for key, text in kv.items():
        if key in ("omega", "nu"):
            try:
                v = float(text)
            except ValueError:
                raise ConfigError(key, f"not a number: {text!r}") from None
            omega, nu = (v, nu) if key == "omega" else (omega, v)
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[0] != "gain" or parts[1] not in LEVELS or parts[2] not in LEVELS:
            raise ConfigError(key, "expected gain.<0|omega|nu>.<0|omega|nu>")
        try:
            gains[(parts[1], parts[2])] = float(text)
        except ValueError:
            raise ConfigError(key, f"not a number: {text!r}") from None
    for a in LEVELS:
        for b in LEVELS:
            if (a, b) not in gains:
                raise ConfigError(f"gain.{a}.{b}", "missing from gains file")
    try:
        return DecoyIntensities(omega, nu, gains)
    except DomainError as exc:
        raise ConfigError(str(path), str(exc)) from None


def _pick_mu(point: CurvePoint, family: str) -> Optional[float]:
    for name, mu in point.mu_opt.items():
        if parse_variant(name)[0] == family:
            return mu
    return None


def csv_row(point: CurvePoint, protocols: Sequence[str]) -> dict[str, str]:
    row = {"distance_km": fmt(point.distance_km), "total_loss_db": fmt(point.total_loss_db)}
    for col, name in _RATE_COLUMNS.items():
        row[col] = fmt(point.rates.get(name)) if name in protocols else ""
    row["plob"] = fmt(point.plob) if PLOB in protocols else ""
    preferred_p1 = point.mu_opt.get("cat-state-oneway", _pick_mu(point, CAT))
    preferred_p2 = point.mu_opt.get("phase-randomized", _pick_mu(point, "phase-randomized"))
    row["mu_opt_p1"] = fmt(preferred_p1)
    row["mu_opt_p2"] = fmt(preferred_p2)
    return row


def render_csv(points: Sequence[CurvePoint], protocols: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for p in points:
        writer.writerow(csv_row(p, protocols))
    return buf.getvalue()


def point_to_json(point: CurvePoint, protocols: Sequence[str]) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for col, text in csv_row(point, protocols).items():
        flat[col] = float(text) if text else None
    flat.update(
        distance_km=point.distance_km,
        total_loss_db=point.total_loss_db,
        plob=point.plob,
        rates=dict(point.rates),
        raw_rates=dict(point.raw_rates),
        mu_opt=dict(point.mu_opt),
        errors=dict(point.errors),
    )
    return flat


def render_json(points: Sequence[CurvePoint], protocols: Sequence[str]) -> str:
    return json.dumps([point_to_json(p, protocols) for p in points], indent=2) + "\n"


def read_curve_json(text: str) -> list[CurvePoint]:
    """Inverse of :func:`render_json`."""
    return [
        CurvePoint(
            distance_km=obj["distance_km"],
            total_loss_db=obj["total_loss_db"],
            rates=obj["rates"],
            raw_rates=obj["raw_rates"],
            mu_opt=obj["mu_opt"],
            plob=obj["plob"],
            errors=obj["errors"],
        )
        for obj in json.loads(text)
    ]


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def rate_report(cfg: RunConfig) -> dict[str, str]:
    """Single-distance report as ordered key/value strings."""
    if len(cfg.distances) != 1:
        raise ConfigError("sweep.distances", "the rate command needs exactly one distance")
    spec = cfg.sweep_spec()
    distance = spec.distances[0]
    ch = spec.channel_at(distance)
    bounds = None
    if cfg.gains_file:
        gains = load_gains(cfg.base_dir / cfg.gains_file, cfg.omega, cfg.nu)
        bounds = yield_bound_table(gains, cfg.n_cut)
    point = evaluate_point(spec, distance, bounds=bounds)

    report = {
        "distance_km": fmt(distance),
        "total_loss_db": fmt(point.total_loss_db),
        "asymmetry_ratio": fmt(spec.asymmetry_ratio),
        "eta_a": fmt(ch.eta_a),
        "eta_b": fmt(ch.eta_b),
    }
    for name in spec.protocols:
        if name == PLOB:
            report["plob"] = fmt(point.plob)
            continue
        if name in point.errors:
            report[f"{name}.error"] = point.errors[name]
            continue
        family, _ = parse_variant(name)
        mu = point.mu_opt[name]
        op = OperatingPoint.matched(ch, mu * ch.eta_a, spec.e_dZ)
        if family == CAT:
            obs = protocol1_observables(ch, op)
        else:
            table = bounds or yield_bound_table(
                DecoyIntensities.from_channel(ch, spec.omega, spec.nu), spec.n_cut
            )
            obs = protocol2_observables(ch, op, table, spec.n_cut)
        report[f"{name}.rate"] = fmt(point.rates[name])
        report[f"{name}.mu_opt"] = fmt(mu)
        report[f"{name}.Q_Z"] = fmt(obs.Q_Z)
        report[f"{name}.E_Z"] = fmt(obs.E_Z)
        report[f"{name}.E_X"] = fmt(obs.E_X)
        if cfg.rep_rate_hz:
            report[f"{name}.bits_per_second"] = fmt(point.rates[name] * cfg.rep_rate_hz)
    return report


def compare_report(points: Sequence[CurvePoint], protocols: Sequence[str]) -> str:
    lines = []
    for name in protocols:
        if name == PLOB:
            continue
        far = max_positive_distance(points, name)
        cross = plob_crossing(points, name)
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        lines.append(f"max_distance_km = {'none' if far is None else fmt(far)}")
        lines.append(f"plob_crossing_km = {'none' if cross is None else fmt(cross)}")
    return "\n".join(lines) + "\n"


def cmd_rate(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in rate_report(cfg).items())


def _single_distance_only(cfg: RunConfig) -> None:
    # a measured gains table describes one link, not a whole sweep
    if cfg.gains_file:
        raise ConfigError("decoy.gains_file", "only the rate command accepts measured gains")


def cmd_scan(cfg: RunConfig) -> str:
    _single_distance_only(cfg)
    spec = cfg.sweep_spec()
    points = run_sweep(spec, workers=cfg.workers)
    if cfg.format == "json":
        return render_json(points, spec.protocols)
    return render_csv(points, spec.protocols)


def cmd_compare(cfg: RunConfig) -> str:
    _single_distance_only(cfg)
    spec = cfg.sweep_spec()
    return compare_report(run_sweep(spec, workers=cfg.workers), spec.protocols)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfqkd",
        description="Key rates of coherent-state twin-field QKD over lossy fiber.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="PATH", help="output file ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="scan output format")
    common.add_argument("--k", type=str, metavar="INT", help="largest number of B steps")
    common.add_argument("--asymmetry", type=str, metavar="RATIO", help="L_ac / (L_ac + L_bc)")
    common.add_argument("--edz", type=str, metavar="FLOAT", help="Z-basis misalignment")
    common.add_argument(
        "--bound-with-detector",
        action="store_true",
        help="include detector efficiency in the repeaterless bound",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    rate = sub.add_parser("rate", parents=[common], help="single-distance report")
    rate.add_argument("--distance", type=str, metavar="KM", help="total Alice-Bob distance")
    sub.add_parser("scan", parents=[common], help="rate-versus-distance curve")
    sub.add_parser("compare", parents=[common], help="reach and bound-crossing summary")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    out = {}
    pairs = (
        ("out", "output.path"),
        ("format", "output.format"),
        ("k", "sweep.k_max"),
        ("asymmetry", "sweep.asymmetry_ratio"),
        ("edz", "protocol.e_dz"),
        ("distance", "sweep.distances"),
    )
    for attr, key in pairs:
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    if args.bound_with_detector:
        out["bound.include_detector_efficiency"] = "true"
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        command = {"rate": cmd_rate, "scan": cmd_scan, "compare": cmd_compare}[args.command]
        text = command(cfg)
    except ConfigError as exc:
        print(f"tfqkd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"tfqkd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        _emit(text, cfg.out)
    except OSError as exc:
        print(f"tfqkd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
