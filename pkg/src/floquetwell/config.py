"""Run configuration: sectioned key/value files and output helpers."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field, fields

from . import __version__
from .basis import WellConfig
from .floquet import DEFAULT_STEPS_PER_PERIOD

__all__ = [
    "ScanSection",
    "CrossingSection",
    "HusimiSection",
    "SpectrumSection",
    "StrobeSection",
    "RunConfig",
    "parse_range",
    "parse_pair",
    "atomic_write",
    "provenance",
    "write_csv",
    "read_csv",
]


def parse_range(text: str) -> tuple[float, float, float]:
    """``"lo:hi:step"`` -> floats."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected lo:hi:step, got {text!r}")
    lo, hi, step = map(float, parts)
    if step <= 0 or hi < lo:
        raise ValueError(f"invalid range {text!r}")
    return lo, hi, step


def parse_pair(text: str, sep: str = ":") -> tuple[float, float]:
    parts = text.split(sep)
    if len(parts) != 2:
        raise ValueError(f"expected a{sep}b, got {text!r}")
    return float(parts[0]), float(parts[1])


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


@dataclass
class ScanSection:
    lo: float = 0.0
    hi: float = 800.0
    step: float = 0.5
    curves: int = 40
    refine_below: float = 0.9
    min_step: float = 1e-3


@dataclass
class CrossingSection:
    lo: float = 150.0
    hi: float = 200.0
    step: float = 0.5
    curves: int = 20
    labels: list[int] = field(default_factory=list)
    gap_threshold: float = 0.5
    participant: float = 0.1
    sharp_fidelity: float = 0.9
    tol: float = 1e-3
    window: list[float] = field(default_factory=list)


@dataclass
class HusimiSection:
    epsilons: list[float] = field(default_factory=lambda: [170.0])
    labels: list[int] = field(default_factory=lambda: [13])
    track_from: float = 150.0
    track_step: float = 0.5
    sigma: float = 0.1
    n_theta: int = 128
    n_J: int = 128
    J_max: float = 40.0


@dataclass
class SpectrumSection:
    epsilons: list[float] = field(default_factory=lambda: [170.0])
    labels: list[int] = field(default_factory=lambda: [13])
    track_from: float = 150.0
    track_step: float = 0.5
    cycles: int = 128
    samples_per_cycle: int = 128


@dataclass
class StrobeSection:
    epsilons: list[float] = field(default_factory=lambda: [174.0])
    periods: int = 300
    orbits: int = 0
    J_lo: float = 0.5
    J_hi: float = 30.0


_SECTIONS = {
    "scan": ScanSection,
    "crossings": CrossingSection,
    "husimi": HusimiSection,
    "spectrum": SpectrumSection,
    "strobe": StrobeSection,
}


@dataclass
class RunConfig:
    """Everything a command needs; every field has a default."""

    model: WellConfig = field(default_factory=WellConfig)
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD
    scan: ScanSection = field(default_factory=ScanSection)
    crossings: CrossingSection = field(default_factory=CrossingSection)
    husimi: HusimiSection = field(default_factory=HusimiSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    strobe: StrobeSection = field(default_factory=StrobeSection)
    out: str = "out"
    threads: int = 1
    seed: int = 0

    # serialization

    def to_parser(self) -> configparser.ConfigParser:
        cp = _parser()
        cp["model"] = {
            "kappa": repr(self.model.kappa),
            "omega0": repr(self.model.omega0),
            "n_basis": str(self.model.n_basis),
            "steps_per_period": str(self.steps_per_period),
        }
        for name in _SECTIONS:
            sec = getattr(self, name)
            cp[name] = {f.name: _fmt(getattr(sec, f.name)) for f in fields(sec)}
        cp["run"] = {"out": self.out, "threads": str(self.threads), "seed": str(self.seed)}
        return cp

    def dumps(self) -> str:
        buf = io.StringIO()
        self.to_parser().write(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        cp = _parser()
        cp.read_string(text)
        return cls.from_parser(cp)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.loads(fh.read())

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "RunConfig":
        known = {"model", "run", *_SECTIONS}
        unknown = set(cp.sections()) - known
        if unknown:
            raise ValueError(f"unknown config section(s): {sorted(unknown)}")
        cfg = cls()
        if cp.has_section("model"):
            m = cp["model"]
            _check_keys(m, {"kappa", "omega0", "n_basis", "steps_per_period"}, "model")
            cfg.model = WellConfig(
                kappa=m.getfloat("kappa", cfg.model.kappa),
                omega0=m.getfloat("omega0", cfg.model.omega0),
                n_basis=m.getint("n_basis", cfg.model.n_basis),
            )
            cfg.steps_per_period = m.getint("steps_per_period", cfg.steps_per_period)
        for name, kind in _SECTIONS.items():
            if not cp.has_section(name):
                continue
            sec = getattr(cfg, name)
            src = cp[name]
            _check_keys(src, {f.name for f in fields(sec)}, name)
            for f in fields(sec):
                if f.name in src:
                    setattr(sec, f.name, _coerce(f.type, src[f.name]))
        if cp.has_section("run"):
            r = cp["run"]
            _check_keys(r, {"out", "threads", "seed"}, "run")
            cfg.out = r.get("out", cfg.out)
            cfg.threads = r.getint("threads", cfg.threads)
            cfg.seed = r.getint("seed", cfg.seed)
        return cfg

    def digest(self) -> str:
        """Stable hash of the configuration (output directory excluded)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case (n_J, J_max)
    return cp


def _check_keys(section, allowed, name):
    extra = set(section.keys()) - set(allowed)
    if extra:
        raise ValueError(f"unknown key(s) in [{name}]: {sorted(extra)}")


def _fmt(value) -> str:
    if isinstance(value, list):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(ftype: str, text: str):
    if ftype == "int":
        return int(text)
    if ftype == "float":
        return float(text)
    if ftype == "list[int]":
        return _ints(text)
    if ftype == "list[float]":
        return _floats(text)
    return text


def provenance(cfg: RunConfig, command: str, **extra) -> dict:
    head = {"command": command, "config_hash": cfg.digest(), "version": __version__}
    head.update(extra)
    return head


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: dict, columns: list[str], rows) -> None:
    """One ``#``-prefixed JSON header line, a column line, then data rows."""
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    atomic_write(path, buf.getvalue())


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing provenance header")
        header = json.loads(first[2:])
        reader = csv.reader(fh)
        columns = next(reader)
        rows = list(reader)
    return header, columns, rows
