"""Run configuration, result records and their on-disk formats.

Config files are INI-style (``configparser``) with sections ``[graph]``,
``[setup]``, ``[run]``, ``[output]`` and ``[tolerances]``; a JSON result
record can stand in for a config file, in which case its ``config`` echo
is used.  Tau is always given in units of hbar / gamma.
"""
import configparser
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import graphs

OPERATIONS = ("pdet", "simulate", "sweep", "spectrum", "density", "bases", "census", "verify")

# explicit edges and state vectors enter INI files only by path
GRAPH_KEYS = ("kind", "L", "alpha", "d", "generations", "gamma", "edges_file")
SETUP_KEYS = ("r_in", "r_d", "tau", "psi_in_file")
RUN_KEYS = ("operation", "n_max", "alphas", "taus", "ns", "threshold", "mode", "samples")
OUTPUT_KEYS = ("out", "format")
TOL_KEYS = ("tol_degeneracy", "tol_phase", "tol_dark", "tol_routes", "tol_unit")

KIND_ALIASES = {"tree": "binary_tree"}

INT_KEYS = {"L", "d", "generations", "n_nodes", "n_max", "samples"}
FLOAT_KEYS = {"alpha", "gamma", "tau", "threshold"} | set(TOL_KEYS)
LIST_KEYS = {"alphas", "taus", "ns"}


class ConfigError(ValueError):
    """Invalid run configuration; ``location`` names the offending key or line."""

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass
class RunConfig:
    operation: str = "pdet"
    kind: str = "ring"
    L: Optional[int] = None
    alpha: float = 0.0
    d: Optional[int] = None
    generations: Optional[int] = None
    gamma: float = 1.0
    n_nodes: Optional[int] = None
    edges: Optional[List[List[float]]] = None
    r_in: Optional[str] = None
    r_d: Optional[str] = None
    tau: float = 1.0
    psi_in: Optional[List[List[float]]] = None
    n_max: int = 2000
    alphas: Optional[List[float]] = None
    taus: Optional[List[float]] = None
    ns: Optional[List[int]] = None
    threshold: float = 0.002
    mode: str = "symmetric"
    samples: int = 5
    out: Optional[str] = None
    format: str = "csv"
    tol_degeneracy: float = 1e-9
    tol_phase: float = 1e-9
    tol_dark: float = 1e-12
    tol_routes: float = 1e-8
    tol_unit: float = 1e-8

    def __post_init__(self):
        self.kind = KIND_ALIASES.get(self.kind, self.kind)
        if self.operation not in OPERATIONS:
            raise ConfigError(f"unknown operation {self.operation!r}", "run.operation")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}", "output.format")
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1", "run.n_max")
        if not self.tau > 0:
            raise ConfigError("tau must be positive", "setup.tau")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}")
        return cls(**data)

    def graph_spec(self) -> graphs.GraphSpec:
        edges = tuple(tuple(e) for e in self.edges) if self.edges else ()
        edges = tuple((int(i), int(j), float(w), float(p)) for i, j, w, p in edges)
        try:
            return graphs.GraphSpec(
                self.kind, L=self.L, alpha=self.alpha, d=self.d, generations=self.generations,
                gamma=self.gamma, n_nodes=self.n_nodes, edges=edges,
            )
        except graphs.GraphError as exc:
            raise ConfigError(str(exc), "graph") from None

    def psi_in_vector(self) -> Optional[np.ndarray]:
        if self.psi_in is None:
            return None
        return np.array([complex(re, im) for re, im in self.psi_in])


def _convert(key, raw, location):
    if raw is None:
        return None
    try:
        if key in INT_KEYS:
            return int(raw)
        if key in FLOAT_KEYS:
            return float(raw)
        if key in LIST_KEYS:
            vals = parse_grid(str(raw))
            return [int(v) for v in vals] if key == "ns" else vals
    except ValueError as exc:
        raise ConfigError(str(exc), location) from None
    return str(raw)


def parse_grid(text: str) -> List[float]:
    """``"a,b,c"`` or ``"start:stop:num"`` (inclusive linspace)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:num, got {text!r}")
        return [float(v) for v in np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))]
    return [float(v) for v in text.split(",") if v.strip()]


def read_config_file(path) -> Dict[str, Any]:
    """Key/value mapping from an INI config or a JSON result record."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, f"{path}:{exc.lineno}") from None
        return dict(data.get("config", data))
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive (L vs l)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc), str(path)) from None
    sections = {"graph": GRAPH_KEYS, "setup": SETUP_KEYS, "run": RUN_KEYS,
                "output": OUTPUT_KEYS, "tolerances": TOL_KEYS}
    out = {}
    for section in parser.sections():
        if section not in sections:
            raise ConfigError(f"unknown section [{section}]", str(path))
        for key, raw in parser.items(section):
            if key not in sections[section]:
                raise ConfigError(f"unknown key {key!r}", f"{path}:[{section}]")
            out[key] = _convert(key, raw, f"{path}:[{section}].{key}")
    return out


def read_state_file(path) -> List[List[float]]:
    """Complex vector, one ``re [im]`` pair per line; ``#`` comments."""
    path = Path(path)
    vec = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.replace(",", " ").split()
        try:
            re = float(tok[0])
            im = float(tok[1]) if len(tok) > 1 else 0.0
        except (ValueError, IndexError):
            raise ConfigError(f"bad amplitude {line!r}", f"{path}:{lineno}") from None
        if len(tok) > 2:
            raise ConfigError("expected 're [im]'", f"{path}:{lineno}")
        vec.append([re, im])
    if not vec:
        raise ConfigError("empty state file", str(path))
    return vec


def write_state_file(path, vec) -> None:
    lines = [f"{v.real:.17g} {v.imag:.17g}" for v in np.asarray(vec, dtype=complex)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class ResultRecord:
    config: Dict[str, Any]
    scalars: Dict[str, Any] = field(default_factory=dict)
    series: Optional[Dict[str, List[float]]] = None
    table: Optional[Tuple[Tuple[str, ...], List[Tuple[Any, ...]]]] = None
    spectrum: Optional[List[complex]] = None
    bases: Optional[List[Dict[str, Any]]] = None

    def check_finite(self) -> None:
        def walk(x, where):
            if isinstance(x, float) and not math.isfinite(x):
                raise ValueError(f"non-finite value in {where}")
            if isinstance(x, complex):
                walk(x.real, where), walk(x.imag, where)
            if isinstance(x, dict):
                for k, v in x.items():
                    walk(v, f"{where}.{k}")
            if isinstance(x, (list, tuple)):
                for v in x:
                    walk(v, where)
        walk(self.scalars, "scalars")
        walk(self.series, "series")
        walk(self.spectrum, "spectrum")

    def to_json(self) -> str:
        data = {"config": self.config, "scalars": self.scalars}
        if self.series is not None:
            data["series"] = self.series
        if self.table is not None:
            header, rows = self.table
            data["table"] = {"columns": list(header), "rows": [list(r) for r in rows]}
        if self.spectrum is not None:
            data["spectrum"] = [[z.real, z.imag] for z in self.spectrum]
        if self.bases is not None:
            data["bases"] = self.bases
        # float repr is the shortest string that round-trips exactly
        return json.dumps(_plain(data), indent=1, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.table is not None:
            header, rows = self.table
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        else:
            w.writerow(("key", "value"))
            for k, v in self.scalars.items():
                w.writerow((k, _fmt(v)))
        return buf.getvalue()


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)
