"""Command-line driver: ``qfd <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid input, 3 numerical-consistency failure,
4 resource guard tripped.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments, graphs
from .detection import (
    DetectionSetup,
    bright_dark_bases,
    pdet_aleksandrov,
    pdet_projection,
    pdet_spectral,
    simulate_unitary,
    spectral_measure,
    survival_operator,
    survival_spectrum,
    verify_pole_duality,
)
from .records import (
    KIND_ALIASES,
    OPERATIONS,
    ConfigError,
    ResultRecord,
    RunConfig,
    parse_grid,
    read_config_file,
    read_state_file,
)
from .spectral import build_sectors, detect_resonances, diagonalize, propagator

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


class ConsistencyError(RuntimeError):
    def __init__(self, message, record):
        self.record = record
        super().__init__(message)


def _node(spec, raw, name):
    if raw is None:
        raise ConfigError(f"{name} is required for this operation", f"setup.{name}")
    raw = str(raw)
    if spec.kind == "hypercube" and len(raw) == spec.d and set(raw) <= {"0", "1"}:
        label = raw
    else:
        try:
            label = int(raw)
        except ValueError:
            raise ConfigError(f"invalid node label {raw!r}", f"setup.{name}") from None
    try:
        return graphs.localized_state(spec, label)
    except graphs.GraphError as exc:
        raise ConfigError(str(exc), f"setup.{name}") from None


class _Problem:
    """Everything derived from a config that the subcommands share."""

    def __init__(self, cfg: RunConfig, need_in=True):
        self.cfg = cfg
        self.spec = cfg.graph_spec()
        self.H = graphs.build(self.spec)
        self.spectral = diagonalize(self.H, cfg.tol_degeneracy)
        self.sectors = build_sectors(self.spectral, cfg.tau, cfg.tol_phase)
        self.psi_d = _node(self.spec, cfg.r_d, "r_d")
        self.psi_in = None
        if need_in:
            vec = cfg.psi_in_vector()
            self.psi_in = vec if vec is not None else _node(self.spec, cfg.r_in, "r_in")
            try:
                DetectionSetup(self.psi_in, self.psi_d, cfg.tau)
            except ValueError as exc:
                raise ConfigError(str(exc), "setup") from None

    @property
    def setup(self):
        return DetectionSetup(self.psi_in, self.psi_d, self.cfg.tau)

    def U(self):
        return propagator(self.spectral, self.cfg.tau)


def _routes(p: _Problem):
    cfg = p.cfg
    bases = bright_dark_bases(p.sectors, p.psi_d, cfg.tol_dark)
    vals = {
        "pdet_spectral": pdet_spectral(p.sectors, p.psi_d, p.psi_in, cfg.tol_dark),
        "pdet_projection": pdet_projection(bases, p.psi_in),
        "pdet_aleksandrov": pdet_aleksandrov(
            spectral_measure(p.sectors, p.psi_d, p.psi_in, cfg.tol_dark)),
    }
    v = list(vals.values())
    vals["max_route_difference"] = max(v) - min(v)
    return vals


def cmd_pdet(cfg: RunConfig) -> ResultRecord:
    p = _Problem(cfg)
    scalars = _routes(p)
    pairs = detect_resonances(p.spectral, cfg.tau, cfg.tol_phase)
    scalars["pdet"] = scalars["pdet_spectral"]
    scalars["resonant"] = p.sectors.resonant
    scalars["resonant_pairs"] = len(pairs)
    scalars["n_sectors"] = len(p.sectors)
    rec = ResultRecord(cfg.to_dict(), scalars)
    if scalars["max_route_difference"] > cfg.tol_routes:
        raise ConsistencyError("P_det routes disagree beyond tolerance", rec)
    return rec


def cmd_simulate(cfg: RunConfig) -> ResultRecord:
    p = _Problem(cfg)
    s = simulate_unitary(p.U(), p.psi_d, p.psi_in, cfg.n_max)
    rows = [(n, float(s.F[n - 1]), float(s.S[n])) for n in range(1, cfg.n_max + 1)]
    return ResultRecord(
        cfg.to_dict(),
        {"one_minus_S_N": 1.0 - float(s.S[-1]), "n_max": cfg.n_max},
        series={"F": s.F.tolist(), "S": s.S.tolist()},
        table=(("n", "F_n", "S_n"), rows),
    )


def _require_ring(cfg):
    if cfg.kind not in ("ring", "magnetic_ring"):
        raise ConfigError(f"{cfg.operation} needs a ring graph, got {cfg.kind!r}", "graph.kind")
    if cfg.L is None:
        raise ConfigError("L is required", "graph.L")


def cmd_sweep(cfg: RunConfig) -> ResultRecord:
    _require_ring(cfg)
    alphas = cfg.alphas if cfg.alphas is not None else [cfg.alpha]
    taus = cfg.taus if cfg.taus is not None else [cfg.tau]
    grid = experiments.SweepGrid(alphas, taus, L=cfg.L, N=cfg.n_max,
                                 r_in=int(cfg.r_in if cfg.r_in is not None else 1),
                                 r_d=int(cfg.r_d if cfg.r_d is not None else 0))
    M = experiments.sweep_tau_alpha(grid)
    rows = [(a, t, float(M[i, j])) for i, a in enumerate(grid.alphas) for j, t in enumerate(grid.taus)]
    return ResultRecord(cfg.to_dict(), {"cells": len(rows)},
                        table=(("alpha", "tau", "one_minus_S_N"), rows))


def cmd_spectrum(cfg: RunConfig) -> ResultRecord:
    p = _Problem(cfg, need_in=False)
    sp = survival_spectrum(survival_operator(p.U(), p.psi_d), cfg.tol_unit)
    zeta = sp.eigenvalues[np.argsort(-np.abs(sp.eigenvalues), kind="stable")]
    rows = [(float(z.real), float(z.imag), float(abs(z))) for z in zeta]
    scalars = {
        "unit_circle": len(sp.unit_circle_ids),
        "interior": len(sp.interior_ids),
        "zeta_max": sp.zeta_max if sp.zeta_max is not None else 0.0,
    }
    return ResultRecord(cfg.to_dict(), scalars, spectrum=[complex(z) for z in zeta],
                        table=(("re", "im", "abs"), rows))


def cmd_density(cfg: RunConfig) -> ResultRecord:
    _require_ring(cfg)
    if cfg.kind != "ring" or cfg.alpha:
        raise ConfigError("density is defined for the plain ring", "graph.kind")
    ns = cfg.ns if cfg.ns is not None else [cfg.n_max]
    if len(ns) != 1:
        raise ConfigError("density takes exactly one n", "run.ns")
    start = int(cfg.r_in) if cfg.r_in is not None else None
    detect = int(cfg.r_d) if cfg.r_d is not None else None
    snap = experiments.spread_density(cfg.L, cfg.tau, ns, start, detect)[0]
    rows = [(x + 1, float(v)) for x, v in enumerate(snap.density)]
    return ResultRecord(
        cfg.to_dict(),
        {"n": snap.n, "S_n": snap.survival, "mean_distance": snap.mean_distance},
        table=(("node", "prob"), rows),
    )


def cmd_bases(cfg: RunConfig) -> ResultRecord:
    p = _Problem(cfg, need_in=False)
    b = bright_dark_bases(p.sectors, p.psi_d, cfg.tol_dark)
    labelled = [("bright", sec, "bright", v) for sec, v in b.bright]
    labelled += [("dark", d.sector, d.origin, d.vector) for d in b.dark]
    vectors, rows = [], []
    for k, (kind, sec, origin, v) in enumerate(labelled):
        label = f"{kind}{k}"
        vectors.append({"label": label, "kind": kind, "origin": origin, "sector": sec,
                        "phase": p.sectors[sec].phase,
                        "re": v.real.tolist(), "im": v.imag.tolist()})
        rows += [(label, kind, origin, sec, i, float(c.real), float(c.imag)) for i, c in enumerate(v)]
    scalars = {"bright": len(b.bright), "dark": len(b.dark),
               "completely_dark_sectors": len(b.completely_dark_sectors)}
    return ResultRecord(cfg.to_dict(), scalars, bases=vectors,
                        table=(("label", "kind", "origin", "sector", "index", "re", "im"), rows))


def cmd_census(cfg: RunConfig) -> ResultRecord:
    _require_ring(cfg)
    fast, total = experiments.fast_eigenvalue_census(cfg.L, cfg.tau, cfg.threshold, cfg.mode)
    return ResultRecord(cfg.to_dict(), {"fast": fast, "total": total, "mode": cfg.mode,
                                        "threshold": cfg.threshold})


def cmd_verify(cfg: RunConfig) -> ResultRecord:
    p = _Problem(cfg)
    scalars = _routes(p)
    rng = np.random.default_rng(12345)
    radius = rng.uniform(1.1, 2.0, cfg.samples)
    angle = rng.uniform(0, 2 * np.pi, cfg.samples)
    scalars["pole_duality_residual"] = verify_pole_duality(p.H, p.setup, radius * np.exp(1j * angle))
    s = simulate_unitary(p.U(), p.psi_d, p.psi_in, cfg.n_max)
    scalars["one_minus_S_N"] = 1.0 - float(s.S[-1])
    scalars["simulate_difference"] = abs(scalars["one_minus_S_N"] - scalars["pdet_spectral"])
    rec = ResultRecord(cfg.to_dict(), scalars)
    failed = [name for name, bad in (
        ("routes", scalars["max_route_difference"] > cfg.tol_routes),
        ("pole duality", scalars["pole_duality_residual"] > 1e-8),
    ) if bad]
    if failed:
        raise ConsistencyError(f"verification failed: {', '.join(failed)}", rec)
    return rec


HELP = {
    "pdet": "total detection probability by three routes",
    "simulate": "F_n and S_n series from the measurement protocol",
    "sweep": "1 - S_N over an (alpha, tau) grid on the magnetic ring",
    "spectrum": "eigenvalues of the survival operator",
    "density": "undetected probability density on a large ring",
    "bases": "bright and stationary dark basis vectors",
    "census": "count survival eigenvalues away from the unit circle",
    "verify": "pole-duality and route-equivalence checks",
}

COMMANDS = {
    "pdet": cmd_pdet,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "spectrum": cmd_spectrum,
    "density": cmd_density,
    "bases": cmd_bases,
    "census": cmd_census,
    "verify": cmd_verify,
}


def run(cfg: RunConfig) -> ResultRecord:
    rec = COMMANDS[cfg.operation](cfg)
    rec.check_finite()
    return rec


FLAG_DEST = {
    "graph": "kind", "L": "L", "alpha": "alpha", "d": "d", "generations": "generations",
    "gamma": "gamma", "tau": "tau", "r_in": "r_in", "r_d": "r_d", "n_max": "n_max",
    "format": "format", "out": "out", "alphas": "alphas", "taus": "taus", "ns": "ns",
    "threshold": "threshold", "mode": "mode", "samples": "samples",
    "tol_degeneracy": "tol_degeneracy", "tol_phase": "tol_phase", "tol_dark": "tol_dark",
    "tol_routes": "tol_routes", "tol_unit": "tol_unit",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("graph")
    g.add_argument("--graph", choices=graphs.KINDS + tuple(KIND_ALIASES))
    g.add_argument("--L", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--d", type=int)
    g.add_argument("--generations", type=int)
    g.add_argument("--gamma", type=float)
    g.add_argument("--edges", dest="edges_file", help="edge-list file for --graph custom")
    s = common.add_argument_group("setup")
    s.add_argument("--tau", type=float, help="detection period in units of hbar/gamma")
    s.add_argument("--r-in", dest="r_in")
    s.add_argument("--r-d", dest="r_d")
    s.add_argument("--psi-in-file", dest="psi_in_file")
    r = common.add_argument_group("run")
    r.add_argument("--config", help="INI config file or JSON result record")
    r.add_argument("--n-max", dest="n_max", type=int)
    r.add_argument("--alphas", type=parse_grid, help="a,b,c or start:stop:num")
    r.add_argument("--taus", type=parse_grid, help="a,b,c or start:stop:num")
    r.add_argument("--n", dest="ns", type=lambda t: [int(v) for v in parse_grid(t)])
    r.add_argument("--threshold", type=float)
    r.add_argument("--mode", choices=("symmetric", "full"))
    r.add_argument("--samples", type=int)
    o = common.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--out")
    t = common.add_argument_group("tolerances")
    for name in ("degeneracy", "phase", "dark", "routes", "unit"):
        t.add_argument(f"--tol-{name}", dest=f"tol_{name}", type=float)

    parser = argparse.ArgumentParser(prog="qfd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="operation", required=True)
    for name in OPERATIONS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def config_from_args(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    values.pop("operation", None)
    for flag, key in FLAG_DEST.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if args.edges_file:
        values["edges_file"] = args.edges_file
    if args.psi_in_file:
        values["psi_in_file"] = args.psi_in_file
    if values.get("edges_file"):
        gamma = float(values.get("gamma", 1.0))
        spec = graphs.load_adjacency(values.pop("edges_file"), gamma)
        values.update(kind="custom", n_nodes=spec.n_nodes, edges=[list(e) for e in spec.edges])
    if values.get("psi_in_file"):
        values["psi_in"] = read_state_file(values.pop("psi_in_file"))
    values.pop("edges_file", None)
    values.pop("psi_in_file", None)
    for key in ("r_in", "r_d"):
        if values.get(key) is not None:
            values[key] = str(values[key])
    values["operation"] = args.operation
    return RunConfig.from_dict(values)


def _emit(rec: ResultRecord, cfg: RunConfig):
    text = rec.to_json() if cfg.format == "json" else rec.to_csv()
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        rec = run(cfg)
    except (ConfigError, graphs.GraphError, ValueError) as exc:
        print(f"qfd: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConsistencyError as exc:
        _emit(exc.record, cfg)
        print(f"qfd: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (experiments.ResourceGuardError, MemoryError) as exc:
        print(f"qfd: resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    _emit(rec, cfg)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
