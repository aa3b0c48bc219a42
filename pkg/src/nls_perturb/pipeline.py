"""Background -> modes -> corrections -> invariants -> evolution, with on-disk reports."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bdg import DEGENERACY_TOL, check_orthogonality, linearize, mode_momentum, solve_modes
from .config import RunConfig
from .corrections import (momentum_identities, overlap_identities, pair_identities, solve_mode,
                          solve_pair)
from .discretization import build_grid
from .evolution import (PerturbationAssembly, drift_report, half_range, run_assembly)
from .invariants import build_report, linear_only_invariants, quasi_particle_number
from .model import make_model, solve_background

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    config: RunConfig
    background: object = None
    basis: object = None
    corrections: list = field(default_factory=list)
    pairs: dict = field(default_factory=dict)
    report: object = None
    identities: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kw):
            try:
                return fn(*args, **kw)
            except StageError:
                raise
            except Exception as exc:  # noqa: BLE001 - reported with the stage name
                raise StageError(name, exc) from exc
        inner.__name__ = fn.__name__
        return inner
    return wrap


@_stage("background")
def build_background(cfg: RunConfig):
    g = cfg.grid
    grid = build_grid(g.kind, g.n_points, length=g.length, half_width=g.half_width, scheme=g.scheme)
    model = make_model(cfg.model.kind, cfg.model.g, cfg.model.poly_coeffs)
    x = grid.x
    b = cfg.background
    V = b.potential_strength * x**2 if b.potential == "harmonic" else np.zeros_like(x)
    if b.guess == "uniform":
        guess = np.full_like(x, b.amplitude)
    else:
        guess = b.amplitude * np.exp(-0.5 * x * x)
    if grid.kind == "line":
        guess[0] = guess[-1] = 0.0
    return solve_background(b.omega, V, model, guess, grid, tol=b.tol)


@_stage("modes")
def build_modes(cfg: RunConfig, background):
    return solve_modes(linearize(background), cfg.modes.count, method=cfg.modes.method)


@_stage("corrections")
def build_corrections(cfg: RunConfig, basis):
    system, levels = basis.system, basis.spectrum
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        single = list(pool.map(lambda m: solve_mode(m, system, levels), basis.modes))
        keys = []
        if cfg.modes.pairs:
            scale = max(basis.gammas)
            keys = [(a.index, b.index) for i, a in enumerate(basis.modes) for b in basis.modes[i + 1:]
                    if abs(a.gamma - b.gamma) >= DEGENERACY_TOL * scale]
        cross = list(pool.map(lambda k: solve_pair(basis[k[0]], basis[k[1]], system, levels), keys))
    return single, dict(zip(keys, cross))


@_stage("identities")
def build_identities(basis, corrections, pairs) -> dict:
    system = basis.system
    free = system.background.free
    orth = check_orthogonality(basis)
    out = {"orthogonality": {"stringent": orth.stringent, "antisymmetric": orth.antisymmetric,
                             "conjugate": orth.conjugate}}
    single = {}
    for m, c in zip(basis.modes, corrections):
        row = {"A1": abs(overlap_identities(system, m, c)["psi"])}
        if free:
            row["C1"] = abs(momentum_identities(system, m, c)["psi"])
        row["residual_max"] = c.max_residual
        single[str(m.index)] = row
    out["modes"] = single
    paired = {}
    for (n, k), p in pairs.items():
        mn, mk = basis[n], basis[k]
        ids = pair_identities(system, mn, mk, p)
        row = {"A2": abs(ids["rho"]), "A3": abs(ids["theta"]), "residual_max": p.max_residual}
        row["B1_antisymmetric"] = abs(system.grid.integrate(mn.eta * mk.xi - mk.eta * mn.xi))
        row["B1_stringent"] = max(abs(system.grid.integrate(mn.eta * mk.xi)),
                                  abs(system.grid.integrate(mk.eta * mn.xi)))
        row["B2"] = abs(system.grid.integrate(mn.eta * np.conj(mk.xi) + np.conj(mk.eta) * mn.xi))
        if free:
            mids = momentum_identities(system, mn, corrections[n], p, mk)
            row["C2"], row["C3"] = abs(mids["rho"]), abs(mids["theta"])
        paired[f"{n},{k}"] = row
    out["pairs"] = paired
    values = [v for r in list(single.values()) + list(paired.values()) for key, v in r.items()
              if key != "residual_max"]
    out["max"] = max(values + [orth.worst])
    return out


@_stage("invariants")
def build_invariants(cfg: RunConfig, basis, corrections, pairs):
    return build_report(basis, corrections, pairs, alpha=cfg.alpha)


@_stage("evolution")
def build_trajectories(cfg: RunConfig, basis, corrections, pairs):
    ev = cfg.evolve
    corr = {c.index: c for c in corrections}
    asm = PerturbationAssembly(basis, ev.modes, cfg.alpha, corr, pairs)
    full = run_assembly(asm, ev.T, ev.dt, ev.sample_stride)
    linear = run_assembly(asm.linear_only(), ev.T, ev.dt, ev.sample_stride)
    grid = basis.system.grid
    predicted = sum(0.5 * cfg.alpha**2 * abs(grid.integrate(m.xi**2 - m.eta**2)) for m in asm.modes)
    cmp = drift_report(linear, full, predicted)
    summary = {
        "pde_drift": {"full": full.drift, "linear": linear.drift},
        "ansatz_oscillation": {"full": cmp.nonlinear_oscillation, "linear": cmp.linear_oscillation,
                               "predicted_linear": predicted},
        "dt": ev.dt, "steps": full.steps, "order": full.order,
    }
    scan = []
    for a in ev.alpha_scan:
        f2 = run_assembly(asm.with_alpha(a), ev.T, ev.dt, ev.sample_stride, evolve_pde=False)
        l2 = run_assembly(asm.with_alpha(a).linear_only(), ev.T, ev.dt, ev.sample_stride, evolve_pde=False)
        scan.append({"alpha": a, "full": half_range(f2.N_ansatz), "linear": half_range(l2.N_ansatz)})
    summary["alpha_scan"] = scan
    return {"full": full, "linear": linear}, summary


def write_modes_csv(path, basis):
    grid = basis.system.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode_index", "gamma", "class", "residual", "n_tilde", "momentum"])
        for m in basis.modes:
            w.writerow([m.index, repr(m.gamma), m.degeneracy_class, repr(m.residual),
                        repr(quasi_particle_number(grid, m)), repr(mode_momentum(grid, m))])


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def run_pipeline(cfg: RunConfig, command: str = "run") -> PipelineResult:
    """Execute the stages needed by ``command`` and write its artifacts under ``cfg.out``.

    On failure every artifact written so far is removed and :class:`StageError` is raised.
    """
    if command not in ("run", "modes", "verify", "evolve"):
        raise ValueError(f"unknown command {command!r}")
    out = Path(cfg.out)
    res = PipelineResult(cfg)
    try:
        out.mkdir(parents=True, exist_ok=True)
        res.background = build_background(cfg)
        res.basis = build_modes(cfg, res.background)
        if command in ("run", "modes"):
            p = out / "modes.csv"
            res.artifacts.append(p)
            write_modes_csv(p, res.basis)
        if command == "modes":
            return res
        res.corrections, res.pairs = build_corrections(cfg, res.basis)
        if command in ("run", "verify"):
            res.identities = build_identities(res.basis, res.corrections, res.pairs)
            p = out / "identities.json"
            res.artifacts.append(p)
            _write_json(p, res.identities)
        if command == "run":
            res.report = build_invariants(cfg, res.basis, res.corrections, res.pairs)
            for name, writer in (("invariants.csv", res.report.write_csv),
                                 ("invariants.json", res.report.write_json)):
                res.artifacts.append(out / name)
                writer(out / name)
            lin = [vars(r) for r in linear_only_invariants(res.basis, cfg.alpha)]
            res.artifacts.append(out / "linear_only.json")
            _write_json(out / "linear_only.json", {"alpha": cfg.alpha, "modes": lin})
        if command == "evolve" or (command == "run" and cfg.evolve.enabled):
            res.trajectories, summary = build_trajectories(cfg, res.basis, res.corrections, res.pairs)
            for name, traj in (("timeseries.csv", res.trajectories["full"]),
                               ("timeseries_linear.csv", res.trajectories["linear"])):
                res.artifacts.append(out / name)
                traj.write_csv(out / name)
            res.artifacts.append(out / "evolution.json")
            _write_json(out / "evolution.json", summary)
    except BaseException:
        for p in res.artifacts:
            Path(p).unlink(missing_ok=True)
        raise
    return res
