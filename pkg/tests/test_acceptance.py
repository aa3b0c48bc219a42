"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``.
"""
import json
import math

import numpy as np
import pytest

from nls_perturb.bdg import LinearMode, lift_degeneracy, linearize, solve_modes
from nls_perturb.cli import main
from nls_perturb.corrections import ModeCorrections, chi_sources, solve_all, solve_pair
from nls_perturb.discretization import build_grid
from nls_perturb.evolution import (PerturbationAssembly, assemble_field, drift_report, energy_functional,
                                   evolve, fit_exponent, fit_oscillation, momentum_functional,
                                   particle_number_functional, run_assembly)
from nls_perturb.invariants import (build_report, linear_only_invariants, momentum, particle_number,
                                    time_dependent_coefficients)
from nls_perturb.model import GrossPitaevskii, background_energy, background_norm, certify
from nls_perturb.pipeline import build_identities
from nls_perturb.reference import (GPModeSpec, bogoliubov_gamma, gp_mode_invariants,
                                   log_amplitude_ratio, log_gamma)

from conftest import gaussian_background

ALPHAS = (4e-3, 8e-3, 1.6e-2)


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:2d} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return report


def _uniform_gp(n_points=128, length=2 * math.pi):
    grid = build_grid("periodic", n_points, length=length)
    return certify(grid, np.ones(n_points), 1.0, np.zeros(n_points), GrossPitaevskii(1.0))


def test_criterion_01_bogoliubov_dispersion(verdict):
    basis = solve_modes(linearize(_uniform_gp()), 8)
    ks = np.array([1, 1, 2, 2, 3, 3, 4, 4])
    err = np.max(np.abs(basis.gammas / bogoliubov_gamma(ks, 1.0) - 1))
    ok = err < 1e-9 and abs(basis[0].gamma - math.sqrt(3)) < 1e-9 * math.sqrt(3)
    assert verdict(1, ok, f"8 box modes, max relative error {err:.2e} (k=1: {basis[0].gamma:.12f})")


def test_criterion_02_log_spectrum(verdict):
    bg = gaussian_background(1601, 12.0)
    basis = solve_modes(linearize(bg), 5)
    grid = basis.system.grid
    gam_err = ratio_err = 0.0
    for m in basis.modes:
        n = m.index + 2
        gam_err = max(gam_err, abs(m.gamma / log_gamma((n,)) - 1))
        ratio = grid.norm(m.xi) / grid.norm(m.eta)
        ratio_err = max(ratio_err, abs(ratio / log_amplitude_ratio((n,)) - 1))
    ok = gam_err < 1e-5 and ratio_err < 1e-5
    assert verdict(2, ok, f"n=2..6 on [-12,12]/1601: gamma rel err {gam_err:.2e}, amplitude ratio rel err {ratio_err:.2e}")


def test_criterion_03_identity_suite(verdict, gp_basis, gp_solved, log_basis, log_solved):
    worst, keys, counts = 0.0, set(), []
    for basis, (single, pairs) in ((gp_basis, gp_solved), (log_basis, log_solved)):
        ids = build_identities(basis, single, pairs)
        worst = max(worst, ids["max"])
        for row in list(ids["modes"].values()) + list(ids["pairs"].values()):
            keys |= set(row)
        nondegenerate = sum(1 for i in range(len(basis)) for k in range(i + 1, len(basis))
                            if basis[i].degeneracy_class != basis[k].degeneracy_class)
        assert len(pairs) == nondegenerate
        counts.append((len(basis), len(pairs)))
    expected = {"A1", "A2", "A3", "B1_antisymmetric", "B1_stringent", "B2", "C1", "C2", "C3"}
    ok = worst < 1e-8 and expected <= keys and all(n >= 3 for n, _ in counts)
    assert verdict(3, ok, f"9 identities, (modes, pairs) gp={counts[0]} log={counts[1]}, max {worst:.2e}")


def test_criterion_04_gp_closed_forms(verdict, gp_basis, gp_solved):
    report = build_report(gp_basis, *gp_solved)
    err, bound_ok = 0.0, True
    for r in report.rows:
        k = r.Pp_x / r.n_tilde
        ref = gp_mode_invariants(GPModeSpec(round(k), 1.0, 1.0))
        err = max(err, abs(r.Np / r.n_tilde - ref["Np"]), abs(r.Ep / r.n_tilde - ref["Ep"]),
                  abs(r.Pp_x / r.n_tilde - ref["Pp"]))
        bound_ok &= r.Ep >= math.sqrt(0.5) * abs(r.Pp_x)
    unit = [report.rows[0].Np / report.rows[0].n_tilde, report.rows[0].Ep / report.rows[0].n_tilde]
    ok = err < 1e-6 and bound_ok
    assert verdict(4, ok, f"k=±1..±3 per quasi-particle max error {err:.2e}; k=1 -> Np={unit[0]:.7f}, "
                          f"Ep={unit[1]:.7f}; phonon bound {'holds' if bound_ok else 'violated'}")


def test_criterion_05_two_routes(verdict, log_basis, log_solved):
    single, _ = log_solved
    system = log_basis.system
    n_err = p_err = 0.0
    for m, c in zip(log_basis.modes, single):
        a, b = particle_number(m, c, system)
        n_err = max(n_err, abs(a - b) / 0.5)          # ½∫(|ξ|²+|η|²) sets the scale
        d, s = momentum(m, c, system)
        p_err = max(p_err, abs(d - s) / max(abs(d), abs(s), 1.0))
    # real modes carry no momentum; compare the routes on the complex combination of n=2 and n=3,
    # whose χ- source is solvable by parity
    m0, m1 = log_basis[0], log_basis[1]
    moving = LinearMode(0, m0.gamma, m0.xi + 1j * m1.xi, m0.eta + 1j * m1.eta, (0.0, 0.0))
    _, rm = chi_sources(system, moving)
    chi_m = system.L2.solve(rm.real) + 1j * system.L2.solve(rm.imag)
    z = np.zeros_like(moving.xi)
    d, s = momentum(moving, ModeCorrections(0, z, chi_m, z, z, {}), system)
    p_err = max(p_err, abs(d - s) / max(abs(d), abs(s)))
    ok = n_err < 1e-8 and p_err < 1e-8 and abs(d) > 1e-3
    assert verdict(5, ok, f"logarithmic background: N routes {n_err:.2e}, P routes {p_err:.2e} "
                          f"(complex n=2,3 field P={d:.6f})")


def test_criterion_06_nonconservation(verdict, log_basis, log_solved):
    single, pairs = log_solved
    m = log_basis[0]
    grid = log_basis.system.grid
    asm = PerturbationAssembly(log_basis, (0,), 1e-2, {c.index: c for c in single}, pairs)
    T = 2 * (2 * math.pi / m.gamma)
    dt = T / 800
    lin = run_assembly(asm.linear_only(), T, dt, sample_stride=4)
    full = run_assembly(asm, T, dt, sample_stride=4)
    predicted = 0.5 * 1e-4 * abs(grid.integrate(m.xi**2 - m.eta**2))
    rep = drift_report(lin, full, predicted, 2 * m.gamma)
    amps = []
    for a in ALPHAS:
        run = run_assembly(asm.linear_only().with_alpha(a), T, dt, sample_stride=4, evolve_pde=False)
        amps.append(fit_oscillation(run.times, run.N_ansatz, 2 * m.gamma)[1])
    p = fit_exponent(ALPHAS, amps)
    pde_drift = max(lin.relative_drift("N"), full.relative_drift("N"))
    ok = abs(rep.ratio_to_prediction - 1) < 0.05 and rep.suppression >= 10 and abs(p - 2) <= 0.1
    assert verdict(6, ok, f"n=2, alpha=1e-2: amplitude/prediction {rep.ratio_to_prediction:.4f}, "
                          f"suppression {rep.suppression:.1f}x, exponent {p:.3f}; PDE N drift {pde_drift:.1e}")


def test_criterion_07_additivity(verdict, log_background, log_basis, log_solved):
    single, pairs = log_solved
    corr = {c.index: c for c in single}
    bg, grid = log_background, log_basis.system.grid

    def invariants(psi):
        return np.array([particle_number_functional(psi, grid),
                         energy_functional(psi, grid, bg.potential, bg.model),
                         momentum_functional(psi, grid)])

    base = invariants(bg.f.astype(complex))

    def cross(alpha):
        q = lambda idx: invariants(assemble_field(PerturbationAssembly(log_basis, idx, alpha, corr, pairs))) - base
        return q((0, 2)) - q((0,)) - q((2,))

    scan = np.array([cross(a) for a in ALPHAS])
    exps = [fit_exponent(ALPHAS, scan[:, j]) for j in range(2)]
    at = np.max(np.abs(cross(1e-2)))
    report = build_report(log_basis, single, pairs)
    scale = max(abs(v) for r in report.rows for v in (r.Np, r.Ep, r.Pp_x))
    ok = min(exps) >= 2.7 and at < 1e-5 * scale
    assert verdict(7, ok, f"modes n=2,4: cross-term exponents N {exps[0]:.2f}, E {exps[1]:.2f}; "
                          f"at alpha=1e-2 |cross| {at:.2e} vs 1e-5*scale {1e-5 * scale:.2e}")


def test_criterion_08_epsilon_trick(verdict, gp_background, gp_basis):
    single, _ = solve_all(gp_basis, pairs=False)
    base = build_report(gp_basis, single, None)
    x = gp_basis.system.grid.x
    dW = sum(np.cos(2 * j * x) / j for j in (1, 2, 3))
    classes = gp_basis.classes
    sums = lambda rep, q: [sum(getattr(rep.rows[i], q) for i in c) for c in classes]
    eps = (1e-2, 1e-3, 1e-4)
    series, cross_ne, cross_p = [], 0.0, 0.0
    for e in eps:
        bn = lift_degeneracy(gp_basis, dW, None, e)
        cn, _ = solve_all(bn, pairs=False)
        rn = build_report(bn, cn, None)
        bp = lift_degeneracy(gp_basis, dW, -2 * gp_background.f * dW, e)
        cp, _ = solve_all(bp, pairs=False)
        rp = build_report(bp, cp, None)
        series.append(sums(rn, "Np") + sums(rn, "Ep") + sums(rp, "Pp_x"))
        if e > 1e-4:   # the in-class difference frequency is too close to the gauge zero mode at 1e-4
            inpairs = {c: solve_pair(bn[c[0]], bn[c[1]], bn.system) for c in classes}
            td = time_dependent_coefficients(bn, cn, inpairs)
            cross_ne = max(cross_ne, max(v for k, v in td.items() if k[0] in "NE" and ":g" in k))
            inpairs = {c: solve_pair(bp[c[0]], bp[c[1]], bp.system) for c in classes}
            td = time_dependent_coefficients(bp, cp, inpairs)
            cross_p = max(cross_p, max(v for k, v in td.items() if k.startswith("P:gn-gk")))
    series = np.array(series)
    extrap = np.array([np.polyval(np.polyfit(eps, series[:, j], 2), 0.0) for j in range(series.shape[1])])
    target = np.array(sums(base, "Np") + sums(base, "Ep") + sums(base, "Pp_x"))
    err = np.max(np.abs(extrap - target))
    ok = err < 1e-6 and cross_ne < 1e-8
    assert verdict(8, ok, f"3 ±k classes: extrapolated pair sums vs per-mode sums {err:.2e}; "
                          f"in-class N/E cross {cross_ne:.1e}; in-class P cross {cross_p:.3f} (standing-wave basis)")


def test_criterion_09_thermodynamics(verdict):
    h = 1e-4
    rel = {}
    families = {
        "gp": lambda w: certify(build_grid("periodic", 64, length=2 * math.pi), np.full(64, math.sqrt(w)), w,
                                np.zeros(64), GrossPitaevskii(1.0)),
        "log": lambda w: gaussian_background(401, 10.0, math.exp((1.0 - w) / 2)),
    }
    for name, state in families.items():
        dE = (background_energy(state(1 + h)) - background_energy(state(1 - h))) / (2 * h)
        dN = (background_norm(state(1 + h)) - background_norm(state(1 - h))) / (2 * h)
        rel[name] = abs(dE - dN) / abs(dN)
    # smallest box mode k = 0.05 needs a box of length 2π/0.05
    basis = solve_modes(linearize(_uniform_gp(128, 2 * math.pi / 0.05)), 2)
    row = linear_only_invariants(basis)[0]
    law = row.Np_linear / row.n_tilde
    law_err = abs(law / (math.sqrt(0.5) / 0.05) - 1)
    ok = max(rel.values()) < 1e-5 and law_err < 0.02
    assert verdict(9, ok, f"dE/dw = w dN/dw rel err gp {rel['gp']:.1e}, log {rel['log']:.1e}; "
                          f"k=0.05 N'/n = {law:.3f} ({100 * law_err:.2f}% off)")


def test_criterion_10_integrator_and_determinism(verdict, log_background, tmp_path, capsys):
    drifts = []
    for bg in (log_background, _uniform_gp()):
        d = evolve(bg.f.astype(complex), 50.0, 1e-3, bg.grid, bg.potential, bg.model, sample_stride=500)
        drifts += [d.relative_drift("N"), d.relative_drift("E")]
    cfg = tmp_path / "run.toml"
    cfg.write_text('scenario = "log"\n[evolve]\nenabled = true\nT = 0.5\ndt = 0.005\nsample_stride = 10\n')
    codes = [main(["run", "--config", str(cfg), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    capsys.readouterr()
    names = sorted(p.name for p in (tmp_path / "a").glob("*.json"))
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    json.loads((tmp_path / "a" / "evolution.json").read_text())
    ok = max(drifts) < 1e-9 and codes == [0, 0] and same and len(names) == 4
    assert verdict(10, ok, f"T=50 max relative N/E drift {max(drifts):.1e}; {len(names)} JSON reports "
                           f"{'bit-identical' if same else 'DIFFER'} across runs")
