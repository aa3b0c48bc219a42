"""Particle number, energy and momentum carried by nonlinear modes.

All per-mode quantities are stored as ``α``-free coefficients of
unit-normalized modes (``∫(|ξ|² + |η|²) = 1``); reports multiply by ``α²``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .bdg import DEGENERACY_TOL, LinearizedSystem, LinearMode, ModeBasis
from .corrections import ModeCorrections, PairCorrections
from .model import dfdomega_from

CONSISTENCY_TOL = 1e-8


class ConsistencyError(ArithmeticError):
    """Two independent routes to the same invariant disagree."""


class UnsupportedError(ValueError):
    pass


def quasi_particle_number(grid, mode: LinearMode) -> float:
    """``ñ = ½∫(ξη* + ξ*η)``."""
    return float(grid.integrate(mode.xi * np.conj(mode.eta)).real)


def _check(name, a, b, scale, tol=CONSISTENCY_TOL):
    if abs(a - b) > tol * max(scale, abs(a), abs(b)):
        raise ConsistencyError(f"{name}: routes disagree ({a:.12g} vs {b:.12g})")


def particle_number(mode: LinearMode, corr: ModeCorrections, system: LinearizedSystem,
                    dfdomega=None, tol: float = CONSISTENCY_TOL):
    """Per-mode particle number; returns ``(direct, shortcut)``.

    The direct route uses the static correction ``χ+``; the shortcut needs only
    the mode and ``df/dω`` (``L1 y = f``).
    """
    grid, f = system.grid, system.f
    W, J = system.potentials.W, system.potentials.J
    a2, b2 = np.abs(mode.xi) ** 2, np.abs(mode.eta) ** 2
    quad = 0.5 * grid.integrate(a2 + b2)
    direct = float(grid.integrate(f * corr.chi_plus) + quad)
    y = dfdomega if dfdomega is not None else dfdomega_from(system.L1, f)
    shortcut = float(quad - grid.integrate(y * (W * (3 * a2 + b2) + 4 * J * a2)))
    _check(f"particle number of mode {mode.index}", direct, shortcut, quad, tol)
    return direct, shortcut


def energy(mode: LinearMode, Np: float, omega: float, grid) -> tuple[float, float]:
    """``(E_p, released)`` where ``E_p = ω N_p + released`` and ``released = γ ñ``."""
    released = mode.gamma * quasi_particle_number(grid, mode)
    return omega * Np + released, released


def aux_g(system: LinearizedSystem) -> np.ndarray:
    """Solve ``L2 g = ∂f``; only meaningful when ``f`` is not constant."""
    if system.background.uniform:
        raise ValueError("auxiliary g is undefined for a constant background")
    grid = system.grid
    df = grid.gradient(system.f)
    g = system.L2.solve(df, solvability_tol=CONSISTENCY_TOL)
    res = system.L2.residual(g, df)
    if not res < CONSISTENCY_TOL:
        raise ConsistencyError(f"auxiliary g residual {res:.3e}")
    return g


def momentum(mode: LinearMode, corr: ModeCorrections, system: LinearizedSystem,
             g=None, tol: float = CONSISTENCY_TOL):
    """Per-mode momentum; returns ``(direct, shortcut)``.

    Only defined without an external potential.  On a constant background
    ``∂f = 0`` and both routes reduce to the current of the mode.
    """
    if not system.background.free:
        raise UnsupportedError("momentum of nonlinear modes requires a vanishing external potential")
    grid = system.grid
    d = grid.gradient
    xi, eta = mode.xi, mode.eta
    current = grid.integrate(np.conj(xi) * d(eta) - xi * d(np.conj(eta)))
    df = d(system.f)
    direct = 1j * (grid.integrate(df * corr.chi_minus) - 0.5 * current)
    if g is None and not system.background.uniform:
        g = aux_g(system)
    anti = np.conj(xi) * eta - np.conj(eta) * xi
    coupling = grid.integrate(g * system.potentials.W * anti) if g is not None else 0.0
    shortcut = -1j * (0.5 * current + coupling)
    scale = 0.5 * abs(current) + abs(grid.integrate(np.abs(xi) ** 2 + np.abs(eta) ** 2))
    for name, val in (("direct", direct), ("shortcut", shortcut)):
        if abs(val.imag) > 1e-10 * scale:
            raise ConsistencyError(f"momentum ({name}) of mode {mode.index} has imaginary part {val.imag:.3e}")
    _check(f"momentum of mode {mode.index}", direct.real, shortcut.real, scale, tol)
    return float(direct.real), float(shortcut.real)


# -- time-dependent coefficients ----------------------------------------------

def time_dependent_coefficients(basis: ModeBasis, corrections, pairs=None, include_momentum=None):
    """Magnitudes of every coefficient multiplying an oscillating exponential.

    ``corrections`` is a sequence of :class:`ModeCorrections` aligned with
    ``basis.modes`` and ``pairs`` maps ``(n, k)`` to :class:`PairCorrections`.
    Pass zeroed corrections to obtain the linear-only coefficients.
    Returns ``{label: magnitude}`` with labels like ``"N:2g:0"`` or
    ``"E:gn-gk:0,2"``.
    """
    system = basis.system
    grid, f = system.grid, system.f
    if include_momentum is None:
        include_momentum = system.background.free
    d = grid.gradient
    df = d(f)
    out = {}
    for m, c in zip(basis.modes, corrections):
        i = m.index
        out[f"N:lin:{i}"] = abs(grid.integrate(f * m.xi))
        out[f"N:2g:{i}"] = abs(grid.integrate(f * c.psi_plus + 0.25 * (m.xi**2 - m.eta**2)))
        if include_momentum:
            out[f"P:lin:{i}"] = abs(grid.integrate(df * m.eta))
            out[f"P:2g:{i}"] = abs(grid.integrate(df * c.psi_minus - 0.5 * m.xi * d(m.eta)))
    modes = {m.index: m for m in basis.modes}
    for (n, k), p in (pairs or {}).items():
        mn, mk = modes[n], modes[k]
        lab = f"{n},{k}"
        xk_c, ek_c = np.conj(mk.xi), np.conj(mk.eta)
        out[f"N:gn+gk:{lab}"] = abs(grid.integrate(f * p.rho_plus + 0.5 * (mn.xi * mk.xi - mn.eta * mk.eta)))
        out[f"N:gn-gk:{lab}"] = abs(grid.integrate(f * p.theta_plus + 0.5 * (mn.xi * xk_c + mn.eta * ek_c)))
        out[f"E:gn+gk:{lab}"] = abs((mn.gamma - mk.gamma) * grid.integrate(mn.eta * mk.xi - mk.eta * mn.xi))
        out[f"E:gn-gk:{lab}"] = abs((mn.gamma + mk.gamma) * grid.integrate(mn.eta * xk_c + ek_c * mn.xi))
        out[f"E:stringent:{lab}"] = max(abs(grid.integrate(mn.eta * mk.xi)), abs(grid.integrate(mk.eta * mn.xi)))
        if include_momentum:
            out[f"P:gn+gk:{lab}"] = abs(grid.integrate(
                df * p.rho_minus - 0.5 * (mk.xi * d(mn.eta) + mn.xi * d(mk.eta))))
            out[f"P:gn-gk:{lab}"] = abs(grid.integrate(
                df * p.theta_minus - 0.5 * (xk_c * d(mn.eta) - mn.xi * d(ek_c))))
    return {k: float(v) for k, v in out.items()}


def zero_corrections(basis: ModeBasis, pairs=True):
    """Corrections set to zero everywhere, for the linear-only truncation."""
    z = np.zeros(basis.system.grid.n_points)
    single = [ModeCorrections(m.index, z, z, z, z, {}) for m in basis.modes]
    cross = {}
    if pairs:
        scale = max(basis.gammas)
        for i, mn in enumerate(basis.modes):
            for mk in basis.modes[i + 1:]:
                if abs(mn.gamma - mk.gamma) >= DEGENERACY_TOL * scale:
                    cross[(mn.index, mk.index)] = PairCorrections(mn.index, mk.index, z, z, z, z, {})
    return single, cross


# -- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class ModeRow:
    index: int
    gamma: float
    Np: float
    Ep: float
    Pp_x: float
    n_tilde: float
    released: float
    Np_shortcut: float
    Pp_shortcut: float
    coeff_max: float = 0.0


@dataclass(frozen=True)
class InvariantReport:
    """Per-mode coefficients (``α``-free) and the amplitude they are reported at."""

    rows: tuple
    alpha: float
    time_dependent: dict = field(default_factory=dict)

    def scaled(self, name: str) -> np.ndarray:
        return self.alpha**2 * np.array([getattr(r, name) for r in self.rows])

    @property
    def totals(self) -> dict:
        return {q: float(np.sum(self.scaled(q))) for q in ("Np", "Ep", "Pp_x")}

    @property
    def released_energy(self) -> float:
        return float(np.sum(self.scaled("released")))

    @property
    def coeff_max(self) -> float:
        return max(self.time_dependent.values(), default=0.0)

    def to_dict(self) -> dict:
        a2 = self.alpha**2
        return {
            "alpha": self.alpha,
            "modes": [{"mode_index": r.index, "gamma": r.gamma, "Np": a2 * r.Np, "Ep": a2 * r.Ep,
                       "Pp_x": a2 * r.Pp_x, "n_tilde": a2 * r.n_tilde,
                       "Np_shortcut": a2 * r.Np_shortcut, "Pp_shortcut": a2 * r.Pp_shortcut,
                       "coeff_max": r.coeff_max} for r in self.rows],
            "totals": self.totals,
            "released_energy": self.released_energy,
            "time_dependent": dict(sorted(self.time_dependent.items())),
        }

    def write_csv(self, path):
        a2 = self.alpha**2
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode_index", "gamma", "Np", "Ep", "Pp_x", "coeff_max"])
            for r in self.rows:
                w.writerow([r.index, repr(r.gamma), repr(a2 * r.Np), repr(a2 * r.Ep),
                            repr(a2 * r.Pp_x), repr(r.coeff_max)])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _coeff_max_for(index, coeffs):
    vals = [v for k, v in coeffs.items() if str(index) in k.rsplit(":", 1)[1].split(",")]
    return max(vals, default=0.0)


def build_report(basis: ModeBasis, corrections, pairs=None, alpha: float = 1.0,
                 tol: float = CONSISTENCY_TOL) -> InvariantReport:
    system = basis.system
    grid, bg = system.grid, system.background
    y = dfdomega_from(system.L1, system.f)
    g = aux_g(system) if bg.free and not bg.uniform else None
    coeffs = time_dependent_coefficients(basis, corrections, pairs)
    rows = []
    for m, c in zip(basis.modes, corrections):
        Np, Np2 = particle_number(m, c, system, y, tol)
        Ep, released = energy(m, Np, bg.omega, grid)
        if bg.free:
            Pp, Pp2 = momentum(m, c, system, g, tol)
        else:
            Pp = Pp2 = float("nan")
        rows.append(ModeRow(m.index, m.gamma, Np, Ep, Pp, quasi_particle_number(grid, m), released,
                            Np2, Pp2, _coeff_max_for(m.index, coeffs)))
    return InvariantReport(tuple(rows), float(alpha), coeffs)


@dataclass(frozen=True)
class LinearOnlyRow:
    index: int
    gamma: float
    Np_linear: float        # ½∫(|ξ|² + |η|²)
    oscillation: float      # ½|∫(ξ² - η²)|, amplitude of the 2γ term
    n_tilde: float


def linear_only_invariants(basis: ModeBasis, alpha: float = 1.0):
    """Particle number of the truncation without corrections, per mode.

    ``N'(t) = N0 + α² Σ [Np_linear + oscillation·cos(2γt + phase)]`` for
    modes whose pair cross terms vanish.  Values are returned scaled by ``α²``.
    """
    grid = basis.system.grid
    a2 = alpha**2
    rows = []
    for m in basis.modes:
        lin = 0.5 * grid.integrate(np.abs(m.xi) ** 2 + np.abs(m.eta) ** 2)
        osc = 0.5 * abs(grid.integrate(m.xi**2 - m.eta**2))
        rows.append(LinearOnlyRow(m.index, m.gamma, a2 * float(lin), a2 * float(osc),
                                  a2 * quasi_particle_number(grid, m)))
    return rows
