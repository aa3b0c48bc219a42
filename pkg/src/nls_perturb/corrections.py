"""Second-order corrections driven by products of linear modes.

Every correction is the response of the linearized operators to a quadratic
source.  Static ones (``χ±``) are single projected solves; oscillating ones
at frequency ``Ω`` solve the block system::

    [ L1  -Ω ] [x+]   [r+]
    [ -Ω  L2 ] [x-] = [r-]
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .bdg import DEGENERACY_TOL, LinearizedSystem, LinearMode

#: block systems whose 1-norm condition estimate exceeds this are treated as resonant
RESONANCE_COND = 1e12
SOLVE_TOL = 1e-8


class ResonanceError(ArithmeticError):
    def __init__(self, message, omega=None, clash=None):
        super().__init__(message)
        self.omega = omega
        self.clash = clash


@dataclass(frozen=True, eq=False)
class ModeCorrections:
    index: int
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    residuals: dict

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


@dataclass(frozen=True, eq=False)
class PairCorrections:
    n: int
    k: int
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    residuals: dict

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


# -- sources ------------------------------------------------------------------

def chi_sources(system: LinearizedSystem, mode: LinearMode):
    W, J = system.potentials.W, system.potentials.J
    xi, eta = mode.xi, mode.eta
    a2, b2 = np.abs(xi) ** 2, np.abs(eta) ** 2
    rp = -W * (3 * a2 + b2) - 4 * J * a2
    rm = -W * (np.conj(xi) * eta - np.conj(eta) * xi)
    return rp, rm


def psi_sources(system: LinearizedSystem, mode: LinearMode):
    W, J = system.potentials.W, system.potentials.J
    xi, eta = mode.xi, mode.eta
    rp = -W * (1.5 * xi**2 - 0.5 * eta**2) - 2 * J * xi**2
    rm = -W * xi * eta
    return rp, rm


def rho_sources(system: LinearizedSystem, mn: LinearMode, mk: LinearMode):
    W, J = system.potentials.W, system.potentials.J
    rp = -W * (3 * mn.xi * mk.xi - mn.eta * mk.eta) - 4 * J * mn.xi * mk.xi
    rm = -W * (mn.xi * mk.eta + mn.eta * mk.xi)
    return rp, rm


def theta_sources(system: LinearizedSystem, mn: LinearMode, mk: LinearMode):
    W, J = system.potentials.W, system.potentials.J
    xk, ek = np.conj(mk.xi), np.conj(mk.eta)
    rp = -W * (3 * mn.xi * xk + mn.eta * ek) - 4 * J * mn.xi * xk
    rm = -W * (mn.eta * xk - mn.xi * ek)
    return rp, rm


# -- solvers ------------------------------------------------------------------

def _rel_residual(grid, lhs, rhs, scale):
    num = grid.norm(lhs - rhs)
    return float(num / scale) if scale else float(num)


def _chop(grid, rhs, scale):
    """Zero a source that is pure roundoff relative to ``scale``."""
    if grid.norm(rhs) <= 1e-10 * scale:
        return np.zeros_like(rhs)
    return rhs


def _static(op, rhs, scale=0.0):
    """Projected minimal-norm solve; real and imaginary parts separately."""
    rhs = np.asarray(rhs)
    if np.iscomplexobj(rhs):
        rhs = _chop(op.grid, rhs.real, scale) + 1j * _chop(op.grid, rhs.imag, scale)
        re = op.solve(rhs.real, solvability_tol=SOLVE_TOL)
        im = op.solve(rhs.imag, solvability_tol=SOLVE_TOL)
        out = re + 1j * im
        return out.real if not np.any(out.imag) else out
    return op.solve(rhs, solvability_tol=SOLVE_TOL)


def _source_scale(system, mode):
    W = system.potentials.W
    return system.grid.norm(np.abs(W) * (np.abs(mode.xi) ** 2 + np.abs(mode.eta) ** 2))


def solve_chi(mode: LinearMode, system: LinearizedSystem):
    """Static corrections ``(χ+, χ-)`` of one mode."""
    rp, rm = chi_sources(system, mode)
    grid, scale = system.grid, _source_scale(system, mode)
    chi_p = _static(system.L1, _chop(grid, rp, scale), scale)
    chi_m = _static(system.L2, _chop(grid, rm, scale), scale)
    return chi_p, chi_m


def _block_matrix(system, omega):
    L1, L2 = system.L1, system.L2
    m = system.grid.n_active
    if L1.is_sparse:
        eye = sp.identity(m, format="csr")
        return sp.bmat([[L1.matrix, -omega * eye], [-omega * eye, L2.matrix]], format="csc")
    eye = np.eye(m)
    return np.block([[L1.matrix, -omega * eye], [-omega * eye, L2.matrix]])


def block_condition(system: LinearizedSystem, omega: float) -> float:
    """1-norm condition estimate of the block operator at frequency ``omega``."""
    A = _block_matrix(system, omega)
    if sp.issparse(A):
        lu = spla.splu(A)
        inv = spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"))
        return float(spla.onenormest(A) * spla.onenormest(inv))
    lu, piv = sla.lu_factor(A, check_finite=False)
    rcond, _ = lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")
    return float(np.inf if rcond == 0 else 1.0 / rcond)


def solve_block(system: LinearizedSystem, omega: float, rp, rm, spectrum=None):
    """Solve the frequency-``omega`` block system; raises :class:`ResonanceError` near a mode."""
    grid = system.grid
    A = _block_matrix(system, omega)
    rhs = np.concatenate([grid.restrict(rp), grid.restrict(rm)])
    complex_rhs = np.iscomplexobj(rhs)
    cols = np.column_stack([rhs.real, rhs.imag]) if complex_rhs else rhs[:, None]
    if sp.issparse(A):
        lu = spla.splu(A)
        inv = spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"))
        cond = spla.onenormest(A) * spla.onenormest(inv)
        sol = lu.solve(cols)
    else:
        lu, piv = sla.lu_factor(A, check_finite=False)
        rcond, _ = lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")
        cond = np.inf if rcond == 0 else 1.0 / rcond
        sol = sla.lu_solve((lu, piv), cols, check_finite=False)
    if not cond < RESONANCE_COND:
        clash = None
        msg = f"block system at Ω = {omega:.10g} is resonant (condition {cond:.2e})"
        if spectrum is not None and len(spectrum):
            levels = np.concatenate([[0.0], np.asarray(spectrum)])
            clash = float(levels[np.argmin(np.abs(levels - abs(omega)))])
            msg += f"; clashes with mode frequency γ = {clash:.10g}"
        raise ResonanceError(msg, omega, clash)
    x = sol[:, 0] + 1j * sol[:, 1] if complex_rhs else sol[:, 0]
    m = grid.n_active
    xp, xm = grid.extend(x[:m]), grid.extend(x[m:])
    scale = grid.norm(rp) + grid.norm(rm)
    res = (_rel_residual(grid, system.L1.apply(xp) - omega * xm, rp, scale)
           + _rel_residual(grid, system.L2.apply(xm) - omega * xp, rm, scale))
    return xp, xm, res


def solve_psi(mode: LinearMode, system: LinearizedSystem, spectrum=None):
    """Second-harmonic corrections ``(ψ+, ψ-)`` at ``2γ``."""
    rp, rm = psi_sources(system, mode)
    return solve_block(system, 2 * mode.gamma, rp, rm, spectrum)


def solve_mode(mode: LinearMode, system: LinearizedSystem, spectrum=None) -> ModeCorrections:
    grid = system.grid
    chi_p, chi_m = solve_chi(mode, system)
    rp, rm = chi_sources(system, mode)
    psi_p, psi_m, res_psi = solve_psi(mode, system, spectrum)
    scale = _source_scale(system, mode)
    residuals = {
        "chi_plus": _rel_residual(grid, system.L1.apply(chi_p), rp, max(grid.norm(rp), scale)),
        "chi_minus": _rel_residual(grid, system.L2.apply(chi_m), rm, max(grid.norm(rm), scale)),
        "psi": res_psi,
    }
    return ModeCorrections(mode.index, chi_p, chi_m, psi_p, psi_m, residuals)


def solve_pair(mode_n: LinearMode, mode_k: LinearMode, system: LinearizedSystem,
               spectrum=None) -> PairCorrections:
    """Cross corrections ``ρ±`` at ``γn + γk`` and ``θ±`` at ``γn - γk``."""
    if not mode_n.index < mode_k.index:
        raise ValueError(f"pair must be ordered n < k (got {mode_n.index}, {mode_k.index})")
    scale = max(mode_n.gamma, mode_k.gamma)
    if abs(mode_n.gamma - mode_k.gamma) < DEGENERACY_TOL * scale:
        raise ValueError(f"modes {mode_n.index} and {mode_k.index} are degenerate "
                         f"(γ = {mode_n.gamma:.10g}); lift the degeneracy first")
    rho_p, rho_m, res_rho = solve_block(system, mode_n.gamma + mode_k.gamma,
                                        *rho_sources(system, mode_n, mode_k), spectrum)
    th_p, th_m, res_th = solve_block(system, mode_n.gamma - mode_k.gamma,
                                     *theta_sources(system, mode_n, mode_k), spectrum)
    return PairCorrections(mode_n.index, mode_k.index, rho_p, rho_m, th_p, th_m,
                           {"rho": res_rho, "theta": res_th})


def solve_all(basis, pairs: bool = True):
    """Corrections for every mode of ``basis`` and every ordered nondegenerate pair."""
    system = basis.system
    single = [solve_mode(m, system, basis.spectrum) for m in basis.modes]
    cross = {}
    if pairs:
        scale = max(basis.gammas)
        for i, mn in enumerate(basis.modes):
            for mk in basis.modes[i + 1:]:
                if abs(mn.gamma - mk.gamma) < DEGENERACY_TOL * scale:
                    continue
                cross[(mn.index, mk.index)] = solve_pair(mn, mk, system, basis.spectrum)
    return single, cross


def overlap_identities(system: LinearizedSystem, mode: LinearMode, corr: ModeCorrections):
    """Integrals that must vanish for a solved mode (static and second harmonic)."""
    grid, f = system.grid, system.f
    return {
        "psi": complex(grid.integrate(f * corr.psi_plus + 0.25 * (mode.xi**2 - mode.eta**2))),
    }


def pair_identities(system: LinearizedSystem, mn: LinearMode, mk: LinearMode, corr: PairCorrections):
    grid, f = system.grid, system.f
    return {
        "rho": complex(grid.integrate(f * corr.rho_plus + 0.5 * (mn.xi * mk.xi - mn.eta * mk.eta))),
        "theta": complex(grid.integrate(f * corr.theta_plus
                                        + 0.5 * (mn.xi * np.conj(mk.xi) + mn.eta * np.conj(mk.eta)))),
    }


def momentum_identities(system: LinearizedSystem, mode: LinearMode, corr: ModeCorrections,
                        pair=None, partner: LinearMode | None = None):
    """Gradient overlaps that vanish on potential-free backgrounds."""
    grid = system.grid
    df = grid.gradient(system.f)
    d = grid.gradient
    out = {"psi": complex(grid.integrate(df * corr.psi_minus - 0.5 * mode.xi * d(mode.eta)))}
    if pair is not None:
        mn, mk = mode, partner
        out["rho"] = complex(grid.integrate(df * pair.rho_minus
                                            - 0.5 * (mk.xi * d(mn.eta) + mn.xi * d(mk.eta))))
        out["theta"] = complex(grid.integrate(df * pair.theta_minus
                                              - 0.5 * (np.conj(mk.xi) * d(mn.eta)
                                                       - mn.xi * d(np.conj(mk.eta)))))
    return out
