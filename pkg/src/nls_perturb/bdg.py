"""Linear oscillation modes ``L1 ξ = γ η``, ``L2 η = γ ξ`` and degeneracy lifting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import Operator, assemble_operator
from .model import Background, DerivedPotentials, eval_potentials

log = logging.getLogger(__name__)

GAMMA_MIN = 1e-6
DEGENERACY_TOL = 1e-8
IMAG_TOL = 1e-8
RESIDUAL_TOL = 1e-8


class InstabilityError(ArithmeticError):
    """The linearization has a non-real frequency: the background is dynamically unstable."""


class DegeneracyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    """A background together with the potentials and operators built from it.

    ``potentials`` may differ from :func:`eval_potentials` of the background
    when the system was modified for degeneracy lifting.
    """

    background: Background
    potentials: DerivedPotentials
    L1: Operator
    L2: Operator
    epsilon: float = 0.0

    @property
    def grid(self):
        return self.background.grid

    @property
    def f(self):
        return self.background.f


def linearize(background: Background, potentials: DerivedPotentials | None = None,
              epsilon: float = 0.0) -> LinearizedSystem:
    potentials = potentials if potentials is not None else eval_potentials(background)
    return LinearizedSystem(background, potentials,
                            assemble_operator("L1", background, potentials),
                            assemble_operator("L2", background, potentials), epsilon)


@dataclass(frozen=True, eq=False)
class LinearMode:
    index: int
    gamma: float
    xi: np.ndarray
    eta: np.ndarray
    residuals: tuple
    degeneracy_class: int = 0

    @property
    def residual(self) -> float:
        return self.residuals[0] + self.residuals[1]


def mode_quasi_particles(grid, mode: LinearMode) -> float:
    return float(grid.integrate(mode.xi * np.conj(mode.eta)).real)


def mode_momentum(grid, mode: LinearMode) -> float:
    """``∫ Im(ξ* ∂ξ + η* ∂η)`` - the wavenumber content of a mode."""
    return float(grid.integrate(np.conj(mode.xi) * grid.gradient(mode.xi)
                                + np.conj(mode.eta) * grid.gradient(mode.eta)).imag)


@dataclass(frozen=True, eq=False)
class ModeBasis:
    system: LinearizedSystem
    modes: tuple
    classes: tuple
    spectrum: np.ndarray = field(repr=False)
    zero_modes: tuple = ()

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i) -> LinearMode:
        return self.modes[i]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([m.gamma for m in self.modes])

    def representatives(self) -> list:
        """First mode of every degeneracy class (pairwise nondegenerate)."""
        return [self.modes[c[0]] for c in self.classes]


def mode_residuals(system: LinearizedSystem, xi, eta, gamma):
    grid = system.grid
    scale = grid.norm(xi) + grid.norm(eta)
    r1 = grid.norm(system.L1.apply(xi) - gamma * eta) / scale
    r2 = grid.norm(system.L2.apply(eta) - gamma * xi) / scale
    return float(r1), float(r2)


def _classes(gammas, tol):
    if not len(gammas):
        return ()
    scale = max(gammas)
    groups, current = [], [0]
    for i in range(1, len(gammas)):
        if abs(gammas[i] - gammas[current[0]]) < tol * scale:
            current.append(i)
        else:
            groups.append(tuple(current))
            current = [i]
    groups.append(tuple(current))
    return tuple(groups)


def _symmetrized_candidates(system, gamma_min):
    """All positive frequencies from ``S L1 S`` with ``S = sqrt(L2)`` on the range of L2."""
    L1, L2 = system.L1, system.L2
    lam, Q = L2.spectrum
    tol = L2.kernel_tolerance
    if lam[0] < -tol:
        return None
    keep = lam > tol
    R = Q[:, keep] * np.sqrt(lam[keep])
    M = R.T @ L1.dense() @ R
    mu, U = sla.eigh(0.5 * (M + M.T))
    zero_tol = max(gamma_min**2, 1e-12 * float(np.max(np.abs(mu))))
    if mu[0] < -zero_tol:
        raise InstabilityError(f"imaginary frequency γ = {np.sqrt(-mu[0]):.6g}i: background is unstable")
    pos = mu > zero_tol
    gam = np.sqrt(mu[pos])
    xis = R @ U[:, pos]
    zeros = int(np.count_nonzero(~keep) + np.count_nonzero(np.abs(mu) <= zero_tol))
    return gam, xis, zeros


def _block_candidates(system, gamma_min, count=None):
    """Eigenpairs of ``[[0, L1], [L2, 0]]`` acting on ``(η, ξ)``."""
    L1, L2 = system.L1, system.L2
    m = system.grid.n_active
    if L1.is_sparse:
        B = sp.bmat([[None, L1.matrix], [L2.matrix, None]], format="csc")
        k = min(2 * (count or 8) + 8, 2 * m - 2)
        vals, vecs = spla.eigs(B, k=k, sigma=1e-3, which="LM")
    else:
        B = np.block([[np.zeros((m, m)), L1.dense()], [L2.dense(), np.zeros((m, m))]])
        vals, vecs = sla.eig(B)
    scale = float(np.max(np.abs(vals)))
    zero = np.abs(vals) < max(gamma_min, 1e-6 * scale)
    unstable = (~zero) & (np.abs(vals.imag) > IMAG_TOL * np.maximum(1.0, np.abs(vals)))
    if np.any(unstable):
        worst = vals[unstable][np.argmax(np.abs(vals[unstable].imag))]
        raise InstabilityError(f"complex frequency γ = {worst:.6g}: background is unstable")
    sel = (~zero) & (vals.real > 0)
    order = np.argsort(vals.real[sel])
    gam = vals.real[sel][order]
    xis = vecs[m:, sel][:, order].real
    return gam, xis, int(np.count_nonzero(zero) // 2)


def _refine(system, gamma, xis):
    """One inverse-iteration step on the block operator, shared over a degenerate class."""
    L1, L2 = system.L1, system.L2
    m = system.grid.n_active
    shift = gamma * (1 + 1e-13)
    etas = np.column_stack([L1.matrix @ xis[:, j] / gamma for j in range(xis.shape[1])])
    z = np.vstack([etas, xis])
    if L1.is_sparse:
        eye = sp.identity(m, format="csr")
        A = sp.bmat([[-shift * eye, L1.matrix], [L2.matrix, -shift * eye]], format="csc")
        z = spla.splu(A).solve(z)
    else:
        A = np.block([[-shift * np.eye(m), L1.matrix], [L2.matrix, -shift * np.eye(m)]])
        z = sla.lu_solve(sla.lu_factor(A, check_finite=False), z, check_finite=False)
    etas, xis = z[:m], z[m:]
    # bilinear Gram ∫ξ_i η_j is symmetric for exact modes; diagonalize it within the class
    G = xis.T @ etas
    G = 0.5 * (G + G.T)
    _, C = sla.eigh(G)
    xis, etas = xis @ C, etas @ C
    out = []
    for j in range(xis.shape[1]):
        xi, eta = xis[:, j], etas[:, j]
        g = (xi @ (L1.matrix @ xi) + eta @ (L2.matrix @ eta)) / (2 * (xi @ eta))
        out.append((float(g), xi, eta))
    return out


def _normalize(grid, xi, eta):
    nrm = np.sqrt(grid.integrate(np.abs(xi) ** 2 + np.abs(eta) ** 2).real)
    xi, eta = xi / nrm, eta / nrm
    j = int(np.argmax(np.abs(xi)))
    phase = np.conj(xi[j]) / abs(xi[j]) if abs(xi[j]) else 1.0
    xi, eta = xi * phase, eta * phase
    if np.iscomplexobj(xi) and np.max(np.abs(xi.imag)) == 0 and np.max(np.abs(eta.imag)) == 0:
        xi, eta = xi.real, eta.real
    return xi, eta


def _momentum_rotate(system, members):
    """Recombine a degenerate class into eigenvectors of the momentum ``-i∂``."""
    grid = system.grid
    vecs = [np.concatenate([xi, eta]) for _, xi, eta in members]

    def d(v):
        n = grid.n_points
        return np.concatenate([grid.gradient(v[:n]), grid.gradient(v[n:])])

    w = np.concatenate([grid.weights, grid.weights])
    G = np.array([[np.sum(w * np.conj(a) * b) for b in vecs] for a in vecs])
    P = np.array([[np.sum(w * np.conj(a) * (-1j) * d(b)) for b in vecs] for a in vecs])
    P = 0.5 * (P + P.conj().T)
    p, C = sla.eigh(P, 0.5 * (G + G.conj().T))
    order = np.argsort(-p, kind="stable")
    n = grid.n_points
    out = []
    g = float(np.mean([mm[0] for mm in members]))
    V = np.column_stack(vecs) @ C[:, order]
    for j in range(V.shape[1]):
        out.append((g, V[:n, j], V[n:, j]))
    return out


def solve_modes(system: LinearizedSystem, count: int, gamma_min: float = GAMMA_MIN,
                method: str = "auto", momentum_basis: bool | None = None) -> ModeBasis:
    """Lowest ``count`` oscillation modes with ``γ > gamma_min``.

    ``method="auto"`` uses the symmetric form ``S L1 S`` (``S² = L2``) when
    L2 is positive semidefinite and the dense block eigenproblem otherwise;
    every mode is then polished by inverse iteration on the block operator.
    On uniform, potential-free periodic backgrounds degenerate classes are
    recombined into plane waves (``momentum_basis``).
    """
    if count < 1:
        raise ValueError("count must be positive")
    grid = system.grid
    cand = None
    if method in ("auto", "symmetric") and not system.L1.is_sparse:
        cand = _symmetrized_candidates(system, gamma_min)
        if cand is None and method == "symmetric":
            raise ValueError("L2 is not positive semidefinite; use the block method")
    if cand is None:
        cand = _block_candidates(system, gamma_min, count)
    gam, xis_act, n_zero = cand
    if len(gam) == 0:
        raise ValueError("no oscillation modes found")

    classes = _classes(gam, DEGENERACY_TOL)
    wanted = []
    for cls in classes:
        if sum(len(c) for c in wanted) >= count:
            break
        wanted.append(cls)

    if momentum_basis is None:
        momentum_basis = grid.kind == "periodic" and system.background.free and system.background.uniform

    raw = []
    for cls in wanted:
        g = float(np.mean(gam[list(cls)]))
        members = _refine(system, g, xis_act[:, list(cls)])
        members = [(gg, grid.extend(xi), grid.extend(eta)) for gg, xi, eta in members]
        if momentum_basis and len(cls) > 1:
            members = _momentum_rotate(system, members)
        raw.extend(members)
    raw = raw[:count]

    modes = []
    for i, (g, xi, eta) in enumerate(raw):
        xi, eta = _normalize(grid, xi, eta)
        res = mode_residuals(system, xi, eta, g)
        if res[0] + res[1] > RESIDUAL_TOL:
            log.warning("mode %d (γ=%.8g) residual %.2e above %.0e", i, g, res[0] + res[1], RESIDUAL_TOL)
        modes.append(LinearMode(i, g, xi, eta, res))
    cls_final = _classes([m.gamma for m in modes], DEGENERACY_TOL)
    modes = [replace(m, degeneracy_class=ci) for ci, c in enumerate(cls_final) for m in (modes[j] for j in c)]
    modes.sort(key=lambda m: m.index)
    return ModeBasis(system, tuple(modes), cls_final, np.asarray(gam), (("zero", n_zero),))


def lift_degeneracy(basis: ModeBasis, deltaW, deltaU=None, epsilon: float = 1e-3,
                    **solve_kw) -> ModeBasis:
    """Re-solve with ``W -> W + ε δW`` (and ``U -> U + ε δU``).

    Use ``deltaU=None`` for particle number and energy (keeps ``L2 f = 0``)
    and ``deltaU = -2 f δW`` for momentum (keeps ``L1 ∂f = 0``).
    """
    if epsilon == 0:
        return basis
    system = basis.system
    dW = np.asarray(deltaW, dtype=float)
    if not np.any(dW):
        raise DegeneracyError("deltaW is identically zero and cannot split any degeneracy")
    pots = system.potentials.modified(epsilon, dW=dW, dU=deltaU)
    lifted = linearize(system.background, pots, epsilon=epsilon)
    # the modification may push the zero modes off zero (even to imaginary
    # frequencies of order sqrt(ε)); they are not oscillation modes
    solve_kw.setdefault("gamma_min", 0.5 * float(np.min(basis.gammas)))
    new = solve_modes(lifted, len(basis), momentum_basis=False, **solve_kw)
    scale = max(basis.gammas)
    for cls in basis.classes:
        if len(cls) < 2:
            continue
        shifts = np.sort([(new[i].gamma - basis[i].gamma) / epsilon for i in cls])
        if np.min(np.diff(shifts)) * epsilon < DEGENERACY_TOL * scale:
            raise DegeneracyError(f"deltaW does not split the class at γ = {basis[cls[0]].gamma:.8g} "
                                  f"(first-order shifts {shifts}); choose a different deltaW")
    return new


@dataclass(frozen=True)
class OrthogonalityReport:
    stringent: float      # max |∫ η_n ξ_k|
    antisymmetric: float  # max |∫ (η_n ξ_k - η_k ξ_n)|
    conjugate: float      # max |∫ (η_n ξ_k* + η_k* ξ_n)|
    pairs: int

    @property
    def worst(self) -> float:
        return max(self.stringent, self.antisymmetric, self.conjugate)


def check_orthogonality(basis: ModeBasis, modes=None) -> OrthogonalityReport:
    """Overlap integrals that vanish between modes of different frequency."""
    grid = basis.system.grid
    modes = list(basis.modes if modes is None else modes)
    scale = max(m.gamma for m in modes)
    s = a = c = 0.0
    npairs = 0
    for i, mn in enumerate(modes):
        for mk in modes[i + 1:]:
            if abs(mn.gamma - mk.gamma) < DEGENERACY_TOL * scale:
                continue
            npairs += 1
            s = max(s, abs(grid.inner(mn.eta, mk.xi)), abs(grid.inner(mk.eta, mn.xi)))
            a = max(a, abs(grid.inner(mn.eta, mk.xi) - grid.inner(mk.eta, mn.xi)))
            c = max(c, abs(grid.inner(mn.eta, np.conj(mk.xi)) + grid.inner(np.conj(mk.eta), mn.xi)))
    return OrthogonalityReport(float(s), float(a), float(c), npairs)
