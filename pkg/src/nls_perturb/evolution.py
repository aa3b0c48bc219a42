"""Ansatz reconstruction, field functionals and split-step time evolution."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
import scipy.sparse as sp

from .bdg import ModeBasis
from .discretization import PERIODIC, Grid
from .model import LOG_FLOOR, Background, Logarithmic

log = logging.getLogger(__name__)

#: largest allowed product of the time step and the fastest retained frequency
DT_RESOLUTION = 0.1
BLOWUP_FACTOR = 1e6


class BlowUpError(ArithmeticError):
    pass


class PreconditionError(ValueError):
    pass


# -- functionals --------------------------------------------------------------

def particle_number_functional(psi, grid: Grid) -> float:
    return float(grid.integrate(np.abs(psi) ** 2))


def energy_functional(psi, grid: Grid, potential, model) -> float:
    """``∫(|∇Ψ|² + V|Ψ|² + ∫_0^{|Ψ|²} F)`` with the kinetic part as ``Re⟨Ψ, -ΔΨ⟩``."""
    psi = np.asarray(psi)
    dens = np.abs(psi) ** 2
    kinetic = grid.integrate(np.conj(psi) * -grid.laplacian_apply(psi)).real
    return float(kinetic + grid.integrate(potential * dens + model.primitive(dens)))


def momentum_functional(psi, grid: Grid) -> float:
    """``∫ Im(Ψ* ∂Ψ)``."""
    return float(grid.integrate(np.conj(psi) * grid.gradient(psi)).imag)


# -- ansatz -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PerturbationAssembly:
    """Selected modes of a basis with their corrections, at amplitude ``alpha``.

    ``corrections`` maps a mode index to its :class:`ModeCorrections` and
    ``pairs`` maps ``(n, k)`` with ``n < k`` to :class:`PairCorrections`.
    """

    basis: ModeBasis
    indices: tuple
    alpha: float
    corrections: dict = field(default_factory=dict)
    pairs: dict = field(default_factory=dict)
    include_nonlinear: bool = True

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(sorted(int(i) for i in self.indices)))
        if not self.include_nonlinear:
            return
        missing = [i for i in self.indices if i not in self.corrections]
        missing += [(n, k) for a, n in enumerate(self.indices) for k in self.indices[a + 1:]
                     if (n, k) not in self.pairs]
        if missing:
            raise PreconditionError(f"nonlinear assembly is missing corrections for {missing}")

    @property
    def background(self) -> Background:
        return self.basis.system.background

    @property
    def modes(self):
        return [self.basis[i] for i in self.indices]

    def frequencies(self) -> list[float]:
        """All frequencies present in the field, relative to the background."""
        g = [self.basis[i].gamma for i in self.indices]
        out = list(g)
        if self.include_nonlinear:
            out += [2 * x for x in g]
            out += [a + b for i, a in enumerate(g) for b in g[i + 1:]]
        return out

    def max_frequency(self) -> float:
        return max([abs(self.background.omega)] + [self.background.omega + w for w in self.frequencies()])

    def linear_only(self) -> "PerturbationAssembly":
        return PerturbationAssembly(self.basis, self.indices, self.alpha, {}, {}, False)

    def with_alpha(self, alpha: float) -> "PerturbationAssembly":
        return PerturbationAssembly(self.basis, self.indices, alpha, self.corrections, self.pairs,
                                    self.include_nonlinear)


def _oscillating(plus, minus, freq, t):
    """``½[(A+ + A-) e^{-iΩt} + (A+* - A-*) e^{iΩt}]``."""
    e = np.exp(-1j * freq * t)
    return 0.5 * ((plus + minus) * e + (np.conj(plus) - np.conj(minus)) * np.conj(e))


def assemble_perturbation(assembly: PerturbationAssembly, t: float) -> np.ndarray:
    """The perturbation ``φ(t)`` (without the factor ``α`` in front)."""
    a = assembly.alpha
    phi = np.zeros(assembly.basis.system.grid.n_points, dtype=complex)
    for m in assembly.modes:
        phi += _oscillating(m.xi, m.eta, m.gamma, t)
    if not assembly.include_nonlinear:
        return phi
    for m in assembly.modes:
        c = assembly.corrections[m.index]
        phi += 0.5 * a * (c.chi_plus + c.chi_minus)
        phi += a * _oscillating(c.psi_plus, c.psi_minus, 2 * m.gamma, t)
    for i, n in enumerate(assembly.indices):
        for k in assembly.indices[i + 1:]:
            p = assembly.pairs[(n, k)]
            gn, gk = assembly.basis[n].gamma, assembly.basis[k].gamma
            phi += a * _oscillating(p.rho_plus, p.rho_minus, gn + gk, t)
            phi += a * _oscillating(p.theta_plus, p.theta_minus, gn - gk, t)
    return phi


def assemble_field(assembly: PerturbationAssembly, t: float = 0.0) -> np.ndarray:
    """Full field ``e^{-iωt}(f + αφ(t))``."""
    bg = assembly.background
    return np.exp(-1j * bg.omega * t) * (bg.f + assembly.alpha * assemble_perturbation(assembly, t))


assemble_initial = assemble_field


# -- split-step integrator ----------------------------------------------------

class _KineticPropagator:
    """Exact ``exp(iΔτ)`` on the grid's Laplacian."""

    def __init__(self, grid: Grid, tau: float):
        self.grid = grid
        if grid.scheme == "fd4" or grid.sparse:
            lap = grid.laplacian()
            lam, Q = sla.eigh(-(lap.toarray() if sp.issparse(lap) else lap))
            self.Q = Q
            self.phase = np.exp(-1j * lam * tau)
            self.mode = "eig"
        else:
            self.phase = np.exp(-1j * grid.wavenumbers() ** 2 * tau)
            self.mode = "fft" if grid.kind == PERIODIC else "dst"

    def __call__(self, psi):
        g = self.grid
        if self.mode == "fft":
            return sfft.ifft(self.phase * sfft.fft(psi))
        act = psi[g.active]
        if self.mode == "dst":
            out = sfft.dst(self.phase * sfft.dst(act, type=1, norm="ortho"), type=1, norm="ortho")
        else:
            out = self.Q @ (self.phase * (self.Q.T @ act))
        res = np.zeros_like(psi)
        res[g.active] = out
        return res


def _nonlinear_phase(psi, potential, model, dt):
    dens = np.abs(psi) ** 2
    if isinstance(model, Logarithmic):
        nl = -np.log(np.maximum(dens, LOG_FLOOR))
    else:
        nl = model.F(dens)
    return psi * np.exp(-1j * dt * (potential + nl))


@dataclass(frozen=True, eq=False)
class TrajectoryDiagnostics:
    times: np.ndarray
    N: np.ndarray
    E: np.ndarray
    P: np.ndarray
    dt: float
    steps: int
    final: np.ndarray = field(repr=False)
    N_ansatz: np.ndarray | None = None
    E_ansatz: np.ndarray | None = None
    order: int = 2

    @property
    def drift(self) -> dict:
        return {q: float(np.max(np.abs(getattr(self, q) - getattr(self, q)[0]))) for q in ("N", "E", "P")}

    def relative_drift(self, q: str) -> float:
        s = getattr(self, q)
        return float(np.max(np.abs(s - s[0])) / max(abs(s[0]), np.finfo(float).tiny))

    def write_csv(self, path):
        cols = [self.times, self.N, self.E, self.P,
                self.N_ansatz if self.N_ansatz is not None else np.full_like(self.N, np.nan),
                self.E_ansatz if self.E_ansatz is not None else np.full_like(self.N, np.nan)]
        with open(path, "w") as fh:
            fh.write("t,N,E,Px,N_ansatz,E_ansatz\n")
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def evolve(psi0, T: float, dt: float, grid: Grid, potential, model, *, sample_stride: int = 1,
           max_frequency: float | None = None, ansatz=None) -> TrajectoryDiagnostics:
    """Strang split-step integration of ``iΨ_t = -ΔΨ + VΨ + F(|Ψ|²)Ψ`` up to time ``T``.

    ``ansatz`` (optional callable ``t -> field``) is sampled alongside for the
    ``N_ansatz``/``E_ansatz`` columns.
    """
    if not (dt > 0 and T >= 0):
        raise PreconditionError("need dt > 0 and T >= 0")
    if max_frequency is not None and dt * max_frequency >= DT_RESOLUTION:
        raise PreconditionError(f"dt = {dt:g} does not resolve frequency {max_frequency:.6g} "
                                f"(dt·max_frequency = {dt * max_frequency:.3g} >= {DT_RESOLUTION})")
    if sample_stride < 1:
        raise PreconditionError("sample_stride must be >= 1")
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise PreconditionError(f"T = {T:g} is not a multiple of dt = {dt:g}")
    potential = np.asarray(potential, dtype=float)
    half = _KineticPropagator(grid, 0.5 * dt)
    full = _KineticPropagator(grid, dt)
    psi = np.array(psi0, dtype=complex)
    peak0 = float(np.max(np.abs(psi)))
    times, N, E, P, Na, Ea = [], [], [], [], [], []

    def sample(t, psi):
        times.append(t)
        N.append(particle_number_functional(psi, grid))
        E.append(energy_functional(psi, grid, potential, model))
        P.append(momentum_functional(psi, grid))
        if ansatz is not None:
            a = ansatz(t)
            Na.append(particle_number_functional(a, grid))
            Ea.append(energy_functional(a, grid, potential, model))

    sample(0.0, psi)
    # adjacent kinetic half steps are merged between samples
    psi = half(psi)
    for n in range(1, steps + 1):
        psi = _nonlinear_phase(psi, potential, model, dt)
        if not (n % sample_stride == 0 or n == steps):
            psi = full(psi)
            continue
        psi = half(psi)
        if not np.all(np.isfinite(psi)) or np.max(np.abs(psi)) > BLOWUP_FACTOR * peak0:
            raise BlowUpError(f"field blew up at t = {n * dt:.6g}")
        sample(n * dt, psi)
        if n < steps:
            psi = half(psi)
    arr = np.asarray
    return TrajectoryDiagnostics(arr(times), arr(N), arr(E), arr(P), dt, steps, psi,
                                 arr(Na) if ansatz is not None else None,
                                 arr(Ea) if ansatz is not None else None)


def run_assembly(assembly: PerturbationAssembly, T: float, dt: float, sample_stride: int = 1,
                 evolve_pde: bool = True) -> TrajectoryDiagnostics:
    """Evolve the assembled initial field and sample the ansatz alongside."""
    bg = assembly.background
    grid = bg.grid
    if not evolve_pde:
        steps = int(round(T / dt))
        times = np.arange(0, steps + 1, sample_stride) * dt
        if times[-1] < steps * dt:
            times = np.append(times, steps * dt)
        fields = [assemble_field(assembly, t) for t in times]
        N = np.array([particle_number_functional(a, grid) for a in fields])
        E = np.array([energy_functional(a, grid, bg.potential, bg.model) for a in fields])
        P = np.array([momentum_functional(a, grid) for a in fields])
        return TrajectoryDiagnostics(times, N, E, P, dt, steps, fields[-1], N, E)
    return evolve(assemble_field(assembly, 0.0), T, dt, grid, bg.potential, bg.model,
                  sample_stride=sample_stride, max_frequency=assembly.max_frequency(),
                  ansatz=lambda t: assemble_field(assembly, t))


# -- oscillation analysis -----------------------------------------------------

def fit_oscillation(times, values, frequency: float) -> tuple[float, float]:
    """Least-squares ``c0 + c1 cos(Ωt) + c2 sin(Ωt)``; returns ``(c0, amplitude)``."""
    t = np.asarray(times, dtype=float)
    A = np.column_stack([np.ones_like(t), np.cos(frequency * t), np.sin(frequency * t)])
    c, *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(c[0]), float(np.hypot(c[1], c[2]))


def half_range(values) -> float:
    v = np.asarray(values, dtype=float)
    return 0.5 * float(np.max(v) - np.min(v))


def fit_exponent(xs, ys) -> float:
    """Slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(np.abs(ys)), 1)[0])


@dataclass(frozen=True)
class DriftComparison:
    nonlinear_oscillation: float
    linear_oscillation: float
    predicted: float

    @property
    def ratio_to_prediction(self) -> float:
        return self.linear_oscillation / self.predicted if self.predicted else float("nan")

    @property
    def suppression(self) -> float:
        """How much smaller the full-ansatz oscillation is than the linear one."""
        if self.nonlinear_oscillation == 0:
            return float("inf")
        return self.linear_oscillation / self.nonlinear_oscillation


def drift_report(linear_run: TrajectoryDiagnostics, nonlinear_run: TrajectoryDiagnostics,
                 predicted_oscillation: float, frequency: float | None = None) -> DriftComparison:
    """Compare ansatz particle-number oscillations of a linear-only and a full run.

    With ``frequency`` the linear amplitude is a least-squares fit at that
    frequency; otherwise half the peak-to-peak range.  The full-ansatz value
    is always the half range, since its residual is not a single harmonic.
    """
    if linear_run.dt != nonlinear_run.dt or not np.array_equal(linear_run.times, nonlinear_run.times):
        raise PreconditionError("runs were sampled with different settings")
    if linear_run.N_ansatz is None or nonlinear_run.N_ansatz is None:
        raise PreconditionError("runs carry no ansatz samples")
    if frequency is None:
        lin = half_range(linear_run.N_ansatz)
    else:
        lin = fit_oscillation(linear_run.times, linear_run.N_ansatz, frequency)[1]
    return DriftComparison(half_range(nonlinear_run.N_ansatz), lin, float(predicted_oscillation))
