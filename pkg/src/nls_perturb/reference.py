"""Closed-form oracles: logarithmic Gaussian modes and uniform-condensate plane waves."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite


@dataclass(frozen=True)
class LogModeLabel:
    """Multi-index ``(n_1, ..., n_d)`` of a logarithmic-model mode."""

    n: tuple

    def __post_init__(self):
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if any(v < 0 for v in n):
            raise ValueError(f"mode indices must be nonnegative, got {n}")
        object.__setattr__(self, "n", n)

    @property
    def dimension(self) -> int:
        return len(self.n)

    @property
    def order(self) -> int:
        return sum(self.n)


def _label(label) -> LogModeLabel:
    label = label if isinstance(label, LogModeLabel) else LogModeLabel(label)
    if label.order < 2:
        raise ValueError(f"oscillation modes need total order >= 2, got {label.n}")
    return label


def log_gamma(label) -> float:
    s = _label(label).order
    return 2.0 * math.sqrt((s - 1) * s)


def log_amplitude_ratio(label) -> float:
    """Ratio of the ``ξ`` to ``η`` amplitudes, both proportional to the same Hermite function."""
    s = _label(label).order
    return math.sqrt(s / (s - 1))


def hermite_function(n: int, x) -> np.ndarray:
    """Unnormalized ``H_n(x) exp(-x²/2)``, the ``n``-th eigenfunction of ``-d²/dx² + x²``."""
    x = np.asarray(x, dtype=float)
    return eval_hermite(n, x) * np.exp(-0.5 * x * x)


def log_background(x, amplitude: float = 1.0, dimension: int = 1):
    """Gaussian profile and frequency ``(f, ω)`` for the logarithmic nonlinearity."""
    x = np.asarray(x, dtype=float)
    return amplitude * np.exp(-0.5 * x * x), dimension - math.log(amplitude**2)


def log_mode(label, x) -> tuple[np.ndarray, np.ndarray]:
    """Unit-normalized ``(ξ, η)`` of a one-dimensional logarithmic mode, sampled on ``x``."""
    label = _label(label)
    if label.dimension != 1:
        raise ValueError("sampled modes are one-dimensional")
    n = label.n[0]
    # L2 = -Δ + x² - 1, L1 = L2 - 2; on H_n: L2 -> 2n, L1 -> 2(n-1)
    G = hermite_function(n, x)
    norm_G2 = math.sqrt(math.pi) * 2.0**n * math.factorial(n)
    ratio = log_amplitude_ratio(label)
    scale = 1.0 / math.sqrt(norm_G2 * (1 + ratio * ratio))
    return scale * ratio * G, scale * G


def log_overlap_ratio(label) -> float:
    """``∫(ξ² - η²) / ∫(ξ² + η²)`` for a logarithmic mode."""
    s = _label(label).order
    return 1.0 / (2 * s - 1)


def bogoliubov_gamma(k, omega: float) -> np.ndarray:
    if not omega > 0:
        raise ValueError("uniform condensate needs ω > 0")
    k = np.asarray(k, dtype=float)
    return np.sqrt(k * k * (2 * omega + k * k))


@dataclass(frozen=True)
class GPModeSpec:
    k: float
    omega: float = 1.0
    n_tilde: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("uniform condensate needs ω > 0")
        if self.n_tilde < 0:
            raise ValueError("quasi-particle number must be nonnegative")


def gp_amplitudes(mode: GPModeSpec) -> tuple[float, float]:
    """Plane-wave amplitudes ``(a, b)`` with ``a² - b² = ñ``.

    ``ξ ∝ a + b`` and ``η ∝ a - b``; the ratio ``(a - b)/(a + b)`` equals ``|k|/√(2ω + k²)``.
    """
    if mode.k == 0:
        raise ValueError("k = 0 is the gauge zero mode")
    r = abs(mode.k) / math.sqrt(2 * mode.omega + mode.k**2)
    # a + b = s, a - b = r s, (a + b)(a - b) = ñ
    s = math.sqrt(mode.n_tilde / r)
    return 0.5 * s * (1 + r), 0.5 * s * (1 - r)


def gp_mode_invariants(mode: GPModeSpec) -> dict:
    """Particle number, energy, momentum and linear-only particle number of one plane wave."""
    if mode.k == 0:
        raise ValueError("k = 0 is the gauge zero mode")
    k, w, n = mode.k, mode.omega, mode.n_tilde
    gam = float(bogoliubov_gamma(k, w))
    Np = -abs(k) / math.sqrt(2 * w + k * k) * n
    Ep = w * Np + gam * n
    a, b = gp_amplitudes(mode)
    return {"gamma": gam, "Np": Np, "Ep": Ep, "Pp": k * n, "Np_linear": a * a + b * b}


def gp_energy_phonon_form(mode: GPModeSpec) -> float:
    k, w = mode.k, mode.omega
    return float(bogoliubov_gamma(k, w)) * mode.n_tilde * (w + k * k) / (2 * w + k * k)


def gp_total_energy(g: float, length: float, N0: float, modes) -> tuple[float, float]:
    """Background energy plus mode energies, and the same total regrouped.

    Returns ``(E0 + Σ E_p, g N²/(2L) + Σ γ ñ)`` with ``N = N0 + Σ N_p`` and
    ``E0 = g N0²/(2L)``; they agree up to ``g (Σ N_p)²/(2L)``.
    """
    E0 = 0.5 * g * N0**2 / length
    inv = [gp_mode_invariants(s) for s in modes]
    N = N0 + sum(i["Np"] for i in inv)
    lhs = E0 + sum(i["Ep"] for i in inv)
    rhs = 0.5 * g * N**2 / length + sum(i["gamma"] * s.n_tilde for i, s in zip(inv, modes))
    return lhs, rhs
