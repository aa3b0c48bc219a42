"""One-dimensional grids, quadrature and the linearized operators.

Fields are plain numpy arrays sampled on every node of a :class:`Grid`.
On a ``TruncatedLine`` the two wall nodes carry the Dirichlet condition and
are never unknowns; operators act on the *active* (interior) nodes only and
fields are zero-padded back to full length.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PERIODIC = "periodic"
LINE = "line"

#: above this many active nodes, finite-difference operators are stored sparse
DENSE_LIMIT = 2048


class SolvabilityError(ArithmeticError):
    """Right-hand side has a component along the kernel of a singular operator."""


@dataclass(frozen=True)
class Grid:
    """Uniform 1d grid.

    ``kind`` is ``"periodic"`` (box of length ``length``, node 0 at x=0) or
    ``"line"`` (truncated line ``[-length/2, length/2]`` with both walls as
    nodes).  ``scheme`` selects the Laplacian: ``"spectral"`` (Fourier on
    the box, sine series on the line) or ``"fd4"`` (4th-order centered
    differences).
    """

    kind: str
    length: float
    n_points: int
    scheme: str = "spectral"

    def __post_init__(self):
        if self.kind not in (PERIODIC, LINE):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.scheme not in ("spectral", "fd4"):
            raise ValueError(f"unknown Laplacian scheme {self.scheme!r}")
        if not self.length > 0:
            raise ValueError(f"grid length must be positive, got {self.length}")
        if self.n_points < 16:
            raise ValueError(f"need at least 16 grid points, got {self.n_points}")
        if self.kind == PERIODIC and self.n_points % 2:
            raise ValueError(f"periodic grid needs an even point count, got {self.n_points}")

    @property
    def spacing(self) -> float:
        if self.kind == PERIODIC:
            return self.length / self.n_points
        return self.length / (self.n_points - 1)

    @property
    def half_width(self) -> float:
        return self.length / 2

    @cached_property
    def x(self) -> np.ndarray:
        if self.kind == PERIODIC:
            return self.spacing * np.arange(self.n_points)
        return np.linspace(-self.half_width, self.half_width, self.n_points)

    @property
    def active(self) -> slice:
        return slice(None) if self.kind == PERIODIC else slice(1, -1)

    @property
    def n_active(self) -> int:
        return self.n_points if self.kind == PERIODIC else self.n_points - 2

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.spacing)
        if self.kind == LINE:
            w[0] = w[-1] = self.spacing / 2
        return w

    @property
    def sparse(self) -> bool:
        return self.scheme == "fd4" and self.kind == LINE and self.n_active > DENSE_LIMIT

    # -- field helpers -------------------------------------------------------

    def integrate(self, values):
        """Trapezoid (line) or rectangle (box) rule."""
        values = np.asarray(values)
        if values.shape[-1] != self.n_points:
            raise ValueError(f"field of length {values.shape[-1]} on a {self.n_points}-point grid")
        return values @ self.weights

    def inner(self, a, b):
        """Bilinear (unconjugated) quadrature of ``a*b``."""
        return self.integrate(np.asarray(a) * np.asarray(b))

    def norm(self, values) -> float:
        values = np.asarray(values)
        return float(np.sqrt(self.integrate(np.abs(values) ** 2).real))

    def restrict(self, values) -> np.ndarray:
        values = np.asarray(values)
        if values.shape[0] != self.n_points:
            raise ValueError(f"field of length {values.shape[0]} on a {self.n_points}-point grid")
        return values[self.active]

    def extend(self, active_values) -> np.ndarray:
        if self.kind == PERIODIC:
            return np.asarray(active_values)
        out = np.zeros((self.n_points,) + np.shape(active_values)[1:], dtype=np.result_type(active_values))
        out[1:-1] = active_values
        return out

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the kinetic eigenbasis (FFT order / sine index order)."""
        if self.kind == PERIODIC:
            return 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        p = np.arange(1, self.n_active + 1)
        return p * np.pi / self.length

    def laplacian(self):
        return _laplacian(self)

    def derivative(self):
        return _derivative(self)

    def laplacian_active(self, act) -> np.ndarray:
        """Laplacian of active-node values (fast transforms for spectral schemes)."""
        act = np.asarray(act)
        if self.scheme == "fd4":
            return self.laplacian() @ act
        if np.iscomplexobj(act):
            return self.laplacian_active(act.real) + 1j * self.laplacian_active(act.imag)
        k2 = self.wavenumbers() ** 2
        if self.kind == PERIODIC:
            return np.fft.irfft(-k2[: self.n_points // 2 + 1] * np.fft.rfft(act), n=self.n_points)
        return sfft.dst(-k2 * sfft.dst(act, type=1, norm="ortho"), type=1, norm="ortho")

    def laplacian_apply(self, values) -> np.ndarray:
        return self.extend(self.laplacian_active(self.restrict(values)))

    def gradient(self, values) -> np.ndarray:
        values = np.asarray(values)
        if self.kind == PERIODIC and self.scheme == "spectral":
            k = self.wavenumbers()
            k[self.n_points // 2] = 0.0
            out = np.fft.ifft(1j * k * np.fft.fft(values))
            return out if np.iscomplexobj(values) else out.real
        return self.extend(self.derivative() @ self.restrict(values))


def build_grid(kind: str, n_points: int, length: float | None = None,
               half_width: float | None = None, scheme: str | None = None) -> Grid:
    """Construct a grid from config-style arguments."""
    if kind in ("periodic", "PeriodicBox", "box"):
        if length is None:
            raise ValueError("periodic grid needs a length")
        return Grid(PERIODIC, float(length), int(n_points), scheme or "spectral")
    if kind in ("line", "TruncatedLine"):
        if half_width is None:
            if length is None:
                raise ValueError("truncated line needs a half_width")
            half_width = length / 2
        if not half_width > 0:
            raise ValueError(f"half_width must be positive, got {half_width}")
        return Grid(LINE, 2.0 * float(half_width), int(n_points), scheme or "spectral")
    raise ValueError(f"unknown grid kind {kind!r}")


def _dst_matrices(m: int):
    j = np.arange(1, m + 1)
    arg = np.pi * np.outer(j, j) / (m + 1)
    c = np.sqrt(2.0 / (m + 1))
    return c * np.sin(arg), c * np.cos(arg)


def _fd4_stencil(m: int, h: float, periodic: bool, order: int):
    if order == 2:
        coeffs = {0: -30.0, 1: 16.0, -1: 16.0, 2: -1.0, -2: -1.0}
        scale = 1.0 / (12 * h * h)
    else:
        coeffs = {1: 8.0, -1: -8.0, 2: -1.0, -2: 1.0}
        scale = 1.0 / (12 * h)
    if periodic:
        mat = np.zeros((m, m))
        idx = np.arange(m)
        for off, c in coeffs.items():
            mat[idx, (idx + off) % m] += c * scale
        return mat
    diags = [np.full(m - abs(off), c * scale) for off, c in coeffs.items()]
    return sp.diags(diags, list(coeffs), shape=(m, m), format="csr")


@lru_cache(maxsize=16)
def _laplacian(grid: Grid):
    m, h = grid.n_active, grid.spacing
    if grid.scheme == "fd4":
        mat = _fd4_stencil(m, h, grid.kind == PERIODIC, 2)
        if sp.issparse(mat) and not grid.sparse:
            mat = mat.toarray()
        return mat
    if grid.kind == PERIODIC:
        k = grid.wavenumbers()
        mat = np.fft.ifft(-(k**2)[:, None] * np.fft.fft(np.eye(m), axis=0), axis=0).real
        return 0.5 * (mat + mat.T)
    s, _ = _dst_matrices(m)
    k = grid.wavenumbers()
    mat = (s * -(k**2)) @ s
    return 0.5 * (mat + mat.T)


@lru_cache(maxsize=16)
def _derivative(grid: Grid):
    m, h = grid.n_active, grid.spacing
    if grid.scheme == "fd4":
        mat = _fd4_stencil(m, h, grid.kind == PERIODIC, 1)
        if sp.issparse(mat) and not grid.sparse:
            mat = mat.toarray()
        return mat
    if grid.kind == PERIODIC:
        k = grid.wavenumbers()
        k[m // 2] = 0.0
        return np.fft.ifft((1j * k)[:, None] * np.fft.fft(np.eye(m), axis=0), axis=0).real
    s, c = _dst_matrices(m)
    return (c * grid.wavenumbers()) @ s


class Operator:
    """Real symmetric operator on the active nodes of a grid.

    ``kind`` is ``"L1"``, ``"L2"`` or ``"laplacian"``.  The eigen-decomposition
    used for minimal-norm solves is computed lazily and cached.
    """

    def __init__(self, kind: str, grid: Grid, matrix, meta=None, diagonal=None):
        self.kind = kind
        self.grid = grid
        self.matrix = matrix
        self.meta = meta
        # when set, the operator is -Δ + diag(diagonal) and is applied matrix-free
        self.diagonal = diagonal
        if matrix.shape != (grid.n_active, grid.n_active):
            raise ValueError(f"operator shape {matrix.shape} does not match grid ({grid.n_active} active nodes)")

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def apply(self, values) -> np.ndarray:
        act = self.grid.restrict(values)
        if self.diagonal is not None:
            return self.grid.extend(-self.grid.laplacian_active(act) + self.diagonal * act)
        return self.grid.extend(self.matrix @ act)

    def __matmul__(self, values):
        return self.apply(values)

    @cached_property
    def spectrum(self):
        """(eigenvalues, eigenvectors) of the active-node matrix."""
        if self.is_sparse:
            raise NotImplementedError("full spectrum is only available for dense operators")
        return sla.eigh(self.matrix)

    @cached_property
    def kernel_tolerance(self) -> float:
        if self.is_sparse:
            return 1e-10 * float(abs(spla.norm(self.matrix, 1)))
        lam = self.spectrum[0]
        return 1e-10 * float(np.max(np.abs(lam)))

    @cached_property
    def kernel(self) -> np.ndarray:
        """Orthonormal (Euclidean, active nodes) basis of the numerical kernel."""
        if self.is_sparse:
            return self._sparse_kernel()
        lam, vec = self.spectrum
        return vec[:, np.abs(lam) < self.kernel_tolerance]

    def _sparse_kernel(self):
        vals, vecs = spla.eigsh(self.matrix.tocsc(), k=4, sigma=-1e-3 * self.kernel_tolerance, which="LM")
        keep = np.abs(vals) < self.kernel_tolerance
        return vecs[:, keep]

    def solve(self, rhs, extra_kernel=None, solvability_tol: float = 1e-8):
        """Minimal-norm solution of ``L x = rhs`` on the complement of the kernel.

        Raises :class:`SolvabilityError` if ``rhs`` has a relative component
        above ``solvability_tol`` along the kernel.
        """
        grid = self.grid
        r = grid.restrict(np.asarray(rhs))
        rnorm = np.linalg.norm(r)
        if rnorm == 0:
            return np.zeros(grid.n_points, dtype=np.result_type(rhs, float))
        kernel = self.kernel
        if extra_kernel is not None and len(extra_kernel):
            kernel = _orthonormal(np.column_stack([kernel] + [grid.restrict(v) for v in extra_kernel]))
        if kernel.shape[1]:
            along = kernel.T @ r
            if np.linalg.norm(along) > solvability_tol * rnorm:
                raise SolvabilityError(
                    f"{self.kind}: right-hand side has relative kernel component "
                    f"{np.linalg.norm(along) / rnorm:.3e} > {solvability_tol:.1e}")
            r = r - kernel @ along
        if self.is_sparse:
            x = _bordered_solve(self.matrix, kernel, r)
        else:
            lam, vec = self.spectrum
            inv = np.zeros_like(lam)
            keep = np.abs(lam) >= self.kernel_tolerance
            inv[keep] = 1.0 / lam[keep]
            x = vec @ (inv[:, None] * (vec.T @ r)) if r.ndim == 2 else vec @ (inv * (vec.T @ r))
            if kernel.shape[1] > np.count_nonzero(~keep):
                x = x - kernel @ (kernel.T @ x)
        return grid.extend(x)

    def residual(self, x, rhs) -> float:
        """Relative residual ``|L x - rhs| / |rhs|`` (quadrature norm)."""
        num = self.grid.norm(self.apply(x) - rhs)
        den = self.grid.norm(rhs)
        return num / den if den else num


def _orthonormal(cols):
    q, r = np.linalg.qr(cols)
    keep = np.abs(np.diag(r)) > 1e-12 * max(1.0, np.max(np.abs(np.diag(r))))
    return q[:, keep]


def _bordered_solve(matrix, kernel, r):
    k = kernel.shape[1]
    if k == 0:
        return spla.splu(matrix.tocsc()).solve(r)
    border = sp.csr_matrix(kernel)
    big = sp.bmat([[matrix, border], [border.T, None]], format="csc")
    pad = np.zeros((k,) + r.shape[1:], dtype=r.dtype)
    sol = spla.splu(big).solve(np.concatenate([r, pad]))
    return sol[: matrix.shape[0]]


def laplacian_operator(grid: Grid) -> Operator:
    return Operator("laplacian", grid, grid.laplacian())


def assemble_operator(kind: str, background, potentials) -> Operator:
    """Assemble ``L2 = -Δ + V + U - ω`` or ``L1 = L2 + 2 f W`` on the active nodes."""
    grid = background.grid
    for name, arr in (("potential", background.potential), ("U", potentials.U), ("W", potentials.W)):
        if np.shape(arr) != (grid.n_points,):
            raise ValueError(f"{name} has shape {np.shape(arr)}, grid has {grid.n_points} points")
    diag = grid.restrict(background.potential + potentials.U - background.omega)
    if kind == "L1":
        diag = diag + grid.restrict(2 * background.f * potentials.W)
    elif kind != "L2":
        raise ValueError(f"unknown operator kind {kind!r}")
    lap = grid.laplacian()
    if sp.issparse(lap):
        matrix = (-lap + sp.diags(diag)).tocsr()
    else:
        matrix = -lap + np.diag(diag)
    return Operator(kind, grid, matrix, meta=(background, potentials), diagonal=diag)
