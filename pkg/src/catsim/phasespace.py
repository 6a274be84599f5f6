"""Continuous-variable pictures: Wigner functions, quadrature-basis density
matrices, and marginal distributions, all derived from a Fock-basis state.

The Wigner function is normalized so that its double integral is 1 and the
vacuum peaks at 1/pi; its value at the origin is 1/pi times the photon-number
parity expectation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import ConvergenceError, DomainError
from .fock import DensityMatrix, quadrature_basis

DEFAULT_QUAD_RANGE = (-6.0, 6.0)
DEFAULT_QUAD_POINTS = 241
DEFAULT_WIGNER_RANGE = (-5.0, 5.0)
DEFAULT_WIGNER_POINTS = 201

_IMAG_RESIDUE_TOL = 1e-10


@dataclass(frozen=True)
class QuadGrid:
    """Uniform quadrature axis."""

    axis: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.ndim != 1 or axis.size < 3:
            raise DomainError("axis must be one-dimensional with at least 3 points")
        steps = np.diff(axis)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise DomainError("axis must be strictly increasing with uniform spacing")
        object.__setattr__(self, "axis", axis)

    @classmethod
    def default(cls) -> "QuadGrid":
        lo, hi = DEFAULT_QUAD_RANGE
        return cls(np.linspace(lo, hi, DEFAULT_QUAD_POINTS))

    @classmethod
    def linspace(cls, lo: float, hi: float, points: int) -> "QuadGrid":
        return cls(np.linspace(lo, hi, points))

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])


@dataclass(frozen=True)
class WignerGrid:
    """W(x_i, p_j) sampled on a rectangular grid; values[i, j] pairs x_i with p_j."""

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray

    def riemann_integral(self) -> float:
        dx = self.x_axis[1] - self.x_axis[0]
        dp = self.p_axis[1] - self.p_axis[0]
        return float(np.sum(self.values) * dx * dp)

    def value_at(self, x: float, p: float) -> float:
        i = int(np.argmin(np.abs(self.x_axis - x)))
        j = int(np.argmin(np.abs(self.p_axis - p)))
        return float(self.values[i, j])


@dataclass(frozen=True)
class QuadDensityMatrix:
    """rho(q_i, q_j') in the rotated quadrature basis at angle theta."""

    axis: np.ndarray
    values: np.ndarray
    theta: float

    @property
    def diagonal(self) -> np.ndarray:
        return self.values.diagonal().real

    def antidiagonal(self) -> np.ndarray:
        """Re rho(q, -q) along the axis; requires a symmetric axis."""
        return self.values[:, ::-1].diagonal().real


def _wigner_values(rho: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Evaluate W at paired points via the Fock-basis Laguerre expansion.

    The |m><n| kernel (m >= n) is
      (1/pi)·e^{-x^2-p^2}·(-1)^n·sqrt(2^{m-n} n!/m!)·(x-ip)^{m-n}·L_n^{m-n}(2(x^2+p^2)),
    with the m < n kernel its complex conjugate. Coefficients are evaluated in
    log space and the Laguerre polynomials by stable recurrence.
    """
    dim = rho.shape[0]
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    r2 = x * x + p * p
    arg = 2.0 * r2
    envelope = np.exp(-r2) / np.pi
    z = x - 1j * p
    w = np.zeros(np.broadcast(x, p).shape, dtype=complex)
    zpow = np.ones_like(w)
    for d in range(dim):
        upper = np.zeros_like(w)  # pairs rho[n+d, n]
        lower = np.zeros_like(w)  # pairs rho[n, n+d]
        any_term = False
        for n in range(dim - d):
            a = rho[n + d, n]
            b = rho[n, n + d]
            if a == 0 and b == 0:
                continue
            any_term = True
            coef = np.exp(0.5 * (d * np.log(2.0) + gammaln(n + 1) - gammaln(n + d + 1)))
            lag = ((-1.0) ** n) * coef * eval_genlaguerre(n, d, arg)
            upper = upper + a * lag
            if d > 0:
                lower = lower + b * lag
        if any_term:
            w = w + zpow * upper
            if d > 0:
                w = w + np.conj(zpow) * lower
        if d + 1 < dim:
            zpow = zpow * z
    w = envelope * w
    residue = float(np.max(np.abs(w.imag))) if w.size else 0.0
    if residue > _IMAG_RESIDUE_TOL:
        raise DomainError(f"Wigner evaluation left an imaginary residue of {residue}")
    return w.real


def wigner(
    rho: DensityMatrix,
    x_axis: np.ndarray | None = None,
    p_axis: np.ndarray | None = None,
) -> WignerGrid:
    """Wigner function on a rectangular grid (default -5..5, 201 x 201)."""
    if x_axis is None:
        x_axis = np.linspace(*DEFAULT_WIGNER_RANGE, DEFAULT_WIGNER_POINTS)
    if p_axis is None:
        p_axis = np.linspace(*DEFAULT_WIGNER_RANGE, DEFAULT_WIGNER_POINTS)
    x_axis = np.asarray(x_axis, dtype=float)
    p_axis = np.asarray(p_axis, dtype=float)
    xg, pg = np.meshgrid(x_axis, p_axis, indexing="ij")
    values = _wigner_values(np.asarray(rho.elements), xg, pg)
    return WignerGrid(x_axis, p_axis, values)


def wigner_values(rho: DensityMatrix, x, p) -> np.ndarray:
    """W at arbitrary paired (x, p) arrays; shapes must broadcast."""
    return _wigner_values(np.asarray(rho.elements), np.asarray(x, float), np.asarray(p, float))


def wigner_integral_oracle(rho: DensityMatrix, x: float, p: float) -> float:
    """W(x, p) by direct quadrature of (1/pi)·∫ e^{2·i·p'·x} rho(p+p', p-p') dp'.

    The momentum-basis matrix elements come from the quadrature wavefunctions
    at theta = pi/2; the trapezoid grid is refined until two successive
    refinements agree to 1e-8.
    """
    dim = rho.config.dim
    half_width = np.sqrt(2.0 * rho.config.cutoff + 1.0) + 6.0 + abs(p)
    rho_m = np.asarray(rho.elements)
    previous = None
    points = 1025
    while points <= 2**17 + 1:
        pp = np.linspace(-half_width, half_width, points)
        wa = quadrature_basis(dim - 1, p + pp, np.pi / 2)  # <n|a>
        wb = quadrature_basis(dim - 1, p - pp, np.pi / 2)
        kernel = np.einsum("ni,nm,mi->i", wa.conj(), rho_m, wb)
        integrand = np.exp(2j * pp * x) * kernel / np.pi
        value = complex(np.trapezoid(integrand, pp))
        if previous is not None and abs(value - previous) <= 1e-8 * max(1.0, abs(value)):
            if abs(value.imag) > 1e-6:
                raise ConvergenceError(f"imaginary residue {value.imag} in Wigner quadrature")
            return float(value.real)
        previous = value
        points = 2 * (points - 1) + 1
    raise ConvergenceError("Wigner quadrature did not converge under grid refinement")


def rho_quad(rho: DensityMatrix, theta: float, axis: QuadGrid | np.ndarray) -> QuadDensityMatrix:
    """Density matrix in the rotated quadrature basis.

    rho(q, q') = sum_{n,m} <q_theta|n> rho_{n,m} <m|q'_theta>, with theta = 0
    the position basis and theta = pi/2 the momentum basis.
    """
    q = axis.axis if isinstance(axis, QuadGrid) else np.asarray(axis, dtype=float)
    w = quadrature_basis(rho.config.cutoff, q, theta)  # w[n, i] = <n|q_i>
    values = w.conj().T @ np.asarray(rho.elements) @ w
    return QuadDensityMatrix(axis=q, values=values, theta=theta)


def marginal(rho: DensityMatrix, theta: float, axis: QuadGrid | np.ndarray) -> np.ndarray:
    """Probability density Pr(q | theta), the diagonal of rho_quad."""
    q = axis.axis if isinstance(axis, QuadGrid) else np.asarray(axis, dtype=float)
    w = quadrature_basis(rho.config.cutoff, q, theta)
    return np.einsum("ni,nm,mi->i", w.conj(), np.asarray(rho.elements), w).real


def marginal_sweep(
    rho: DensityMatrix, angles_deg: np.ndarray, axis: QuadGrid | np.ndarray
) -> np.ndarray:
    """Stack of marginals, one row per angle (degrees)."""
    q = axis.axis if isinstance(axis, QuadGrid) else np.asarray(axis, dtype=float)
    return np.stack([marginal(rho, np.deg2rad(a), q) for a in np.asarray(angles_deg)])


def origin_parity(rho: DensityMatrix) -> float:
    """(1/pi)·sum_n (-1)^n rho_{n,n}; equals the Wigner function at the origin."""
    signs = (-1.0) ** np.arange(rho.config.dim)
    return float(np.dot(signs, rho.diagonal) / np.pi)


def _basis_label(theta: float) -> str:
    if abs(theta) < 1e-12:
        return "position"
    if abs(theta - np.pi / 2) < 1e-12:
        return "momentum"
    return "angle"


def save_quad_csv(qdm: QuadDensityMatrix, path) -> None:
    """Grid CSV: '# basis=<...> theta=<deg>' header, then axis1,axis2,re,im rows."""
    theta_deg = float(np.rad2deg(qdm.theta))
    lines = [f"# basis={_basis_label(qdm.theta)} theta={theta_deg!r}", "axis1,axis2,re,im"]
    for i, qi in enumerate(qdm.axis):
        for j, qj in enumerate(qdm.axis):
            v = qdm.values[i, j]
            lines.append(f"{float(qi)!r},{float(qj)!r},{float(v.real)!r},{float(v.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def save_wigner_csv(grid: WignerGrid, path) -> None:
    """Grid CSV for W(x, p): axis1 = x, axis2 = p, re = W."""
    lines = ["# basis=wigner theta=0.0", "axis1,axis2,re"]
    for i, x in enumerate(grid.x_axis):
        for j, p in enumerate(grid.p_axis):
            lines.append(f"{float(x)!r},{float(p)!r},{float(grid.values[i, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def save_marginal_sweep_csv(angles_deg, axis, sweep: np.ndarray, path) -> None:
    """Long-format CSV of a marginal sweep: theta_deg, q, density."""
    lines = ["# basis=marginal-sweep", "theta_deg,q,density"]
    axis = axis.axis if isinstance(axis, QuadGrid) else np.asarray(axis, float)
    for a, row in zip(np.asarray(angles_deg), sweep):
        for q, d in zip(axis, row):
            lines.append(f"{float(a)!r},{float(q)!r},{float(d)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


class CoherencePeak(NamedTuple):
    position: float
    diagonal_value: float
    off_diagonal_value: float


def coherence_peak(
    rho: DensityMatrix, axis: QuadGrid | np.ndarray | None = None, theta: float = np.pi / 2
) -> CoherencePeak:
    """Locate the non-negative diagonal peak of rho(q, q) and read rho(q, -q) there.

    The off-diagonal value at the diagonal peaks is the interference witness
    separating coherent superpositions from classical mixtures; the axis must
    be symmetric about zero.
    """
    grid = QuadGrid.default() if axis is None else (axis if isinstance(axis, QuadGrid) else QuadGrid(np.asarray(axis, float)))
    q = grid.axis
    if abs(q[0] + q[-1]) > 1e-9:
        raise DomainError("coherence_peak requires an axis symmetric about zero")
    qdm = rho_quad(rho, theta, grid)
    diag = qdm.diagonal
    half = q >= 0.0
    idx_half = int(np.argmax(diag[half]))
    idx = np.nonzero(half)[0][idx_half]
    mirror = q.size - 1 - idx  # index of -q on a symmetric axis
    off = float(qdm.values[idx, mirror].real)
    return CoherencePeak(position=float(q[idx]), diagonal_value=float(diag[idx]), off_diagonal_value=off)
