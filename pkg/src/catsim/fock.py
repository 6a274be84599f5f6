"""Truncated Fock-basis states, elementary operators, and scalar metrics.

Conventions used throughout the package (hbar = 1):
  x = (a + a†)/√2,  p = (a − a†)/(i√2),  [x, p] = i, vacuum variance 1/2.
The quadrature eigenfunction at angle theta is expanded as
  <n|q_theta> = psi_n(q) · exp(i·n·theta)
with psi_n the real harmonic-oscillator wavefunction, so theta = 0 is the
position basis and theta = pi/2 the momentum basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import DimensionMismatch, DomainError, TruncationError, ZeroStateError

DEFAULT_CUTOFF = 30
DEFAULT_TAIL_TOL = 1e-6

NORM_TOL = 1e-12
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

# level_db = 10·log10(e^{2r})  <=>  r = level_db · ln(10)/20
_R_PER_DB = math.log(10.0) / 20.0


@dataclass(frozen=True)
class HilbertConfig:
    """Truncated single-mode Fock space: indices 0..cutoff, hbar fixed at 1."""

    cutoff: int = DEFAULT_CUTOFF
    hbar: float = 1.0

    def __post_init__(self):
        if self.cutoff < 1:
            raise DomainError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.hbar != 1.0:
            raise DomainError("hbar is fixed at 1; no other value is supported")

    @property
    def dim(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class SqueezeSpec:
    """Squeezing strength, constructed from the parameter r or a dB level."""

    r: float

    def __post_init__(self):
        if not (self.r >= 0.0):
            raise DomainError(f"squeezing parameter must be >= 0, got {self.r}")

    @classmethod
    def from_r(cls, r: float) -> "SqueezeSpec":
        return cls(r=float(r))

    @classmethod
    def from_db(cls, level_db: float) -> "SqueezeSpec":
        if level_db < 0.0:
            raise DomainError(f"squeezing level must be >= 0 dB, got {level_db}")
        return cls(r=float(level_db) * _R_PER_DB)

    @property
    def level_db(self) -> float:
        return self.r / _R_PER_DB


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    """Pure state amplitudes c_n with unit norm in a truncated Fock basis."""

    amplitudes: np.ndarray
    config: HilbertConfig

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.config.dim,):
            raise DimensionMismatch(
                f"amplitude vector has shape {amps.shape}, expected ({self.config.dim},)"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state vector norm {norm} deviates from 1 beyond {NORM_TOL}")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @classmethod
    def normalize(cls, amplitudes: np.ndarray, config: HilbertConfig) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0.0:
            raise ZeroStateError("cannot normalize the zero vector")
        return cls(amps / norm, config)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def mean_photon(self) -> float:
        return float(np.sum(np.arange(self.config.dim) * self.probabilities))

    def overlap(self, other: "StateVector") -> complex:
        if self.config != other.config:
            raise DimensionMismatch("states live in different truncated spaces")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.config)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix rho_{n,m}."""

    elements: np.ndarray
    config: HilbertConfig

    def __post_init__(self):
        rho = np.asarray(self.elements, dtype=complex)
        d = self.config.dim
        if rho.shape != (d, d):
            raise DimensionMismatch(f"matrix has shape {rho.shape}, expected ({d}, {d})")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > HERMITICITY_TOL:
            raise DomainError(f"matrix deviates from Hermitian by {herm}")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"trace {tr} deviates from 1 beyond {TRACE_TOL}")
        lo = float(np.linalg.eigvalsh(rho)[0])
        if lo < -PSD_TOL:
            raise DomainError(f"smallest eigenvalue {lo} below -{PSD_TOL}")
        object.__setattr__(self, "elements", _readonly(rho))

    @property
    def diagonal(self) -> np.ndarray:
        return self.elements.diagonal().real

    @property
    def purity(self) -> float:
        return float(np.sum(np.abs(self.elements) ** 2))

    def embed(self, cutoff: int) -> "DensityMatrix":
        """Pad with zero rows/columns up to a larger cutoff (trace preserved)."""
        if cutoff < self.config.cutoff:
            raise DomainError("embed target cutoff smaller than current; use truncated()")
        out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        out[: self.config.dim, : self.config.dim] = self.elements
        return DensityMatrix(out, HilbertConfig(cutoff))

    def truncated(self, cutoff: int) -> "DensityMatrix":
        """Drop components above a smaller cutoff and renormalize the trace."""
        if cutoff >= self.config.cutoff:
            return self.embed(cutoff)
        block = np.array(self.elements[: cutoff + 1, : cutoff + 1])
        tr = np.trace(block).real
        if tr <= 0.0:
            raise DomainError("truncation removed all probability mass")
        return DensityMatrix(block / tr, HilbertConfig(cutoff))

    def to_dict(self) -> dict:
        return {
            "cutoff": self.config.cutoff,
            "re": self.elements.real.tolist(),
            "im": self.elements.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DensityMatrix":
        cutoff = int(payload["cutoff"])
        rho = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)
        return cls(rho, HilbertConfig(cutoff))


def save_density_matrix(rho: DensityMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(rho.to_dict()), encoding="ascii")


def load_density_matrix(path: str | Path) -> DensityMatrix:
    return DensityMatrix.from_dict(json.loads(Path(path).read_text(encoding="ascii")))


def _check_tail(tail: float, tail_tol: float, what: str) -> None:
    if tail > tail_tol:
        raise TruncationError(
            f"{what}: truncated tail weight {tail:.3e} exceeds {tail_tol:.1e}; "
            "raise the cutoff or pass a larger tail_tol",
            tail=tail,
        )


def squeezed_vacuum(
    spec: SqueezeSpec, config: HilbertConfig, tail_tol: float = DEFAULT_TAIL_TOL
) -> StateVector:
    """Squeezed vacuum with the position quadrature squeezed below 1/2.

    Even amplitudes follow c_{2k} = N·(−tanh r)^k·√((2k)!)/(2^k k!); the sign
    makes the momentum quadrature the anti-squeezed one, so photon-subtracted
    states develop their two lobes along p.
    """
    r = spec.r
    if r < 0:
        raise DomainError(f"squeezing parameter must be >= 0, got {r}")
    d = config.dim
    amps = np.zeros(d, dtype=complex)
    amps[0] = 1.0
    t = math.tanh(r)
    for k in range(1, (d - 1) // 2 + 1):
        # c_{2k} = -tanh(r)·sqrt((2k-1)/(2k)) · c_{2k-2}
        amps[2 * k] = -t * math.sqrt((2 * k - 1) / (2 * k)) * amps[2 * k - 2]
    amps /= math.sqrt(math.cosh(r))  # exact untruncated normalization
    tail = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    _check_tail(tail, tail_tol, f"squeezed_vacuum(r={r:.4g}, cutoff={config.cutoff})")
    return StateVector.normalize(amps, config)


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Truncated coherent amplitudes e^{-|a|^2/2}·a^n/√(n!) by stable recurrence."""
    c = np.zeros(dim, dtype=complex)
    c[0] = math.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(dim - 1):
        c[n + 1] = c[n] * alpha / math.sqrt(n + 1)
    return c


def coherent_state(
    alpha: complex, config: HilbertConfig, tail_tol: float = DEFAULT_TAIL_TOL
) -> StateVector:
    """Coherent state |alpha>, renormalized after truncation."""
    c = _coherent_amplitudes(complex(alpha), config.dim)
    tail = max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2)))
    _check_tail(tail, tail_tol, f"coherent_state(|alpha|={abs(alpha):.4g}, cutoff={config.cutoff})")
    return StateVector.normalize(c, config)


def cat_state(
    alpha: complex,
    parity: Literal["even", "odd"],
    config: HilbertConfig,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> StateVector:
    """Normalized |alpha> ± |-alpha| superposition.

    The even cat has support only on even photon numbers and tends to the
    vacuum as alpha -> 0; the odd cat is undefined at alpha = 0.
    """
    if parity not in ("even", "odd"):
        raise DomainError(f"parity must be 'even' or 'odd', got {parity!r}")
    alpha = complex(alpha)
    sign = 1.0 if parity == "even" else -1.0
    if parity == "odd" and alpha == 0:
        raise DomainError("odd cat state is undefined at alpha = 0")
    c = _coherent_amplitudes(alpha, config.dim)
    n = np.arange(config.dim)
    raw = c * (1.0 + sign * (-1.0) ** n)
    # exact norm of |a> ± |-a> is 2(1 ± e^{-2|a|^2}); tail measured against it
    norm2_exact = 2.0 * (1.0 + sign * math.exp(-2.0 * abs(alpha) ** 2))
    tail = max(0.0, 1.0 - float(np.sum(np.abs(raw) ** 2)) / norm2_exact)
    _check_tail(tail, tail_tol, f"cat_state(|alpha|={abs(alpha):.4g}, cutoff={config.cutoff})")
    return StateVector.normalize(raw, config)


def mixed_coherent(
    alpha: complex, config: HilbertConfig, tail_tol: float = DEFAULT_TAIL_TOL
) -> DensityMatrix:
    """Equal-weight classical mixture of |alpha><alpha| and |-alpha><-alpha|."""
    plus = coherent_state(alpha, config, tail_tol)
    minus = coherent_state(-alpha, config, tail_tol)
    rho = 0.5 * (
        np.outer(plus.amplitudes, plus.amplitudes.conj())
        + np.outer(minus.amplitudes, minus.amplitudes.conj())
    )
    return DensityMatrix(rho, config)


def apply_annihilation(state: StateVector) -> tuple[StateVector, float]:
    """Apply a and renormalize; also return the pre-normalization squared norm.

    The squared norm of a|psi> equals the mean photon number of the input.
    Raises ZeroStateError on the vacuum, where a|0> = 0.
    """
    c = state.amplitudes
    n = np.arange(1, state.config.dim)
    lowered = np.zeros_like(c)
    lowered[:-1] = np.sqrt(n) * c[1:]
    norm2 = float(np.sum(np.abs(lowered) ** 2))
    if norm2 < 1e-24:
        raise ZeroStateError("annihilation of the vacuum yields the zero vector")
    return StateVector(lowered / math.sqrt(norm2), state.config), norm2


def mean_photon(rho: DensityMatrix) -> float:
    """Sum of n·rho_{n,n}."""
    return float(np.sum(np.arange(rho.config.dim) * rho.diagonal))


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a)·b·sqrt(a)))^2, clipped to [0, 1]."""
    if a.config != b.config:
        raise DimensionMismatch("density matrices live in different truncated spaces")
    sa = _sqrtm_psd(a.elements)
    inner = sa @ b.elements @ sa
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of the difference."""
    if a.config != b.config:
        raise DimensionMismatch("density matrices live in different truncated spaces")
    vals = np.linalg.eigvalsh(a.elements - b.elements)
    return 0.5 * float(np.sum(np.abs(vals)))


def quadrature_basis(cutoff: int, q, theta: float = 0.0) -> np.ndarray:
    """Matrix W[n, i] = <n|q_i, theta> = psi_n(q_i)·e^{i n theta}.

    Evaluated with the normalized upward Hermite recurrence
      psi_{n+1}(q) = sqrt(2/(n+1))·q·psi_n(q) − sqrt(n/(n+1))·psi_{n-1}(q),
    which stays finite far past the factorial-overflow range.
    """
    if cutoff < 0:
        raise DomainError(f"cutoff must be >= 0, got {cutoff}")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    psi = np.zeros((cutoff + 1, q.size))
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * q * q)
    if cutoff >= 1:
        psi[1] = math.sqrt(2.0) * q * psi[0]
    for n in range(1, cutoff):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * q * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    if theta == 0.0:
        return psi.astype(complex)
    phases = np.exp(1j * np.arange(cutoff + 1) * theta)
    return psi * phases[:, None]


def quadrature_wavefunction(n: int, q, theta: float = 0.0):
    """<n|q_theta> = psi_n(q)·e^{i n theta}; theta in radians.

    Returns a complex scalar for scalar q, else a complex array. The Born
    probability of a homodyne record is |<n|q_theta>|^2 summed against rho
    with the conjugate on the bra side.
    """
    if n < 0:
        raise DomainError(f"photon number must be >= 0, got {n}")
    row = quadrature_basis(n, q, theta)[n]
    if np.isscalar(q) or np.asarray(q).ndim == 0:
        return complex(row[0])
    return row


def phase_rotated(rho: DensityMatrix, theta: float) -> DensityMatrix:
    """e^{-i·theta·n} rho e^{+i·theta·n}.

    Measuring the rotated state at phase 0 reproduces the quadrature
    statistics of rho measured at phase theta.
    """
    phases = np.exp(-1j * np.arange(rho.config.dim) * theta)
    rot = (phases[:, None] * rho.elements) * phases.conj()[None, :]
    return DensityMatrix(rot, rho.config)
