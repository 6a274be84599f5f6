"""Quantum channels and the heralded photon-subtraction pipeline.

A squeezed vacuum is degraded by the source loss, tapped by a beam splitter,
and the tapped (idler) arm is read out by a lossy photon-number-resolving
detector; detecting n photons collapses the kept (signal) arm into an
approximate cat state, which then suffers the measurement-side loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import (
    DomainError,
    TruncationBudgetError,
    ZeroProbabilityError,
)
from .fock import (
    DEFAULT_TAIL_TOL,
    DensityMatrix,
    HilbertConfig,
    SqueezeSpec,
    StateVector,
    squeezed_vacuum,
)

DEFAULT_IDLER_CUTOFF = 12
DEFAULT_MAX_JOINT_DIM = 4096

_EIGENBRANCH_FLOOR = 1e-15  # mixture weights below this carry no probability


@dataclass(frozen=True)
class ExperimentParams:
    """Source, tap, detection, and timing figures of one subtraction setup.

    Defaults reproduce the as-built experiment: 6.5 dB of squeezing, 5%
    source loss, tap reflectivity 0.81, 40% idler and 85% signal efficiency,
    5 MHz repetition chopped at 50% duty.
    """

    squeeze: SqueezeSpec = SqueezeSpec.from_db(6.5)
    opa_loss: float = 0.05
    bs_reflectivity: float = 0.81
    idler_efficiency: float = 0.40
    signal_efficiency: float = 0.85
    herald_n: int = 4
    rep_rate_hz: float = 5e6
    duty_cycle: float = 0.5
    cutoff: int = 30
    idler_cutoff: int = DEFAULT_IDLER_CUTOFF

    def __post_init__(self):
        for name in ("opa_loss", "idler_efficiency", "signal_efficiency"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} must be in [0, 1], got {v}")
        if not (0.0 < self.bs_reflectivity <= 1.0):
            raise DomainError(f"bs_reflectivity must be in (0, 1], got {self.bs_reflectivity}")
        if self.herald_n < 0:
            raise DomainError(f"herald_n must be >= 0, got {self.herald_n}")
        if self.rep_rate_hz <= 0:
            raise DomainError(f"rep_rate_hz must be > 0, got {self.rep_rate_hz}")
        if not (0.0 < self.duty_cycle <= 1.0):
            raise DomainError(f"duty_cycle must be in (0, 1], got {self.duty_cycle}")
        if self.cutoff < 1 or self.idler_cutoff < 1:
            raise DomainError("cutoff and idler_cutoff must be >= 1")

    def with_herald(self, n: int) -> "ExperimentParams":
        return replace(self, herald_n=n)

    def to_flat_dict(self) -> dict:
        return {
            "squeeze_db": self.squeeze.level_db,
            "opa_loss": self.opa_loss,
            "bs_reflectivity": self.bs_reflectivity,
            "idler_efficiency": self.idler_efficiency,
            "signal_efficiency": self.signal_efficiency,
            "herald_n": self.herald_n,
            "rep_rate_hz": self.rep_rate_hz,
            "duty_cycle": self.duty_cycle,
            "cutoff": self.cutoff,
            "idler_cutoff": self.idler_cutoff,
        }

    @classmethod
    def from_flat_dict(cls, d: dict) -> "ExperimentParams":
        return cls(
            squeeze=SqueezeSpec.from_db(float(d["squeeze_db"])),
            opa_loss=float(d["opa_loss"]),
            bs_reflectivity=float(d["bs_reflectivity"]),
            idler_efficiency=float(d["idler_efficiency"]),
            signal_efficiency=float(d["signal_efficiency"]),
            herald_n=int(d["herald_n"]),
            rep_rate_hz=float(d["rep_rate_hz"]),
            duty_cycle=float(d["duty_cycle"]),
            cutoff=int(d["cutoff"]),
            idler_cutoff=int(d["idler_cutoff"]),
        )


@dataclass(frozen=True)
class TwoModeState:
    """Pure two-mode state: amplitudes[s, k] on |s>_signal ⊗ |k>_idler."""

    amplitudes: np.ndarray
    signal_config: HilbertConfig
    idler_cutoff: int

    def total_photon_marginal(self) -> np.ndarray:
        """Probability of total photon number s + k."""
        a2 = np.abs(self.amplitudes) ** 2
        out = np.zeros(self.signal_config.cutoff + self.idler_cutoff + 1)
        for k in range(self.idler_cutoff + 1):
            out[k : k + self.signal_config.dim] += a2[:, k]
        return out

    def idler_marginal(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)


@dataclass(frozen=True)
class HeraldResult:
    """Conditioned signal state plus heralding probability and event rate."""

    state: DensityMatrix
    herald_probability: float
    estimated_rate: float


def _loss_kraus(dim: int, eta: float) -> list[np.ndarray]:
    """Kraus operators K_k[n-k, n] = sqrt(C(n,k)·eta^{n-k}·(1-eta)^k)."""
    ops = []
    for k in range(dim):
        m = np.zeros((dim, dim))
        for n in range(k, dim):
            m[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
        ops.append(m)
    return ops


def loss_channel(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Pure-loss channel with transmission eta (eta = 1 is the identity)."""
    if not (0.0 <= eta <= 1.0):
        raise DomainError(f"transmission must be in [0, 1], got {eta}")
    if eta == 1.0:
        return rho
    out = np.zeros_like(np.asarray(rho.elements))
    for k_op in _loss_kraus(rho.config.dim, eta):
        out += k_op @ rho.elements @ k_op.T
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out, rho.config)


def _bs_amplitudes(c: np.ndarray, reflectivity: float, idler_cutoff: int) -> np.ndarray:
    """Split signal amplitudes against a vacuum idler port.

    |n, 0>  ->  sum_k sqrt(C(n,k)) · R^{(n-k)/2} (1-R)^{k/2} |n-k, k>,
    keeping sqrt(R) of the field in the signal output.
    """
    dim = c.size
    out = np.zeros((dim, idler_cutoff + 1), dtype=complex)
    sr = math.sqrt(reflectivity)
    st = math.sqrt(1.0 - reflectivity)
    for n in range(dim):
        if c[n] == 0:
            continue
        amp = c[n] * sr**n
        out[n, 0] += amp
        for k in range(1, min(n, idler_cutoff) + 1):
            # ratio between consecutive k: sqrt((n-k+1)/k) · st/sr
            amp = amp * math.sqrt((n - k + 1) / k) * st / sr
            out[n - k, k] += amp
    return out


def beamsplitter_join(
    signal_in: StateVector,
    reflectivity: float,
    idler_cutoff: int = DEFAULT_IDLER_CUTOFF,
    max_joint_dim: int = DEFAULT_MAX_JOINT_DIM,
) -> TwoModeState:
    """Join the signal with a vacuum idler on a beam splitter of the given reflectivity."""
    if not (0.0 < reflectivity <= 1.0):
        raise DomainError(f"reflectivity must be in (0, 1], got {reflectivity}")
    joint = signal_in.config.dim * (idler_cutoff + 1)
    if joint > max_joint_dim:
        raise TruncationBudgetError(
            f"joint dimension {joint} exceeds the budget {max_joint_dim}"
        )
    amps = _bs_amplitudes(np.asarray(signal_in.amplitudes), reflectivity, idler_cutoff)
    return TwoModeState(amps, signal_in.config, idler_cutoff)


@lru_cache(maxsize=None)
def _povm_diagonal(n: int, eta_i: float, idler_cutoff: int) -> tuple[float, ...]:
    diag = np.zeros(idler_cutoff + 1)
    for m in range(n, idler_cutoff + 1):
        diag[m] = math.comb(m, n) * eta_i**n * (1.0 - eta_i) ** (m - n)
    return tuple(diag)


def lossy_number_povm(n: int, eta_i: float, idler_cutoff: int) -> np.ndarray:
    """POVM element for 'n photons seen by a detector of efficiency eta_i'.

    Pi_n = sum_{m>=n} C(m,n)·eta_i^n·(1-eta_i)^{m-n} |m><m|; the family sums
    to the identity on the truncated idler space.
    """
    if not (0.0 <= eta_i <= 1.0):
        raise DomainError(f"efficiency must be in [0, 1], got {eta_i}")
    if not (0 <= n <= idler_cutoff):
        raise DomainError(f"herald photon number {n} outside [0, {idler_cutoff}]")
    return np.diag(_povm_diagonal(n, eta_i, idler_cutoff))


def _tapped_branches(
    params: ExperimentParams, config: HilbertConfig, tail_tol: float = DEFAULT_TAIL_TOL
) -> list[tuple[float, np.ndarray]]:
    """Pure-state decomposition of the lossy source after the tap.

    The source state after the OPA loss is mixed; each eigenvector is sent
    through the beam splitter separately, giving (weight, two-mode amplitude
    matrix) pairs over which heralding outcomes are summed.
    """
    psi = squeezed_vacuum(params.squeeze, config, tail_tol)
    rho = loss_channel(psi.to_density(), 1.0 - params.opa_loss)
    vals, vecs = np.linalg.eigh(np.asarray(rho.elements))
    branches = []
    for w, v in zip(vals[::-1], vecs.T[::-1]):
        if w < _EIGENBRANCH_FLOOR:
            continue
        two_mode = beamsplitter_join(
            StateVector.normalize(v, config), params.bs_reflectivity, params.idler_cutoff
        )
        branches.append((float(w), two_mode.amplitudes))
    return branches


def _conditioned_signal(
    branches: list[tuple[float, np.ndarray]], povm_diag: np.ndarray
) -> tuple[np.ndarray, float]:
    """Unnormalized signal state and probability for one idler POVM element."""
    dim = branches[0][1].shape[0]
    rho_u = np.zeros((dim, dim), dtype=complex)
    for w, amps in branches:
        weighted = amps * povm_diag[None, :]
        rho_u += w * (weighted @ amps.conj().T)
    return rho_u, float(np.trace(rho_u).real)


def herald_subtract(
    params: ExperimentParams,
    config: HilbertConfig | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> HeraldResult:
    """Run the full subtraction pipeline and condition on herald_n idler photons.

    Order: squeezed source -> source loss -> beam-splitter tap -> lossy
    photon-number POVM on the idler -> partial trace and renormalization ->
    signal-side loss. The heralding probability is the conditioned trace
    before renormalization; the event rate multiplies in repetition rate and
    duty cycle.
    """
    if config is None:
        config = HilbertConfig(params.cutoff)
    if params.herald_n > params.idler_cutoff:
        raise DomainError(
            f"herald_n {params.herald_n} exceeds idler cutoff {params.idler_cutoff}"
        )
    branches = _tapped_branches(params, config, tail_tol)
    povm = np.array(_povm_diagonal(params.herald_n, params.idler_efficiency, params.idler_cutoff))
    rho_u, prob = _conditioned_signal(branches, povm)
    if prob < 1e-300:
        raise ZeroProbabilityError(
            f"herald probability for n={params.herald_n} underflowed ({prob})"
        )
    rho = DensityMatrix(0.5 * (rho_u + rho_u.conj().T) / prob, config)
    rho = loss_channel(rho, params.signal_efficiency)
    rate = prob * params.rep_rate_hz * params.duty_cycle
    return HeraldResult(state=rho, herald_probability=prob, estimated_rate=rate)


def herald_probabilities(
    params: ExperimentParams,
    config: HilbertConfig | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> np.ndarray:
    """Probability of each idler outcome n = 0..idler_cutoff (sums to ~1)."""
    if config is None:
        config = HilbertConfig(params.cutoff)
    branches = _tapped_branches(params, config, tail_tol)
    idler = np.zeros(params.idler_cutoff + 1)
    for w, amps in branches:
        idler += w * np.sum(np.abs(amps) ** 2, axis=0)
    probs = np.zeros(params.idler_cutoff + 1)
    for n in range(params.idler_cutoff + 1):
        povm = np.array(_povm_diagonal(n, params.idler_efficiency, params.idler_cutoff))
        probs[n] = float(np.dot(povm, idler))
    return probs


def count_rate_table(
    params: ExperimentParams, n_max: int, config: HilbertConfig | None = None
) -> list[tuple[int, float, float]]:
    """(n, herald probability, estimated rate in counts/s) for n = 0..n_max."""
    if n_max > params.idler_cutoff:
        raise DomainError(f"n_max {n_max} exceeds idler cutoff {params.idler_cutoff}")
    probs = herald_probabilities(params, config)
    scale = params.rep_rate_hz * params.duty_cycle
    return [(n, float(probs[n]), float(probs[n] * scale)) for n in range(n_max + 1)]


def input_state(
    params: ExperimentParams,
    config: HilbertConfig | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> DensityMatrix:
    """The unconditioned source as seen by the measurement chain (tap fully closed)."""
    if config is None:
        config = HilbertConfig(params.cutoff)
    psi = squeezed_vacuum(params.squeeze, config, tail_tol)
    rho = loss_channel(psi.to_density(), 1.0 - params.opa_loss)
    return loss_channel(rho, params.signal_efficiency)
