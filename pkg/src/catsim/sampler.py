"""Synthetic homodyne datasets: the stand-in for the laboratory digitizer.

Quadrature values are drawn by tabulated inverse-CDF sampling from the exact
marginal of a known density matrix, phase by phase, with reproducible
per-phase sub-seeds. Phases are expressed in degrees everywhere records are
read or written.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateDistributionError, DomainError, ParseError, SchemaError
from .fock import DensityMatrix
from .phasespace import marginal

DEFAULT_PHASES_DEG = (-45.0, -22.5, 0.0, 22.5, 45.0, 90.0)
DEFAULT_SAMPLES_PER_PHASE = 10_000

SHOT_NOISE_VARIANCE = 0.5  # vacuum quadrature variance in this normalization

_CDF_POINTS = 4096
_CDF_RANGE = (-8.0, 8.0)  # covers the anti-squeezed tails of every pipeline state
_MIN_GRID_MASS = 0.999


@dataclass(frozen=True)
class PhasePlan:
    """Measurement design: local-oscillator phases and draws per phase."""

    phases_deg: tuple[float, ...] = DEFAULT_PHASES_DEG
    samples_per_phase: int = DEFAULT_SAMPLES_PER_PHASE

    def __post_init__(self):
        if len(self.phases_deg) == 0:
            raise DomainError("phase plan must contain at least one phase")
        if self.samples_per_phase < 1:
            raise DomainError("samples_per_phase must be >= 1")
        object.__setattr__(self, "phases_deg", tuple(float(t) for t in self.phases_deg))


@dataclass
class HomodyneDataset:
    """Flat record list (theta_deg, q) plus acquisition metadata."""

    theta_deg: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta_deg = np.asarray(self.theta_deg, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.meta.setdefault("shot_noise_variance", SHOT_NOISE_VARIANCE)
        self.validate()

    def validate(self) -> None:
        if self.theta_deg.shape != self.q.shape or self.theta_deg.ndim != 1:
            raise SchemaError("theta and q must be one-dimensional arrays of equal length")
        if self.q.size and not np.all(np.isfinite(self.q)):
            raise SchemaError("quadrature values must be finite")
        phases = self.meta.get("phases_deg")
        counts = self.meta.get("counts_per_phase")
        if phases is not None:
            declared = set(float(t) for t in phases)
            present = set(np.unique(self.theta_deg).tolist())
            if not present.issubset(declared):
                raise SchemaError(f"records contain undeclared phases {sorted(present - declared)}")
            if counts is not None:
                for t, c in zip(phases, counts):
                    actual = int(np.sum(self.theta_deg == float(t)))
                    if actual != int(c):
                        raise SchemaError(
                            f"phase {t}: {actual} records but metadata declares {c}"
                        )

    def __len__(self) -> int:
        return int(self.q.size)

    @property
    def phases(self) -> list[float]:
        if "phases_deg" in self.meta:
            return [float(t) for t in self.meta["phases_deg"]]
        return np.unique(self.theta_deg).tolist()

    def records_for(self, theta_deg: float) -> np.ndarray:
        return self.q[self.theta_deg == float(theta_deg)]


def _subseed(seed: int, index: int) -> int:
    """Order-independent 64-bit sub-seed for stream `index` of a dataset."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_phase(
    rho: DensityMatrix,
    theta_deg: float,
    count: int,
    seed: int,
    grid_points: int = _CDF_POINTS,
    q_range: tuple[float, float] = _CDF_RANGE,
) -> np.ndarray:
    """Draw i.i.d. quadrature values at one phase by inverse-CDF interpolation."""
    if count < 1:
        raise DomainError("count must be >= 1")
    grid = np.linspace(q_range[0], q_range[1], grid_points)
    pdf = marginal(rho, np.deg2rad(theta_deg), grid)
    pdf = np.clip(pdf, 0.0, None)
    dq = grid[1] - grid[0]
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * dq)))
    mass = cdf[-1]
    if mass < _MIN_GRID_MASS:
        raise DegenerateDistributionError(
            f"marginal mass on the sampling grid is {mass:.6f} < {_MIN_GRID_MASS}"
        )
    cdf /= mass
    u = np.random.default_rng(seed).random(count)
    return np.interp(u, cdf, grid)


def synth_dataset(
    rho: DensityMatrix, plan: PhasePlan, seed: int, source_id: str = "state"
) -> HomodyneDataset:
    """Concatenated per-phase draws with derived sub-seeds and full metadata."""
    thetas, values = [], []
    for i, t in enumerate(plan.phases_deg):
        draws = sample_phase(rho, t, plan.samples_per_phase, _subseed(seed, i))
        thetas.append(np.full(plan.samples_per_phase, t))
        values.append(draws)
    meta = {
        "source_id": source_id,
        "seed": int(seed),
        "phases_deg": list(plan.phases_deg),
        "counts_per_phase": [plan.samples_per_phase] * len(plan.phases_deg),
        "shot_noise_variance": SHOT_NOISE_VARIANCE,
    }
    return HomodyneDataset(np.concatenate(thetas), np.concatenate(values), meta)


def save_dataset(dataset: HomodyneDataset, path: str | Path) -> None:
    """Write the canonical CSV: '#key=value' metadata, 'theta_deg,q' header, records."""
    lines = []
    meta = dataset.meta
    if "source_id" in meta:
        lines.append(f"#source_id={meta['source_id']}")
    if meta.get("seed") is not None:
        lines.append(f"#seed={int(meta['seed'])}")
    if "phases_deg" in meta:
        lines.append("#phases_deg=" + ",".join(repr(float(t)) for t in meta["phases_deg"]))
    if "counts_per_phase" in meta:
        lines.append("#counts_per_phase=" + ",".join(str(int(c)) for c in meta["counts_per_phase"]))
    lines.append(f"#shot_noise_variance={float(meta.get('shot_noise_variance', SHOT_NOISE_VARIANCE))!r}")
    lines.append("theta_deg,q")
    for t, v in zip(dataset.theta_deg, dataset.q):
        lines.append(f"{float(t)!r},{float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_dataset(path: str | Path) -> HomodyneDataset:
    """Read the canonical CSV; raises ParseError with the offending line number."""
    meta: dict = {}
    thetas: list[float] = []
    values: list[float] = []
    header_seen = False
    with open(path, "r", encoding="ascii") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" not in line:
                    raise ParseError(f"malformed metadata comment {line!r}", line_no)
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                if line != "theta_deg,q":
                    raise SchemaError(
                        f"expected header 'theta_deg,q' at line {line_no}, found {line!r}"
                    )
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"expected two comma-separated fields, found {len(parts)}", line_no)
            try:
                thetas.append(float(parts[0]))
            except ValueError:
                raise ParseError(f"unreadable theta token {parts[0]!r}", line_no) from None
            try:
                values.append(float(parts[1]))
            except ValueError:
                raise ParseError(f"unreadable quadrature token {parts[1]!r}", line_no) from None
    if not header_seen:
        raise SchemaError("file contains no 'theta_deg,q' header line")
    typed: dict = {}
    if "source_id" in meta:
        typed["source_id"] = meta["source_id"]
    if "seed" in meta:
        typed["seed"] = int(meta["seed"])
    if "phases_deg" in meta:
        typed["phases_deg"] = [float(t) for t in meta["phases_deg"].split(",") if t]
    if "counts_per_phase" in meta:
        typed["counts_per_phase"] = [int(c) for c in meta["counts_per_phase"].split(",") if c]
    typed["shot_noise_variance"] = float(meta.get("shot_noise_variance", SHOT_NOISE_VARIANCE))
    return HomodyneDataset(np.asarray(thetas), np.asarray(values), typed)
