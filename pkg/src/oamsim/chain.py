"""Multi-crystal photon-pair sources with overlapped emission paths.

A chain is an ordered sequence of stages along one beam line: nonlinear
crystals that each emit a photon pair into the common pair of paths, mode
shifters acting either on the pump or on the down-converted beams, phase
shifters in the down-converted beams, and mirrors that flip the handedness
of the pump OAM.  Because no stage records which crystal fired, the emitted
pair is the coherent sum of the per-crystal contributions.

Conventions:

* A stage acts on every photon pair born upstream of it; a crystal's
  effective pump OAM is its own ``pump_oam`` plus all upstream pump-side
  shifts and mirror flips.
* Pair emission from a crystal with even pump OAM ``2m`` is the symmetric
  ladder ``sum_k alpha_k (|m+k, m-k> + |m-k, m+k>)`` with the ``k = 0`` term
  counted once; the spiral coefficients ``alpha_k`` are normalized with
  multiplicity weights (1 for ``k = 0``, 2 otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ChainShapeError, ModeBoundError, ModelError, UnsupportedPumpError
from .modes import BiphotonKet, DensityOperator, ModeSpace, normalize


@dataclass(frozen=True)
class CrystalSpec:
    """One down-conversion crystal.

    Attributes:
        pump_amplitude: relative pump field amplitude, >= 0.
        pump_oam: intrinsic pump OAM in units of hbar; must be even so it
            splits symmetrically between the two photons.
        spiral_coefficients: amplitudes ``alpha_k`` of the emission ladder,
            indexed by ``k = 0, 1, ...``; normalized at emission time.
    """

    pump_amplitude: float = 1.0
    pump_oam: int = 0
    spiral_coefficients: tuple[complex, ...] = (1.0 + 0.0j,)

    def __post_init__(self):
        object.__setattr__(self, "pump_amplitude", float(self.pump_amplitude))
        object.__setattr__(self, "pump_oam", int(self.pump_oam))
        if self.pump_amplitude < 0:
            raise ValueError(f"pump_amplitude must be >= 0, got {self.pump_amplitude}")
        if self.pump_oam % 2 != 0:
            raise UnsupportedPumpError(
                f"pump OAM must be even, got {self.pump_oam}")
        coeffs = tuple(complex(c) for c in self.spiral_coefficients)
        if not coeffs or all(c == 0 for c in coeffs):
            raise ValueError("spiral_coefficients must contain a nonzero entry")
        object.__setattr__(self, "spiral_coefficients", coeffs)


@dataclass(frozen=True)
class Crystal:
    spec: CrystalSpec


@dataclass(frozen=True)
class PumpModeShifter:
    """Adds ``delta`` quanta of OAM to the pump beam (e.g. a spiral plate)."""

    delta: int

    def __post_init__(self):
        object.__setattr__(self, "delta", int(self.delta))


@dataclass(frozen=True)
class DownconversionModeShifter:
    """Adds ``delta`` quanta of OAM to each down-converted photon."""

    delta: int

    def __post_init__(self):
        object.__setattr__(self, "delta", int(self.delta))


@dataclass(frozen=True)
class PhaseShifter:
    """Multiplies every upstream pair amplitude by ``exp(i*phi)``."""

    phi: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi))


@dataclass(frozen=True)
class Mirror:
    """Flips the sign of the accumulated pump OAM; pair modes untouched."""


ChainStage = Union[Crystal, PumpModeShifter, DownconversionModeShifter,
                   PhaseShifter, Mirror]


def crystal_emission(spec: CrystalSpec, space: ModeSpace,
                     pump_oam: int | None = None) -> BiphotonKet:
    """Normalized pair state emitted by a single crystal.

    ``pump_oam`` overrides the spec's intrinsic value (used by chains, where
    the pump picks up OAM before reaching the crystal).  The two photons
    share the pump OAM symmetrically: ``m = pump_oam / 2`` plus opposite
    spiral offsets ``+-k``.
    """
    ell_pump = spec.pump_oam if pump_oam is None else pump_oam
    if ell_pump % 2 != 0:
        raise UnsupportedPumpError(f"pump OAM must be even, got {ell_pump}")
    m = ell_pump // 2
    amplitudes: dict[tuple[int, int], complex] = {}
    for k, alpha in enumerate(spec.spiral_coefficients):
        if alpha == 0:
            continue
        for (ls, li) in {(m + k, m - k), (m - k, m + k)}:
            if not (space.contains(ls) and space.contains(li)):
                raise ModeBoundError(
                    f"emission mode ({ls}, {li}) from pump OAM {ell_pump} and "
                    f"spiral order {k} exceeds truncation +-{space.truncation}")
            amplitudes[(ls, li)] = amplitudes.get((ls, li), 0.0) + alpha
    return normalize(BiphotonKet(space, amplitudes))


@dataclass(frozen=True)
class ChainConfig:
    """An ordered source chain over a shared mode space."""

    stages: tuple[ChainStage, ...]
    space: ModeSpace = field(default_factory=ModeSpace)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not any(isinstance(s, Crystal) for s in self.stages):
            raise ChainShapeError("chain contains no crystal stage")
        # Validate reachability eagerly so later builds cannot overflow.
        _contributions(self)

    def crystals(self) -> tuple[Crystal, ...]:
        return tuple(s for s in self.stages if isinstance(s, Crystal))

    def phase_shifters(self) -> tuple[PhaseShifter, ...]:
        return tuple(s for s in self.stages if isinstance(s, PhaseShifter))

    def with_phase(self, shifter_index: int, phi: float) -> "ChainConfig":
        """Copy of the chain with the ``shifter_index``-th phase shifter set to ``phi``."""
        count = 0
        stages = []
        found = False
        for stage in self.stages:
            if isinstance(stage, PhaseShifter):
                if count == shifter_index:
                    stage = PhaseShifter(phi)
                    found = True
                count += 1
            stages.append(stage)
        if not found:
            raise ChainShapeError(
                f"chain has {count} phase shifter(s); index {shifter_index} not found")
        return ChainConfig(tuple(stages), self.space)


def _contributions(chain: ChainConfig) -> list[tuple[float, BiphotonKet]]:
    """Per-crystal (weight, unit ket) contributions after downstream stages."""
    space = chain.space
    pump_acc = 0
    crystals: list[tuple[int, CrystalSpec, int]] = []  # (position, spec, pump at entry)
    for pos, stage in enumerate(chain.stages):
        if isinstance(stage, PumpModeShifter):
            pump_acc += stage.delta
        elif isinstance(stage, Mirror):
            pump_acc = -pump_acc
        elif isinstance(stage, Crystal):
            crystals.append((pos, stage.spec, pump_acc))

    out: list[tuple[float, BiphotonKet]] = []
    for pos, spec, pump in crystals:
        ket = crystal_emission(spec, space, pump_oam=spec.pump_oam + pump)
        amps = dict(ket.amplitudes)
        for stage in chain.stages[pos + 1:]:
            if isinstance(stage, DownconversionModeShifter):
                shifted: dict[tuple[int, int], complex] = {}
                for (ls, li), a in amps.items():
                    ls2, li2 = ls + stage.delta, li + stage.delta
                    if not (space.contains(ls2) and space.contains(li2)):
                        raise ModeBoundError(
                            f"mode shift {stage.delta:+d} pushes pair mode "
                            f"({ls}, {li}) outside truncation +-{space.truncation}")
                    shifted[(ls2, li2)] = a
                amps = shifted
            elif isinstance(stage, PhaseShifter):
                factor = np.exp(1j * stage.phi)
                amps = {mode: a * factor for mode, a in amps.items()}
        out.append((spec.pump_amplitude, BiphotonKet(space, amps)))
    return out


def build_state(chain: ChainConfig) -> BiphotonKet:
    """Coherent sum of all crystal contributions, normalized.

    Each crystal's emission (at its effective pump OAM) is propagated
    through every downstream mode and phase shifter, weighted by its pump
    amplitude, and summed.
    """
    total: dict[tuple[int, int], complex] = {}
    for weight, ket in _contributions(chain):
        for mode, a in ket.amplitudes.items():
            total[mode] = total.get(mode, 0.0) + weight * a
    return normalize(BiphotonKet(chain.space, total))


def accumulated_phases(chain: ChainConfig) -> tuple[float, ...]:
    """Net phases of the ladder terms of a canonical chain.

    The canonical layout is ``d`` crystals with exactly one phase shifter
    between consecutive crystals (mode shifters may appear anywhere, and no
    phase shifter before the first or after the last crystal).  Photons from
    crystal ``d - i`` traverse the last ``i`` phase shifters, so the i-th
    ladder term carries ``sum(phis[-i:])``.  Returns ``d - 1`` phases, one
    per ladder term above the zeroth.
    """
    gaps: list[list[float]] = []
    seen_crystal = False
    for stage in chain.stages:
        if isinstance(stage, Crystal):
            gaps.append([])
            seen_crystal = True
        elif isinstance(stage, PhaseShifter):
            if not seen_crystal:
                raise ChainShapeError("phase shifter before the first crystal")
            gaps[-1].append(stage.phi)
    if len(gaps) < 2:
        raise ChainShapeError("canonical chain needs at least two crystals")
    if gaps[-1]:
        raise ChainShapeError("phase shifter after the last crystal")
    inner = gaps[:-1]
    if any(len(g) != 1 for g in inner):
        raise ChainShapeError(
            "canonical chain needs exactly one phase shifter between "
            "consecutive crystals")
    phis = [g[0] for g in inner]
    return tuple(float(sum(phis[len(phis) - i:]))
                 for i in range(1, len(phis) + 1))


@dataclass(frozen=True)
class DistinguishabilityModel:
    """Pairwise coherence between crystal contributions.

    ``pairwise_overlap[(i, j)]`` is the complex degree of coherence between
    crystals ``i`` and ``j`` (chain order, 0-based).  Missing pairs default
    to 1 (fully coherent); diagonal entries are fixed at 1.  The resulting
    matrix must be positive semidefinite.
    """

    pairwise_overlap: tuple[tuple[tuple[int, int], complex], ...] = ()

    @classmethod
    def uniform(cls, gamma: float, n_crystals: int) -> "DistinguishabilityModel":
        pairs = tuple((((i, j), complex(gamma))
                       for i in range(n_crystals) for j in range(i + 1, n_crystals)))
        return cls(pairs)

    def matrix(self, n_crystals: int) -> np.ndarray:
        g = np.ones((n_crystals, n_crystals), dtype=complex)
        for (i, j), value in self.pairwise_overlap:
            if not (0 <= i < n_crystals and 0 <= j < n_crystals):
                raise ModelError(f"overlap pair ({i}, {j}) outside chain of "
                                 f"{n_crystals} crystals")
            if i == j:
                if value != 1:
                    raise ModelError("diagonal overlaps are fixed at 1")
                continue
            g[i, j] = value
            g[j, i] = np.conj(value)
        min_eig = float(np.linalg.eigvalsh(g)[0])
        if min_eig < -1e-10:
            raise ModelError(
                f"overlap matrix is not positive semidefinite "
                f"(eigenvalue {min_eig:.2e})")
        return g


def pair_rate_operator(chain: ChainConfig,
                       disting: DistinguishabilityModel | None = None) -> np.ndarray:
    """Unnormalized coincidence operator of the chain.

    Returns ``sum_ij gamma(i,j) w_i w_j |e_i><e_j|`` over crystal
    contributions with pump weights normalized to ``sum w_i^2 = 1``.  Its
    projections give coincidence rates relative to a single fully pumped
    crystal, so interference shows up in the total rate; :func:`build_density`
    is this operator rescaled to unit trace.
    """
    contributions = _contributions(chain)
    weights = np.array([w for w, _ in contributions], dtype=float)
    wnorm = float(np.linalg.norm(weights))
    if wnorm == 0.0:
        raise ModelError("all crystal pump amplitudes are zero")
    weights = weights / wnorm
    vectors = np.stack([ket.to_vector() for _, ket in contributions])
    gamma = DistinguishabilityModel().matrix(len(contributions)) \
        if disting is None else disting.matrix(len(contributions))
    weighted = vectors * weights[:, None]
    return weighted.T @ gamma @ weighted.conj()


def build_density(chain: ChainConfig,
                  disting: DistinguishabilityModel | None = None) -> DensityOperator:
    """Mixed pair state of a chain with partially distinguishable crystals.

    With all overlaps at 1 this equals the pure projector onto
    :func:`build_state`; smaller overlaps suppress the corresponding
    interference terms.
    """
    op = pair_rate_operator(chain, disting)
    op = (op + op.conj().T) / 2.0
    trace = op.trace().real
    if trace <= 0:
        raise ModelError("pair-rate operator has non-positive trace")
    return DensityOperator(chain.space, op / trace)


@dataclass(frozen=True)
class CoherenceGeometry:
    """Path lengths (any common unit) governing pump coherence between crystals.

    ``pump_path_a``/``pump_path_b`` are the pump path lengths to the earlier
    and later crystal, ``downconversion_path`` is the down-converted path
    between them, and ``coherence_length`` is the pump coherence length.
    """

    pump_path_a: float
    pump_path_b: float
    downconversion_path: float
    coherence_length: float

    def __post_init__(self):
        for name in ("pump_path_a", "pump_path_b", "downconversion_path",
                     "coherence_length"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def imbalance(self) -> float:
        """Signed path mismatch ``pump_path_b - pump_path_a - downconversion_path``."""
        return self.pump_path_b - self.pump_path_a - self.downconversion_path


def coherence_satisfied(geometry: CoherenceGeometry) -> bool:
    """Whether the path mismatch stays within the pump coherence length."""
    return abs(geometry.imbalance()) <= geometry.coherence_length
