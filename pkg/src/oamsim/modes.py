"""State algebra for photon pairs carrying orbital angular momentum.

Single photons live on a truncated ladder of OAM values ``-L..L``; photon
pairs live on the tensor product of two such ladders.  Kets are stored
sparsely as ``{mode: amplitude}`` maps, density operators densely as
matrices over the joint index space.  All operations validate against the
tolerances used throughout the package: 1e-12 for ket normalization and
1e-10 for operator symmetry, trace and positivity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ModeBoundError, ZeroStateError

KET_NORM_TOL = 1e-12
OPERATOR_TOL = 1e-10


@dataclass(frozen=True)
class ModeSpace:
    """Symmetric OAM ladder ``-truncation..truncation`` for one photon."""

    truncation: int = 4

    def __post_init__(self):
        if self.truncation < 0:
            raise ValueError(f"truncation must be >= 0, got {self.truncation}")

    @property
    def dimension(self) -> int:
        return 2 * self.truncation + 1

    @property
    def joint_dimension(self) -> int:
        return self.dimension ** 2

    def modes(self) -> range:
        return range(-self.truncation, self.truncation + 1)

    def contains(self, ell: int) -> bool:
        return -self.truncation <= ell <= self.truncation

    def index(self, ell: int) -> int:
        """Flat index of a single-photon mode."""
        if not self.contains(ell):
            raise ModeBoundError(
                f"mode {ell} outside truncation +-{self.truncation}")
        return ell + self.truncation

    def joint_index(self, ell_signal: int, ell_idler: int) -> int:
        """Flat index of a pair mode, signal-major."""
        return self.index(ell_signal) * self.dimension + self.index(ell_idler)

    def joint_mode(self, flat: int) -> tuple[int, int]:
        """Inverse of :meth:`joint_index`."""
        if not 0 <= flat < self.joint_dimension:
            raise ModeBoundError(f"flat index {flat} outside joint space")
        return (flat // self.dimension - self.truncation,
                flat % self.dimension - self.truncation)


def _check_same_space(a, b) -> None:
    if a.space != b.space:
        raise ValueError(
            f"mode spaces differ: +-{a.space.truncation} vs +-{b.space.truncation}")


def _canonicalize(amplitudes: dict) -> dict:
    """Normalize to unit norm and fix the global phase.

    The amplitude of largest magnitude becomes real and positive; magnitude
    ties (within 1e-12 relative) are broken toward the smallest mode key so
    the convention is deterministic.  Amplitude ratios are preserved.
    """
    norm = np.sqrt(sum(abs(a) ** 2 for a in amplitudes.values()))
    if norm == 0.0:
        raise ZeroStateError("cannot normalize a state with no amplitude")
    max_mag = max(abs(a) for a in amplitudes.values())
    anchor = next(key for key in sorted(amplitudes)
                  if abs(amplitudes[key]) >= max_mag * (1.0 - 1e-12))
    phase = amplitudes[anchor] / abs(amplitudes[anchor])
    scale = norm * phase
    return {key: complex(a / scale) for key, a in amplitudes.items()}


class SinglePhotonKet:
    """Sparse pure state of one photon over a :class:`ModeSpace`."""

    def __init__(self, space: ModeSpace, amplitudes: Mapping[int, complex]):
        for ell in amplitudes:
            if not space.contains(ell):
                raise ModeBoundError(
                    f"mode {ell} outside truncation +-{space.truncation}")
        self.space = space
        self.amplitudes = {int(k): complex(v) for k, v in amplitudes.items()}

    def amplitude(self, ell: int) -> complex:
        return self.amplitudes.get(ell, 0.0 + 0.0j)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values())))

    def normalized(self) -> "SinglePhotonKet":
        return SinglePhotonKet(self.space, _canonicalize(self.amplitudes))

    def to_vector(self) -> np.ndarray:
        vec = np.zeros(self.space.dimension, dtype=complex)
        for ell, amp in self.amplitudes.items():
            vec[self.space.index(ell)] = amp
        return vec

    def support(self) -> tuple[int, ...]:
        return tuple(sorted(ell for ell, a in self.amplitudes.items() if a != 0))

    def __repr__(self):
        terms = ", ".join(f"{ell}: {amp:.4g}"
                          for ell, amp in sorted(self.amplitudes.items()))
        return f"SinglePhotonKet({{{terms}}})"


class BiphotonKet:
    """Sparse pure state of a photon pair, keyed by ``(ell_signal, ell_idler)``."""

    def __init__(self, space: ModeSpace,
                 amplitudes: Mapping[tuple[int, int], complex]):
        for (l1, l2) in amplitudes:
            if not (space.contains(l1) and space.contains(l2)):
                raise ModeBoundError(
                    f"pair mode ({l1}, {l2}) outside truncation +-{space.truncation}")
        self.space = space
        self.amplitudes = {(int(k[0]), int(k[1])): complex(v)
                           for k, v in amplitudes.items()}

    def amplitude(self, mode: tuple[int, int]) -> complex:
        return self.amplitudes.get(tuple(mode), 0.0 + 0.0j)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values())))

    def is_normalized(self, tol: float = KET_NORM_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def to_vector(self) -> np.ndarray:
        vec = np.zeros(self.space.joint_dimension, dtype=complex)
        for (l1, l2), amp in self.amplitudes.items():
            vec[self.space.joint_index(l1, l2)] = amp
        return vec

    def signal_support(self) -> tuple[int, ...]:
        return tuple(sorted({l1 for (l1, _), a in self.amplitudes.items() if a != 0}))

    def idler_support(self) -> tuple[int, ...]:
        return tuple(sorted({l2 for (_, l2), a in self.amplitudes.items() if a != 0}))

    def __repr__(self):
        terms = ", ".join(f"({l1},{l2}): {amp:.4g}"
                          for (l1, l2), amp in sorted(self.amplitudes.items()))
        return f"BiphotonKet({{{terms}}})"


def normalize(ket: SinglePhotonKet | BiphotonKet):
    """Return the unit-norm, phase-canonical version of ``ket``.

    The returned ket (same type as the input) has norm 1 to machine
    precision and its largest-magnitude amplitude is real and positive;
    amplitude ratios are untouched.  Raises :class:`ZeroStateError` for an
    all-zero ket.
    """
    if isinstance(ket, SinglePhotonKet):
        return SinglePhotonKet(ket.space, _canonicalize(ket.amplitudes))
    return BiphotonKet(ket.space, _canonicalize(ket.amplitudes))


def inner_product(bra: BiphotonKet, ket: BiphotonKet) -> complex:
    """Hermitian inner product, conjugate-linear in the first argument."""
    _check_same_space(bra, ket)
    small, large = bra.amplitudes, ket.amplitudes
    if len(large) < len(small):
        return complex(np.conj(inner_product(ket, bra)))
    return complex(sum(np.conj(a) * large.get(mode, 0.0)
                       for mode, a in small.items()))


class DensityOperator:
    """Dense mixed state over the joint pair space.

    Construction validates physicality: Hermitian to 1e-10 (max entry),
    unit trace to 1e-10, and smallest eigenvalue >= -1e-10.
    """

    def __init__(self, space: ModeSpace, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=complex)
        n = space.joint_dimension
        if matrix.shape != (n, n):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match joint dimension {n}")
        herm_defect = np.max(np.abs(matrix - matrix.conj().T))
        if herm_defect > OPERATOR_TOL:
            raise ValueError(f"matrix is not Hermitian (defect {herm_defect:.2e})")
        trace = matrix.trace()
        if abs(trace - 1.0) > OPERATOR_TOL:
            raise ValueError(f"trace is {trace:.12g}, expected 1")
        min_eig = float(np.linalg.eigvalsh((matrix + matrix.conj().T) / 2.0)[0])
        if min_eig < -OPERATOR_TOL:
            raise ValueError(f"matrix has negative eigenvalue {min_eig:.2e}")
        self.space = space
        self.matrix = matrix

    def probability(self, mode: tuple[int, int]) -> float:
        """Diagonal element for a computational-basis pair mode."""
        idx = self.space.joint_index(*mode)
        return _as_probability(self.matrix[idx, idx])

    def __repr__(self):
        return (f"DensityOperator(dim={self.space.joint_dimension}, "
                f"trace={self.matrix.trace().real:.6f})")


@dataclass(frozen=True)
class MeasurementSetting:
    """Projective coincidence setting: one analyzer ket per photon."""

    signal: SinglePhotonKet
    idler: SinglePhotonKet

    def __post_init__(self):
        _check_same_space(self.signal, self.idler)
        for name, ket in (("signal", self.signal), ("idler", self.idler)):
            if abs(ket.norm() - 1.0) > KET_NORM_TOL:
                raise ValueError(f"{name} analyzer ket is not normalized")

    @property
    def space(self) -> ModeSpace:
        return self.signal.space

    def joint_vector(self) -> np.ndarray:
        return np.kron(self.signal.to_vector(), self.idler.to_vector())


def _as_probability(value: complex, tol: float = OPERATOR_TOL) -> float:
    """Cast a quadratic form to a probability, clamping only numerical dust."""
    value = complex(value)
    if abs(value.imag) > tol:
        raise ValueError(f"probability has imaginary part {value.imag:.2e}")
    p = value.real
    if p < -tol or p > 1.0 + tol:
        raise ValueError(f"probability {p:.12g} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def ket_to_density(ket: BiphotonKet) -> DensityOperator:
    """Outer product |ket><ket| of a normalized ket."""
    if not ket.is_normalized():
        raise ValueError(f"ket has norm {ket.norm():.12g}, expected 1")
    vec = ket.to_vector()
    return DensityOperator(ket.space, np.outer(vec, vec.conj()))


def fidelity(target: BiphotonKet, rho: DensityOperator) -> float:
    """Pure-target fidelity <target|rho|target> in [0, 1]."""
    if not target.is_normalized():
        raise ValueError(f"target has norm {target.norm():.12g}, expected 1")
    _check_same_space(target, rho)
    vec = target.to_vector()
    return _as_probability(vec.conj() @ rho.matrix @ vec)


def projection_probability(rho: DensityOperator,
                           setting: MeasurementSetting) -> float:
    """Coincidence probability of a product analyzer setting on ``rho``."""
    _check_same_space(rho, setting.signal)
    vec = setting.joint_vector()
    return _as_probability(vec.conj() @ rho.matrix @ vec)


def basis_setting(space: ModeSpace, ell_signal: int,
                  ell_idler: int) -> MeasurementSetting:
    """Computational-basis coincidence setting |ell_signal, ell_idler>."""
    return MeasurementSetting(
        SinglePhotonKet(space, {ell_signal: 1.0}),
        SinglePhotonKet(space, {ell_idler: 1.0}))
