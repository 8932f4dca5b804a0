"""Jones algebra for quarter/half-wave plate phase control.

Angles are in radians internally and measured from the vertical axis; the
CLI converts from degrees at the boundary.  A quarter-half-quarter (QHQ)
sequence with the output quarter-wave plate fixed at pi/4 turns any input
polarization into the balanced superposition ``(|H> + exp(i*w)|V>)/sqrt(2)``
for a chosen relative phase ``w``:

* the first quarter-wave plate, set to the orientation angle of the input
  polarization ellipse, removes the ellipticity;
* the half-wave plate rotates the resulting linear polarization to the
  angle ``(w + pi/2)/2``;
* a quarter-wave plate at pi/4 maps a linear polarization at angle ``phi``
  to relative phase ``2*phi - pi/2`` between H and V at equal weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FitError

SOLVER_TOL = 1e-9


def rotation(alpha: float) -> np.ndarray:
    """Rotation of the polarization plane by ``alpha``."""
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]], dtype=complex)


SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def quarter_wave(alpha: float) -> np.ndarray:
    """Quarter-wave plate with fast axis at ``alpha``."""
    return rotation(alpha) @ np.diag([1.0, 1.0j]) @ rotation(-alpha)


def half_wave(alpha: float) -> np.ndarray:
    """Half-wave plate with fast axis at ``alpha``."""
    r = rotation(alpha)
    return r @ SIGMA_Z @ rotation(-alpha)


def qwp_phase_transfer(phi: float) -> tuple[float, float]:
    """Action of a quarter-wave plate at pi/4 on linear polarization ``phi``.

    Returns ``(relative_phase, global_phase)``: the plate maps
    ``(cos phi, sin phi)`` to
    ``exp(i*global) * (1, exp(i*relative)) / sqrt(2)`` with
    ``relative = 2*phi - pi/2`` and ``global = pi/4 - phi``.
    """
    return 2.0 * phi - np.pi / 2.0, np.pi / 4.0 - phi


def qhq_reduction_check(alpha: float, beta: float, gamma: float) -> float:
    """Max-entry deviation of the two-half-wave-plate reduction identity.

    Compares ``Q(pi/4) H(alpha) H(beta) Q(gamma)`` against
    ``Q(pi/4) H(alpha - beta) Q(-gamma) sigma_z``; the reduction lets a
    physical QHQ stage absorb an extra half-wave plate.
    """
    lhs = (quarter_wave(np.pi / 4) @ half_wave(alpha) @ half_wave(beta)
           @ quarter_wave(gamma))
    rhs = (quarter_wave(np.pi / 4) @ half_wave(alpha - beta)
           @ quarter_wave(-gamma) @ SIGMA_Z)
    return float(np.max(np.abs(lhs - rhs)))


class WaveplateKind(enum.Enum):
    QUARTER = "quarter"
    HALF = "half"


@dataclass(frozen=True)
class WaveplateSetting:
    """A labelled waveplate at a fast-axis angle, normalized to [0, pi)."""

    kind: WaveplateKind
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % np.pi)


@dataclass(frozen=True)
class JonesVector:
    """Two-component polarization amplitude (H, V)."""

    h: complex
    v: complex

    def to_array(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=complex)

    def norm(self) -> float:
        return float(np.sqrt(abs(self.h) ** 2 + abs(self.v) ** 2))


def _relative_phase(vec: np.ndarray) -> float:
    return float(np.angle(vec[1]) - np.angle(vec[0]))


def _solution_residual(gamma: float, alpha: float, input_vec: np.ndarray,
                       target_phase: float) -> np.ndarray:
    out = quarter_wave(np.pi / 4) @ half_wave(alpha) @ quarter_wave(gamma) @ input_vec
    phase_error = (_relative_phase(out) - target_phase + np.pi) % (2 * np.pi) - np.pi
    return np.array([abs(out[0]) ** 2 - 0.5, phase_error])


def solve_qhq(input_state: JonesVector, target_phase: float
              ) -> tuple[WaveplateSetting, WaveplateSetting, WaveplateSetting]:
    """Waveplate angles mapping ``input_state`` to ``(1, e^{i w})/sqrt(2)``.

    Returns the (quarter, half, quarter) settings in the order the light
    meets them; the final quarter-wave plate is always at pi/4.  The
    solution is verified by forward application to 1e-9; if the analytic
    branch ever misses that, a least-squares polish is run before failing.
    """
    vec = input_state.to_array()
    norm = input_state.norm()
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"input state has norm {norm:.12g}, expected 1")

    # First plate: align with the polarization ellipse to make the beam linear.
    s1 = abs(vec[0]) ** 2 - abs(vec[1]) ** 2
    s2 = 2.0 * np.real(np.conj(vec[0]) * vec[1])
    gamma = 0.5 * np.arctan2(s2, s1)

    linear = quarter_wave(gamma) @ vec
    ref = linear[0] if abs(linear[0]) >= abs(linear[1]) else linear[1]
    aligned = np.real(linear * np.exp(-1j * np.angle(ref)))
    phi_in = float(np.arctan2(aligned[1], aligned[0]))

    # Half-wave plate reflects the linear angle: phi -> 2*alpha - phi.
    phi_out = (target_phase + np.pi / 2.0) / 2.0
    alpha = (phi_out + phi_in) / 2.0

    residual = _solution_residual(gamma, alpha, vec, target_phase)
    if np.max(np.abs(residual)) > SOLVER_TOL:
        from scipy.optimize import least_squares

        fit = least_squares(
            lambda x: _solution_residual(x[0], x[1], vec, target_phase),
            x0=[gamma, alpha], xtol=1e-14, ftol=1e-14, gtol=1e-14)
        gamma, alpha = float(fit.x[0]), float(fit.x[1])
        residual = _solution_residual(gamma, alpha, vec, target_phase)
        if np.max(np.abs(residual)) > SOLVER_TOL:
            raise FitError(
                f"no waveplate solution found (residual {np.max(np.abs(residual)):.2e})")

    return (WaveplateSetting(WaveplateKind.QUARTER, gamma),
            WaveplateSetting(WaveplateKind.HALF, alpha),
            WaveplateSetting(WaveplateKind.QUARTER, np.pi / 4.0))


def apply_qhq(settings: tuple[WaveplateSetting, WaveplateSetting, WaveplateSetting],
              input_state: JonesVector) -> np.ndarray:
    """Apply a QHQ sequence (in beam order) to an input polarization."""
    q_in, h_mid, q_out = settings
    if (q_in.kind, h_mid.kind, q_out.kind) != (WaveplateKind.QUARTER,
                                               WaveplateKind.HALF,
                                               WaveplateKind.QUARTER):
        raise ValueError("settings must be (quarter, half, quarter)")
    return (quarter_wave(q_out.angle) @ half_wave(h_mid.angle)
            @ quarter_wave(q_in.angle) @ input_state.to_array())
