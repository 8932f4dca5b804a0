from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from oamsim import (
    ChainConfig,
    coherence_satisfied,
    ChainShapeError,
    CoherenceGeometry,
    Crystal,
    CrystalSpec,
    DistinguishabilityModel,
    DownconversionModeShifter,
    Mirror,
    ModeBoundError,
    ModeSpace,
    ModelError,
    PhaseShifter,
    PumpModeShifter,
    UnsupportedPumpError,
    accumulated_phases,
    build_density,
    build_state,
    crystal_emission,
    pair_rate_operator,
    projection_probability,
)
from oamsim.modes import MeasurementSetting
from oamsim.measurement import pairwise_superposition


def _canonical_chain(phis: list[float]) -> ChainConfig:
    """d crystals interleaved with mode shifters and one phase per gap."""
    stages: list = []
    for i, phi in enumerate(phis):
        stages.append(Crystal(CrystalSpec()))
        stages.append(DownconversionModeShifter(1))
        stages.append(PhaseShifter(phi))
    stages.append(Crystal(CrystalSpec()))
    return ChainConfig(stages, space=ModeSpace(6))


def test_crystal_spec_rejects_odd_pump() -> None:
    with pytest.raises(UnsupportedPumpError):
        CrystalSpec(pump_oam=1)


def test_crystal_spec_rejects_bad_amplitude_and_coefficients() -> None:
    with pytest.raises(ValueError):
        CrystalSpec(pump_amplitude=-0.5)
    with pytest.raises(ValueError):
        CrystalSpec(spiral_coefficients=())
    with pytest.raises(ValueError):
        CrystalSpec(spiral_coefficients=(0.0,))


def test_crystal_emission_zero_pump_frozen_amplitudes() -> None:
    # coefficients (1, 0.3): norm is sqrt(1 + 2*0.09) = sqrt(1.18)
    space = ModeSpace(4)
    ket = crystal_emission(CrystalSpec(spiral_coefficients=(1.0, 0.3)), space)
    root = math.sqrt(1.18)
    assert ket.amplitude((0, 0)) == pytest.approx(1.0 / root)
    assert ket.amplitude((1, -1)) == pytest.approx(0.3 / root)
    assert ket.amplitude((-1, 1)) == pytest.approx(0.3 / root)
    assert abs(ket.norm() - 1.0) < 1e-12


def test_crystal_emission_even_pump_splits_half_and_half() -> None:
    # pump l=2 puts the pair around m=1: (1,1), (2,0), (0,2)
    space = ModeSpace(4)
    ket = crystal_emission(CrystalSpec(pump_oam=2, spiral_coefficients=(1.0, 0.5)), space)
    root = math.sqrt(1.5)
    assert ket.amplitude((1, 1)) == pytest.approx(1.0 / root)
    assert ket.amplitude((2, 0)) == pytest.approx(0.5 / root)
    assert ket.amplitude((0, 2)) == pytest.approx(0.5 / root)


def test_crystal_emission_pump_override() -> None:
    space = ModeSpace(4)
    spec = CrystalSpec(pump_oam=0)
    ket = crystal_emission(spec, space, pump_oam=4)
    assert ket.amplitude((2, 2)) == pytest.approx(1.0)


def test_chain_requires_at_least_one_crystal() -> None:
    with pytest.raises(ChainShapeError):
        ChainConfig([PhaseShifter(0.1)])


def test_chain_rejects_truncation_overflow_eagerly() -> None:
    stages = [Crystal(CrystalSpec()), DownconversionModeShifter(5),
              Crystal(CrystalSpec())]
    with pytest.raises(ModeBoundError):
        ChainConfig(stages, space=ModeSpace(4))


def test_two_crystal_phase_lands_on_first_crystal_term() -> None:
    chain = ChainConfig([
        Crystal(CrystalSpec()),
        DownconversionModeShifter(1),
        PhaseShifter(0.7),
        Crystal(CrystalSpec()),
    ])
    ket = build_state(chain)
    shifted = ket.amplitude((1, 1))
    unshifted = ket.amplitude((0, 0))
    assert abs(shifted) == pytest.approx(abs(unshifted))
    assert cmath.phase(shifted * unshifted.conjugate()) == pytest.approx(0.7)


def test_mirror_negates_pump_oam() -> None:
    chain = ChainConfig([
        PumpModeShifter(4),
        Mirror(),
        Crystal(CrystalSpec()),
    ])
    ket = build_state(chain)
    assert ket.amplitude((-2, -2)) == pytest.approx(1.0)


def test_pump_shifter_only_feeds_downstream_crystals() -> None:
    chain = ChainConfig([
        Crystal(CrystalSpec()),
        PumpModeShifter(4),
        Crystal(CrystalSpec()),
    ])
    ket = build_state(chain)
    assert abs(ket.amplitude((0, 0))) == pytest.approx(1 / math.sqrt(2))
    assert abs(ket.amplitude((2, 2))) == pytest.approx(1 / math.sqrt(2))


def test_accumulated_phases_matches_direct_sum() -> None:
    rng = np.random.default_rng(5)
    for d in range(2, 7):
        phis = [float(p) for p in rng.uniform(-math.pi, math.pi, size=d - 1)]
        chain = _canonical_chain(phis)
        got = accumulated_phases(chain)
        expected = tuple(sum(phis[len(phis) - i:]) for i in range(1, d))
        assert len(got) == d - 1
        for g, e in zip(got, expected):
            assert abs(g - e) < 1e-10


def test_accumulated_phases_agree_with_build_state() -> None:
    rng = np.random.default_rng(17)
    for d in range(2, 7):
        phis = [float(p) for p in rng.uniform(-math.pi, math.pi, size=d - 1)]
        chain = _canonical_chain(phis)
        ket = build_state(chain)
        reference = ket.amplitude((0, 0))
        for i, phase in enumerate(accumulated_phases(chain), start=1):
            term = ket.amplitude((i, i))
            relative = cmath.phase(term * reference.conjugate())
            delta = (relative - phase + math.pi) % (2 * math.pi) - math.pi
            assert abs(delta) < 1e-10


def test_accumulated_phases_rejects_non_canonical_shapes() -> None:
    with pytest.raises(ChainShapeError):
        accumulated_phases(ChainConfig([Crystal(CrystalSpec())]))
    with pytest.raises(ChainShapeError):
        accumulated_phases(ChainConfig([
            PhaseShifter(0.1), Crystal(CrystalSpec()),
            DownconversionModeShifter(1), PhaseShifter(0.2),
            Crystal(CrystalSpec()),
        ]))
    with pytest.raises(ChainShapeError):
        accumulated_phases(ChainConfig([
            Crystal(CrystalSpec()), DownconversionModeShifter(1),
            PhaseShifter(0.1), PhaseShifter(0.2), Crystal(CrystalSpec()),
        ]))
    with pytest.raises(ChainShapeError):
        accumulated_phases(ChainConfig([
            Crystal(CrystalSpec()), DownconversionModeShifter(1),
            Crystal(CrystalSpec()), PhaseShifter(0.3),
        ]))


def test_with_phase_replaces_single_shifter() -> None:
    chain = _canonical_chain([0.1, 0.2])
    bumped = chain.with_phase(1, 0.9)
    assert accumulated_phases(bumped) == pytest.approx((0.9, 0.1 + 0.9))
    assert accumulated_phases(chain) == pytest.approx((0.2, 0.1 + 0.2))


def test_pair_rate_fringe_follows_cosine_law() -> None:
    # two identical crystals: projecting on (|0>+|1>)/sqrt2 per arm gives
    # rate (1 + gamma*cos(phi))/4
    space = ModeSpace(4)
    setting = MeasurementSetting(
        pairwise_superposition(space, 0, 1, 0.0),
        pairwise_superposition(space, 0, 1, 0.0))
    for gamma in (0.0, 0.25, 0.75, 1.0):
        disting = DistinguishabilityModel.uniform(gamma, 2)
        for phi in np.linspace(0.0, 2 * math.pi, 9):
            chain = ChainConfig([
                Crystal(CrystalSpec()), DownconversionModeShifter(1),
                PhaseShifter(float(phi)), Crystal(CrystalSpec()),
            ])
            op = pair_rate_operator(chain, disting)
            vec = setting.joint_vector()
            rate = float(np.real(vec.conj() @ op @ vec))
            assert rate == pytest.approx((1 + gamma * math.cos(phi)) / 4, abs=1e-12)


def test_build_density_spectrum_tracks_distinguishability() -> None:
    chain = ChainConfig([
        Crystal(CrystalSpec()), DownconversionModeShifter(1),
        PhaseShifter(0.0), Crystal(CrystalSpec()),
    ])
    pure = build_density(chain)
    eigs = np.sort(np.linalg.eigvalsh(pure.matrix))[::-1]
    assert eigs[0] == pytest.approx(1.0)
    mixed = build_density(chain, DistinguishabilityModel.uniform(0.0, 2))
    eigs = np.sort(np.linalg.eigvalsh(mixed.matrix))[::-1]
    assert eigs[0] == pytest.approx(0.5)
    assert eigs[1] == pytest.approx(0.5)


def test_distinguishability_matrix_validation() -> None:
    model = DistinguishabilityModel.uniform(0.5, 3)
    mat = model.matrix(3)
    assert np.allclose(np.diag(mat), 1.0)
    assert mat[0, 1] == pytest.approx(0.5)
    with pytest.raises(ModelError):
        DistinguishabilityModel.uniform(1.2, 2).matrix(2)
    lopsided = DistinguishabilityModel(pairwise_overlap=(((0, 1), 0.9),
                                                         ((0, 2), -0.9),
                                                         ((1, 2), 0.9)))
    with pytest.raises(ModelError):
        lopsided.matrix(3)


def test_coherence_geometry_frozen_example() -> None:
    geometry = CoherenceGeometry(pump_path_a=0.0, pump_path_b=650.0,
                                 downconversion_path=600.0,
                                 coherence_length=20.0)
    assert geometry.imbalance() == pytest.approx(50.0)
    assert not coherence_satisfied(geometry)


def test_coherence_geometry_boundary_is_satisfied() -> None:
    geometry = CoherenceGeometry(pump_path_a=0.0, pump_path_b=620.0,
                                 downconversion_path=600.0,
                                 coherence_length=20.0)
    assert geometry.imbalance() == pytest.approx(20.0)
    assert coherence_satisfied(geometry)


def test_coherence_geometry_rejects_negative_lengths() -> None:
    with pytest.raises(ValueError):
        CoherenceGeometry(-1.0, 0.0, 0.0, 1.0)


def test_build_state_projection_consistency() -> None:
    from oamsim import basis_setting

    chain = _canonical_chain([0.4, 1.1])
    ket = build_state(chain)
    rho = build_density(chain)
    for mode in ((0, 0), (1, 1), (2, 2)):
        setting = basis_setting(chain.space, *mode)
        p_ket = abs(ket.amplitude(mode)) ** 2
        p_rho = projection_probability(rho, setting)
        assert p_ket == pytest.approx(p_rho, abs=1e-12)
