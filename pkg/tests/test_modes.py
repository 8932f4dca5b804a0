from __future__ import annotations

import math

import numpy as np
import pytest

from oamsim import (
    BiphotonKet,
    DensityOperator,
    MeasurementSetting,
    ModeBoundError,
    ModeSpace,
    SinglePhotonKet,
    ZeroStateError,
    basis_setting,
    fidelity,
    inner_product,
    ket_to_density,
    normalize,
    projection_probability,
)


def _bell_ket(space: ModeSpace) -> BiphotonKet:
    return normalize(BiphotonKet(space, {(0, 0): 1.0, (2, 2): 1.0}))


def test_mode_space_defaults_and_dimensions() -> None:
    space = ModeSpace()
    assert space.truncation == 4
    assert space.dimension == 9
    assert space.joint_dimension == 81
    assert list(space.modes()) == list(range(-4, 5))


def test_mode_space_index_round_trip() -> None:
    space = ModeSpace(3)
    for ls in space.modes():
        for li in space.modes():
            flat = space.joint_index(ls, li)
            assert space.joint_mode(flat) == (ls, li)


def test_joint_index_is_signal_major() -> None:
    space = ModeSpace(2)
    assert space.joint_index(-2, -2) == 0
    assert space.joint_index(-2, -1) == 1
    assert space.joint_index(-1, -2) == space.dimension


def test_mode_space_bounds_checked() -> None:
    space = ModeSpace(2)
    assert space.contains(2)
    assert not space.contains(3)
    with pytest.raises(ModeBoundError):
        space.index(3)
    with pytest.raises(ModeBoundError):
        space.joint_index(0, -3)
    with pytest.raises(ValueError):
        ModeSpace(-1)


def test_single_photon_ket_canonical_phase() -> None:
    space = ModeSpace(2)
    ket = normalize(SinglePhotonKet(space, {0: 2.0j, 1: 1.0}))
    anchor = ket.amplitude(0)
    assert anchor.imag == pytest.approx(0.0, abs=1e-15)
    assert anchor.real > 0
    assert abs(ket.norm() - 1.0) < 1e-12


def test_canonical_tie_breaks_on_smallest_mode() -> None:
    space = ModeSpace(2)
    ket = normalize(SinglePhotonKet(space, {-1: 1.0j, 1: -1.0j}))
    assert ket.amplitude(-1).real == pytest.approx(1 / math.sqrt(2))
    assert ket.amplitude(-1).imag == pytest.approx(0.0, abs=1e-15)


def test_normalize_rejects_zero_state() -> None:
    space = ModeSpace(2)
    with pytest.raises(ZeroStateError):
        normalize(SinglePhotonKet(space, {0: 0.0}))


def test_biphoton_vector_layout_matches_joint_index() -> None:
    space = ModeSpace(2)
    ket = normalize(BiphotonKet(space, {(0, 1): 1.0, (-2, 2): 1.0j}))
    vec = ket.to_vector()
    assert vec[space.joint_index(0, 1)] == pytest.approx(ket.amplitude((0, 1)))
    assert vec[space.joint_index(-2, 2)] == pytest.approx(ket.amplitude((-2, 2)))
    assert np.count_nonzero(vec) == 2


def test_inner_product_conjugates_bra() -> None:
    space = ModeSpace(2)
    a = normalize(SinglePhotonKet(space, {0: 1.0}))
    b = normalize(SinglePhotonKet(space, {0: 1.0j}))
    forward = inner_product(a, b)
    backward = inner_product(b, a)
    assert forward == pytest.approx(backward.conjugate())
    assert abs(forward) == pytest.approx(1.0)


def test_inner_product_random_states_match_vectors() -> None:
    space = ModeSpace(3)
    rng = np.random.default_rng(11)
    for _ in range(25):
        pairs = [(int(a), int(b))
                 for a in rng.choice(space.dimension, 3, replace=False) - 3
                 for b in rng.choice(space.dimension, 2, replace=False) - 3]
        amps_a = {p: complex(*rng.normal(size=2)) for p in pairs[:4]}
        amps_b = {p: complex(*rng.normal(size=2)) for p in pairs[2:]}
        ka = normalize(BiphotonKet(space, amps_a))
        kb = normalize(BiphotonKet(space, amps_b))
        direct = inner_product(ka, kb)
        via_vec = np.vdot(ka.to_vector(), kb.to_vector())
        assert direct == pytest.approx(via_vec, abs=1e-12)


def test_ket_to_density_is_projector() -> None:
    space = ModeSpace(2)
    ket = _bell_ket(space)
    rho = ket_to_density(ket)
    mat = rho.matrix
    assert np.allclose(mat, mat @ mat, atol=1e-12)
    assert mat.trace().real == pytest.approx(1.0)


def test_density_operator_validation() -> None:
    space = ModeSpace(2)
    dim = space.joint_dimension
    good = np.eye(dim) / dim
    DensityOperator(space, good)
    bad_trace = np.eye(dim)
    with pytest.raises(ValueError):
        DensityOperator(space, bad_trace)
    skew = good.copy().astype(complex)
    skew[0, 1] = 0.5
    with pytest.raises(ValueError):
        DensityOperator(space, skew)
    negative = good.copy()
    negative[0, 0] = -0.1
    negative[1, 1] += 0.1 + 1.0 / dim
    with pytest.raises(ValueError):
        DensityOperator(space, negative)


def test_density_probability_accessor() -> None:
    space = ModeSpace(2)
    rho = ket_to_density(_bell_ket(space))
    assert rho.probability((0, 0)) == pytest.approx(0.5)
    assert rho.probability((2, 2)) == pytest.approx(0.5)
    assert rho.probability((1, 1)) == pytest.approx(0.0, abs=1e-15)


def test_measurement_setting_requires_normalized_analyzers() -> None:
    space = ModeSpace(2)
    good = normalize(SinglePhotonKet(space, {0: 1.0}))
    bad = SinglePhotonKet(space, {0: 0.5})
    MeasurementSetting(good, good)
    with pytest.raises(ValueError):
        MeasurementSetting(good, bad)


def test_measurement_setting_joint_vector_layout() -> None:
    space = ModeSpace(2)
    setting = basis_setting(space, 1, -1)
    vec = setting.joint_vector()
    assert vec[space.joint_index(1, -1)] == pytest.approx(1.0)
    assert np.count_nonzero(vec) == 1


def test_projection_probability_pure_cases() -> None:
    space = ModeSpace(2)
    rho = ket_to_density(_bell_ket(space))
    assert projection_probability(rho, basis_setting(space, 0, 0)) == pytest.approx(0.5)
    assert projection_probability(rho, basis_setting(space, 0, 2)) == pytest.approx(0.0, abs=1e-15)


def test_fidelity_extremes_and_midpoint() -> None:
    space = ModeSpace(2)
    bell = _bell_ket(space)
    rho = ket_to_density(bell)
    assert fidelity(bell, rho) == pytest.approx(1.0)
    orthogonal = normalize(BiphotonKet(space, {(0, 0): 1.0, (2, 2): -1.0}))
    assert fidelity(orthogonal, rho) == pytest.approx(0.0, abs=1e-12)
    basis = normalize(BiphotonKet(space, {(0, 0): 1.0}))
    assert fidelity(basis, rho) == pytest.approx(0.5)
