"""Simulation and analysis toolkit for multi-crystal OAM photon-pair sources."""

from .chain import (ChainConfig, CoherenceGeometry, Crystal, CrystalSpec,
                    DistinguishabilityModel, DownconversionModeShifter, Mirror,
                    PhaseShifter, PumpModeShifter, accumulated_phases,
                    build_density, build_state, coherence_satisfied,
                    crystal_emission, pair_rate_operator)
from .errors import (ChainShapeError, CompletenessError, FitError,
                     ModeBoundError, ModelError, OamSimError, SetupParseError,
                     UnsupportedPumpError, ZeroStateError)
from .measurement import (CountRecord, ReconstructionResult, TomographyDesign,
                          VisibilityFit, bootstrap_fidelity, crosstalk_matrix,
                          expected_counts, mle_reconstruct,
                          pairwise_superposition, reconstruction_to_json,
                          records_from_csv, records_to_csv, simulate_counts,
                          simulate_fringe, standard_design, visibility,
                          write_records_csv)
from .modes import (BiphotonKet, DensityOperator, MeasurementSetting,
                    ModeSpace, SinglePhotonKet, basis_setting, fidelity,
                    inner_product, ket_to_density, normalize,
                    projection_probability)
from .polarization import (JonesVector, WaveplateKind, WaveplateSetting,
                           apply_qhq, half_wave, qhq_reduction_check,
                           quarter_wave, qwp_phase_transfer, rotation,
                           solve_qhq)
from .setupfile import (ExperimentSpec, SetupDocument, format_setup,
                        parse_setup, parse_setup_file, write_setup)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
