"""Measurement-feedback simulation of effective interactions and teleported dynamics
between two remote atomic ensembles, in the Gaussian covariance-matrix formalism."""

from .exceptions import (ContractViolation, CVTeleportError, InvariantViolation,
                         SingularConfiguration, UnphysicalState)
from .gaussian import (CovarianceState, apply_affine_map, check_physicality,
                       symplectic_eigenvalues, symplectic_form)
from .protocol import (GainSchedule, LinearMapResult, ProtocolConfig, averaging_identity,
                       build_G, build_G0, canonical_gains, propagate_stepwise, run_protocol)
from .targets import QuadraticTarget, gain_schedule_for_target
from .noise import (NoiseDecomposition, ProductLightCovariance, complete_canonical_partners,
                    integrated_noise, squeezed_input_covariance)
from .fidelity import (ChannelEvaluator, FidelityReport, RSearch, error_metric,
                       fidelity_at_optimal_r, jamiolkowski_state)
from .teleport import (FieldDrive, TeleportGains, added_noise_teleport, coupling_matrix_M,
                       run_teleportation)
from .sweep import Axis, SweepRecord, SweepSpec, emit_records, run_sweep

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
