"""Low-overhead two-phase channel estimation for BD-RIS assisted MU-MIMO uplinks.

The package is organized along the estimation pipeline:

- :mod:`bdris.config`   scenario parameters and pilot-budget splitting
- :mod:`bdris.channel`  ground-truth channels and cascaded-channel objects
- :mod:`bdris.schedule` scattering/pilot schedules and the design theorems
- :mod:`bdris.sim`      received-signal synthesis and conditioning
- :mod:`bdris.estimate` exact and LMMSE estimators, baseline, NMSE
- :mod:`bdris.harness`  Monte-Carlo sweeps, verification, CSV output
"""
from .channel import (ChannelSet, ScalingCoefficients, build_cascaded,
                      cascaded_block, generate_channel_set, reference_block,
                      scaling_coefficients)
from .config import (SystemConfig, dbm_to_watts, make_config, pathloss_linear,
                     split_lengths, watts_to_dbm)
from .estimate import (EstimationResult, PriorCovariances, compute_priors,
                       estimate_phase1_scalings_lmmse,
                       estimate_phase1_scalings_noisefree,
                       estimate_phase2_scalings_lmmse,
                       estimate_phase2_scalings_noisefree,
                       estimate_reference_lmmse, estimate_reference_noisefree,
                       ls_baseline, nmse, reconstruct_cascaded,
                       two_phase_pipeline)
from .harness import (ExperimentSpec, ResultRow, VerificationReport,
                      reproduce_figure, run_experiment, verify_theorems)
from .schedule import (PilotSchedule, Tag, build_schedule, dft_unitary,
                       haar_unitary, ls_schedule, min_overhead,
                       minimal_phase1_unitaries, northwest_corner,
                       phase1_schedule, phase2_schedule, psi1_matrix,
                       theta1_matrix, theta2_matrix)
from .sim import (DiffRecord, RxRecord, pair_difference, phase2_stack,
                  strip_reference, synthesize_rx)

__version__ = "0.1.0"
