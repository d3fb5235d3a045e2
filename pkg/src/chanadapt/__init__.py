"""Link-level OFDM channel-estimation toolkit.

Generates multipath channels from a parametric quasi-static sampler or a
geometric building-scene ray tracer, runs the pilot-based OFDM link, and
refines classical least-squares estimates with small CNN/GAN models that
can be fine-tuned across channel domains with frozen early layers.
"""

__version__ = "0.1.0"

from .channels import (ChannelImpulse, PathSamplerParams, PathSet, RayPath,
                       cdl_time_response, friis_amplitude, grid_to_impulse,
                       impulse_to_grid, qscm_frequency_response,
                       sample_qscm_paths)
from .estimators import (EstimateGrid, NormState, linear_interpolate,
                         ls_estimate, mean_nmse_db, minmax_denormalize,
                         minmax_normalize, nmse, nmse_db)
from .grids import (GridConfig, PilotConfig, generate_dmrs_sequence,
                    gold_sequence, map_pilots)
from .link import (NoiseSpec, add_awgn, apply_channel, freq_domain_oracle,
                   ofdm_demodulate, ofdm_modulate)
from .raytrace import Scene, load_scene, sample_ue_position, scene_from_dict, trace_paths
from .transfer import (OtProblem, OtResult, apply_freeze_mask, finetune,
                       freeze_for_transfer, frobenius_norm, frozen_checksum,
                       sinkhorn_w1)
