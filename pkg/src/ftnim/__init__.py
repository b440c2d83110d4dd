"""Index-modulated pilot placement, location identification, and LSSE channel
estimation for faster-than-Nyquist signaling over HF channels."""

from .channel import (ChannelModelId, ChannelProcess, apply_channel, make_lc,
                      make_model1, make_model2, make_model3)
from .estimator import (ChannelEstimate, PilotDesign, build_design,
                        interpolate, lsse_estimate, mse_predict,
                        pilot_search_exhaustive, pilot_search_relaxed)
from .framing import (FrameConfig, NoIndexCapacityError, PlacementSet,
                      SymbolFrame, build_frame, decode_location,
                      encode_location, placement_set, se_figures)
from .modem import (BPSK, PSK8, QPSK, Constellation, demodulate_hard,
                    get_constellation, modulate)
from .psli import (DetectorConfig, WhitenedPilot, cross_corr_sq, identify,
                   local_lambda, measure_mu, whitened_pilot)
from .simkit import (EbN0Point, ExperimentConfig, ExperimentResult, ebn0_to_sigma,
                     emit_csv, run_mse_experiment, run_psli_experiment)
from .waveform import (PulseConfig, SpectralFactorizationError, TapSet,
                       apply_fir, colored_noise, default_l_h, rc_isi_taps,
                       receiver_whitening_filter, whitening_filter)

__version__ = "0.1.0"
