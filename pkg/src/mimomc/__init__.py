"""Matrix-completion MIMO radar simulation and estimation toolkit."""

__version__ = "0.1.0"

from .errors import ConfigError, DecodeError, DomainError, MimoMCError  # noqa: E402
from .scene import (SceneConfig, Target, WaveformKind, WaveformMatrix, doppler_vector,  # noqa: E402
                    make_waveforms, receive_steering, transmit_steering)
from .synth import PulseMatrix, add_noise, synthesize_pulse  # noqa: E402
from .sampling import Mask, ObservationSet, Scheme, make_mask, observe  # noqa: E402
from .wire import assemble, decode_forwarded, encode_forwarded  # noqa: E402
from .completion import (CompletionProblem, CompletionResult, SolverOptions, choose_delta,  # noqa: E402
                         complete, recovery_error_bound, sv_soft_threshold)
from .incoherence import (empirical_ccdf, fit_mu_B, singular_vector_maxima,  # noqa: E402
                          strong_incoherence_mu)
from .estimation import (matched_filter, music_spectrum, resolution_success,  # noqa: E402
                         sample_covariance, stack_and_reshape)
