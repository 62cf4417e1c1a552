"""N-continuous OFDM: frequency-domain precoding and its time-domain smoother.

The two transmitters produce the same waveform; the time-domain form needs
only ``V + 1`` coordinates per symbol. Modules:

``config``            system parameters, constellations, scenario files
``tx``                IDFT modulator and sample streams
``fd_precoder``       projection precoder on the subcarrier vector
``td_smoother``       basis set and per-symbol smoothing recursion
``derivative_oracle`` derivatives from the non-oversampled grid
``spectrum``          Welch and model PSDs, decay exponents
``channel``           EVA fading, AWGN, receiver, BER and SINR
``complexity``        closed-form operation counts
``experiments``       study drivers used by the ``ncofdm`` command
"""

from .config import (
    ConfigError,
    SystemConfig,
    build_system_config,
    constellation,
    lte_config,
    qam_demap,
    qam_map,
    random_symbols,
)
from .fd_precoder import ConditioningError, FDPrecoder, build_P, fd_precode_stream
from .td_smoother import (
    BasisSet,
    TDSmoother,
    build_basis_set,
    build_smoother_matrices,
    continuity_residuals,
    evaluate_derivatives,
    td_smooth_stream,
)
from .tx import SampleStream, assemble_stream, idft_modulate

__all__ = [
    "BasisSet",
    "ConditioningError",
    "ConfigError",
    "FDPrecoder",
    "SampleStream",
    "SystemConfig",
    "TDSmoother",
    "assemble_stream",
    "build_P",
    "build_basis_set",
    "build_smoother_matrices",
    "build_system_config",
    "constellation",
    "continuity_residuals",
    "evaluate_derivatives",
    "fd_precode_stream",
    "idft_modulate",
    "lte_config",
    "qam_demap",
    "qam_map",
    "random_symbols",
    "td_smooth_stream",
]
