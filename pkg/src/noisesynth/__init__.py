"""noisesynth: camera sensor noise synthesis from a single dark frame.

The core workflow: decompose a reference dark frame into fixed pattern
plus stochastic residual, draw new residuals that keep the residual's
Fourier magnitudes under a shared random phase offset, refine them with
exact histogram matching, and recombine. A Poisson shot-noise model with
a fitted system gain turns clean images into full noisy observations.
"""

from .errors import (
    DegenerateFitError,
    DegenerateInputError,
    InsufficientDataError,
    NoiseSynthError,
    PtbParseError,
    ShapeMismatchError,
    SymmetryViolationError,
)
from .estimators import DarkFrameSynthesizer, SystemGainEstimator
from .io import import_pgm_planes, load_meta, load_tensor, save_tensor
from .metrics import (
    CorrelationMatrix,
    Histogram,
    Moments,
    SpectralDistance,
    ValidationReport,
    histogram,
    icc_matrix,
    kld,
    moments,
    spectral_distance,
    validate_report,
)
from .photon import (
    GainModel,
    VarianceSamples,
    collect_variance_pairs,
    collect_variance_single,
    fit_gain,
    sample_poisson_signal,
    synthesize_noisy,
)
from .planar import CfaPeriod, FrameMeta, PlanarImage, channel_means, pack_cfa, unpack_cfa
from .rng import substream
from .simulate import GroundTruth, SimConfig, generate_dark, generate_noisy_pair, generate_scene
from .spectral import (
    PhaseField,
    SpectrumStack,
    antisymmetrize_phase,
    dft_oracle,
    forward_dft,
    inverse_dft,
    inverse_dft_normalized,
    magnitude,
    phase,
)
from .synthesis import (
    Decomposition,
    SynthesisConfig,
    SynthesisDiagnostics,
    export_dark_shading,
    gaussian_blur,
    histogram_match,
    phase_randomize,
    refine,
    remove_fixed_pattern,
    synthesize_dark,
    synthesize_dark_batch,
)

__version__ = "0.1.0"

__all__ = [
    "CfaPeriod",
    "CorrelationMatrix",
    "DarkFrameSynthesizer",
    "Decomposition",
    "DegenerateFitError",
    "DegenerateInputError",
    "FrameMeta",
    "GainModel",
    "GroundTruth",
    "Histogram",
    "InsufficientDataError",
    "Moments",
    "NoiseSynthError",
    "PhaseField",
    "PlanarImage",
    "PtbParseError",
    "ShapeMismatchError",
    "SimConfig",
    "SpectralDistance",
    "SpectrumStack",
    "SymmetryViolationError",
    "SynthesisConfig",
    "SynthesisDiagnostics",
    "SystemGainEstimator",
    "ValidationReport",
    "VarianceSamples",
    "antisymmetrize_phase",
    "channel_means",
    "collect_variance_pairs",
    "collect_variance_single",
    "dft_oracle",
    "export_dark_shading",
    "fit_gain",
    "forward_dft",
    "gaussian_blur",
    "generate_dark",
    "generate_noisy_pair",
    "generate_scene",
    "histogram",
    "histogram_match",
    "icc_matrix",
    "import_pgm_planes",
    "inverse_dft",
    "inverse_dft_normalized",
    "kld",
    "load_meta",
    "load_tensor",
    "magnitude",
    "moments",
    "pack_cfa",
    "phase",
    "phase_randomize",
    "refine",
    "remove_fixed_pattern",
    "sample_poisson_signal",
    "save_tensor",
    "spectral_distance",
    "substream",
    "synthesize_dark",
    "synthesize_dark_batch",
    "synthesize_noisy",
    "unpack_cfa",
    "validate_report",
]
