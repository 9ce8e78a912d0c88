"""Test-time preference optimization for restored 2-D signals.

Pipeline: (1) build a candidate pool by noising the restored field to a
bounded scale and regenerating it with flow-matching velocity models;
(2) pick win/lose candidates by a Z-scored hybrid of quality scorers or by
human pairwise choices; (3) re-denoise from pure noise with the selected
pair steering the trajectory through frequency-decomposed reward guidance.
"""

from ._kernels import BACKEND as kernel_backend
from .errors import (
    GuidanceDivergedError,
    InvalidConfigError,
    InvalidInputError,
    InvalidScheduleError,
    NoiseScaleError,
    SelectionPendingError,
    TooFewCandidatesError,
    TtpoError,
    UndefinedSimilarityError,
)
from .fields import (
    Field,
    FreqMask,
    Spectrum,
    cosine_sim,
    fft2,
    field_mse,
    gaussian_lowpass_mask,
    ifft2,
    spectral_l1,
    split_frequency,
)
from .velocity import (
    EmpiricalDatasetField,
    GaussianMixtureField,
    TimeSchedule,
    VelocityField,
    empirical_velocity,
    euler_step,
    forward_noise,
    gmm_velocity,
    predict_clean,
    sample,
)
from .candidates import Candidate, CandidateSet, build_candidate_set, invert_and_regenerate
from .selection import (
    PreferencePair,
    ScoreMatrix,
    Scorer,
    hybrid_reward,
    metric_match_experiment,
    select_pair,
    zscore_normalize,
)
from .guidance import (
    GuidanceConfig,
    RunRecord,
    StagePolicy,
    combined_guidance,
    guided_step,
    optimize,
    reward_distance,
    structural_loss,
    ttpo_loss,
)

__version__ = "0.1.0"
