"""Preference-driven material synthesis.

A small numpy/scipy library that learns per-user material preferences from
scored galleries with Gaussian process regression, recommends new material
parameter vectors by threshold rejection sampling, embeds high-scoring
materials in a 2D latent space for fine-tuning, and predicts preview images
in real time with a compact decoder network trained against an analytic
sphere renderer.
"""

from gmsynth.errors import (
    AllZeroScores,
    BudgetExhausted,
    DegenerateData,
    DimensionMismatch,
    FactorizationFailure,
    GmsError,
    NotFitted,
)
from gmsynth.materials import (
    MaterialParams,
    PreferenceSample,
    SyntheticUser,
    default_glassy_user,
    oracle_score,
    sample_uniform,
)
from gmsynth.gpr import (
    KernelParams,
    Prediction,
    PreferenceModel,
    build_covariance,
    fit_gradient_ascent,
    fit_rprop,
    kernel_eval,
    predict,
)
from gmsynth.recommend import (
    RecommendationConfig,
    RecommendationSet,
    generate_gallery,
    recommend,
    threshold_sweep,
)
from gmsynth.gplvm import LatentModel, fit_gplvm, pca_init, project
from gmsynth.render import ImageBuffer, generate_dataset, render_reference
from gmsynth.decoder import DecoderNetwork, TrainConfig, init_glorot, psnr, train
from gmsynth.latentmaps import (
    LatentGrid,
    explore,
    preference_map,
    product_map,
    query_bilinear,
    similarity_map,
)
from gmsynth.evaluation import DiscreteDistribution, jsd, normalize, run_table2
from gmsynth.session import Session, run_gms

__version__ = "0.1.0"

__all__ = [
    "AllZeroScores",
    "BudgetExhausted",
    "DegenerateData",
    "DimensionMismatch",
    "FactorizationFailure",
    "GmsError",
    "NotFitted",
    "MaterialParams",
    "PreferenceSample",
    "SyntheticUser",
    "default_glassy_user",
    "oracle_score",
    "sample_uniform",
    "KernelParams",
    "Prediction",
    "PreferenceModel",
    "build_covariance",
    "fit_gradient_ascent",
    "fit_rprop",
    "kernel_eval",
    "predict",
    "RecommendationConfig",
    "RecommendationSet",
    "generate_gallery",
    "recommend",
    "threshold_sweep",
    "LatentModel",
    "fit_gplvm",
    "pca_init",
    "project",
    "ImageBuffer",
    "generate_dataset",
    "render_reference",
    "DecoderNetwork",
    "TrainConfig",
    "init_glorot",
    "psnr",
    "train",
    "LatentGrid",
    "explore",
    "preference_map",
    "product_map",
    "query_bilinear",
    "similarity_map",
    "DiscreteDistribution",
    "jsd",
    "normalize",
    "run_table2",
    "Session",
    "run_gms",
]
