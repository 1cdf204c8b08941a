"""Two-step tiny-face super-resolution: denoiser-regularized global
reconstruction plus multi-layer neighbor component embedding."""

from .components import ComponentLayout, Region, default_layout, merge, split
from .degradation import DegradationOperator, adjoint, apply, make_operator, solve_regularized
from .denoise import Denoiser, NoiseSchedule, denoise, external_denoise
from .embedding import TrainingIndex, embed_component, knn, locality_adaptor, solve_weights
from .image import bicubic_resize, load_image, save_image, to_luma
from .metrics import psnr, score_set, ssim
from .pipeline import (LayerParams, PipelineConfig, PipelineModel, hallucinate,
                       load_model, save_model, train)
from .red import RedConfig, RedTrace, red_energy, red_gradient, red_solve
from .synthetic import make_corpus, render_face

__version__ = "0.1.0"
