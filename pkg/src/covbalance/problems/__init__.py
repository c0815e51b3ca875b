"""Toy multi-loss problems with analytic gradients."""

from covbalance.problems.base import NonFiniteLossError, Problem
from covbalance.problems.gradcheck import central_difference, directional_error, gradient_error
from covbalance.problems.image import (
    ImageFitProblem,
    StereoImageProblem,
    global_ssim,
    global_ssim_grad,
    read_pgm,
    synthetic_image,
    write_pgm,
)
from covbalance.problems.multiscale import MultiScaleComposite
from covbalance.problems.quadratic import QuadraticProblem, shared_optimum_quadratic
from covbalance.problems.regression import MixedNormRegression, huber
from covbalance.problems.synthetic import SyntheticStreams

__all__ = [
    "ImageFitProblem",
    "MixedNormRegression",
    "MultiScaleComposite",
    "NonFiniteLossError",
    "Problem",
    "QuadraticProblem",
    "StereoImageProblem",
    "SyntheticStreams",
    "central_difference",
    "directional_error",
    "global_ssim",
    "global_ssim_grad",
    "gradient_error",
    "huber",
    "read_pgm",
    "shared_optimum_quadratic",
    "synthetic_image",
    "write_pgm",
]
