"""Blind image denoising by pixel-level non-local Haar transforms (NLH)."""
from .image import (ColorImage, ColorSpace, MetricReport, add_awgn, metrics, psnr,
                    rgb_to_ycbcr, ssim, ycbcr_to_rgb)
from .noise import NoiseEstimate, sigma_global, sigma_local
from .params import NlhParams, profile
from .pipeline import DenoiseResult, denoise, denoise_color, denoise_gray

__version__ = "0.1.0"

__all__ = [
    "ColorImage", "ColorSpace", "MetricReport", "add_awgn", "metrics", "psnr",
    "rgb_to_ycbcr", "ssim", "ycbcr_to_rgb", "NoiseEstimate", "sigma_global",
    "sigma_local", "NlhParams", "profile", "DenoiseResult", "denoise",
    "denoise_color", "denoise_gray",
]
