"""Residual denoising CNN: pretrained-model inference, degradations, metrics."""

from ._core import (
    ConfigError,
    Error,
    FormatError,
    Model,
    NetworkSpec,
    RangeError,
    ShapeError,
    SizeError,
    SpecError,
    UsageError,
    build_network,
    degrade,
    gaussian_noise,
    jpeg_degrade,
    load_image,
    load_model,
    lr_at_epoch,
    model_from_bytes,
    psnr,
    receptive_field,
    save_image,
    sisr_degrade,
    ssim,
)

__all__ = [name for name in dir() if not name.startswith("_")]
