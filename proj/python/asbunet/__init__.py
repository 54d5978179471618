"""ASBU-Net segmentation toolkit.

Thin python surface over the C++ core: dilated-convolution ops, the default
encoder/decoder network, receptive-field analysis, the ignore-band evaluation
metric, synthetic data generation and int8 quantization.
"""

from asbunet._core import (
    __version__,
    build_and_save,
    conv2d,
    effective_kernel,
    encoder_rf_trace,
    generate_dataset,
    ignore_band,
    infer,
    linearity,
    masked_jaccard,
    quantize_checkpoint,
    score_with_penalty,
    spec_text,
)

__all__ = [
    "__version__",
    "build_and_save",
    "conv2d",
    "effective_kernel",
    "encoder_rf_trace",
    "generate_dataset",
    "ignore_band",
    "infer",
    "linearity",
    "masked_jaccard",
    "quantize_checkpoint",
    "score_with_penalty",
    "spec_text",
]
