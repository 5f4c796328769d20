"""Classical ghost-imaging simulation and SNR analysis toolkit."""

from .core import (BucketVector, Family, Image, MaskEnsemble, NoiseKind, NoiseSpec,
                   NumericalError, Seed, derive_seed, ensemble_stats, image_stats)

__version__ = "0.1.0"

__all__ = [
    "BucketVector", "Family", "Image", "MaskEnsemble", "NoiseKind", "NoiseSpec",
    "NumericalError", "Seed", "derive_seed", "ensemble_stats", "image_stats",
]
