from .exceptions import (
    ConfigError, ContractError, DataFormatError, DimensionError, ManifestError,
    NumericDomainError, TransDAError,
)
from .helpers import batch_slices, ensure_dir, first_error, hash_bytes, mean_std, sample_rng, stable_id

__all__ = [
    "ConfigError", "ContractError", "DataFormatError", "DimensionError", "ManifestError",
    "NumericDomainError", "TransDAError",
    "batch_slices", "ensure_dir", "first_error", "hash_bytes", "mean_std", "sample_rng", "stable_id",
]
