"""seldkit: FOA features, augmentation, multi-ACCDOA/ADPIT loss and SELD scoring."""

from .core import (
    N_CLASSES, N_MELS, N_TRACKS, OUTPUT_NEURONS, SAMPLE_RATE, EventAnnotation, FoaClip,
    angular_distance, cart_to_sph, check_constants, sph_to_cart,
)
from .errors import DataError, DomainError, FormatError, ParseError, SeldError, TrainingError
from .io import MetadataTable, read_foa_wav, read_metadata_csv, write_metadata_csv

check_constants()

__version__ = "0.1.0"

__all__ = [
    "N_CLASSES", "N_MELS", "N_TRACKS", "OUTPUT_NEURONS", "SAMPLE_RATE", "EventAnnotation", "FoaClip",
    "angular_distance", "cart_to_sph", "check_constants", "sph_to_cart",
    "DataError", "DomainError", "FormatError", "ParseError", "SeldError", "TrainingError",
    "MetadataTable", "read_foa_wav", "read_metadata_csv", "write_metadata_csv",
]
