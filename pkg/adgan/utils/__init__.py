"""
Utility sub-package
-------------------
Lightweight, *pure* helpers: logging setup, image conversion and the
synthetic face renderer with its oracle.  The renderer can be launched as a
**module** for a quick preview::

    python -m adgan.utils.synthetic_faces --out preview.png
"""

from .log import MetricsLog, configure_logging, get_logger
from .preprocessing import encode_png, load_image, to_model_range, to_uint8
from .synthetic_faces import SyntheticOracle, SyntheticSpec, oracle_classify, synth_generate

__all__ = [
    # logging
    "MetricsLog",
    "configure_logging",
    "get_logger",
    # images
    "encode_png",
    "load_image",
    "to_model_range",
    "to_uint8",
    # synthetic faces
    "SyntheticOracle",
    "SyntheticSpec",
    "oracle_classify",
    "synth_generate",
]
