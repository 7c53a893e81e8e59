"""
Attribute-disentangled face aging – root package
------------------------------------------------

Convenience re-exports:

    >>> from adgan import AttributeSpace, ModelBundle, load_config, train
"""

from importlib.metadata import PackageNotFoundError, version

# --------------------------------------------------------------------- #
#  Public version string                                                #
# --------------------------------------------------------------------- #
try:
    __version__: str = version(__name__)          # read from wheel / pyproject
except PackageNotFoundError:                      # fallback for source checkout
    __version__ = "0.0.0+"                        # pragma: no cover

# --------------------------------------------------------------------- #
#  Handy one-liners for notebooks / REPL                                #
# --------------------------------------------------------------------- #
from .attributes import AttributeLabel, AttributeSpace    # 🏷   labels & codes
from .config import TrainConfig, load_config               # ⚙️   run config
from .evaluate import EvalReport, preservation_rate        # 📊  metric
from .networks import ModelBundle, NetworkConfig           # 🧠  G, E, F, D
from .train import Trainer, train                          # 🏋   two stages

__all__ = [
    "__version__",
    "AttributeLabel",
    "AttributeSpace",
    "TrainConfig",
    "load_config",
    "EvalReport",
    "preservation_rate",
    "ModelBundle",
    "NetworkConfig",
    "Trainer",
    "train",
]
