"""blindmap: indoor MIMO-OFDM channel synthesis, blind trajectory inference,
and the numerical validation suite for its identifiability theory."""

__version__ = "0.1.0"

from ._geom import SPEED_OF_LIGHT

__all__ = ["SPEED_OF_LIGHT", "__version__"]
