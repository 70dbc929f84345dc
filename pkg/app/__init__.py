"""Ethics2Vec audit toolkit: recover the implicit loss weights of decision agents."""

from app.config import APP_VERSION

__version__ = APP_VERSION
