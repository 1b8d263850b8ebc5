"""Feature-model driven configurator and generator toolchain."""

__version__ = "0.1.0"
