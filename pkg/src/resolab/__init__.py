"""Forward and inverse resonance scattering for compactly supported potentials."""

__version__ = "0.1.0"
