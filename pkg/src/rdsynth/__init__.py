"""Controller synthesis for switched reaction-diffusion systems on a state grid."""

__version__ = "0.1.0"
