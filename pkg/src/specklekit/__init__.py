"""Speckle filtering workbench: multiplicative-model laws, Lee and MAP filters,
Lee's assessment protocol and its Monte Carlo extension."""

__version__ = "0.1.0"
