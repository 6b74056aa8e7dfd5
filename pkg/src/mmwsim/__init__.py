"""Millimeter-wave link and mobility simulator.

Measured propagation models, analog beamforming codebooks, multi-user
precoding, link adaptation, beam management, channel sounding emulation,
and a deterministic scenario-driven simulation engine.
"""

__version__ = "0.1.0"
