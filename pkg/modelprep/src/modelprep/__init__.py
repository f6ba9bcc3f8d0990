"""Offline model tooling for the photostyle engine.

Everything here talks to the engine exclusively through its documented
file formats: the VGGW weight file, npz activation dumps, and the
palette/mask text and image files.
"""

__version__ = "0.1.0"
