"""
wiet
====

Simulation and optimization toolkit for wireless information and energy
transfer (WIET): rectenna transfer laws, SWIPT resource allocation,
superimposed-chirp waveforms, near-field placement, IRS-assisted SWIPT,
fluid reconfigurable antennas and THz input-distribution design.

Subpackages are plain modules; import the one you need::

    from wiet import ehmodels, nearfield
    nearfield.fraunhofer(0.2, 3e8 / 2.4e9)
"""

__version__ = "0.1.0"

from . import numerics  # noqa: F401
