"""Behavioral simulator and yield toolkit for 1T1R array sensing.

Two read schemes are modeled end to end:

* slope detection -- a reference-less destructive read that injects a ramp
  current into the bitcell and declares a '1' when the sampled bitcell
  voltage slope turns negative (high-to-low switching event), and
* conventional clamped voltage sensing against a shared reference column.

On top of the per-read models sit Monte-Carlo array experiments (failure
ratio sweeps, shmoo grids, multi-chip passing-frequency studies) and a
TDDB E-model reliability calculator.

Unit conventions used throughout: time in ns, current in uA, resistance
in ohm, voltage in V, frequency in MHz.  ``I[uA] * R[ohm] * 1e-6 = V``.
"""

from slopesense.errors import ConfigError, NumericError

__version__ = "0.1.0"

__all__ = ["ConfigError", "NumericError", "__version__"]
