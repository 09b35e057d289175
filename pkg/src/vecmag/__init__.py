"""vecmag: vector DC magnetometry with collective-spin probes.

Simulates selective phase accumulation under pi-pulse sequences in the
Dicke basis, checks closed-form signals, precisions and quantum Fisher
information against exact state-vector dynamics, and recovers all three
field components from FFT spectra of the measured signal.
"""

__version__ = "0.1.0"
