"""Recover all three components of B = (10, 6, 2) from one measured signal.

The interleaved sequence makes <Jz>(T) a sum of six sinusoids whose angular
frequencies are Bx +- By +- Bz and Bx +- Bz (times N for the cat probe).
An FFT of the trace, six refined peaks, and the amplitude rule give back
the field; a least-squares fit against the trace fixes the signs.

Run: python3 demos/field_recovery.py
"""

import math

from vecmag.estimation import extract_peaks, fft_spectrum, recover_from_trace, sample_signal
from vecmag.schemes import SchemeConfig
from vecmag.spin import EnsembleDims, FieldVector

TRUTH = (10.0, 6.0, 2.0)
T_MAX, M = 12.8, 4096


def main():
    bin_width = 2.0 * math.pi / T_MAX
    print(f"true field B = {TRUTH}, trace length {T_MAX}, {M} samples")
    print(f"FFT bin width {bin_width:.4f} rad/time\n")
    for probe in ("scs", "ghz"):
        cfg = SchemeConfig("sequential", probe, EnsembleDims(10),
                           FieldVector(*TRUTH), (1.0, 1.0, 1.0))
        trace = sample_signal(cfg, T_MAX, M)
        peaks = extract_peaks(fft_spectrum(trace))
        recovered, _, _ = recover_from_trace(trace, on_tie="positive")
        scale = trace.scale
        print(f"{probe}: peaks / scale at "
              + ", ".join(f"{p.omega / scale:6.3f}" for p in
                          sorted(peaks, key=lambda p: p.omega)))
        got = (recovered.bx, recovered.by, recovered.bz)
        errs = [abs(g - t) for g, t in zip(got, TRUTH)]
        print(f"     recovered ({got[0]:.4f}, {got[1]:.4f}, {got[2]:.4f}),"
              f" errors {max(errs):.4f} vs resolution {2 * bin_width / scale:.4f}")
        if probe == "ghz":
            print("     (cat-probe frequencies are N-fold, so the same trace"
                  " length resolves the field 10x more sharply;"
                  " the sign of By is even in the signal and set by policy)")
        print()


if __name__ == "__main__":
    main()
