"""From a microscopic oscillator medium to a phenomenological detector.

A particle moving through a medium of ground-state oscillators leaves a
which-path imprint; integrating the oscillators out gives a two-path
influence weight controlled by the medium's response density nu(omega).
For paths that stay close on the scale of the interaction range, that
weight collapses to the same window-smoothed Gaussian corridor weight
used by the phenomenological engines — the window profile and strength
are *computed* from the medium, not fitted.

This script builds a Gaussian response band, extracts (profile, kappa),
checks the reduction identity on random path pairs, and measures how
the neglected term grows with the excursion scale.
"""

import numpy as np

from corridors.medium import (
    PathPair,
    SpectralDensity,
    firstorder_log_weights,
    form_factor_from_medium,
    reduce_to_phenomenological,
)

rng = np.random.default_rng(12)
ell = 2.0  # interaction range of the particle-oscillator coupling

band = SpectralDensity.gaussian_band(nu_peak=0.4, sigma_omega=2.0, range_l=ell)
profile, kappa = form_factor_from_medium(band)
print("medium: gaussian response band, peak 0.4, width 2.0, range", ell)
print(f"  reduced window profile : {profile.kind}, tau = {profile.tau:.3f}")
print(f"  reduced strength kappa : {kappa:.6f}  (= 2 pi nu(0) / l^2)")

dt = 0.1
pairs = [PathPair(0.4 * rng.normal(size=30), 0.4 * rng.normal(size=30)) for _ in range(200)]
gaps = [reduce_to_phenomenological(p, profile, kappa, dt).rel_gap for p in pairs]
print(f"\nfirst-order medium weight vs corridor weight, 200 random pairs:")
print(f"  worst relative gap = {max(gaps):.2e}")
print("  the factorized window makes the first-order reduction an identity,")
print("  so the gap is pure roundoff.")

print("\nwhat first order leaves out (relative error of ln W):")
print(f"{'scale/l':>9} {'rel error':>11}")
base1, base2 = rng.normal(size=12), rng.normal(size=12)
for scale in (0.1, 0.2, 0.4, 0.8):
    log_exact, log_first = firstorder_log_weights(
        PathPair(scale * base1, scale * base2), profile, kappa, ell, dt
    )
    print(f"{scale / ell:9.2f} {abs(log_exact - log_first) / abs(log_first):11.2e}")
print("quadratic growth in the excursion scale: the reduction is trustworthy")
print("exactly while the two paths stay close against the interaction range.")
