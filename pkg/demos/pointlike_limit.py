"""How the two interaction prescriptions separate as the detector grows.

The covariant prescription weights the smearing with sqrt(-g), the
non-covariant one with the spatial volume element only.  Their difference
is a dipole term a.x from acceleration plus a quadrupole term from tidal
curvature.

For a smearing displaced from an accelerated worldline the dipole wins and
the relative difference grows like the size.  For a centred, isotropic
smearing the dipole cancels and only the trace of the tidal matrix
survives, so the difference grows like the size squared.  In vacuum that
trace vanishes (outside a black hole the centred case gives zero to
roundoff), so the centred case is shown for the static observer at the
centre of de Sitter space, where the tidal matrix is -H^2 times the identity.

Run with ``python3 demos/pointlike_limit.py``.
"""

import numpy as np

from fermi_detector.detector import DetectorSpec, GaussianSmearing, GaussianSwitching
from fermi_detector.hamiltonians import ExpansionFamily, build_weight, multipole_decomposition
from fermi_detector.spacetimes import SpacetimeId, lookup
from fermi_detector.worldline import fw_span, initial_tetrad, static_observer

switching = GaussianSwitching(0.5)


def relative_difference(metric, position, sizes, shifted):
    w = static_observer(metric, position)
    lo, hi = switching.support
    family = ExpansionFamily.along(metric, w, fw_span(initial_tetrad(w), w, lo - 0.5, hi + 0.5))
    out = []
    for s in sizes:
        center = (s, 0.0, 0.0) if shifted else (0.0, 0.0, 0.0)
        det = DetectorSpec(1.0, 1.0, GaussianSmearing(s, center), switching, w)
        rep = multipole_decomposition(build_weight(det, "covariant", family), None, 0.0)
        out.append(abs(rep.relative_correction))
    return np.array(out)


sizes = np.geomspace(1e-3, 5e-2, 6)
schwarzschild = lookup(SpacetimeId("schwarzschild", {"mass": 1.0}))
de_sitter = lookup(SpacetimeId("de-sitter-static", {"hubble": 0.1}))
dipole = relative_difference(schwarzschild, (10.0, np.pi / 2, 0.0), sizes, shifted=True)
quadrupole = relative_difference(de_sitter, (0.0, 0.0, 0.0), sizes, shifted=False)

print("   sigma     shifted, r = 10 M   centred, de Sitter")
for s, d, q in zip(sizes, dipole, quadrupole):
    print(f"{s:.2e}    {d:.3e}           {q:.3e}")

slope = lambda y: round(float(np.polyfit(np.log(sizes), np.log(y), 1)[0]), 3)  # noqa: E731
print("\nslopes:", slope(dipole), slope(quadrupole), "(expect 1 and 2)")
