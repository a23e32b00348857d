"""When would the choice of prescription matter in a laboratory?

The dipole correction is of order a L / c^2 and the quadrupole correction
of order (L / curvature radius)^2.  For an atom-sized detector we print the
acceleration needed to make the first of order one, the acceleration of a
proton in the LHC ring, and the curvature radius at a solar-mass horizon.

Run with ``python3 demos/magnitudes.py``.
"""

from fermi_detector.hamiltonians import (
    G_EARTH,
    lhc_acceleration,
    magnitude_estimate,
    solar_horizon_curvature_radius,
    threshold_acceleration,
)

size = 1e-10  # one angstrom
thr = threshold_acceleration(size)
lhc = lhc_acceleration()
horizon = solar_horizon_curvature_radius()

print(f"a L / c^2 = 1 needs a = {thr:.2e} m/s^2 = {thr / G_EARTH:.2e} g")
print(f"LHC proton (lab frame): {lhc['lab']:.2e} m/s^2 = {lhc['lab'] / G_EARTH:.2e} g, gamma = {lhc['gamma']:.0f}")
print(f"curvature radius at a solar-mass horizon: {horizon:.0f} m")

est = magnitude_estimate(size, lhc["lab"], horizon)
print(f"dipole scale at the LHC: {est['dipole_scale']:.1e}")
print(f"quadrupole scale at the horizon: {est['quadrupole_scale']:.1e}")
