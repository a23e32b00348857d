"""Fermi normal coordinates around a static observer outside a black hole.

The observer hovers at r = 10 M.  We build the Fermi-Walker transported
tetrad, read off the acceleration and tidal coefficients, and compare the
second-order metric series with the chart built by geodesic shooting.  The
residual should fall off as r^3.

Run with ``python3 demos/fermi_chart_walkthrough.py``.
"""

import numpy as np

from fermi_detector.fermi import convergence_table, expansion_coefficients, fit_slopes
from fermi_detector.spacetimes import SpacetimeId, lookup
from fermi_detector.worldline import fw_span, initial_tetrad, static_observer

metric = lookup(SpacetimeId("schwarzschild", {"mass": 1.0}))
w = static_observer(metric, (10.0, np.pi / 2, 0.0))
T = initial_tetrad(w)
span = fw_span(T, w, -0.5, 0.5)

exp = expansion_coefficients(metric, w, T)
print("proper acceleration in the triad:", np.round(exp.accel, 6))
print("tidal matrix R_{tau i tau j}:\n", np.round(exp.tidal, 6))
print(f"length scale {exp.length_scale():.3f} M, default validity radius {exp.validity_radius():.3f} M")

radii = np.geomspace(1e-3, 1e-1, 7)
rows = convergence_table(metric, w, span, (1.0, 1.0, 1.0), radii)
print("\n     r      component        |residual|")
for row in rows:
    if row["component"] in ("g_tautau", "sqrt_det_full"):
        print(f"{row['r']:.2e}   {row['component']:<15}  {abs(row['residual']):.3e}")

slopes = fit_slopes(rows, floor=0.0)
print("\nlog-log slopes (expect about 3):", {k: round(v, 3) for k, v in slopes.items() if v is not None})
