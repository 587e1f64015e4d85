"""One random convex polygon of perimeter 2*pi against the unit disc.

The FEM value sigma_h sits below the disc constant; the web function built
from the disc profile gives the upper-side comparison, and the deficit is set
against the squared Hausdorff asymmetry.
"""

import math

from tracestab.convex2d import asymmetry_indices
from tracestab.fem import mesh_domain, minimize_trace_quotient
from tracestab.harness import convex_instance
from tracestab.radial import Ball, ProblemParams, solve_ball
from tracestab.webfunc import comparison_chain_report

poly = convex_instance(seed=4)
prof = solve_ball(ProblemParams(2, 2, 2, Ball(1.0)))
sol = minimize_trace_quotient(mesh_domain(poly, None, 0.03), 2, 2)
rep = comparison_chain_report(poly, prof, sigma_h=sol.sigma)
asym = asymmetry_indices(poly).star

print(f"polygon with {poly.n} vertices, area {poly.area:.4f} (disc {math.pi:.4f})")
print(f"sigma(disc) = {prof.sigma:.6f}   sigma_h(polygon) = {sol.sigma:.6f}   web quotient = {rep.quotient_web:.6f}")
print(f"web flags: {rep.flags}")
print(f"asymmetry {asym:.4f}, deficit / asymmetry^2 = {(prof.sigma - sol.sigma) / asym**2:.4f}")
