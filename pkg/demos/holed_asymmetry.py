"""Holed domains: the hybrid asymmetry and the plateau construction.

A random member of the admissible class with radii 1 and 2 is compared with
the shell. Then a hexagon with a concentric hexagonal hole shows the case
where the hole lies inside the plateau of the web function: the weak inner
asymmetry vanishes and only the outer asymmetry detects the defect.
"""

import math

from tracestab.convex2d import regular_polygon
from tracestab.fem import mesh_domain, minimize_trace_quotient
from tracestab.harness import class_instance
from tracestab.radial import ProblemParams, Shell, solve_shell
from tracestab.webfunc import ClassParams, HoledDomain, build_web, comparison_chain_report, hybrid_asymmetry

prof = solve_shell(ProblemParams(2, 2, 2, Shell(1.0, 2.0)))
dom = class_instance(seed=3, R1=1.0, R2=2.0)
sol = minimize_trace_quotient(mesh_domain(dom.outer, dom.hole, 0.04), 2, 2)
rep = comparison_chain_report(dom, prof, sigma_h=sol.sigma)
print(f"clearance {dom.clearance:.3f}, hole inradius {dom.hole.profile.inradius:.3f}")
print(f"sigma(shell) = {prof.sigma:.6f}   sigma_h = {sol.sigma:.6f}")
print(f"alpha_out = {rep.alpha_out:.3e}   A_tilde = {rep.A_tilde:.3e}   alpha_hyb = {rep.alpha_hyb:.3e}")

outer = regular_polygon(6).with_perimeter(4 * math.pi)
hole = regular_polygon(6)
hole = hole.scaled(math.sqrt((outer.area - 3 * math.pi) / hole.area))
hexa = HoledDomain(outer, hole, ClassParams(1.0, 2.0, 0.5))
hyb = hybrid_asymmetry(hexa, build_web(prof.normalized(), outer))
print(f"hexagonal plateau case: A_tilde = {hyb.A_tilde}, alpha_out = {hyb.alpha_out:.3e}")
