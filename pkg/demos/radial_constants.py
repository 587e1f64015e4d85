"""Trace constants of balls and shells from the radial solver.

Prints the (2,2) constants of the unit disc, the unit 3-ball and the planar
shell 1 < r < 2, then shows that sigma_{p,q}(B) * P(B)^{1/q} does not depend on q.
"""

import math

from tracestab.radial import ProblemParams, Shell, sigma_ball, sigma_shell, solve_shell

print(f"disc        sigma_2,2 = {sigma_ball(2, 2, 2, 1.0):.12f}")
print(f"3-ball      sigma_2,2 = {sigma_ball(2, 2, 3, 1.0):.12f}")
print(f"shell 1..2  sigma_2,2 = {sigma_shell(2, 2, 2, 1.0, 2.0):.12f}")

for p, qs in [(2.0, (1.0, 1.5, 2.0)), (3.0, (1.0, 2.0, 3.0))]:
    scaled = [sigma_ball(p, q, 2, 1.0) * (2 * math.pi) ** (1 / q) for q in qs]
    print(f"p = {p:g}: sigma * P^(1/q) over q = {qs}: " + ", ".join(f"{v:.12f}" for v in scaled))

prof = solve_shell(ProblemParams(2, 2, 2, Shell(1.0, 2.0))).normalized()
print(f"shell profile: z_m = {prof.z_m:.6f} at the hole, z_M = {prof.z_M:.6f} on the outer circle")
