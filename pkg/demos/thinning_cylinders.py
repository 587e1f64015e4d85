"""Four-dimensional thinning cylinders with fixed perimeter 16*pi^2.

Their volume tends to zero while the asymmetry blows up, so any bound of the
form C * asymmetry^(5/2) quickly dwarfs the trivial bound sqrt(|Omega| / P).
"""

from tracestab.harness import counterexample_4d

for eps in (0.3, 0.1, 0.03):
    ce = counterexample_4d(eps)
    print(
        f"eps = {eps:<5} volume {ce['volume']:.6f}  asymmetry {ce['asymmetry_star']:10.2f}  "
        f"bound / trivial = 10^{ce['orders_of_magnitude']:.2f}"
    )
