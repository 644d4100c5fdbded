"""A quick lower bound on the bilinear constant.

For random bump profiles f, g we evolve both by the half wave group and take the
ratio of |Q12(u, v)| in L2 of a time window to the product of the data norms.
The maximum over trials is only ever a lower bound.  The acceptance suite runs
the 64-trial version; this one is small enough to watch.
"""
from cmcwave import bilinear
from cmcwave.spectral import Grid

res = bilinear.estimate_constant(8, Grid(32), 4.0, seed=7)
print(f"C >= {res['C']:.4f} over {res['trials']} trials")
for sign, row in res["per_sign"].items():
    print(f"  {sign}: max ratio {row['max']:.4f}")
