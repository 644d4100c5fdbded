"""The Q12 kernel after the change of variables stays below one half.

Inside the light cone tau > |xi| each direction omega gives a radius rho with
|xi - rho omega| + rho = tau.  The quotient that controls the bilinear estimate
is bounded by 1/2 and the bound is only approached when omega is almost
parallel to xi and tau sits very close to the cone.
"""
import numpy as np

from cmcwave import bilinear
from cmcwave.streams import stream

s = bilinear.KernelSample.at([1.0, 0.0], 2.0, [0.0, 1.0])
print(f"xi=(1,0), tau=2, omega=(0,1): rho={s.rho}, quotient={s.quotient:.3f}, d rho/d tau={s.drho_dtau}")

report = bilinear.scan_kernel(*bilinear.random_samples(stream(0), 200_000))
print(f"200k random samples: max quotient {report['max_quotient']:.8f}, "
      f"identity error {report['max_identity_error']:.1e}")

print("largest quotients found:")
for row in bilinear.extremes(*bilinear.random_samples(stream(0), 200_000), top=3):
    print("  " + ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))

print("small angle eps, tau = 1 + 1e-3 eps^2:")
for eps in (1e-1, 1e-2, 1e-3):
    q = bilinear.kernel_quotient([1.0, 0.0], 1 + 1e-3 * eps**2, [np.cos(eps), np.sin(eps)])
    print(f"  eps={eps:g}: 1/2 - quotient = {0.5 - q:.2e}")
