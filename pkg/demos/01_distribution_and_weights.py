"""From the beta-Gaussian law to POD weights.

Walks through the ingredients that fix the lattice rule before any PDE is
solved: the parameter distribution, the kernel constant and the weights.
Run with ``python demos/01_distribution_and_weights.py``.
"""

import numpy as np

from gevqmc.betagauss import BetaGaussian
from gevqmc.field import GevreyField
from gevqmc.weights import SpaceParams, build_pod_weights, kernel_case, kernel_constant_K, select_lambda, theoretical_rate

# the parameters follow a beta-Gaussian law; beta = 2 is the normal law
for beta in (0.5, 1.0, 2.0, 4.0):
    d = BetaGaussian(beta)
    q = d.inv_cdf(np.array([0.5, 0.9, 0.999]))
    print(f"beta={beta:<4} c_beta={d.c_beta:.6f}  quantiles(0.5, 0.9, 0.999)={np.round(q, 4)}")

# heavy tails for beta < 1: the 1 - 1e-12 quantile is far out
print("beta=0.5, t=1-1e-12 ->", BetaGaussian(0.5).inv_cdf(1 - 1e-12))

# function space parameters used by the studies
sp = SpaceParams(tau=0.5, theta=1.001, r=0.70, delta=0.05, beta=0.5)
vartheta, sigma = 1.75, 1.5
p = 1 / vartheta + 1e-3
lam = select_lambda(p, sigma, sp)
print(f"\nkernel case: {kernel_case(sp)}")
print(f"p = {p:.6f}, lambda = {lam:.6f}, K = {kernel_constant_K(sp):.6f}")
print(f"predicted RMS rate O(n^-{theoretical_rate(p, sp):.4f})")

# per-coordinate sequences of the coefficient field, then the weights
field = GevreyField(vartheta, 16)
seq = field.sequences(16, p)
w = build_pod_weights(16, sigma, lam, 1.0, seq.b, seq.alpha, sp, kernel_constant_K(sp))
print("\nper-coordinate factors:", np.array2string(w.per_coord_factor[:6], precision=4))
for u in [(0,), (1,), (0, 1), (0, 1, 2), (3, 7)]:
    print(f"gamma_{u} = {w.gamma(u):.4e}")
