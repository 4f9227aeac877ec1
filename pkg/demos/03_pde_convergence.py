"""A reduced QMC study for the elliptic PDE with a Gevrey coefficient.

Solves -div(a grad u) = x_2 on the unit square for lattice-mapped
parameters and fits the RMS error decay in n.  This is a few-second version
of ``gevqmc qmc-study``; the command line runs the larger protocol.
"""

from gevqmc.studies import StudyConfig, derived_quantities, fem_study, qmc_convergence_study, truncation_study

cfg = StudyConfig(s=12, k=3, R=6, n_list="17,31,67,127,263",
                  s_reference=32, s_list="2,4,8,16", n_trunc=263,
                  k_reference=5, k_list="1,2,3,4", n_fem=67, fem_s=8)
cfg.validate()
d = derived_quantities(cfg)
print(f"lambda = {d['lambda']:.4f}, predicted rate {d['theoretical_rate']:.4f}")

for name, study in (("qmc", qmc_convergence_study), ("truncation", truncation_study), ("fem", fem_study)):
    table = study(cfg)
    print(f"\n{name} study")
    for x, e1, e0 in zip(table.abscissa, table.h1, table.l2):
        print(f"  {x:>10.4g}  H1 {e1:.3e}  L2 {e0:.3e}")
    fit = table.fit("h1")
    print(f"  fitted H1 slope {fit.slope:.3f}")
