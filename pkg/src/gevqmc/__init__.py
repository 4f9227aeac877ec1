"""QMC for elliptic PDEs with Gevrey-regular beta-Gaussian random coefficients."""
