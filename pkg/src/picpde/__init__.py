"""PDE discovery from noisy gridded data.

Pipeline: smoothing surrogate network -> genetic search over candidate
term structures -> combination ranking by redundancy loss (moving-horizon
coefficient variation) times physical loss (constrained-network deviation)
-> coefficient refinement, with Lasso/STRidge/AIC/BIC baselines.
"""

__version__ = "0.1.0"
