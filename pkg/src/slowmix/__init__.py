"""Numerical lab for randomly phase-shifted alternating shear flows on the 2-torus.

Modules: ``profile`` (shear profiles), ``flow`` (realizations), ``transport``
(exact Lagrangian maps), ``spectral`` (grid fields and Sobolev norms),
``advdiff`` (split-step solver), ``mixmeter`` (mixing rates, dissipation
times), ``twopoint`` (two-point chain estimators), ``bounds`` (closed-form
bounds) and ``lab`` (sweeps, results, CLI support).
"""

__version__ = "0.1.0"
