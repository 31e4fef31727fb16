"""Numerical laboratory for the joint Gaussian limit of log zeta at several scales.

Modules: ``primes``, ``phases``, ``dirichlet``, ``zeta``, ``disorder``,
``moments``, ``rmt`` and the experiment ``runner``.
"""

__version__ = "0.1.0"
