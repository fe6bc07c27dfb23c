"""selfexcite: simulation and numerical verification of self-exciting event
systems, their measure-valued scaling limits, and branching-population
equivalents.

Modules
-------
kernels    kernel/mark/model definitions and criticality classification
volterra   resolvent equations and rescaled-resolvent limit curves
hawkes     exact simulation of marked multivariate Hawkes processes
shotnoise  shot-noise functionals of event logs
cbi        limit diffusions: Riccati/Laplace, moment ODEs, Euler schemes
cmj        Crump-Mode-Jagers branching populations
engines    compiled single-type ensemble engines for the large ladders
harness    scaling schedules, Monte Carlo ensembles, convergence reports
cli        config-driven experiment runner (console script `selfexcite`)
"""

__version__ = "1.0.0"
