"""Critical-point constants for the Ising / FK / current family on Z^2.

Everything here is computed from closed forms at import time; decimal
literals never appear downstream.  The relations in play:

    beta_c   = (1/2) log(1 + sqrt 2)          self-dual Ising point
    t_c      = tanh(beta_c) = sqrt 2 - 1      high-temperature weight
    cosh_c   = 1 / sqrt(1 - t_c^2)
    q_even   = 1 - 1/cosh_c                   P(n_e > 0 | n_e even)
    p_c      = sqrt 2 / (1 + sqrt 2) = 2 - sqrt 2   FK(q=2) critical p
    sprinkle = 1 - sqrt(1 - p_c)              current -> FK Bernoulli rate
"""

import math

BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))
TANH_BC = math.sqrt(2.0) - 1.0
COSH_BC = 1.0 / math.sqrt(1.0 - TANH_BC * TANH_BC)
Q_EVEN = 1.0 - 1.0 / COSH_BC
P_C = 2.0 - math.sqrt(2.0)
FK_SPRINKLE = 1.0 - math.sqrt(1.0 - P_C)

# aggregate of two independent even edges: positive if either sprinkles
Q_EVEN2 = 1.0 - (1.0 - Q_EVEN) ** 2

# conductance of an edge exiting a quad along a wired arc
WIRED_CONDUCTANCE = 2.0 * (math.sqrt(2.0) - 1.0)


def q_even_at(beta: float) -> float:
    """P(n_e > 0 | n_e even) at inverse temperature beta."""
    return 1.0 - 1.0 / math.cosh(beta)
