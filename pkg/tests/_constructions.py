"""Shared test constructions.

variance_sin_pair builds the canonical pair of lifted measures whose
monotone fiber cost approaches 4/pi while the plain base distance is
exactly 1/(24 m^2): uniform mass on [0, 1/m] as M midpoint atoms, its
translate by 1/(24 m^2), and on each the velocity x -> sin(2 pi x / Var)
with Var the variance of that discrete measure. Under the monotone
(shift) coupling the fiber integrand is |sin - sin(. + half period)| =
2|sin|, whose mean is 4/pi.
"""

import math

from mdelab import DiscreteMeasure, LiftedMeasure, make_lifted, make_measure


def _variance(mu: DiscreteMeasure) -> float:
    mean = math.fsum(m * p[0] for p, m in mu.atoms())
    return math.fsum(m * (p[0] - mean) ** 2 for p, m in mu.atoms())


def variance_sin_lift(mu: DiscreteMeasure) -> LiftedMeasure:
    freq = 2.0 * math.pi / _variance(mu)
    return make_lifted([(p, (math.sin(freq * p[0]),), m)
                        for p, m in mu.atoms()])


def variance_sin_pair(m: int, big_m: int):
    """Returns (V[mu], V[mu'], mu, mu') at scale m with big_m atoms."""
    shift = 1.0 / (24.0 * m * m)
    width = 1.0 / (big_m * m)
    pos = [(j + 0.5) * width for j in range(big_m)]
    w = 1.0 / big_m
    mu = make_measure([(p, w) for p in pos])
    nu = make_measure([(p + shift, w) for p in pos])
    return variance_sin_lift(mu), variance_sin_lift(nu), mu, nu
