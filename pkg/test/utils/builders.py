import os

import yaml

from decaycert.engine.simulator import ConstantMatrix, EnvelopeVector, EvolutionProblem, NormPower, \
    ScaledByCoefficient
from decaycert.engine.synthesis import hmin, synth_exponential, synth_forced, synth_power
from decaycert.families import ZERO, Constant, PowerDecay, PowerLaw


def write_scenario(directory, document, name="scenario.yaml"):
    """Dumps a scenario mapping as YAML and returns its path."""
    path = os.path.join(directory, name)
    with open(path, "w") as f:
        yaml.safe_dump(document, f, default_flow_style=False)
    return path


def exponential_problem(k, c0, p, u0):
    """Scalar u' = -k u + c0 |u|^(p-1) u."""
    return EvolutionProblem(ConstantMatrix([[-k]]), NormPower(c0, p), None, [u0])


def power_problem(c1, q1, c0, p, u0):
    """Scalar u' = -c1/(1+t)^q1 u + c0 |u|^(p-1) u."""
    return EvolutionProblem(ScaledByCoefficient([[-1.0]], PowerDecay(c1, q1)), NormPower(c0, p), None, [u0])


def forced_problem(c1, q1, c0, p, c2, q2, u0):
    """The power problem driven by b(t) = c2/(1+t)^q2."""
    return EvolutionProblem(ScaledByCoefficient([[-1.0]], PowerDecay(c1, q1)), NormPower(c0, p),
                            EnvelopeVector(PowerDecay(c2, q2), [1.0]), [u0])


def exponential_scenario(**changes):
    """Exponential regime with k = 1, c0 = 1, p = 2, eps = 1/2 and u0 = 0.4."""
    document = {
        "name": "exponential",
        "regime": "exponential",
        "constants": {"c0": 1.0, "p": 2.0, "k": 1.0, "epsilon": 0.5},
        "problem": {
            "A": {"kind": "constant", "matrix": [[-1.0]]},
            "F": {"kind": "norm_power", "c0": 1.0, "p": 2.0},
            "u0": [0.4],
        },
        "grid": {"t_end": 20.0, "points": 400},
    }
    document.update(changes)
    return document


def random_feasible_instance(rng, regime):
    """Draws (alpha, beta, gamma, mu, g0) of a feasible certificate in one of the analytic regimes.

    Draws are repeated until the synthesis succeeds; g0 is a random share in [0.1, 0.95] of the initial radius.
    """
    while True:
        p = float(rng.uniform(2.0, 3.0))
        c0 = float(rng.uniform(0.1, 2.0))
        if regime == "exponential":
            k = float(rng.uniform(0.5, 2.0))
            result = synth_exponential(k, c0, p, float(rng.uniform(0.1, 0.9)) * k)
            families = PowerLaw(c0, p), ZERO, Constant(k)
        elif regime == "power":
            c1 = float(rng.uniform(1.0, 2.0))
            q1 = float(rng.uniform(0.0, 1.0))
            epsilon = float(rng.uniform(0.05, 0.95)) * (c1 - q1 / (p - 1.0))
            if not 0 < epsilon < c1:
                continue
            result = synth_power(c1, q1, c0, p, epsilon)
            families = PowerLaw(c0, p), ZERO, PowerDecay(c1, q1)
        else:
            c0 = float(rng.uniform(0.1, 1.0))
            c2 = float(rng.uniform(0.001, 0.05))
            nu = float(rng.uniform(0.2, 0.8))
            q2 = nu + float(rng.uniform(0.5, 1.5))
            q1 = float(rng.uniform(0.0, 1.0)) * min(1.0, q2 - nu, nu * (p - 1.0))
            c1 = hmin(c0, p, c2) + nu + float(rng.uniform(0.0, 1.0))
            result = synth_forced(c1, q1, c0, p, c2, q2, nu)
            families = PowerLaw(c0, p), PowerDecay(c2, q2), PowerDecay(c1, q1)
        if result.feasible:
            alpha, beta, gamma = families
            return alpha, beta, gamma, result.majorant, float(rng.uniform(0.1, 0.95)) * result.initial_radius
