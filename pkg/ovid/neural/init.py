"""Weight initializers; biases start at zero and norm gains at one"""

import math

import numpy as np

from ovid.neural.tensor import Parameter


def kaiming_uniform(name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> Parameter:
    bound = math.sqrt(6.0 / fan_in)
    return Parameter(name, rng.uniform(-bound, bound, size=(fan_in, fan_out)))


def xavier_uniform(name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> Parameter:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Parameter(name, rng.uniform(-bound, bound, size=(fan_in, fan_out)))


def zeros(name: str, size: int) -> Parameter:
    return Parameter(name, np.zeros(size), kind="bias")


def ones(name: str, size: int) -> Parameter:
    return Parameter(name, np.ones(size), kind="gain")


INIT_SCHEME = {
    "relu_fc": "kaiming_uniform(sqrt(6/fan_in))",
    "projection": "xavier_uniform(sqrt(6/(fan_in+fan_out)))",
    "bias": "zeros",
    "norm_gain": "ones",
}
