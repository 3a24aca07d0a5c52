"""Small scenario texts shared by the CLI and scenario tests."""

TINY = """
name = "tiny"
description = "small free run"
seed = 1

[state]
kind = "random-gaussian"
spread = [0.7, 1.0]
shift = 0.5

[potential]
kind = "free"

[grids]
q = [-9.0, 9.0, 64]
p = [-9.0, 9.0, 64]
X = [-8.0, 8.0, 32]
frames = { kind = "lattice", half_width = 2.0, n = 32 }

[propagator]
kind = "both"
t_final = 0.2
dt = 0.01

[checks.identity]
[checks.normalization]

[[outputs]]
what = "tomogram"
times = [0.0, 0.2]

[[outputs]]
what = "tomogram"
format = "columns"
frames = [[1.0, 0.0], [0.0, 1.0]]

[[outputs]]
what = "density"
format = "columns"

[[outputs]]
what = "report"
format = "columns"
"""

TINY_2P = """
name = "tiny-pair"
particles = 2
seed = 5

[state]
kind = "product"
first = { mean = [0.5, 0.3], covariance = [[1.0, 0.2], [0.2, 0.8]] }
second = { mean = [-0.6, -0.2], covariance = [[0.7, -0.1], [-0.1, 1.1]] }

[potential]
kind = "pair"
profile = [0.0, 0.0, 0.5]

[grids]
q = [-9.0, 9.0, 48]
p = [-9.0, 9.0, 48]
X = [-12.0, 12.0, 64]
frames = { kind = "list", values = [[1.0, 0.0], [0.7, 0.7]] }

[propagator]
kind = "phase"
t_final = 0.1

[checks.normalization]

[[outputs]]
what = "tomogram"
times = [0.0, 0.1]

[[outputs]]
what = "density"
times = [0.1]
"""


def edit(text, old, new):
    assert old in text, old
    return text.replace(old, new, 1)
