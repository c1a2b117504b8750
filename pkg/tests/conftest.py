import textwrap

import pytest

SMALL_SCENE = """\
[synth]
width = 32
height = 32
bands = 8
n_classes = 2
noise = 0.0
signatures = [[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
              [0.9, 0.7, 0.5, 0.3, 0.2, 0.4, 0.6, 0.8]]
background = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]

[[synth.shapes]]
kind = "rect"
class_id = 1
top = 2
left = 2
height = 8
width = 8

[[synth.shapes]]
kind = "disc"
class_id = 2
top = 2
left = 18
height = 10
width = 10

[[synth.transforms]]
shape = 0
shift = [16, 0]
angle = 90

[[synth.transforms]]
shape = 1
shift = [16, 0]
angle = 90

[iap]
n_g = 2
radii = [2, 4]
orders = [0, 1, 2]
d = 10

[slic]
n_segments = 16

[forest]
n_trees = 20

[run]
seed = 3
"""


@pytest.fixture
def small_config(tmp_path):
    """Write the small synthetic-scene config and return its path."""
    def make(extra: str = "", text: str = SMALL_SCENE):
        path = tmp_path / "scene.toml"
        path.write_text(text + textwrap.dedent(extra))
        return path
    return make
