import numpy as np
import pytest

from pffatigue.plasticity import PlasticityParams

# hot-rolled carbon steel fit used throughout the studies
STEEL = dict(E=215960.0, nu=0.3, sigma0=465.0, Q_inf=55.0, b=2.38,
             backstresses=((23554.0, 139.0),))


@pytest.fixture
def steel():
    return PlasticityParams(**STEEL)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def make_config_text(**over):
    """Minimal valid config text with overridable sections."""
    base = {
        "mesh": "kind = structured\nwidth = 1.0\nheight = 1.0\nnx = 2\nny = 2",
        "material": "E = 215960\nnu = 0.3\nsigma0 = 465\nQ_inf = 55\nb = 2.38\n"
                    "C = 23554\ngamma = 139",
        "fracture": "model = AT2\nGc = 1000\nell = 0.4",
        "fatigue": "law = asymptotic",
        "load": "amplitude = 0.01\nratio = -1\nincrements_per_cycle = 16\ncycles = 2\n"
                "fix = bottom:y, bottom_left:x\ndrive = top:y",
        "solver": "scheme = bfgs",
        "output": "plots = off",
    }
    base.update(over)
    return "\n".join(f"[{k}]\n{v}\n" for k, v in base.items() if v is not None)
