import json
import os
import subprocess
import sys

import numpy as np

from ddereal import _kernels
from ddereal._accel import backend

RK4_SCRIPT = """
import json, numpy as np
from ddereal.ddesim import integrate
from ddereal.linsys import DelayLinearOperator
from ddereal.nfengine import DDEModel
L = DelayLinearOperator.from_terms([(-1.0, -np.pi / 2)])
model = DDEModel.build(L, (-1.0, -0.3), 0, eta={(3, 0): -0.7, (1, 1): 0.4})
tr = integrate(model, history=lambda t: 0.3 * np.cos(t), t_end=20.0)
print(json.dumps({"backend": tr.backend, "z": tr.values[-50:].tolist()}))
"""


def _run(disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("DDEREAL_DISABLE_NUMBA", None)
    if disable:
        env["DDEREAL_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", RK4_SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_char_value_paths_agree():
    rng = np.random.default_rng(0)
    thetas = -rng.uniform(0, 3, 4)
    coeffs = rng.standard_normal(4)
    lams = rng.standard_normal(200) + 1j * rng.uniform(-10, 10, 200)
    d1, dd1 = _kernels.char_values_numpy(thetas, coeffs, lams)
    d2, dd2 = _kernels._char_values_loop(thetas, coeffs, lams)
    assert np.allclose(d1, d2, rtol=1e-13, atol=1e-13)
    assert np.allclose(dd1, dd2, rtol=1e-13, atol=1e-13)


def test_rk4_backends_agree():
    fast, slow = _run(False), _run(True)
    assert slow["backend"] == "numpy"
    assert fast["backend"] in ("numba", "numpy")
    assert np.allclose(fast["z"], slow["z"], rtol=0, atol=1e-12)


def test_backend_name():
    assert backend() in ("numba", "numpy")
