"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the backend is fixed at
import time by ``DDEREAL_DISABLE_NUMBA``.

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from ddereal._accel import backend
from ddereal._kernels import char_values
from ddereal.linsys import SpectrumSpec, design_linear
from ddereal.nfengine import DDEModel
from ddereal.ddesim import integrate

repeat = int(__import__("sys").argv[1])
spec = SpectrumSpec(p=1, includes_zero=False, omegas=(np.pi / 2,), r=1.0)
L = design_linear(spec, [-1.0], verify=False)
model = DDEModel.build(L, [-1.0], eta={(3,): -0.5})
lams = (np.random.default_rng(0).standard_normal(200_000) + 1j * np.random.default_rng(1).standard_normal(200_000)) * 20
th, co = np.array(L.thetas), np.array(L.coeffs)

def best(fn):
    fn()  # warm-up (includes JIT compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

out = {
    "backend": backend(),
    "char_values_200k": best(lambda: char_values(th, co, lams)),
    "rk4_20k_steps": best(lambda: integrate(model, history=0.1, t_end=200.0, dt=0.01)),
}
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    if disable:
        env["DDEREAL_DISABLE_NUMBA"] = "1"
    else:
        env.pop("DDEREAL_DISABLE_NUMBA", None)
    proc = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env, check=True,
                          capture_output=True, text=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':<20}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in ("char_values_200k", "rk4_20k_steps"):
        print(f"{key:<20}{fast[key]:>11.4f}s{slow[key]:>11.4f}s{slow[key] / fast[key]:>9.1f}x")


if __name__ == "__main__":
    main()
