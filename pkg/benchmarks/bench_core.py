"""Compare the compiled core with the numpy fallback.

    python benchmarks/bench_core.py [--repeat N] [--json PATH]

Times each hot kernel through both backends on the same inputs, checks that
the outputs agree, then times one full simulation replicate per backend in
a subprocess (``SUPEROCC_PURE_PYTHON=1`` selects the fallback).
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from superocc import _backend, _fallback

try:
    from superocc import _core
except ImportError:  # extension not built
    _core = None

REPLICATE_SNIPPET = """
import time
from superocc import BACKEND, environment as env
from superocc.experiments import moment_ensemble
from superocc.kernels import Constant, GaussianBump
from superocc.particles import Dirac, SimConfig
cfg = SimConfig(d=1, mu=Dirac((0.0,)), kernel=env.GaussianKernel(0.5, 1.0), unit_mass=2e-3, horizon=1.0, seed=1)
t0 = time.perf_counter()
moment_ensemble(cfg, 2, [Constant(1.0), GaussianBump((0.0,), 0.5)])
print(BACKEND, (time.perf_counter() - t0) / 2)
"""


def cases(rng):
    pos1 = np.ascontiguousarray(rng.normal(0, 0.7, (2000, 1)))
    pos2 = np.ascontiguousarray(rng.normal(0, 0.7, (2000, 2)))
    xs = np.sort(rng.uniform(-3, 3, 2000))
    z = rng.standard_normal(2000)
    shape = np.array([64, 64], dtype=np.int_)
    origin, step = np.full(2, -2.0), np.full(2, 4.0 / 63)
    return {
        "pivoted_cholesky (n=2000, d=1)": lambda m: m.pivoted_cholesky(pos1, _backend.GAUSSIAN, 0.5, 1.0, 1e-12, 256),
        "ou_chain (n=2000)": lambda m: m.ou_chain(xs, z, 1.0, 0.5),
        "heat_sum (n=2000, d=2)": lambda m: m.heat_sum(pos2, np.zeros(2), 0.05),
        "density_accumulate (n=2000, 64x64)": lambda m: _density(m, pos2, origin, step, shape),
    }


def _density(m, pos, origin, step, shape):
    out = np.zeros(int(np.prod(shape)))
    m.density_accumulate(pos, 1e-3, (step[0] / 4) ** 2 * 16, origin, step, shape, out, 9.0)
    return out


def _same(a, b):
    if np.isscalar(a) or np.ndim(a) == 0:
        return bool(np.isclose(a, b, rtol=1e-10))
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim == 2 and a.shape[1] != a.shape[0]:  # Cholesky factors: compare L L^T
        a, b = a @ a.T, b @ b.T
    return a.shape == b.shape and bool(np.allclose(a, b, rtol=1e-10, atol=1e-12))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json")
    p.add_argument("--skip-replicate", action="store_true")
    args = p.parse_args(argv)
    if _core is None:
        print("compiled core not available; only the fallback can be timed")
    rows = []
    for name, fn in cases(np.random.default_rng(0)).items():
        t_np = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        row = {"kernel": name, "numpy_s": t_np}
        if _core is not None:
            t_c = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat))
            row.update(cython_s=t_c, speedup=t_np / t_c, agree=_same(fn(_core), fn(_fallback)))
        rows.append(row)
        extra = f"  cython {row['cython_s'] * 1e3:9.3f} ms  x{row['speedup']:6.1f}  agree={row['agree']}" \
            if _core is not None else ""
        print(f"{name:38s} numpy {t_np * 1e3:9.3f} ms{extra}")
    if not args.skip_replicate:
        for pure in (False, True):
            envv = dict(os.environ)
            if pure:
                envv["SUPEROCC_PURE_PYTHON"] = "1"
            else:
                envv.pop("SUPEROCC_PURE_PYTHON", None)
            out = subprocess.run([sys.executable, "-c", REPLICATE_SNIPPET], capture_output=True, text=True,
                                 env=envv, check=True).stdout.split()
            rows.append({"kernel": "replicate (Gaussian kernel, m=2e-3)", "backend": out[0], "seconds": float(out[1])})
            print(f"one replicate, {out[0]:7s} backend: {float(out[1]):.2f} s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
