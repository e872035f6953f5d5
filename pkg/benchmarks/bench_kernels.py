"""Compare the compiled and numpy channel kernels.

Times each bulk kernel on a full 7x7 network and a short end-to-end run per
backend, and checks that both backends return the same numbers.

    python benchmarks/bench_kernels.py [--repeat N] [--duration S]
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dbsim.channel import ChannelParams
from dbsim.config import default_config
from dbsim.geometry import CellGrid
from dbsim.kernels import available_backends


def scene(seed=0, users_per_cell=5, p_active=0.5, K=5):
    c = default_config()
    grid = CellGrid(c.grid_side, c.cell_edge)
    rng = np.random.default_rng(seed)
    N = grid.n_cells
    lo = np.repeat(grid.all_bounds()[:, :2], users_per_cell, axis=0)
    cell = np.repeat(np.arange(N), users_per_cell)
    act = rng.random(cell.size) < p_active
    ux = (lo[:, 0] + c.cell_edge * rng.random(cell.size))[act]
    uy = (lo[:, 1] + c.cell_edge * rng.random(cell.size))[act]
    serv = cell[act]
    centres = grid.centers()
    dx = centres[:, 0] + rng.normal(0, 10, (K, N))
    dy = centres[:, 1] + rng.normal(0, 10, (K, N))
    tx = np.bincount(serv, minlength=N) > 0
    nbr = np.hypot(*(centres[:, None, :] - centres[None, :, :]).transpose(2, 0, 1)) <= c.interference_range
    np.fill_diagonal(nbr, False)
    rows = np.flatnonzero(tx)
    cx = np.ascontiguousarray(dx[:, rows].T)
    cy = np.ascontiguousarray(dy[:, rows].T)
    return dict(params=ChannelParams.from_config(c).as_tuple(), ux=ux, uy=uy, serv=serv, dx=dx, dy=dy, tx=tx,
                nbr=nbr, rows=rows, cx=cx, cy=cy, r2=rng.uniform(0, 4e4, (ux.size, 21, 5)))


def cases(mod, s):
    p = s["params"]
    return {
        "interference K=1": lambda: mod.interference(s["ux"], s["uy"], s["serv"], s["dx"][:1], s["dy"][:1], s["tx"], p),
        "interference K=5": lambda: mod.interference(s["ux"], s["uy"], s["serv"], s["dx"], s["dy"], s["tx"], p),
        "leakage": lambda: mod.leakage(s["cx"], s["cy"], s["rows"], s["ux"], s["uy"], s["serv"], s["nbr"], p),
        "link_terms (M,21,5)": lambda: mod.link_terms(s["r2"], p),
    }


def time_engine(backend: str, duration: float) -> float:
    env = dict(os.environ)
    env["DBSIM_PURE_PYTHON"] = "1" if backend == "python" else "0"
    code = ("import time; from dbsim import run, default_config, BACKEND; "
            f"assert BACKEND == {backend!r}; c = default_config(duration_s={duration}); "
            "t = time.perf_counter(); run(c); print(time.perf_counter() - t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--duration", type=float, default=20.0, help="simulated seconds for the end-to-end run")
    args = ap.parse_args(argv)

    backends = available_backends()
    s = scene()
    print(f"active users: {s['ux'].size}, drones: {s['tx'].size}, backends: {', '.join(backends)}")
    results = {}
    for name, mod in backends.items():
        for label, fn in cases(mod, s).items():
            results.setdefault(label, {})[name] = (min(timeit.repeat(fn, number=1, repeat=args.repeat)), fn())

    print(f"\n{'kernel':<22}" + "".join(f"{b:>14}" for b in backends) + f"{'speed-up':>10}{'max rel diff':>14}")
    for label, per in results.items():
        times = [per[b][0] * 1e6 for b in backends]
        line = f"{label:<22}" + "".join(f"{t:>12.1f}us" for t in times)
        if len(per) == 2:
            a, b = (np.asarray(per[k][1]) if not isinstance(per[k][1], tuple) else np.stack(per[k][1])
                    for k in ("python", "cython"))
            diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
            line += f"{times[0] / times[1]:>9.1f}x{diff:>14.1e}"
        print(line)

    print(f"\nend-to-end run, {args.duration:g} simulated seconds (GT, 7x7 grid):")
    for name in backends:
        print(f"  {name:<8}{time_engine(name, args.duration):8.2f} s")


if __name__ == "__main__":
    main()
