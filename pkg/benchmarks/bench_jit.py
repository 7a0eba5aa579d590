"""Compare the compiled event loop with the pure-numpy fallback.

Each variant runs in its own interpreter because the JIT switch is read at
import time.  Usage:

    python benchmarks/bench_jit.py [--flows 300] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from hyline._jit import JIT_ENABLED
from hyline.config import load_config, parse_override
from hyline.simengine import run
from hyline.workload import generate_trace

flows, repeat = int(sys.argv[1]), int(sys.argv[2])
cfg = load_config(None, [parse_override(f"workload.flows={flows}")])
topo = cfg.topology()
trace = generate_trace(cfg.workload(0.6, 1), topo)
t = time.perf_counter()
run(topo, trace.slice(20), "hyline", cfg.sim_params("hyline", 1))  # warm-up / compile
warm = time.perf_counter() - t
best = float("inf")
for _ in range(repeat):
    t = time.perf_counter()
    rep = run(topo, trace, "hyline", cfg.sim_params("hyline", 1))
    best = min(best, time.perf_counter() - t)
print(json.dumps({"jit": JIT_ENABLED, "warmup_s": warm, "best_s": best,
                  "events": rep.stats["events"], "finish_sum": float(rep.finish.sum())}))
"""


def measure(disable: bool, flows: int, repeat: int) -> dict:
    env = dict(os.environ, HYLINE_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run(
        [sys.executable, "-c", CHILD, str(flows), str(repeat)],
        env=env, check=True, capture_output=True, text=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--flows", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    jit = measure(False, args.flows, args.repeat)
    py = measure(True, args.flows, 1)
    for name, r in (("numba", jit), ("numpy", py)):
        print(f"{name:6s} {r['best_s']:8.3f}s  {r['events'] / r['best_s'] / 1e6:6.2f} M events/s"
              f"  (warm-up {r['warmup_s']:.1f}s)")
    print(f"speedup {py['best_s'] / jit['best_s']:.1f}x")
    same = jit["events"] == py["events"] and jit["finish_sum"] == py["finish_sum"]
    print("results identical" if same else "RESULTS DIFFER")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
