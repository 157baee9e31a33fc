"""Compiled vs interpreted flow kernel.

Each backend runs in its own interpreter because the choice is made at import
time from MABWLAN_DISABLE_NUMBA. The compiled side is timed after a warm-up
run so that JIT compilation is excluded.

    python benchmarks/bench_engine.py --t-sim 900 --repeat 3
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from mabwlan import _accel
from mabwlan.engine import SimConfig, generate_scenario, run

n, m, t_sim, repeat = int(sys.argv[1]), int(sys.argv[2]), float(sys.argv[3]), int(sys.argv[4])
cfg = SimConfig(t_sim=t_sim)
scenario = generate_scenario(n, m, seed=1, config=cfg)
run(scenario, SimConfig(t_sim=60.0), "adaptive")  # warm-up / compile
times = []
for _ in range(repeat):
    t0 = time.perf_counter()
    res = run(scenario, cfg, "adaptive")
    times.append(time.perf_counter() - t0)
print(json.dumps({"backend": _accel.backend(), "best_s": min(times), "events": res.events,
                  "satisfaction": res.mean_satisfaction()}))
"""


def measure(disable: bool, n: int, m: int, t_sim: float, repeat: int) -> dict:
    env = dict(os.environ)
    env["MABWLAN_DISABLE_NUMBA"] = "1" if disable else "0"
    out = subprocess.run([sys.executable, "-c", CHILD, str(n), str(m), str(t_sim), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-aps", type=int, default=15)
    ap.add_argument("--n-stations", type=int, default=225)
    ap.add_argument("--t-sim", type=float, default=600.0, help="simulated seconds per run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rows = [measure(flag, args.n_aps, args.n_stations, args.t_sim, args.repeat) for flag in (False, True)]
    fast, slow = rows
    for r in rows:
        rate = r["events"] / r["best_s"]
        print(f"{r['backend']:>7}: {r['best_s']:8.3f} s  {r['events']:>9d} flow events  "
              f"{rate / 1e6:6.2f} M events/s  satisfaction {r['satisfaction']:.6f}")
    print(f"speed-up: {slow['best_s'] / fast['best_s']:.1f}x")
    if fast["events"] != slow["events"] or abs(fast["satisfaction"] - slow["satisfaction"]) > 1e-9:
        print("warning: backends disagree", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
