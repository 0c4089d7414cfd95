"""Simulate every bundled scenario and print the fitted decay of its main diagnostics.

    python scripts/run_all_scenarios.py [--out DIR]
"""
import argparse
import time
from pathlib import Path

from alignflow.config import bundled_scenarios, load_bundled
from alignflow.errors import AlignflowError
from alignflow.ratefit import classify_decay
from alignflow.runs import run_manifest, write_outputs

COLUMNS = ("D_eta", "D_omega", "E_diss", "X")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs", help="parent directory for the per-scenario outputs")
    args = parser.parse_args()
    for name in bundled_scenarios():
        manifest = load_bundled(name)
        start = time.perf_counter()
        traj = run_manifest(manifest)
        out = write_outputs(traj, manifest, Path(args.out) / name)
        print(f"{name}: {len(traj)} frames, {traj.steps} steps, {time.perf_counter() - start:.1f}s -> {out}")
        t = traj.column("t")
        for col in COLUMNS:
            try:
                print(f"  {col:8s} {classify_decay(t, traj.column(col)).summary()}")
            except AlignflowError as exc:
                print(f"  {col:8s} {type(exc).__name__}: {exc}")


if __name__ == "__main__":
    main()
