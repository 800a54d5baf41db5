"""Time each kernel under every importable backend.

    python benchmarks/bench_kernels.py [--size 512] [--repeat 5] [--json out.json]

Prints one row per kernel with the best-of-``repeat`` time per backend and the
speed-up of the compiled backend over numpy.  Outputs are cross-checked so a
backend that returns different numbers fails loudly instead of looking fast.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from markinspect import kernels
from markinspect.dwtdct import DwtDctParams, pixel_pattern
from markinspect.transforms import dct_matrix


def workloads(size: int, rng: np.random.Generator) -> dict:
    plane = rng.uniform(0, 255, size=(size, size))
    ll = rng.uniform(0, 510, size=(size // 2, size // 2))
    params = DwtDctParams()
    pattern = params.pattern()
    shifts = rng.uniform(-4, 4, size=(size // 8, size // 8))
    dy = rng.normal(0, 1.5, size=(size, size))
    room = np.full((size, size), 255.0)
    subbands = [rng.normal(size=(size // 2, size // 2)) for _ in range(4)]
    return {
        "haar_forward": (plane,),
        "haar_inverse": tuple(subbands),
        "block_dct": (plane, dct_matrix(8), False),
        "block_coefficients": (ll, pattern),
        "shift_block_coefficients": (ll, shifts, pattern),
        "round_luma_shift": (dy, pixel_pattern(params), room, room),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, atol=1e-9)


def run(size: int, repeat: int) -> list[dict]:
    backends = kernels.backends()
    args = workloads(size, np.random.default_rng(0))
    rows = []
    for name, a in args.items():
        row = {"kernel": name}
        outputs = {}
        for bname, mod in sorted(backends.items()):
            fn = getattr(mod, name)
            outputs[bname] = fn(*a)
            timer = timeit.Timer(lambda: fn(*a))
            number, _ = timer.autorange()
            row[bname] = min(timer.repeat(repeat, number)) / number
        ref = outputs["python"]
        for bname, out in outputs.items():
            if not _same(ref, out):
                raise SystemExit(f"{name}: backend {bname} disagrees with numpy")
        rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512, help="plane side in pixels (multiple of 8)")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write raw timings here")
    args = ap.parse_args(argv)
    if args.size % 8:
        ap.error("--size must be a multiple of 8")
    rows = run(args.size, args.repeat)
    names = sorted(kernels.backends())
    print(f"plane {args.size}x{args.size}, best of {args.repeat}; active backend: {kernels.BACKEND}")
    header = f"{'kernel':<26}" + "".join(f"{n + ' ms':>12}" for n in names)
    if "cython" in names:
        header += f"{'speed-up':>10}"
    print(header)
    for r in rows:
        line = f"{r['kernel']:<26}" + "".join(f"{r[n] * 1e3:>12.3f}" for n in names)
        if "cython" in names:
            line += f"{r['python'] / r['cython']:>9.1f}x"
        print(line)
    if "cython" not in names:
        print("compiled backend not importable; only numpy timings shown", file=sys.stderr)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"size": args.size, "repeat": args.repeat, "rows": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
