"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeats 5]

Both backends are called explicitly, so SELDKIT_DISABLE_NUMBA must be unset for the numba column.
"""

import argparse
import time

import numpy as np

from seldkit import _accel
from seldkit.adpit import adpit_loss_grad
from seldkit.codec import ActiveEventSet
from seldkit.metrics import hungarian


def _events(rng, n_classes, n_frames):
    out = []
    for _ in range(n_classes):
        row = []
        for _ in range(n_frames):
            a = int(rng.choice(4, p=[0.7, 0.2, 0.07, 0.03]))
            v = rng.normal(size=(a, 3))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            row.append([(tuple(d), float(rng.uniform(0.5, 5.0))) for d in v])
        out.append(row)
    return out


def _best(fn, repeats):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        ap.error("numba is unavailable or disabled; nothing to compare")
    rng = np.random.default_rng(0)

    rows = []
    for n_frames in (50, 500):
        sets = ActiveEventSet.from_lists(_events(rng, 13, n_frames))
        pred = rng.normal(size=(3, 13, 4, n_frames))
        t = {b: _best(lambda b=b: adpit_loss_grad(pred, sets, backend=b), args.repeats)
             for b in ("numba", "numpy")}
        rows.append((f"adpit 13x{n_frames}", t["numba"], t["numpy"]))

    for size, count in ((3, 2000), (6, 2000), (30, 50)):
        mats = [rng.random((size, size)) for _ in range(count)]
        t = {b: _best(lambda b=b: [hungarian(m, backend=b) for m in mats], args.repeats)
             for b in ("numba", "numpy")}
        rows.append((f"hungarian {count}x({size}x{size})", t["numba"], t["numpy"]))

    print(f"{'case':<28}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, a, b in rows:
        print(f"{name:<28}{a * 1e3:>12.2f}{b * 1e3:>12.2f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
