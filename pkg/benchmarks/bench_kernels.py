"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 200]

Shapes follow a BERT-base query (vocabulary 30522, hidden 768, 128
positions) and a 50-candidate cosine ranking. The first numba call, which
includes compilation, is excluded. Kernels where numpy wins are dispatched
to numpy at runtime regardless of the flag.
"""

import argparse
import timeit

import numpy as np

from maskscrub import _accel


def cases(rng):
    logits = rng.normal(size=(1, 30522))
    hidden = rng.normal(size=(128, 768))
    gamma, beta = rng.normal(size=768), rng.normal(size=768)
    inner = rng.normal(size=(128, 3072))
    query, cands = rng.normal(size=768), rng.normal(size=(50, 768))
    return {
        "softmax 1x30522": (_accel.softmax_nb, _accel.softmax_np, (logits,)),
        "layer_norm 128x768": (_accel.layer_norm, _accel.layer_norm_np,
                               (hidden, gamma, beta, 1e-12)),
        "gelu 128x3072": (_accel.gelu, _accel.gelu_np, (inner,)),
        "cosine 50x768": (_accel.cosine_distances_nb, _accel.cosine_distances_np,
                          (query, cands)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        print("numba path disabled (MASKSCRUB_DISABLE_NUMBA set or numba missing)")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20} {'numba us':>10} {'numpy us':>10} {'speedup':>8}  max |diff|")
    for name, (fast, ref, argv) in cases(rng).items():
        diff = float(np.max(np.abs(fast(*argv) - ref(*argv))))  # also warms up the JIT
        t_fast = min(timeit.repeat(lambda: fast(*argv), number=1, repeat=args.repeat))
        t_ref = min(timeit.repeat(lambda: ref(*argv), number=1, repeat=args.repeat))
        print(f"{name:<20} {t_fast * 1e6:>10.1f} {t_ref * 1e6:>10.1f} "
              f"{t_ref / t_fast:>7.2f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
