"""Time the compiled and numpy kernel backends on training-sized inputs.

    python3 benchmarks/bench_kernels.py [--rows 600] [--dim 64] [--repeat 50]

Prints one line per (kernel, backend) with the best-of-repeat time and
the speedup of the compiled backend, and a final end-to-end timing of a
few training epochs under each backend.
"""

import argparse
import timeit

import numpy as np

from credinfer import kernels


def kernel_cases(rows, dim, rng):
    g, r, a, b, c, d, gh = (rng.uniform(-1, 1, (rows, dim)) for _ in range(7))
    n_seg = max(rows // 6, 1)
    lists = [rng.choice(rows, size=rng.integers(0, 12), replace=False) for _ in range(n_seg)]
    indptr = np.concatenate([[0], np.cumsum([len(x) for x in lists])]).astype(np.int64)
    indices = np.concatenate(lists).astype(np.int64)
    grad_seg = rng.normal(size=(n_seg, dim))
    idx = rng.integers(0, rows, size=rows * 4).astype(np.int64)
    src = rng.normal(size=(idx.size, dim))
    return {
        "gdu_mix": lambda m: kernels.gdu_mix(g, r, a, b, c, d, impl=m),
        "gdu_mix_grad": lambda m: kernels.gdu_mix_grad(g, r, a, b, c, d, gh, impl=m),
        "segment_mean": lambda m: kernels.segment_mean(a, indptr, indices, impl=m),
        "segment_mean_grad": lambda m: kernels.segment_mean_grad(grad_seg, indptr, indices, rows, impl=m),
        "scatter_add_rows": lambda m: kernels.scatter_add_rows(rows, idx, src, impl=m),
    }


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_training(epochs):
    from credinfer.features import build_vocab
    from credinfer.graph import derive_entity_labels, split_folds
    from credinfer.synth import generate_synthetic
    from credinfer.train import FoldData, TrainConfig, fit

    hsn = derive_entity_labels(generate_synthetic(600, 100, 20, seed=7))
    fold = split_folds(hsn, 10, 1.0, 7).folds[0]
    cfg = TrainConfig(epochs=epochs, seed=7)
    vocab = build_vocab(hsn, cfg.d, train_ids=fold.sampled)
    data = FoldData.build(hsn, vocab, fold.sampled, cfg.q)
    out = {}
    saved = kernels.BACKEND
    try:
        # alternate backends so warm-up and machine noise hit both alike
        for _ in range(2):
            for name in available():
                kernels.set_backend(name)
                t = best_time(lambda: fit(hsn, vocab, fold.sampled, cfg, data=data), 1)
                out[name] = min(out.get(name, t), t)
    finally:
        kernels.set_backend(saved)
    return out


def available():
    names = ["python"]
    try:
        kernels.load_backend("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=600)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=5, help="training epochs for the end-to-end timing (0 skips)")
    args = ap.parse_args()

    backends = available()
    print(f"active backend: {kernels.BACKEND}; comparing {', '.join(backends)}")
    cases = kernel_cases(args.rows, args.dim, np.random.default_rng(0))
    for name, fn in cases.items():
        times = {b: best_time(lambda: fn(kernels.load_backend(b)), args.repeat) for b in backends}
        line = "  ".join(f"{b} {t * 1e6:9.1f} us" for b, t in times.items())
        if "cython" in times:
            line += f"  speedup x{times['python'] / times['cython']:.2f}"
        print(f"{name:18s} {line}")
    if args.epochs:
        times = bench_training(args.epochs)
        line = "  ".join(f"{b} {t:7.2f} s" for b, t in times.items())
        print(f"{'fit ' + str(args.epochs) + ' epochs':18s} {line}")


if __name__ == "__main__":
    main()
