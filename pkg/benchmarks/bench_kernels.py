"""Compare the compiled and numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the series normalizer, tree growth, tree routing and a full boosting
fit under each backend and prints the median wall time and the speed-up.
"""
import argparse
import statistics
import time

import numpy as np

from tdboost import _pykernels, kernels
from tdboost.boost import BoostConfig, fit
from tdboost.data import Dataset
from tdboost.simulate import RfgSpec, gen_rfg

try:
    from tdboost import _ckernels
except ImportError:
    _ckernels = None


def timed(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def use(mod):
    for name in ("log_wright_series", "grow_tree", "apply_tree"):
        setattr(kernels, name, getattr(mod, name))


def cases(data, u, tree):
    z = np.ascontiguousarray(data.y[data.y > 0])
    phi = np.full(z.size, 2.0)
    fields = ("feature", "threshold", "left", "right", "cat_offset", "cat_flags")
    cfg = BoostConfig(n_trees=100, n_leaves=6, shrinkage=0.05)
    return {
        f"log_wright_series (n={z.size})": lambda: kernels.log_wright_series(z, phi, 1.7),
        f"grow_tree (n={data.n}, p={data.p}, L=8)": lambda: kernels.grow_tree(
            data.Xt, data.order, data.is_cat, data.n_levels, u, 8, 10),
        f"apply_tree (n={data.n})": lambda: kernels.apply_tree(
            data.Xt, data.n_levels, *[tree[f] for f in fields]),
        "fit (100 trees, L=6)": lambda: fit(data, cfg),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not built; nothing to compare")

    data, F, _ = gen_rfg(args.n, RfgSpec(phi=2.0, rho=1.7, seed=0))
    # one categorical column exercises the level-ordering path
    X = data.X.copy()
    X[:, 0] = np.digitize(X[:, 0], [-1, 0, 1])
    data = Dataset.from_arrays(X, data.y, categorical=[0])
    u = data.y * np.exp(-0.7 * F) - np.exp(0.3 * F)
    tree = _pykernels.grow_tree(data.Xt, data.order, data.is_cat, data.n_levels, u, 8, 10)

    results = {}
    for label, mod in (("numpy", _pykernels), ("cython", _ckernels)):
        use(mod)
        results[label] = {k: timed(fn, args.repeat) for k, fn in cases(data, u, tree).items()}
    use(_ckernels)

    width = max(map(len, results["numpy"]))
    print(f"{'kernel':<{width}}  {'numpy [ms]':>11}  {'cython [ms]':>11}  {'speed-up':>8}")
    for k in results["numpy"]:
        a, b = results["numpy"][k] * 1e3, results["cython"][k] * 1e3
        print(f"{k:<{width}}  {a:11.2f}  {b:11.2f}  {a / b:7.1f}x")


if __name__ == "__main__":
    main()
