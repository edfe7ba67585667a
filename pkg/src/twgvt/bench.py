"""Compare the compiled kernels against the pure-Python fallback.

Run with ``python -m twgvt.bench``. Prints one line per kernel with the time
per call for each backend and the speedup.
"""

from __future__ import annotations

import argparse
import random
import timeit
from typing import Callable, Dict, List

from . import _fallback

try:
    from . import _speedups
except ImportError:  # extension not built
    _speedups = None


def _buffers(total: int, seed: int = 0) -> List[bytearray]:
    rng = random.Random(seed)
    out, left = [], total
    while left > 0:
        n = min(left, rng.randint(4096, 65536))
        out.append(bytearray(rng.randbytes(n)))
        left -= n
    return out


def sweep_case(mod, total: int) -> Callable[[], None]:
    bufs = _buffers(total)
    nread, nwrite = total // 5, total // 10

    def run() -> None:
        mod.sweep(bufs, 12345, nread, nwrite, 0)
    return run


def atomic_case(mod, ops: int) -> Callable[[], None]:
    a = mod.AtomicInt(0)

    def run() -> None:
        for i in range(ops):
            a.increment()
            a.compare_and_swap(i + 1, i + 1)
    return run


def measure(fn: Callable[[], None], repeat: int) -> float:
    """Best-of-``repeat`` seconds per call."""
    t = timeit.Timer(fn)
    number, _ = t.autorange()
    return min(t.repeat(repeat, number)) / number


def run_bench(total_bytes: int = 1 << 20, atomic_ops: int = 10_000,
              repeat: int = 3) -> Dict[str, Dict[str, float]]:
    backends = {"python": _fallback}
    if _speedups is not None:
        backends["cython"] = _speedups
    results: Dict[str, Dict[str, float]] = {}
    for kernel, case, arg in (("sweep", sweep_case, total_bytes),
                              ("atomics", atomic_case, atomic_ops)):
        results[kernel] = {name: measure(case(mod, arg), repeat)
                           for name, mod in backends.items()}
    return results


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="python -m twgvt.bench", description=__doc__.splitlines()[0])
    p.add_argument("--bytes", type=int, default=1 << 20, help="memory swept per call")
    p.add_argument("--atomic-ops", type=int, default=10_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    res = run_bench(args.bytes, args.atomic_ops, args.repeat)
    if _speedups is None:
        print("compiled extension not built; showing the fallback only")
    for kernel, times in res.items():
        line = "  ".join(f"{name}={t * 1e3:9.3f} ms" for name, t in times.items())
        if "cython" in times:
            line += f"  speedup={times['python'] / times['cython']:.1f}x"
        print(f"{kernel:8s} {line}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
