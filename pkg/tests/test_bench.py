import importlib.util
from pathlib import Path

from markinspect import kernels

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_runs_and_backends_agree():
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    rows = bench.run(size=64, repeat=1)
    assert {r["kernel"] for r in rows} == set(bench.workloads(64, __import__("numpy").random.default_rng(0)))
    assert all(r[name] > 0 for r in rows for name in kernels.backends())
