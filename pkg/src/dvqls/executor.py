"""Distributed evaluation of expectation-value tasks.

One cost evaluation runs in three stages:

1. strided allocation: task ``i`` goes to worker ``i mod W``;
2. each worker submits its tasks round-robin to its backend slots
   asynchronously, waits, and aggregates ``c_l* c_k <B>`` locally;
3. the partial sums are reduced in ascending worker order.

Workers are threads (default) or processes.  Tasks are pure; a worker only
needs the kernel specification (problem data plus the broadcast parameters).
"""
from __future__ import annotations

import logging
import os
import threading
import time
from concurrent.futures import Future, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

WORKERS_ENV = "DVQLS_WORKERS"


class Kernel(Protocol):
    coefficients: np.ndarray

    def evaluate(self, l: np.ndarray, k: np.ndarray, j: np.ndarray) -> np.ndarray: ...


class KernelSpec(Protocol):
    def build(self) -> Kernel: ...


class TaskError(RuntimeError):
    """A task failed; ``task`` names the offending (l, k, j)."""

    def __init__(self, task: "TaskSpec", cause: BaseException):
        super().__init__(f"task (l={task.l}, k={task.k}, j={task.j}) failed: {cause!r}")
        self.task = task
        self.cause = cause


@dataclass(frozen=True)
class TaskSpec:
    """One expectation value; ``j is None`` marks a denominator task."""

    l: int
    k: int
    j: int | None = None

    @property
    def is_denominator(self) -> bool:
        return self.j is None


@dataclass(frozen=True)
class ExecutionPlan:
    """Ordered task arrays plus their worker assignment.

    ``j == -1`` in the array form encodes a denominator task.
    """

    n: int
    L: int
    l: np.ndarray
    k: np.ndarray
    j: np.ndarray
    num_workers: int = 1
    backends_per_worker: int = 1
    dedup: bool = False

    def __post_init__(self):
        if self.num_workers < 1:
            raise ValueError("num_workers must be >= 1")
        if self.backends_per_worker < 1:
            raise ValueError("backends_per_worker must be >= 1")
        for name in ("l", "k", "j"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.l.size)

    def __iter__(self) -> Iterator[TaskSpec]:
        for i in range(len(self)):
            yield self.task(i)

    def task(self, i: int) -> TaskSpec:
        j = int(self.j[i])
        return TaskSpec(int(self.l[i]), int(self.k[i]), None if j < 0 else j)

    @property
    def tasks(self) -> list[TaskSpec]:
        return list(self)

    @property
    def circuit_count(self) -> int:
        return 2 * len(self)

    @property
    def assignment(self) -> np.ndarray:
        return np.arange(len(self)) % self.num_workers

    def worker_tasks(self, worker: int) -> np.ndarray:
        return np.arange(worker, len(self), self.num_workers)

    def with_workers(self, workers: int, backends_per_worker: int | None = None) -> "ExecutionPlan":
        return ExecutionPlan(self.n, self.L, self.l, self.k, self.j, workers,
                             self.backends_per_worker if backends_per_worker is None else backends_per_worker,
                             self.dedup)


@dataclass
class PartialSum:
    worker_id: int
    E_local: complex = 0j
    Psi_local: complex = 0j
    tasks_done: int = 0
    busy_time: float = 0.0


@dataclass
class ExecutionStats:
    workers: int
    wall_time: float
    per_worker_busy: list[float]
    circuits_executed: int
    reduction_time: float
    tasks: int = 0

    def to_json(self) -> dict:
        return {
            "workers": self.workers,
            "wall_time": self.wall_time,
            "per_worker_busy": list(self.per_worker_busy),
            "circuits": self.circuits_executed,
            "reduction_time": self.reduction_time,
        }


def strided_assign(task_count: int, workers: int) -> list[np.ndarray]:
    """Task indices owned by each worker under ``i -> i mod workers``."""
    if workers < 1:
        raise ValueError("need at least one worker")
    if task_count < 0:
        raise ValueError("task_count must be non-negative")
    return [np.arange(w, task_count, workers) for w in range(workers)]


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        value = int(env)
        if value < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


# -- task evaluation (runs inside a worker) ---------------------------------

def _pair_weights(coeffs: np.ndarray, l: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.conj(coeffs[l]) * coeffs[k]


def _run_slot(kernel: Kernel, plan_arrays, indices: np.ndarray) -> np.ndarray:
    l_all, k_all, j_all = plan_arrays
    return kernel.evaluate(l_all[indices], k_all[indices], j_all[indices])


def _aggregate(kernel: Kernel, plan_arrays, indices: np.ndarray, values: np.ndarray,
               dedup: bool) -> tuple[complex, complex]:
    l_all, k_all, j_all = plan_arrays
    l, k, j = l_all[indices], k_all[indices], j_all[indices]
    weighted = _pair_weights(kernel.coefficients, l, k) * values
    if dedup:
        off = l != k
        # (k, l) contributes the conjugate of (l, k)
        weighted = np.where(off, 2.0 * weighted.real, weighted)
    den = j < 0
    return complex(np.sum(weighted[~den])), complex(np.sum(weighted[den]))


def _locate_failure(kernel: Kernel, plan_arrays, indices: np.ndarray) -> int:
    for i in indices:
        try:
            _run_slot(kernel, plan_arrays, np.array([i]))
        except Exception:
            return int(i)
    return int(indices[0])


def _worker_body(worker_id: int, kernel: Kernel, plan_arrays, indices: np.ndarray,
                 backends: int, dedup: bool, backend_pool: ThreadPoolExecutor | None) -> PartialSum:
    start = time.perf_counter()
    part = PartialSum(worker_id)
    if indices.size:
        # round-robin over the backend slots; gather back in task order
        slots = [indices[s::backends] for s in range(backends)]
        if backend_pool is not None and backends > 1:
            futures: list[Future] = [backend_pool.submit(_run_slot, kernel, plan_arrays, s) for s in slots]
            results = [f.result() for f in futures]
        else:
            results = [_run_slot(kernel, plan_arrays, s) for s in slots]
        values = np.empty(indices.size, dtype=complex)
        for s, res in enumerate(results):
            values[s::backends] = res
        part.E_local, part.Psi_local = _aggregate(kernel, plan_arrays, indices, values, dedup)
        part.tasks_done = int(indices.size)
    part.busy_time = time.perf_counter() - start
    return part


def _process_worker(worker_id, kernel_spec, plan_arrays, indices, backends, dedup):
    kernel = kernel_spec.build()
    try:
        return _worker_body(worker_id, kernel, plan_arrays, indices, backends, dedup, None)
    except Exception as exc:
        bad = _locate_failure(kernel, plan_arrays, indices)
        return ("error", bad, repr(exc))


class Executor:
    """A reusable worker pool for plan execution.

    Concurrent ``execute`` calls on one executor are serialised.
    """

    def __init__(self, workers: int | None = None, backends_per_worker: int = 1, pool: str = "thread"):
        self.workers = default_workers() if workers is None else int(workers)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if backends_per_worker < 1:
            raise ValueError("backends_per_worker must be >= 1")
        if pool not in ("thread", "process"):
            raise ValueError(f"unknown pool kind {pool!r}")
        self.backends_per_worker = backends_per_worker
        self.pool_kind = pool
        self._lock = threading.Lock()
        self._pool = None
        self._backend_pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        for p in (self._pool, self._backend_pool):
            if p is not None:
                p.shutdown(wait=True)
        self._pool = self._backend_pool = None

    def _ensure_pools(self):
        if self._pool is None and self.workers > 1:
            if self.pool_kind == "process":
                self._pool = ProcessPoolExecutor(self.workers)
            else:
                self._pool = ThreadPoolExecutor(self.workers, thread_name_prefix="dvqls-worker")
        if self._backend_pool is None and self.backends_per_worker > 1 and self.pool_kind == "thread":
            self._backend_pool = ThreadPoolExecutor(self.workers * self.backends_per_worker,
                                                    thread_name_prefix="dvqls-backend")

    def execute(self, plan: ExecutionPlan, kernel_spec: KernelSpec) -> tuple[complex, complex, ExecutionStats]:
        with self._lock:
            return self._execute(plan.with_workers(self.workers, self.backends_per_worker), kernel_spec)

    def _execute(self, plan: ExecutionPlan, kernel_spec: KernelSpec):
        t0 = time.perf_counter()
        W, B = plan.num_workers, plan.backends_per_worker
        if len(plan) == 0:
            return 0j, 0j, ExecutionStats(W, 0.0, [0.0] * W, 0, 0.0, 0)
        arrays = (plan.l, plan.k, plan.j)
        owned = strided_assign(len(plan), W)
        self._ensure_pools()

        if self.pool_kind == "process" and W > 1:
            futures = [self._pool.submit(_process_worker, w, kernel_spec, arrays, owned[w], B, plan.dedup)
                       for w in range(W)]
            partials = []
            for f in futures:
                res = f.result()
                if isinstance(res, tuple):
                    _, bad, msg = res
                    raise TaskError(plan.task(bad), RuntimeError(msg))
                partials.append(res)
        else:
            kernel = kernel_spec.build()
            args = [(w, kernel, arrays, owned[w], B, plan.dedup, self._backend_pool) for w in range(W)]
            futures = [self._pool.submit(_worker_body, *a) for a in args] if W > 1 else []
            partials = []
            for w in range(W):
                try:
                    partials.append(futures[w].result() if futures else _worker_body(*args[w]))
                except Exception as exc:
                    for f in futures[w + 1:]:
                        f.cancel()
                    bad = _locate_failure(kernel, arrays, owned[w])
                    raise TaskError(plan.task(bad), exc) from exc

        t1 = time.perf_counter()
        E, Psi = 0j, 0j
        for part in sorted(partials, key=lambda p: p.worker_id):
            E += part.E_local
            Psi += part.Psi_local
        t2 = time.perf_counter()
        stats = ExecutionStats(
            workers=W,
            wall_time=t2 - t0,
            per_worker_busy=[p.busy_time for p in partials],
            circuits_executed=plan.circuit_count,
            reduction_time=t2 - t1,
            tasks=len(plan),
        )
        return E, Psi, stats


_shared: dict[tuple, Executor] = {}


def shared_executor(workers: int | None = None) -> Executor:
    """Process-wide thread executor keyed by worker count."""
    key = (default_workers() if workers is None else workers,)
    if key not in _shared:
        _shared[key] = Executor(key[0])
    return _shared[key]


def execute_plan(plan: ExecutionPlan, theta, instance, executor: Executor | None = None,
                 method: str = "direct") -> tuple[complex, complex, ExecutionStats]:
    """Run every task of ``plan`` at parameters ``theta``; returns (E, Psi, stats)."""
    from .cost import KernelSpecification

    executor = executor or Executor(plan.num_workers, plan.backends_per_worker)
    spec = KernelSpecification.from_theta(instance, theta, method)
    return executor.execute(plan, spec)


@dataclass
class BenchmarkRow:
    workers: int
    wall_time: float
    speedup: float
    efficiency: float
    cost: float
    circuits: int
    per_worker_busy: list[float] = field(default_factory=list)


def run_scaling_benchmark(instance, theta, worker_counts: Sequence[int], method: str = "hadamard",
                          pool: str = "thread", repeats: int = 1) -> list[BenchmarkRow]:
    """Time one cost evaluation per worker count (best of ``repeats``)."""
    from .cost import evaluate_cost

    if not worker_counts:
        raise ValueError("worker_counts must be non-empty")
    measured = []
    for W in worker_counts:
        with Executor(W, pool=pool) as ex:
            best = None
            for _ in range(max(1, repeats)):
                res = evaluate_cost(instance, theta, ex, method=method)
                if best is None or res.wall_time < best.wall_time:
                    best = res
            measured.append((W, best))
            log.info("W=%d wall=%.4fs cost=%.12g", W, best.wall_time, best.cost)
    base_w, base = min(measured, key=lambda m: m[0])
    rows = []
    for W, res in measured:
        speedup = base.wall_time / res.wall_time if res.wall_time > 0 else float("inf")
        rows.append(BenchmarkRow(W, res.wall_time, speedup, speedup * base_w / W, res.cost,
                                 res.circuit_count, list(res.stats.per_worker_busy)))
    return rows
