"""Anytime MAPF-LNS engines: sequential, DROP (asynchronous tasks), SYNC and DETA.

All engines share one task function (:func:`destroy_and_repair_task`) and one
rng scheme: task ``serial`` under master ``seed`` always draws from the same
stream, so results do not depend on which worker runs the task.
"""

from __future__ import annotations

import hashlib
import logging
import multiprocessing as mp
import os
import random
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .destroy import (
    HeuristicWeights,
    TabuState,
    destroy,
    select_heuristic,
    update_weight_failure,
    update_weight_success,
)
from .metrics import ImprovementEvent, RunEventLog
from .model import Instance, Solution, validate_solution
from .repair import NoInitialSolution, initial_solution, pp_repair, random_priority_order

log = logging.getLogger(__name__)

clock = time.perf_counter


@dataclass(frozen=True)
class RunParams:
    time_budget: float = 60.0
    neighborhood_size: int = 16
    gamma: float = 0.01
    threads: int = 8
    seed: int = 0
    node_budget: int | None = None
    queue_capacity: int | None = None
    iteration_cap: int | None = None
    restart_limit: int = 50
    backend: str = "thread"
    validate: bool = False

    def __post_init__(self) -> None:
        if self.time_budget <= 0:
            raise ValueError("time budget must be positive")
        if self.neighborhood_size < 1:
            raise ValueError("neighborhood size must be at least 1")
        if self.threads < 1:
            raise ValueError("need at least one worker thread")
        if self.queue_capacity is not None and self.queue_capacity < self.threads:
            raise ValueError("queue capacity must be at least the number of threads")
        if self.backend not in ("thread", "process", "auto"):
            raise ValueError(f"unknown backend {self.backend!r}")

    @property
    def capacity(self) -> int:
        return self.queue_capacity if self.queue_capacity is not None else 2 * self.threads

    def resolved_backend(self) -> str:
        if self.backend != "auto":
            return self.backend
        return "process" if self.threads > 1 and (os.cpu_count() or 1) > 1 else "thread"


@dataclass
class TaskReport:
    serial: int
    heuristic: int
    success: bool
    solution: Solution | None = None
    improvement: int = 0
    result_soc: int | None = None  # soc after splicing, known whenever PP succeeded
    neighborhood: tuple[int, ...] = ()


@dataclass
class RunResult:
    final_solution: Solution | None
    event_log: RunEventLog
    initial_soc: int | None
    termination: str  # "budget" | "iteration_cap" | "no-initial-solution"
    weights: HeuristicWeights | None = None


class EngineError(RuntimeError):
    pass


def task_rng(seed: int, serial: int) -> random.Random:
    return random.Random(f"{seed}/task/{serial}")


def init_rng(seed: int) -> random.Random:
    return random.Random(f"{seed}/init")


def deta_replica_seeds(seed: int, m: int) -> list[int]:
    """Replica 0 keeps the master seed so a single replica equals the sequential run."""
    out = [seed]
    for i in range(1, m):
        digest = hashlib.blake2b(f"{seed}/replica/{i}".encode(), digest_size=6).digest()
        out.append(int.from_bytes(digest, "big"))
    return out


def destroy_and_repair_task(
    solution: Solution,
    weights: HeuristicWeights,
    instance: Instance,
    params: RunParams,
    rng: random.Random,
    tabu: TabuState | None = None,
    serial: int = 0,
) -> TaskReport:
    """One destroy/repair pair on a private snapshot; succeeds only on strict improvement."""
    h = select_heuristic(weights, rng)
    hood = destroy(h, instance, solution, params.neighborhood_size, rng, tabu)
    members = set(hood.agents)
    old_cost = solution.cost_of(hood.agents)
    fixed = {i: p for i, p in enumerate(solution.paths) if i not in members}
    order = random_priority_order(hood.agents, rng)
    outcome = pp_repair(instance, fixed, order, params.node_budget)
    if not outcome.success:
        return TaskReport(serial, h, False, neighborhood=hood.agents)
    new_cost = sum(len(p) - 1 for p in outcome.new_paths.values())
    result_soc = solution.soc - old_cost + new_cost
    if new_cost >= old_cost:
        return TaskReport(serial, h, False, result_soc=result_soc, neighborhood=hood.agents)
    new = solution.splice(outcome.new_paths, serial=serial)
    return TaskReport(serial, h, True, new, old_cost - new_cost, new.soc, hood.agents)


TaskFn = Callable[..., TaskReport]


class _Worker:
    """Private worker state: rng stream seed and agent-based tabu set."""

    def __init__(self, instance: Instance, params: RunParams, seed: int, task: TaskFn):
        self.instance = instance
        self.params = params
        self.seed = seed
        self.task = task
        self.tabu = TabuState()

    def run(self, solution: Solution, weights: HeuristicWeights, serial: int) -> TaskReport:
        rng = task_rng(self.seed, serial)
        return self.task(solution, weights, self.instance, self.params, rng, self.tabu, serial)

    def close(self) -> None:
        pass


def _child_loop(conn, instance: Instance, params: RunParams, seed: int, task: TaskFn) -> None:
    worker = _Worker(instance, params, seed, task)
    while True:
        msg = conn.recv()
        if msg is None:
            break
        try:
            conn.send(("ok", worker.run(*msg)))
        except BaseException as e:  # forwarded to the owning thread
            conn.send(("err", repr(e)))
    conn.close()


class _ProcessWorker:
    """Runs tasks in a dedicated child process; the calling thread blocks on the pipe."""

    def __init__(self, instance: Instance, params: RunParams, seed: int, task: TaskFn):
        ctx = mp.get_context("fork")
        self.conn, child = ctx.Pipe()
        self.proc = ctx.Process(
            target=_child_loop, args=(child, instance, params, seed, task), daemon=True
        )
        self.proc.start()
        child.close()

    def run(self, solution: Solution, weights: HeuristicWeights, serial: int) -> TaskReport:
        self.conn.send((solution, weights, serial))
        status, payload = self.conn.recv()
        if status != "ok":
            raise EngineError(f"worker process failed: {payload}")
        return payload

    def close(self) -> None:
        try:
            self.conn.send(None)
        except (BrokenPipeError, OSError):
            pass
        self.proc.join(timeout=5)
        if self.proc.is_alive():
            self.proc.terminate()
        self.conn.close()


@contextmanager
def _workers(instance: Instance, params: RunParams, seeds: list[int], task: TaskFn) -> Iterator[list]:
    instance.distance_fields  # compute before any fork
    if params.resolved_backend() == "process":
        made = [_ProcessWorker(instance, params, s, task) for s in seeds]
    else:
        made = [_Worker(instance, params, s, task) for s in seeds]
    try:
        yield made
    finally:
        for w in made:
            w.close()


class TaskQueue:
    """Bounded FIFO of task serials guarded by its own lock (the task mutex)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.lock = threading.Lock()
        self.changed = threading.Condition(self.lock)
        self.items: deque[int] = deque()
        self.producer_done = False
        self.stopped = False

    def __len__(self) -> int:
        return len(self.items)

    def full(self) -> bool:
        return len(self.items) >= self.capacity


@dataclass
class SharedSearchState:
    best: Solution
    weights: HeuristicWeights
    queue: TaskQueue
    main_lock: threading.Lock = field(default_factory=threading.Lock)
    stop_flag: bool = False


class _Recorder:
    """Event-log bookkeeping; callers hold the main lock when installing."""

    def __init__(self, instance: Instance, params: RunParams, start: float, initial: Solution):
        self.instance = instance
        self.validate = params.validate
        self.start = start
        self.deadline = start + params.time_budget
        self.log = RunEventLog(budget=params.time_budget)
        self.npo = 0
        self.dropped = 0
        self.install(initial)

    def install(self, sol: Solution) -> None:
        if self.validate:
            report = validate_solution(self.instance, sol)
            if report:
                raise EngineError(f"infeasible solution from task {sol.serial}: {report}")
        self.log.improvements.append(
            ImprovementEvent(
                clock() - self.start,
                sol.soc,
                sol.soc - self.instance.lower_bound,
                sol.serial,
                sol.parent,
                sol.depth,
                sol,
            )
        )

    def expired(self, now: float | None = None) -> bool:
        return (clock() if now is None else now) > self.deadline

    def finish(self, best: Solution, per_thread: list[int] | None = None) -> RunEventLog:
        self.log.npo_total = self.npo
        self.log.dp = best.depth
        self.log.dropped_tasks = self.dropped
        self.log.per_thread_npo = per_thread
        return self.log


def _start_run(instance: Instance, params: RunParams, initial: Solution | None):
    start = clock()
    if initial is None:
        initial = initial_solution(
            instance, init_rng(params.seed), params.restart_limit, params.node_budget
        )
    return start, initial


def _no_initial(params: RunParams) -> RunResult:
    return RunResult(None, RunEventLog(budget=params.time_budget), None, "no-initial-solution")


def _cap_reached(params: RunParams, done: int) -> bool:
    return params.iteration_cap is not None and done >= params.iteration_cap


@dataclass
class _LoopOutcome:
    best: Solution
    weights: HeuristicWeights
    recorder: _Recorder
    termination: str


def _lns_loop(
    instance: Instance,
    params: RunParams,
    worker,
    initial: Solution,
    start: float,
) -> _LoopOutcome:
    best = initial
    weights = HeuristicWeights(gamma=params.gamma)
    rec = _Recorder(instance, params, start, initial)
    serial = 0
    termination = "budget"
    while True:
        if _cap_reached(params, serial):
            termination = "iteration_cap"
            break
        if rec.expired():
            break
        report = worker.run(best, weights, serial)
        serial += 1
        if rec.expired():
            rec.dropped += 1
            break
        rec.npo += 1
        if report.success:
            weights = update_weight_success(weights, report.heuristic, report.improvement)
            best = report.solution
            rec.install(best)
        else:
            weights = update_weight_failure(weights, report.heuristic)
    return _LoopOutcome(best, weights, rec, termination)


def run_sequential_lns(
    instance: Instance,
    params: RunParams,
    *,
    initial: Solution | None = None,
    task: TaskFn = destroy_and_repair_task,
) -> RunResult:
    """Single-threaded MAPF-LNS; ``threads`` is ignored."""
    try:
        start, initial = _start_run(instance, params, initial)
    except NoInitialSolution:
        return _no_initial(params)
    worker = _Worker(instance, params, params.seed, task)
    out = _lns_loop(instance, params, worker, initial, start)
    return RunResult(
        out.best, out.recorder.finish(out.best), initial.soc, out.termination, out.weights
    )


def _drop_worker(state: SharedSearchState, worker, rec: _Recorder, errors: list) -> None:
    q = state.queue
    try:
        while True:
            with q.changed:
                while not q.items and not q.stopped and not q.producer_done:
                    q.changed.wait()
                if q.stopped or not q.items:
                    return
                serial = q.items.popleft()
                q.changed.notify_all()
            with state.main_lock:
                snapshot, weights = state.best, state.weights
            report = worker.run(snapshot, weights, serial)
            with state.main_lock:
                if rec.expired():
                    rec.dropped += 1
                    continue
                rec.npo += 1
                if report.success:
                    state.weights = update_weight_success(
                        state.weights, report.heuristic, report.improvement
                    )
                    if report.solution.soc < state.best.soc:
                        state.best = report.solution
                        rec.install(state.best)
                else:
                    state.weights = update_weight_failure(state.weights, report.heuristic)
    except BaseException as e:
        errors.append(e)
        with q.changed:
            q.stopped = True
            q.changed.notify_all()


def run_drop_lns(
    instance: Instance,
    params: RunParams,
    *,
    initial: Solution | None = None,
    task: TaskFn = destroy_and_repair_task,
) -> RunResult:
    """Destroy-repair operation parallelism.

    The main thread keeps a bounded queue of task serials full; each of the m
    workers pops a serial, snapshots the best solution and weights under the
    main lock, runs the task unlocked, then updates weights and installs its
    result under the main lock if it beats the current best. The two locks are
    never held together.
    """
    m = params.threads
    with _workers(instance, params, [params.seed] * m, task) as workers:
        try:
            start, initial = _start_run(instance, params, initial)
        except NoInitialSolution:
            return _no_initial(params)
        rec = _Recorder(instance, params, start, initial)
        q = TaskQueue(params.capacity)
        state = SharedSearchState(initial, HeuristicWeights(gamma=params.gamma), q)
        errors: list[BaseException] = []
        threads = [
            threading.Thread(target=_drop_worker, args=(state, w, rec, errors), daemon=True)
            for w in workers
        ]
        for t in threads:
            t.start()

        issued = 0
        termination = "budget"
        while True:
            with q.changed:
                if q.stopped:
                    break
                if rec.expired():
                    q.stopped = True
                    q.items.clear()
                    q.changed.notify_all()
                    break
                if not q.producer_done:
                    while not q.full() and not _cap_reached(params, issued):
                        q.items.append(issued)
                        issued += 1
                    if _cap_reached(params, issued):
                        q.producer_done = True
                    q.changed.notify_all()
                if q.producer_done and not q.items and not any(t.is_alive() for t in threads):
                    break
                q.changed.wait(timeout=min(0.05, max(0.0, rec.deadline - clock())))
        for t in threads:
            t.join()
        if errors:
            raise EngineError("worker thread failed") from errors[0]
        if q.producer_done and not rec.expired():
            termination = "iteration_cap"
        with state.main_lock:
            best = state.best
            weights = state.weights
    return RunResult(best, rec.finish(best), initial.soc, termination, weights)


def _pick_winner(reports: list[TaskReport]) -> TaskReport:
    wins = [r for r in reports if r.success]
    if wins:
        return min(wins, key=lambda r: r.solution.soc)
    scored = [r for r in reports if r.result_soc is not None]
    if scored:
        return min(scored, key=lambda r: r.result_soc)
    return reports[0]


def run_sync_lns(
    instance: Instance,
    params: RunParams,
    *,
    initial: Solution | None = None,
    task: TaskFn = destroy_and_repair_task,
) -> RunResult:
    """Barrier-synchronised parallel LNS.

    Every iteration runs m tasks from the same snapshot; the lowest-SOC result
    decides the single weight update and is installed if it improves. With an
    iteration cap, the cap counts barrier iterations.
    """
    m = params.threads
    with _workers(instance, params, [params.seed] * m, task) as workers:
        try:
            start, initial = _start_run(instance, params, initial)
        except NoInitialSolution:
            return _no_initial(params)
        rec = _Recorder(instance, params, start, initial)
        best = initial
        weights = HeuristicWeights(gamma=params.gamma)
        termination = "budget"
        it = 0
        pool = ThreadPoolExecutor(max_workers=m) if m > 1 else None
        try:
            while True:
                if _cap_reached(params, it):
                    termination = "iteration_cap"
                    break
                if rec.expired():
                    break
                snapshot, snap_w = best, weights
                serials = [it * m + i for i in range(m)]
                if pool is None:
                    reports = [workers[0].run(snapshot, snap_w, serials[0])]
                else:
                    futures = [
                        pool.submit(w.run, snapshot, snap_w, s) for w, s in zip(workers, serials)
                    ]
                    reports = [f.result() for f in futures]
                it += 1
                if rec.expired():
                    rec.dropped += m
                    break
                rec.npo += m
                win = _pick_winner(reports)
                if win.success and win.solution.soc < best.soc:
                    weights = update_weight_success(weights, win.heuristic, best.soc - win.solution.soc)
                    best = win.solution
                    rec.install(best)
                else:
                    weights = update_weight_failure(weights, win.heuristic)
        finally:
            if pool is not None:
                pool.shutdown(wait=True)
    return RunResult(best, rec.finish(best), initial.soc, termination, weights)


def run_deta_lns(
    instance: Instance,
    params: RunParams,
    *,
    initial: Solution | None = None,
    task: TaskFn = destroy_and_repair_task,
) -> RunResult:
    """m detached sequential LNS replicas from one shared initial solution.

    Replica i draws from ``deta_replica_seeds(seed, m)[i]``. The returned log is
    the winning replica's trajectory; NPO* sums all replicas.
    """
    m = params.threads
    seeds = deta_replica_seeds(params.seed, m)
    with _workers(instance, params, seeds, task) as workers:
        try:
            start, initial = _start_run(instance, params, initial)
        except NoInitialSolution:
            return _no_initial(params)
        outcomes: list[_LoopOutcome | None] = [None] * m
        errors: list[BaseException] = []

        def replica(i: int) -> None:
            try:
                outcomes[i] = _lns_loop(instance, params, workers[i], initial, start)
            except BaseException as e:
                errors.append(e)

        if m == 1:
            replica(0)
        else:
            threads = [threading.Thread(target=replica, args=(i,), daemon=True) for i in range(m)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        if errors:
            raise EngineError("replica failed") from errors[0]
    win = min(range(m), key=lambda i: (outcomes[i].best.soc, i))
    out = outcomes[win]
    per_thread = [o.recorder.npo for o in outcomes]
    log_ = out.recorder.finish(out.best, per_thread)
    log_.npo_total = sum(per_thread)
    log_.dropped_tasks = sum(o.recorder.dropped for o in outcomes)
    return RunResult(out.best, log_, initial.soc, out.termination, out.weights)


ENGINES = {
    "sequential": run_sequential_lns,
    "drop": run_drop_lns,
    "sync": run_sync_lns,
    "deta": run_deta_lns,
}
