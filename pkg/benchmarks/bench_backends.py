#!/usr/bin/env python3
"""Replay-throughput benchmark: compiled decision kernel vs pure Python.

Replays the same synthetic trace (10 policies, file-heavy event mix, the
workload from the acceptance suite) once per available kernel backend by
swapping the kernel functions in ``bpfcontain.core``, and checks that both
backends produce byte-identical audit output.

    python benchmarks/bench_backends.py [--events N] [--repeat K]
"""

import argparse
import io
import sys
import time
from pathlib import Path

# the workload generator lives with the test corpus
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from bpfcontain import core
from bpfcontain.trace import replay

from corpus import synthetic_workload


def bench_backend(backend, store, events, repeat):
    core.decide_file_access = backend.decide_file_access
    core.decide_socket_op = backend.decide_socket_op
    best = None
    log = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        _, log = replay(events, store)
        elapsed = time.perf_counter() - t0
        best = elapsed if best is None else min(best, elapsed)
    buf = io.StringIO()
    log.write(buf)
    return best, log.summary(), buf.getvalue()


def kernel_workload(store, events):
    """File-decision kernel arguments extracted from the replayed trace."""
    from bpfcontain.events import FileAccess, FsKind
    from bpfcontain.state import ContainerState
    from bpfcontain.trace import Confine, Fork

    state = ContainerState(store)
    calls = []
    for te in events:
        ev = te.event
        if isinstance(ev, Confine):
            try:
                state.confine(ev.pid, ev.policy_name,
                              mount_ns=ev.mount_ns, ipc_ns=ev.ipc_ns)
            except Exception:
                pass
        elif isinstance(ev, Fork):
            try:
                state.on_fork(ev.parent, ev.child)
            except Exception:
                pass
        elif isinstance(ev, FileAccess):
            container = state.lookup(ev.pid)
            if container is None:
                continue
            meta = store.meta(container.policy_id)
            subject_rel = 0
            if ev.fs_kind in (FsKind.PROCFS, FsKind.SYSFS):
                subject_rel = 1 if (ev.proc_subject_pid is not None and
                                    ev.proc_subject_pid in container.pid_set) else 2
            overlay = (ev.fs_kind == FsKind.OVERLAYFS
                       and ev.owner_mount_ns == container.mount_ns)
            file_t, subdir_t, fs_t, dev_t = store.kernel_tables(container.policy_id)
            calls.append((file_t, subdir_t, fs_t, dev_t, meta.default_allow, True,
                          ev.path, int(ev.requested), int(ev.fs_kind),
                          subject_rel, overlay))
    return calls


def bench_kernel(backend, calls, repeat):
    fn = backend.decide_file_access
    best = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        for args in calls:
            fn(*args)
        elapsed = time.perf_counter() - t0
        best = elapsed if best is None else min(best, elapsed)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    store, events = synthetic_workload(args.events)
    backends = core.backends()
    print(f"replaying {args.events:,} events against 10 policies, "
          f"best of {args.repeat} runs\n")
    print(f"{'backend':<10} {'time':>8} {'events/s':>12} {'speedup':>9}")

    results = {}
    baseline = None
    for name in ("python", "cython"):
        if name not in backends:
            print(f"{name:<10} {'(not built)':>8}")
            continue
        best, summary, output = bench_backend(backends[name], store, events, args.repeat)
        results[name] = (best, summary, output)
        if baseline is None:
            baseline = best
        print(f"{name:<10} {best:>7.2f}s {args.events / best:>12,.0f} "
              f"{baseline / best:>8.2f}x")

    # the kernel alone (replay also pays for state tracking and the audit
    # trail, which the extension deliberately does not absorb)
    calls = kernel_workload(store, events)
    print(f"\nfile-decision kernel alone ({len(calls):,} calls):")
    print(f"{'backend':<10} {'time':>8} {'calls/s':>12} {'speedup':>9}")
    baseline = None
    for name in ("python", "cython"):
        if name not in backends:
            continue
        best = bench_kernel(backends[name], calls, args.repeat)
        if baseline is None:
            baseline = best
        print(f"{name:<10} {best:>7.2f}s {len(calls) / best:>12,.0f} "
              f"{baseline / best:>8.2f}x")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        same = py[1] == cy[1] and py[2] == cy[2]
        print(f"\naudit output identical across backends: {'yes' if same else 'NO'}")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
