"""The compiled kernel and the pure-Python kernel must agree tuple-for-tuple."""

import itertools
import random

import pytest

from bpfcontain import core
from bpfcontain.events import FileAccess, FsKind, SocketOp
from bpfcontain.trace import replay

from corpus import EVENTS, build_world, enumerate_policies

BACKENDS = core.backends()

pytestmark = pytest.mark.skipif(
    len(BACKENDS) < 2, reason="compiled kernel not built; nothing to compare")


def _file_args(store, container, meta, event, tainted):
    if event.fs_kind in (FsKind.PROCFS, FsKind.SYSFS):
        subject_rel = 1 if (event.proc_subject_pid is not None
                            and event.proc_subject_pid in container.pid_set) else 2
    else:
        subject_rel = 0
    overlay_owned = (event.fs_kind == FsKind.OVERLAYFS
                     and event.owner_mount_ns is not None
                     and event.owner_mount_ns == container.mount_ns)
    file_t, subdir_t, fs_t, dev_t = store.kernel_tables(container.policy_id)
    return (file_t, subdir_t, fs_t, dev_t, meta.default_allow, tainted,
            event.path, int(event.requested), int(event.fs_kind),
            subject_rel, overlay_owned)


def _socket_args(store, container, meta, event, tainted):
    allow, deny, taint = store.network_entry(container.policy_id)
    return (allow, deny, taint, meta.default_allow, tainted,
            int(event.family), int(event.op))


def test_kernel_parity_over_corpus():
    py = BACKENDS["python"]
    cy = BACKENDS["cython"]
    file_events = [e for e in EVENTS if isinstance(e, FileAccess)]
    socket_events = [e for e in EVENTS if isinstance(e, SocketOp)]
    corpus = itertools.islice(enumerate_policies(), 0, None, 23)
    for doc in corpus:
        store, state, container, _, _ = build_world(doc)
        meta = store.meta(container.policy_id)
        for tainted in (container.tainted, True):
            for ev in file_events:
                args = _file_args(store, container, meta, ev, tainted)
                assert py.decide_file_access(*args) == cy.decide_file_access(*args), (doc, ev)
            for ev in socket_events:
                args = _socket_args(store, container, meta, ev, tainted)
                assert py.decide_socket_op(*args) == cy.decide_socket_op(*args), (doc, ev)


def test_classify_device_parity():
    py = BACKENDS["python"]
    cy = BACKENDS["cython"]
    paths = [
        "/dev/null", "/dev/zero", "/dev/random", "/dev/urandom",
        "/dev/tty", "/dev/tty0", "/dev/ttyS1", "/dev/pts/0", "/dev/pts/12",
        "/dev/ptsx", "/dev/nullx", "/dev/sda", "/etc/passwd", "/", "/dev",
    ]
    for p in paths:
        assert py.classify_device(p) == cy.classify_device(p), p


def test_kernel_parity_fuzz():
    py = BACKENDS["python"]
    cy = BACKENDS["cython"]
    rng = random.Random(0xFADE)
    comps = ["a", "b", "tree", "dev", "tty", "pts", "x1"]

    def rand_path(depth):
        return "/" + "/".join(rng.choice(comps) for _ in range(depth))

    def rand_table(n, keys):
        if n == 0 and rng.random() < 0.3:
            return None
        return {k: (rng.randrange(16), rng.randrange(16), rng.randrange(16))
                for k in rng.sample(keys, min(n, len(keys)))}

    for _ in range(4000):
        paths = [rand_path(rng.randint(1, 12)) for _ in range(6)]
        file_t = rand_table(rng.randint(0, 3), paths)
        subdir_t = rand_table(rng.randint(0, 3), paths)
        fs_t = rand_table(rng.randint(0, 2), ["/"] + paths)
        dev_t = rand_table(rng.randint(0, 2), [0, 1, 2, 3])
        args = (
            file_t, subdir_t, fs_t, dev_t,
            rng.random() < 0.5, rng.random() < 0.5,
            rng.choice(paths + ["/dev/tty", "/dev/null"]),
            rng.randrange(1, 16), rng.choice([0, 0, 0, 1, 2, 3, 4]),
            rng.choice([0, 1, 2]), rng.random() < 0.3,
        )
        assert py.decide_file_access(*args) == cy.decide_file_access(*args), args

    for _ in range(2000):
        args = (rng.randrange(16), rng.randrange(16), rng.randrange(16),
                rng.random() < 0.5, rng.random() < 0.5,
                rng.randrange(4), rng.randrange(8))
        assert py.decide_socket_op(*args) == cy.decide_socket_op(*args), args


def test_replay_identical_across_backends(monkeypatch, example_store):
    """End to end: swapping the kernel must not change a single audit byte."""
    import io

    from bpfcontain.trace import TraceEvent, Confine
    from bpfcontain.policy import parse_access

    events = [TraceEvent(1, Confine(1, "hello_taint"))]
    events += [
        TraceEvent(i + 2, FileAccess(1, p, parse_access(f)))
        for i, (p, f) in enumerate([
            ("/dev/tty", "r"), ("/etc/passwd", "r"), ("/dev/tty", "rw"),
            ("/dev/urandom", "r"), ("/var/log/x", "w"),
        ])
    ]
    outputs = {}
    for name, backend in BACKENDS.items():
        monkeypatch.setattr(core, "decide_file_access", backend.decide_file_access)
        monkeypatch.setattr(core, "decide_socket_op", backend.decide_socket_op)
        _, log = replay(events, example_store)
        buf = io.StringIO()
        log.write(buf)
        outputs[name] = buf.getvalue()
    assert outputs["python"] == outputs["cython"]
