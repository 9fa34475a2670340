"""Container and process lifecycle tracking.

The analog of the processes and containers maps plus the scheduler
fork/exit probes and the confine call: containers are created by confine,
grow and shrink with fork/exit, and disappear when their refcount hits
zero.  Mutations are serialized per engine instance (single writer).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .compiler import CompiledPolicyStore
from .errors import (
    AlreadyConfined,
    ContainerTableFull,
    DuplicatePid,
    UnknownContainer,
    UnknownPolicy,
)

DEFAULT_CONTAINER_CAPACITY = 1024


# refcount is tracked separately from pid_set on purpose: the modeled system
# keeps a counter in one map and memberships in another, and the invariant
# refcount == len(pid_set) is checked by tests rather than true by construction.
@dataclass
class Container:
    container_id: int
    policy_id: int
    tainted: bool
    refcount: int = 0
    mount_ns: int = 0
    ipc_ns: int = 0
    pid_set: set[int] = field(default_factory=set)


class ContainerState:
    """Mutable runtime state: which pids belong to which containers.

    Container ids are a monotonically increasing 64-bit counter, never
    recycled within a run.  The containers table has a fixed capacity;
    confine fails rather than evicting when it is full.
    """

    def __init__(self, store: CompiledPolicyStore,
                 max_containers: int = DEFAULT_CONTAINER_CAPACITY):
        if max_containers <= 0:
            raise ValueError("max_containers must be positive")
        self.store = store
        self.max_containers = max_containers
        self.containers: dict[int, Container] = {}
        self.processes: dict[int, int] = {}  # pid -> container_id
        self._ids = itertools.count(1)

    def lookup(self, pid: int) -> Container | None:
        cid = self.processes.get(pid)
        return self.containers[cid] if cid is not None else None

    def confine(self, pid: int, policy_name: str,
                mount_ns: int = 0, ipc_ns: int = 0) -> Container:
        """Place pid into a fresh container running under policy_name.

        Re-confinement is refused outright: allowing it would let a confined
        process swap itself under a weaker policy.
        """
        if pid in self.processes:
            raise AlreadyConfined(pid)
        policy = self.store.find_policy(policy_name)
        if policy is None:
            raise UnknownPolicy(policy_name)
        if len(self.containers) >= self.max_containers:
            raise ContainerTableFull(self.max_containers)
        meta = self.store.meta(policy)
        container = Container(
            container_id=next(self._ids),
            policy_id=policy,
            tainted=meta.tainted_from_start,
            refcount=1,
            mount_ns=mount_ns,
            ipc_ns=ipc_ns,
            pid_set={pid},
        )
        self.containers[container.container_id] = container
        self.processes[pid] = container.container_id
        return container

    def on_fork(self, parent_pid: int, child_pid: int) -> Container | None:
        """Child joins the parent's container; forks by unconfined pids are ignored."""
        if child_pid in self.processes:
            raise DuplicatePid(child_pid)
        cid = self.processes.get(parent_pid)
        if cid is None:
            return None
        container = self.containers[cid]
        container.pid_set.add(child_pid)
        container.refcount += 1
        self.processes[child_pid] = cid
        return container

    def on_exit(self, pid: int) -> Container | None:
        """Drop pid; returns the container if this exit removed it, else None."""
        cid = self.processes.pop(pid, None)
        if cid is None:
            return None
        container = self.containers[cid]
        container.pid_set.discard(pid)
        container.refcount -= 1
        if container.refcount <= 0:
            del self.containers[cid]
            return container
        return None

    def taint(self, container_id: int) -> Container:
        """One-way: tainted never reverts.  Idempotent."""
        container = self.containers.get(container_id)
        if container is None:
            raise UnknownContainer(container_id)
        container.tainted = True
        return container
