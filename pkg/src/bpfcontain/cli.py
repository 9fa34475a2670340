"""Operator CLI: lint policies, replay traces, explain single decisions.

Exit codes: 0 success, 1 policy parse/validation errors, 2 I/O failures,
3 trace/event format errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .compiler import MAP_CATEGORIES, MapCapacities, compile_policies
from .engine import decide
from .errors import (
    BpfcontainError,
    CompileError,
    PolicyParseError,
    StateError,
    TraceError,
)
from .policy import (
    DEFAULT_POLICY_DIR,
    POLICY_DIR_ENV_VAR,
    load_policy_dir,
    policy_dir_from_env,
    validate_policy_set,
)
from .state import DEFAULT_CONTAINER_CAPACITY, ContainerState
from .trace import (
    DEFAULT_AUDIT_CAPACITY,
    Confine,
    Exit,
    Fork,
    parse_trace,
    parse_trace_object,
    replay,
)

log = logging.getLogger("bpfcontain")

EXIT_OK = 0
EXIT_POLICY = 1
EXIT_IO = 2
EXIT_TRACE = 3

_CAPACITY_TARGETS = MAP_CATEGORIES + ("containers", "audit")


def _parse_capacity(spec: str) -> tuple[str, int]:
    category, sep, value = spec.partition("=")
    if not sep or category not in _CAPACITY_TARGETS or not value.isdigit() or int(value) <= 0:
        raise argparse.ArgumentTypeError(
            f"expected <category>=<n> with category in {', '.join(_CAPACITY_TARGETS)}: {spec!r}")
    return category, int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpfcontain",
        description="Confinement policy engine: lint policies, replay traces, explain decisions.",
    )
    parser.add_argument(
        "--policy-dir",
        help=f"policy directory (default: ${POLICY_DIR_ENV_VAR} or {DEFAULT_POLICY_DIR})",
    )
    parser.add_argument(
        "--capacity", action="append", default=[], type=_parse_capacity,
        metavar="CATEGORY=N", help="override a map capacity (repeatable)",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("lint", help="parse and validate every policy in the policy directory")

    p_run = sub.add_parser("run", help="replay a trace file and report the audit summary")
    p_run.add_argument("--trace", required=True, help="JSONL trace file")
    p_run.add_argument("--audit", help="write the audit log (JSONL) to this path")

    p_explain = sub.add_parser("explain", help="decide one inline event under one policy")
    p_explain.add_argument("--policy", required=True, help="policy name")
    p_explain.add_argument("--event", required=True, help="event as inline JSON")

    return parser


def _capacities(args) -> tuple[MapCapacities, int, int]:
    overrides = dict(args.capacity)
    containers = overrides.pop("containers", DEFAULT_CONTAINER_CAPACITY)
    audit = overrides.pop("audit", DEFAULT_AUDIT_CAPACITY)
    return MapCapacities(**overrides), containers, audit


def _load_policies(policy_dir: str):
    """Parse and cross-validate the policy directory.

    Returns (docs, issues, hard_error); parse failures are reported as
    issue lines with hard_error set.
    """
    try:
        named_docs = load_policy_dir(policy_dir)
    except OSError as exc:
        print(f"error: cannot read policy directory: {exc}", file=sys.stderr)
        return None, [], EXIT_IO
    except PolicyParseError as exc:
        print(f"error: [ParseError] {exc}", file=sys.stderr)
        return None, [], EXIT_POLICY
    docs = [doc for _, doc in named_docs]
    issues = validate_policy_set(docs)
    return docs, issues, EXIT_OK


def cmd_lint(args) -> int:
    policy_dir = policy_dir_from_env(args.policy_dir)
    docs, issues, err = _load_policies(policy_dir)
    if err:
        return err
    for issue in issues:
        print(str(issue))
    errors = sum(1 for i in issues if i.severity == "error")
    warnings = len(issues) - errors
    print(f"{len(docs)} policies, {errors} error(s), {warnings} warning(s)")
    return EXIT_POLICY if errors else EXIT_OK


def _compile_for_run(args):
    policy_dir = policy_dir_from_env(args.policy_dir)
    docs, issues, err = _load_policies(policy_dir)
    if err:
        return None, None, None, err
    errors = [i for i in issues if i.severity == "error"]
    if errors:
        for issue in errors:
            print(str(issue), file=sys.stderr)
        return None, None, None, EXIT_POLICY
    capacities, containers, audit = _capacities(args)
    try:
        store = compile_policies(docs, capacities)
    except CompileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, None, None, EXIT_POLICY
    return store, containers, audit, EXIT_OK


def cmd_run(args) -> int:
    store, containers, audit_capacity, err = _compile_for_run(args)
    if err:
        return err
    try:
        with open(args.trace, "r", encoding="utf-8") as fh:
            events = parse_trace(fh)
    except OSError as exc:
        print(f"error: cannot read trace: {exc}", file=sys.stderr)
        return EXIT_IO
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRACE

    state = ContainerState(store, max_containers=containers)
    _, audit = replay(events, store, state, audit_capacity=audit_capacity)

    if args.audit:
        try:
            with open(args.audit, "w", encoding="utf-8") as fh:
                audit.write(fh)
        except OSError as exc:
            print(f"error: cannot write audit log: {exc}", file=sys.stderr)
            return EXIT_IO

    s = audit.summary()
    line = (f"events={s['events']} allows={s['allows']} denies={s['denies']}"
            f" kills={s['kills']} taints={s['taints']}")
    if s["dropped"]:
        line += f" dropped={s['dropped']}"
    print(line)
    return EXIT_OK


def cmd_explain(args) -> int:
    store, containers, _, err = _compile_for_run(args)
    if err:
        return err
    if store.find_policy(args.policy) is None:
        print(f"error: no loaded policy named {args.policy!r}", file=sys.stderr)
        return EXIT_POLICY
    try:
        obj = json.loads(args.event)
    except json.JSONDecodeError as exc:
        print(f"error: event is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_TRACE
    try:
        te = parse_trace_object(obj, seq=0)
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    event = te.event
    if isinstance(event, (Confine, Fork, Exit)):
        print("error: explain needs a mediated event, not a lifecycle record", file=sys.stderr)
        return EXIT_TRACE

    # a one-container world: confine the event's pid, then judge the event
    state = ContainerState(store, max_containers=containers)
    try:
        state.confine(event.pid, args.policy)
    except StateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POLICY
    try:
        decision = decide(event, state, store)
    except (TypeError, BpfcontainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    print(decision.explain())
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - min(args.verbose, 2) * 10
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "lint":
        return cmd_lint(args)
    if args.command == "run":
        return cmd_run(args)
    return cmd_explain(args)


if __name__ == "__main__":
    sys.exit(main())
