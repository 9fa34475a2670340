"""Policy documents: the YAML confinement language and its typed rule model.

A policy grants, denies, or taints on access to files, filesystems, devices,
the network, IPC peers, and POSIX capabilities.  Documents default to
default-deny; a policy without taint rules is enforced from the start, one
with taint rules is enforced only after a taint rule first matches.
"""

from __future__ import annotations

import os
import posixpath
from dataclasses import dataclass, field
from enum import IntEnum, IntFlag

import yaml

from .errors import (
    BadAccessFlags,
    BadNetworkCategory,
    EmptyName,
    InvalidPath,
    MalformedRule,
    MalformedYaml,
    MissingField,
    UnknownCapability,
    UnknownRuleKind,
)

DEFAULT_POLICY_DIR = "/var/lib/bpfcontain/policy"
POLICY_DIR_ENV_VAR = "BPFCONTAIN_POLICY_DIR"


class AccessFlags(IntFlag):
    """File-style access flags, written as a string of r/w/a/x characters."""

    READ = 1
    WRITE = 2
    APPEND = 4
    EXECUTE = 8


_FLAG_CHARS = (
    ("r", AccessFlags.READ),
    ("w", AccessFlags.WRITE),
    ("a", AccessFlags.APPEND),
    ("x", AccessFlags.EXECUTE),
)

# Access granted when a file-like rule names no flags.
DEFAULT_ACCESS = AccessFlags.READ | AccessFlags.WRITE


def parse_access(flags: str) -> AccessFlags:
    """Parse a flag string like ``"ra"`` into AccessFlags.

    Unknown characters raise BadAccessFlags; the empty string is rejected.
    """
    if not isinstance(flags, str) or not flags:
        raise BadAccessFlags(str(flags))
    out = AccessFlags(0)
    known = dict(_FLAG_CHARS)
    for ch in flags:
        flag = known.get(ch)
        if flag is None:
            raise BadAccessFlags(flags)
        out |= flag
    return out


_ACCESS_STRINGS = tuple(
    "".join(ch for ch, flag in _FLAG_CHARS if mask & int(flag))
    for mask in range(16)
)


def format_access(mask: int) -> str:
    """Render an access mask in canonical ``rwax`` order."""
    return _ACCESS_STRINGS[int(mask) & 15]


class DeviceKind(IntEnum):
    """Unprivileged character-device classes addressable by device rules."""

    TTY = 0
    RANDOM = 1
    NULL = 2
    ZERO = 3


_DEVICE_NAMES = {kind.name.lower(): kind for kind in DeviceKind}


def format_device(kind: int) -> str:
    return DeviceKind(kind).name.lower()


class NetCategory(IntFlag):
    """Socket-operation groups a network rule can grant."""

    CLIENT = 1
    SERVER = 2
    SEND = 4
    RECEIVE = 8


_NET_NAMES = {cat.name.lower(): cat for cat in NetCategory}

NET_ALL = NetCategory.CLIENT | NetCategory.SERVER | NetCategory.SEND | NetCategory.RECEIVE


_NET_STRINGS = tuple(
    " ".join(c.name.lower() for c in NetCategory if mask & int(c))
    for mask in range(16)
)


def format_net(mask: int) -> str:
    return _NET_STRINGS[int(mask) & 15]


# The Linux capability vocabulary; rule names are validated against it.
CAPABILITIES = frozenset({
    "CAP_AUDIT_CONTROL", "CAP_AUDIT_READ", "CAP_AUDIT_WRITE", "CAP_BLOCK_SUSPEND",
    "CAP_BPF", "CAP_CHECKPOINT_RESTORE", "CAP_CHOWN", "CAP_DAC_OVERRIDE",
    "CAP_DAC_READ_SEARCH", "CAP_FOWNER", "CAP_FSETID", "CAP_IPC_LOCK",
    "CAP_IPC_OWNER", "CAP_KILL", "CAP_LEASE", "CAP_LINUX_IMMUTABLE",
    "CAP_MAC_ADMIN", "CAP_MAC_OVERRIDE", "CAP_MKNOD", "CAP_NET_ADMIN",
    "CAP_NET_BIND_SERVICE", "CAP_NET_BROADCAST", "CAP_NET_RAW", "CAP_PERFMON",
    "CAP_SETFCAP", "CAP_SETGID", "CAP_SETPCAP", "CAP_SETUID", "CAP_SYSLOG",
    "CAP_SYS_ADMIN", "CAP_SYS_BOOT", "CAP_SYS_CHROOT", "CAP_SYS_MODULE",
    "CAP_SYS_NICE", "CAP_SYS_PACCT", "CAP_SYS_PTRACE", "CAP_SYS_RAWIO",
    "CAP_SYS_RESOURCE", "CAP_SYS_TIME", "CAP_SYS_TTY_CONFIG", "CAP_WAKE_ALARM",
})


def normalize_rule_path(path: str) -> str:
    """Lexically normalize an absolute rule path; ``..`` components are rejected."""
    if not isinstance(path, str) or not path:
        raise InvalidPath(str(path), "empty")
    if not path.startswith("/"):
        raise InvalidPath(path, "must be absolute")
    if ".." in path.split("/"):
        raise InvalidPath(path, "'..' components are not allowed in rules")
    norm = posixpath.normpath(path)
    if norm.startswith("//"):  # POSIX preserves a leading double slash
        norm = norm[1:]
    return norm


def normalize_event_path(path: str) -> str:
    """Normalize a trace-supplied path (lexical only, ``..`` resolved in place)."""
    if not path.startswith("/"):
        raise ValueError(f"event path must be absolute: {path!r}")
    norm = posixpath.normpath(path)
    if norm.startswith("//"):
        norm = norm[1:]
    return norm


class DefaultMode(IntEnum):
    DENY = 0
    ALLOW = 1


# --- rules -------------------------------------------------------------------

@dataclass(frozen=True)
class FileRule:
    path: str
    access: AccessFlags


@dataclass(frozen=True)
class SubdirRule:
    path: str
    access: AccessFlags


@dataclass(frozen=True)
class FilesystemRule:
    mountpoint: str
    access: AccessFlags


@dataclass(frozen=True)
class DeviceRule:
    kind: DeviceKind
    access: AccessFlags


@dataclass(frozen=True)
class TtyRule:
    access: AccessFlags


@dataclass(frozen=True)
class NetworkRule:
    categories: NetCategory


@dataclass(frozen=True)
class IpcRule:
    other_policy_name: str


@dataclass(frozen=True)
class CapabilityRule:
    capability_name: str


Rule = (
    FileRule | SubdirRule | FilesystemRule | DeviceRule | TtyRule
    | NetworkRule | IpcRule | CapabilityRule
)


@dataclass
class PolicyDocument:
    """A parsed, normalized policy file."""

    name: str
    entry: str
    entry_args: tuple[str, ...] = ()
    default: DefaultMode = DefaultMode.DENY
    allow: list[Rule] = field(default_factory=list)
    deny: list[Rule] = field(default_factory=list)
    taint: list[Rule] = field(default_factory=list)

    @property
    def tainted_from_start(self) -> bool:
        """A document without taint rules is enforced from its first event."""
        return not self.taint


# --- parsing -----------------------------------------------------------------

_TOP_LEVEL_KEYS = {"name", "entry", "default", "allow", "deny", "taint"}


def _parse_path_and_flags(kind: str, value) -> tuple[str, AccessFlags]:
    if not isinstance(value, str) or not value.strip():
        raise MalformedRule(f"{kind} rule value must be a non-empty string")
    parts = value.split()
    if len(parts) == 1:
        return normalize_rule_path(parts[0]), DEFAULT_ACCESS
    if len(parts) == 2:
        return normalize_rule_path(parts[0]), parse_access(parts[1])
    raise MalformedRule(f"{kind} rule value has too many fields: {value!r}")


def _parse_network_value(value) -> NetCategory:
    if isinstance(value, str):
        names = value.replace(",", " ").split()
    elif isinstance(value, list):
        names = [str(v) for v in value]
    else:
        raise MalformedRule(f"network rule value must be a string or list: {value!r}")
    if not names:
        raise MalformedRule("network rule must name at least one category")
    cats = NetCategory(0)
    for name in names:
        cat = _NET_NAMES.get(name.strip().lower())
        if cat is None:
            raise BadNetworkCategory(name)
        cats |= cat
    return cats


def _parse_capability_value(value) -> str:
    if not isinstance(value, str) or not value.strip():
        raise MalformedRule(f"capability rule value must be a non-empty string: {value!r}")
    name = value.strip().upper()
    if not name.startswith("CAP_"):
        name = "CAP_" + name
    if name not in CAPABILITIES:
        raise UnknownCapability(value)
    return name


def _parse_rule(entry) -> Rule:
    if not isinstance(entry, dict) or len(entry) != 1:
        raise MalformedRule(f"each rule must be a single-key mapping, got {entry!r}")
    (kind, value), = entry.items()
    kind = str(kind).lower()
    if kind == "file":
        path, access = _parse_path_and_flags("file", value)
        return FileRule(path, access)
    if kind == "subdir":
        path, access = _parse_path_and_flags("subdir", value)
        return SubdirRule(path, access)
    if kind in ("filesystem", "fs"):
        mountpoint, access = _parse_path_and_flags("filesystem", value)
        return FilesystemRule(mountpoint, access)
    if kind == "device":
        if not isinstance(value, str) or not value.strip():
            raise MalformedRule(f"device rule value must be a non-empty string: {value!r}")
        parts = value.split()
        dev = _DEVICE_NAMES.get(parts[0].lower())
        if dev is None:
            raise MalformedRule(f"unknown device kind: {parts[0]!r}")
        if len(parts) == 1:
            return DeviceRule(dev, DEFAULT_ACCESS)
        if len(parts) == 2:
            return DeviceRule(dev, parse_access(parts[1]))
        raise MalformedRule(f"device rule value has too many fields: {value!r}")
    if kind == "tty":
        if value is None:
            return TtyRule(DEFAULT_ACCESS)
        if not isinstance(value, str):
            raise BadAccessFlags(str(value))
        return TtyRule(parse_access(value.strip()))
    if kind in ("network", "net"):
        return NetworkRule(_parse_network_value(value))
    if kind == "ipc":
        if not isinstance(value, str) or not value.strip():
            raise MalformedRule(f"ipc rule value must be a policy name: {value!r}")
        return IpcRule(value.strip())
    if kind in ("capability", "cap"):
        return CapabilityRule(_parse_capability_value(value))
    raise UnknownRuleKind(kind)


def _parse_rule_list(doc: dict, key: str) -> list[Rule]:
    raw = doc.get(key)
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise MalformedRule(f"{key!r} must be a list of rules")
    return [_parse_rule(entry) for entry in raw]


def parse_policy(text: str) -> PolicyDocument:
    """Parse one YAML policy document into a normalized PolicyDocument."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MalformedYaml(str(exc)) from exc
    if not isinstance(doc, dict):
        raise MalformedYaml("policy document must be a YAML mapping")

    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise MalformedRule(f"unknown top-level keys: {sorted(unknown)}")

    if "name" not in doc:
        raise MissingField("name")
    name = doc["name"]
    if not isinstance(name, str) or not name.strip():
        raise EmptyName("policy name must be a non-empty string")
    name = name.strip()

    if "entry" not in doc:
        raise MissingField("entry")
    entry_raw = doc["entry"]
    if not isinstance(entry_raw, str) or not entry_raw.strip():
        raise MissingField("entry")
    entry_parts = entry_raw.split()
    entry = normalize_rule_path(entry_parts[0])
    entry_args = tuple(entry_parts[1:])

    default = DefaultMode.DENY
    if "default" in doc:
        mode = str(doc["default"]).strip().lower()
        if mode == "allow":
            default = DefaultMode.ALLOW
        elif mode == "deny":
            default = DefaultMode.DENY
        else:
            raise MalformedRule(f"default must be 'allow' or 'deny', got {doc['default']!r}")

    return PolicyDocument(
        name=name,
        entry=entry,
        entry_args=entry_args,
        default=default,
        allow=_parse_rule_list(doc, "allow"),
        deny=_parse_rule_list(doc, "deny"),
        taint=_parse_rule_list(doc, "taint"),
    )


# --- validation --------------------------------------------------------------

@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    code: str
    policy: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: [{self.code}] {self.policy}: {self.message}"


def validate_policy_set(docs: list[PolicyDocument]) -> list[ValidationIssue]:
    """Cross-document checks; returns issues rather than raising.

    Dangling IPC peers are warnings only — the peer policy may be loaded
    later in a different directory scan.
    """
    issues: list[ValidationIssue] = []
    seen: set[str] = set()
    names = {doc.name for doc in docs}
    for doc in docs:
        if doc.name in seen:
            issues.append(ValidationIssue(
                "error", "DuplicateName", doc.name,
                "policy name is declared by more than one document",
            ))
        seen.add(doc.name)
        for rule_list in (doc.allow, doc.deny, doc.taint):
            for rule in rule_list:
                if isinstance(rule, IpcRule) and rule.other_policy_name not in names:
                    issues.append(ValidationIssue(
                        "warning", "DanglingIpcPeer", doc.name,
                        f"ipc rule references unloaded policy {rule.other_policy_name!r}",
                    ))
        if doc.default == DefaultMode.DENY and not doc.allow:
            issues.append(ValidationIssue(
                "warning", "NoAllowRules", doc.name,
                "default-deny policy grants nothing explicitly",
            ))
    return issues


def policy_dir_from_env(override: str | None = None) -> str:
    """Resolve the policy directory: explicit override > env var > default."""
    if override:
        return override
    return os.environ.get(POLICY_DIR_ENV_VAR) or DEFAULT_POLICY_DIR


def load_policy_dir(path: str) -> list[tuple[str, PolicyDocument]]:
    """Parse every ``*.yml``/``*.yaml`` file under ``path`` (sorted for determinism).

    Returns (filename, document) pairs; parse errors propagate with the
    offending filename attached to the exception message.
    """
    entries = sorted(
        name for name in os.listdir(path)
        if name.endswith((".yml", ".yaml"))
    )
    docs: list[tuple[str, PolicyDocument]] = []
    for name in entries:
        full = os.path.join(path, name)
        with open(full, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            docs.append((name, parse_policy(text)))
        except Exception as exc:
            exc.args = (f"{name}: {exc}",)
            raise
    return docs
