import sys
from pathlib import Path

import pytest

# make tests/oracle.py and tests/corpus.py importable as plain modules
sys.path.insert(0, str(Path(__file__).parent))

from bpfcontain.compiler import compile_policies
from bpfcontain.policy import parse_policy
from bpfcontain.state import ContainerState

# the two policies every example in the language description builds on
MINIMAL_POLICY = """\
name: hello_minimal
entry: /usr/bin/hello.static
allow:
  # Grant read and write access to
  # /dev/tty* and /dev/pts/* devices
  - tty: rw
"""

TAINT_POLICY = """\
name: hello_taint
entry: /usr/bin/hello.dynamic
allow:
  # Grant read and write access to
  # /dev/tty* and /dev/pts/* devices
  - tty: rw
taint:
  # Taint after reading from
  # /dev/tty* or /dev/pts/* devices
  - tty: r
"""


@pytest.fixture
def example_docs():
    return [parse_policy(MINIMAL_POLICY), parse_policy(TAINT_POLICY)]


@pytest.fixture
def example_store(example_docs):
    return compile_policies(example_docs)


@pytest.fixture
def example_state(example_store):
    return ContainerState(example_store)


@pytest.fixture
def policy_dir(tmp_path):
    (tmp_path / "hello_minimal.yml").write_text(MINIMAL_POLICY)
    (tmp_path / "hello_taint.yml").write_text(TAINT_POLICY)
    return tmp_path
