"""Integer codes shared between the decision kernels and the engine.

The compiled kernel duplicates these as C constants; the backend parity
tests guard against drift.
"""

# verdicts
V_ALLOW = 0
V_DENY = 1
V_KILL = 2
V_UNCONFINED = 3

# rule tiers, most specific first
T_FILE = 0
T_SUBDIR = 1
T_FS = 2
T_DEV = 3
T_NET = 4
T_IPC = 5
T_CAP = 6

# kernel reason codes
R_EXEMPT = 1
R_DENY_RULE = 2
R_ALLOW_RULE = 3
R_DEFAULT = 4
R_PROC_SELF = 5
R_PROC_FOREIGN = 6
R_OVERLAY = 7
R_BPFFS = 8
R_NET_FAMILY = 9
R_UNIX_IPC = 10

# subject_rel values for procfs/sysfs events
SUBJ_NA = 0
SUBJ_OWN = 1
SUBJ_FOREIGN = 2
