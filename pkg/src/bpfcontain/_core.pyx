# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled decision kernel: the file-access and socket-op hot paths.

Behavioral twin of ``_core_py``; keep the two in lockstep (the backend
parity tests compare them tuple-for-tuple).  Constants are duplicated here
as C ints on purpose — drift shows up as a parity failure, not a skew in
one backend only.
"""

BACKEND = "cython"

# verdicts
cdef int V_ALLOW = 0
cdef int V_DENY = 1

# tiers
cdef int T_FILE = 0
cdef int T_SUBDIR = 1
cdef int T_FS = 2
cdef int T_DEV = 3
cdef int T_NET = 4

# reasons
cdef int R_EXEMPT = 1
cdef int R_DENY_RULE = 2
cdef int R_ALLOW_RULE = 3
cdef int R_DEFAULT = 4
cdef int R_PROC_SELF = 5
cdef int R_PROC_FOREIGN = 6
cdef int R_OVERLAY = 7
cdef int R_BPFFS = 8
cdef int R_NET_FAMILY = 9
cdef int R_UNIX_IPC = 10

# subject_rel
cdef int SUBJ_OWN = 1
cdef int SUBJ_FOREIGN = 2

# fs kinds
cdef int _PROCFS = 1
cdef int _SYSFS = 2
cdef int _OVERLAYFS = 3
cdef int _BPFFS = 4

cdef int _WRITE_OR_APPEND = 2 | 4

# device kinds
cdef int _DEV_TTY = 0
cdef int _DEV_RANDOM = 1
cdef int _DEV_NULL = 2
cdef int _DEV_ZERO = 3

# socket families / ops
cdef int _FAM_UNIX = 2
cdef int _FAM_OTHER = 3
cdef int _OP_CREATE = 0
cdef int _NET_ALL = 15

cdef int _SUBDIR_REACH = 9

cdef tuple _OP_CATS = (15, 2, 2, 2, 1, 4, 8, 2)


cpdef int classify_device(str path):
    """Map a /dev path onto a device-rule kind, or -1 if it is none of them."""
    if path == "/dev/null":
        return _DEV_NULL
    if path == "/dev/zero":
        return _DEV_ZERO
    if path == "/dev/random" or path == "/dev/urandom":
        return _DEV_RANDOM
    if path.startswith("/dev/tty") or path.startswith("/dev/pts/"):
        return _DEV_TTY
    return -1


def decide_file_access(dict file_t, dict subdir_t, dict fs_t, dict dev_t,
                       bint default_allow, bint tainted,
                       str path, int requested, int fs_kind,
                       int subject_rel, bint overlay_owned):
    """Stages 3-8 of the pipeline for one file access."""
    cdef tuple file_hit = None
    cdef tuple fs_hit = None
    cdef tuple entry
    cdef list subdir_hits = None
    cdef str fs_key = None
    cdef str anc
    cdef int depth, cut, dev_key
    cdef int granted
    cdef bint need_fs, need_subdir, foreign
    cdef int implicit_allow
    cdef tuple taint_detail = None
    cdef tuple detail = None
    cdef object hit

    if fs_kind == _BPFFS and requested & _WRITE_OR_APPEND:
        return (V_DENY, R_BPFFS, None, None)

    if file_t is not None:
        hit = file_t.get(path)
        if hit is not None:
            file_hit = <tuple> hit

    if fs_t is not None:
        hit = fs_t.get(path)
        if hit is not None:
            fs_hit = <tuple> hit
            fs_key = path
    need_fs = fs_t is not None and fs_hit is None
    need_subdir = subdir_t is not None
    if need_fs or need_subdir:
        anc = path
        depth = 0
        while anc != "/" and (need_fs or (need_subdir and depth < _SUBDIR_REACH)):
            cut = anc.rfind("/")
            anc = anc[:cut] if cut > 0 else "/"
            depth += 1
            if need_subdir and depth <= _SUBDIR_REACH:
                hit = subdir_t.get(anc)
                if hit is not None:
                    if subdir_hits is None:
                        subdir_hits = []
                    subdir_hits.append((anc, <tuple> hit))
            if need_fs:
                hit = fs_t.get(anc)
                if hit is not None:
                    fs_hit = <tuple> hit
                    fs_key = anc
                    need_fs = False

    dev_key = -1
    cdef tuple dev_hit = None
    if dev_t is not None:
        dev_key = classify_device(path)
        if dev_key >= 0:
            hit = dev_t.get(dev_key)
            if hit is not None:
                dev_hit = <tuple> hit

    implicit_allow = 0
    foreign = False
    if fs_kind == _PROCFS or fs_kind == _SYSFS:
        if subject_rel == SUBJ_OWN:
            implicit_allow = 1
        elif subject_rel == SUBJ_FOREIGN:
            foreign = True
    elif fs_kind == _OVERLAYFS and overlay_owned:
        implicit_allow = 2

    if foreign:
        granted = 0
        if file_hit is not None and <int> file_hit[0]:
            granted = <int> file_hit[0]
        elif subdir_hits is not None:
            for anc, entry in subdir_hits:
                if <int> entry[0]:
                    granted = <int> entry[0]
                    break
        if requested & ~granted:
            return (V_DENY, R_PROC_FOREIGN, None, None)

    if not tainted:
        if file_hit is not None and (<int> file_hit[2]) & requested:
            taint_detail = (T_FILE, path, (<int> file_hit[2]) & requested)
        if taint_detail is None and subdir_hits is not None:
            for anc, entry in subdir_hits:
                if (<int> entry[2]) & requested:
                    taint_detail = (T_SUBDIR, anc, (<int> entry[2]) & requested)
                    break
        if taint_detail is None and fs_hit is not None and (<int> fs_hit[2]) & requested:
            taint_detail = (T_FS, fs_key, (<int> fs_hit[2]) & requested)
        if taint_detail is None and dev_hit is not None and (<int> dev_hit[2]) & requested:
            taint_detail = (T_DEV, dev_key, (<int> dev_hit[2]) & requested)
        if taint_detail is None:
            return (V_ALLOW, R_EXEMPT, None, None)

    if file_hit is not None and (<int> file_hit[1]) & requested:
        return (V_DENY, R_DENY_RULE,
                (T_FILE, path, (<int> file_hit[1]) & requested), taint_detail)
    if subdir_hits is not None:
        for anc, entry in subdir_hits:
            if (<int> entry[1]) & requested:
                return (V_DENY, R_DENY_RULE,
                        (T_SUBDIR, anc, (<int> entry[1]) & requested), taint_detail)
    if fs_hit is not None and (<int> fs_hit[1]) & requested:
        return (V_DENY, R_DENY_RULE,
                (T_FS, fs_key, (<int> fs_hit[1]) & requested), taint_detail)
    if dev_hit is not None and (<int> dev_hit[1]) & requested:
        return (V_DENY, R_DENY_RULE,
                (T_DEV, dev_key, (<int> dev_hit[1]) & requested), taint_detail)

    if implicit_allow == 1:
        return (V_ALLOW, R_PROC_SELF, None, taint_detail)
    if implicit_allow == 2:
        return (V_ALLOW, R_OVERLAY, None, taint_detail)

    granted = 0
    detail = None
    if file_hit is not None and <int> file_hit[0]:
        granted = <int> file_hit[0]
        detail = (T_FILE, path, granted)
    elif subdir_hits is not None:
        for anc, entry in subdir_hits:
            if <int> entry[0]:
                granted = <int> entry[0]
                detail = (T_SUBDIR, anc, granted)
                break
    if detail is None and granted == 0:
        if not foreign and fs_hit is not None and <int> fs_hit[0]:
            granted = <int> fs_hit[0]
            detail = (T_FS, fs_key, granted)
        elif not foreign and dev_hit is not None and <int> dev_hit[0]:
            granted = <int> dev_hit[0]
            detail = (T_DEV, dev_key, granted)

    if granted and not (requested & ~granted):
        return (V_ALLOW, R_ALLOW_RULE, detail, taint_detail)
    if foreign:
        return (V_DENY, R_PROC_FOREIGN, None, taint_detail)
    if default_allow:
        return (V_ALLOW, R_DEFAULT, None, taint_detail)
    return (V_DENY, R_DEFAULT, None, taint_detail)


def decide_socket_op(int allow_cats, int deny_cats, int taint_cats,
                     bint default_allow, bint tainted, int family, int op):
    """Socket-operation decision over the policy's network category masks."""
    cdef int opcats
    cdef tuple taint_detail = None

    if family == _FAM_UNIX:
        return (V_ALLOW, R_UNIX_IPC, None, None)
    if family == _FAM_OTHER:
        if not tainted:
            return (V_ALLOW, R_EXEMPT, None, None)
        return (V_DENY, R_NET_FAMILY, None, None)

    opcats = <int> _OP_CATS[op]
    if not tainted:
        if op != _OP_CREATE and taint_cats & opcats:
            taint_detail = (T_NET, taint_cats & opcats, taint_cats & opcats)
        else:
            return (V_ALLOW, R_EXEMPT, None, None)

    if op == _OP_CREATE:
        if deny_cats == _NET_ALL:
            return (V_DENY, R_DENY_RULE, (T_NET, _NET_ALL, _NET_ALL), taint_detail)
        if allow_cats:
            return (V_ALLOW, R_ALLOW_RULE, (T_NET, allow_cats, allow_cats), taint_detail)
    else:
        if deny_cats & opcats:
            return (V_DENY, R_DENY_RULE, (T_NET, opcats, opcats), taint_detail)
        if allow_cats & opcats:
            return (V_ALLOW, R_ALLOW_RULE, (T_NET, opcats, opcats), taint_detail)

    if default_allow:
        return (V_ALLOW, R_DEFAULT, None, taint_detail)
    return (V_DENY, R_DEFAULT, None, taint_detail)
