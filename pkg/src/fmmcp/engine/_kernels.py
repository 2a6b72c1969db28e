"""Compiled propagation and search kernels.

Domains are 3-bit masks: bit 0 is -1, bit 1 is 0, bit 2 is +1.  The model is a
flat set of arrays (see ``core.compile_model``) and all mutable search state
lives in preallocated arrays, so every kernel is allocation-free and can run
with the GIL released.
"""

import numpy as np
from numba import njit

# constraint kinds, must match model.Kind
BRENT = 0
LEX = 1
COUNT_GE = 2
COUNT_LE = 3
DIFF_GE = 4
FIRST_NEG = 5

# ctr slots
TRAIL = 0
DEPTH = 1
BRANCHES = 2
FAILS = 3
MAX_DEPTH = 4
QHEAD = 5
QCOUNT = 6
CONFLICT = 7
SINCE_RESTART = 8
SOLUTIONS = 9
PROPAGATIONS = 10
N_CTR = 16

# kernel return codes
CONTINUE = 0
SAT = 1
UNSAT = 2
CANCELLED = 3
RESTART = 4

ZERO = 2
NONZERO = 5


def _tables():
    vals = (-1, 0, 1)
    popcnt = np.array([bin(d).count("1") for d in range(8)], dtype=np.int64)
    minv = np.zeros(8, dtype=np.int64)
    maxv = np.zeros(8, dtype=np.int64)
    for d in range(1, 8):
        present = [vals[i] for i in range(3) if d >> i & 1]
        minv[d] = min(present)
        maxv[d] = max(present)
    adj = np.array([1 if (d & 3) == 3 or (d & 6) == 6 else 0 for d in range(8)], dtype=np.int64)

    # product mask and supports for independent factors
    pm = np.zeros((8, 8, 8), dtype=np.int64)
    sup = np.zeros((8, 8, 8, 8, 3), dtype=np.int64)
    for da in range(8):
        for db in range(8):
            for dc in range(8):
                for ia in range(3):
                    if not da >> ia & 1:
                        continue
                    for ib in range(3):
                        if not db >> ib & 1:
                            continue
                        for ic in range(3):
                            if not dc >> ic & 1:
                                continue
                            bit = 1 << (vals[ia] * vals[ib] * vals[ic] + 1)
                            pm[da, db, dc] |= bit
                            for allowed in range(8):
                                if allowed & bit:
                                    sup[da, db, dc, allowed, 0] |= 1 << ia
                                    sup[da, db, dc, allowed, 1] |= 1 << ib
                                    sup[da, db, dc, allowed, 2] |= 1 << ic

    # |a - b| >= need supports
    dsup = np.zeros((8, 8, 3, 2), dtype=np.int64)
    dmax = np.zeros((8, 8), dtype=np.int64)
    for da in range(8):
        for db in range(8):
            for ia in range(3):
                if not da >> ia & 1:
                    continue
                for ib in range(3):
                    if not db >> ib & 1:
                        continue
                    diff = abs(vals[ia] - vals[ib])
                    dmax[da, db] = max(dmax[da, db], diff)
                    for need in range(3):
                        if diff >= need:
                            dsup[da, db, need, 0] |= 1 << ia
                            dsup[da, db, need, 1] |= 1 << ib
    # values <= / >= / < / > a bound, indexed by bound + 1
    le = np.array([1, 3, 7], dtype=np.int64)
    ge = np.array([7, 6, 4], dtype=np.int64)
    lt = np.array([0, 1, 3], dtype=np.int64)
    gt = np.array([6, 4, 0], dtype=np.int64)
    return popcnt, minv, maxv, adj, pm, sup, dsup, dmax, le, ge, lt, gt


POPCNT, MINV, MAXV, ADJ, PM, SUP, DSUP, DMAX, LE_MASK, GE_MASK, LT_MASK, GT_MASK = _tables()


@njit(cache=True, nogil=True)
def _enqueue(c, queue, inq, ctr):
    if inq[c] == 0:
        nq = queue.shape[0]
        queue[(ctr[QHEAD] + ctr[QCOUNT]) % nq] = c
        ctr[QCOUNT] += 1
        inq[c] = 1


@njit(cache=True, nogil=True)
def _set_dom(v, nd, skip, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
    """Narrow dom[v] to nd (a strict subset), trail it and wake watchers."""
    t = ctr[TRAIL]
    tvar[t] = v
    tdom[t] = dom[v]
    ctr[TRAIL] = t + 1
    dom[v] = nd
    for q in range(wptr[v], wptr[v + 1]):
        c = watch[q]
        if c != skip:
            _enqueue(c, queue, inq, ctr)


@njit(cache=True, nogil=True)
def _restrict(v, mask, skip, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
    """dom[v] &= mask; returns False on a wipe-out."""
    old = dom[v]
    nd = old & mask
    if nd == old:
        return True
    if nd == 0:
        return False
    _set_dom(v, nd, skip, dom, tvar, tdom, ctr, wptr, watch, queue, inq)
    return True


@njit(cache=True, nogil=True)
def _prodmask_aliased(da, db, dc, ab, ac, bc):
    pm = 0
    for ia in range(3):
        if not (da >> ia) & 1:
            continue
        for ib in range(3):
            if not (db >> ib) & 1 or (ab and ib != ia):
                continue
            for ic in range(3):
                if not (dc >> ic) & 1 or (ac and ic != ia) or (bc and ic != ib):
                    continue
                pm |= 1 << ((ia - 1) * (ib - 1) * (ic - 1) + 1)
    return pm


@njit(cache=True, nogil=True)
def _support_aliased(da, db, dc, ab, ac, bc, allowed):
    sa = 0
    sb = 0
    sc = 0
    for ia in range(3):
        if not (da >> ia) & 1:
            continue
        for ib in range(3):
            if not (db >> ib) & 1 or (ab and ib != ia):
                continue
            for ic in range(3):
                if not (dc >> ic) & 1 or (ac and ic != ia) or (bc and ic != ib):
                    continue
                if (allowed >> ((ia - 1) * (ib - 1) * (ic - 1) + 1)) & 1:
                    sa |= 1 << ia
                    sb |= 1 << ib
                    sc |= 1 << ic
    return sa, sb, sc


@njit(cache=True, nogil=True)
def _prop_brent(c, rhs, args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq, scratch):
    nt = (e - s) // 3
    while True:
        lo = 0
        hi = 0
        nadj = 0
        for t in range(nt):
            a = args[s + 3 * t]
            b = args[s + 3 * t + 1]
            g = args[s + 3 * t + 2]
            if a == b or a == g or b == g:
                pm = _prodmask_aliased(dom[a], dom[b], dom[g], a == b, a == g, b == g)
            else:
                pm = PM[dom[a], dom[b], dom[g]]
            scratch[t] = pm
            lo += MINV[pm]
            hi += MAXV[pm]
            nadj += ADJ[pm]
        if rhs < lo or rhs > hi:
            return False
        # with no term able to take two adjacent values the reachable sums form
        # the lattice lo, lo + 2, ..., hi
        if nadj == 0 and ((rhs - lo) & 1) == 1:
            return False
        changed = False
        for t in range(nt):
            pm = scratch[t]
            olo = lo - MINV[pm]
            ohi = hi - MAXV[pm]
            oadj = nadj - ADJ[pm]
            allowed = 0
            for vi in range(3):
                if (pm >> vi) & 1:
                    need = rhs - (vi - 1)
                    if olo <= need <= ohi and (oadj > 0 or ((need - olo) & 1) == 0):
                        allowed |= 1 << vi
            if allowed == 0:
                return False
            if allowed == pm:
                continue
            a = args[s + 3 * t]
            b = args[s + 3 * t + 1]
            g = args[s + 3 * t + 2]
            if a == b or a == g or b == g:
                sa, sb, sg = _support_aliased(dom[a], dom[b], dom[g], a == b, a == g, b == g, allowed)
            else:
                da = dom[a]
                db = dom[b]
                dg = dom[g]
                sa = SUP[da, db, dg, allowed, 0]
                sb = SUP[da, db, dg, allowed, 1]
                sg = SUP[da, db, dg, allowed, 2]
            before = ctr[TRAIL]
            if not _restrict(a, sa, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
            if not _restrict(b, sb, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
            if not _restrict(g, sg, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
            if ctr[TRAIL] != before:
                changed = True
        if not changed:
            return True


@njit(cache=True, nogil=True)
def _prop_count(c, kind, rhs, args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
    nt = (e - s) // 2
    npos = 0
    ncert = 0
    for t in range(nt):
        f1 = args[s + 2 * t]
        f2 = args[s + 2 * t + 1]
        d1 = dom[f1]
        if f2 >= 0:
            d2 = dom[f2]
            if (d1 & NONZERO) != 0 and (d2 & NONZERO) != 0:
                npos += 1
            if (d1 & ZERO) == 0 and (d2 & ZERO) == 0:
                ncert += 1
        else:
            if (d1 & NONZERO) != 0:
                npos += 1
            if (d1 & ZERO) == 0:
                ncert += 1
    if kind == COUNT_GE:
        if npos < rhs:
            return False
        if npos > rhs or npos == ncert:
            return True
        # every possibly-nonzero term must be nonzero
        for t in range(nt):
            f1 = args[s + 2 * t]
            f2 = args[s + 2 * t + 1]
            if (dom[f1] & NONZERO) == 0 or (f2 >= 0 and (dom[f2] & NONZERO) == 0):
                continue
            if not _restrict(f1, NONZERO, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
            if f2 >= 0 and not _restrict(f2, NONZERO, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
        return True
    if ncert > rhs:
        return False
    if ncert < rhs or npos == ncert:
        return True
    # every term not yet certainly nonzero must be zero
    for t in range(nt):
        f1 = args[s + 2 * t]
        f2 = args[s + 2 * t + 1]
        d1 = dom[f1]
        if f2 < 0:
            if (d1 & ZERO) != 0 and (d1 & NONZERO) != 0:
                if not _restrict(f1, ZERO, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                    return False
            continue
        d2 = dom[f2]
        c1 = (d1 & ZERO) == 0
        c2 = (d2 & ZERO) == 0
        if c1 and c2:
            continue
        if c1:
            if not _restrict(f2, ZERO, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
        elif c2:
            if not _restrict(f1, ZERO, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
    return True


@njit(cache=True, nogil=True)
def _prop_diff(c, rhs, args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq, scratch):
    nt = (e - s) // 2
    while True:
        hi = 0
        for t in range(nt):
            a = args[s + 2 * t]
            b = args[s + 2 * t + 1]
            md = 0 if a == b else DMAX[dom[a], dom[b]]
            scratch[t] = md
            hi += md
        if hi < rhs:
            return False
        changed = False
        for t in range(nt):
            need = rhs - (hi - scratch[t])
            if need <= 0:
                continue
            a = args[s + 2 * t]
            b = args[s + 2 * t + 1]
            if a == b:
                return False
            if need > 2:
                return False
            da = dom[a]
            db = dom[b]
            before = ctr[TRAIL]
            if not _restrict(a, DSUP[da, db, need, 0], c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
            if not _restrict(b, DSUP[da, db, need, 1], c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
                return False
            if ctr[TRAIL] != before:
                changed = True
        if not changed:
            return True


@njit(cache=True, nogil=True)
def _suffix_can_be_less(args, s, half, start, dom):
    for t in range(start, half):
        if args[s + t] == args[s + half + t]:
            continue
        dx = dom[args[s + t]]
        dy = dom[args[s + half + t]]
        if MINV[dx] < MAXV[dy]:
            return True
        if MINV[dx] != MAXV[dy]:
            return False
    return False


@njit(cache=True, nogil=True)
def _prop_lex(c, args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
    half = (e - s) // 2
    i = 0
    while True:
        while i < half:
            dx = dom[args[s + i]]
            dy = dom[args[s + half + i]]
            if POPCNT[dx] == 1 and dx == dy:
                i += 1
            else:
                break
        if i == half:
            return False
        x = args[s + i]
        y = args[s + half + i]
        if x == y:
            # identical variable at the pivot: equal there, look further on
            i += 1
            continue
        dx = dom[x]
        dy = dom[y]
        if MINV[dx] > MAXV[dy]:
            return False
        if MAXV[dx] < MINV[dy]:
            return True
        if _suffix_can_be_less(args, s, half, i + 1, dom):
            mx = LE_MASK[MAXV[dy] + 1]
            my = GE_MASK[MINV[dx] + 1]
        else:
            mx = LT_MASK[MAXV[dy] + 1]
            my = GT_MASK[MINV[dx] + 1]
        if not _restrict(x, mx, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
            return False
        if not _restrict(y, my, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
            return False
        dx = dom[x]
        dy = dom[y]
        if POPCNT[dx] == 1 and dx == dy:
            i += 1
            continue
        return True


@njit(cache=True, nogil=True)
def _prop_first_neg(c, args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq, scratch):
    # two-state automaton: 0 = only zeros so far, 1 = first nonzero seen (it was -1)
    n = e - s
    # backward: scratch[t] = 1 if state 0 before position t can still be completed
    scratch[n] = 1
    for t in range(n - 1, -1, -1):
        d = dom[args[s + t]]
        ok = (d & 1) != 0 or ((d & ZERO) != 0 and scratch[t + 1] == 1)
        scratch[t] = 1 if ok else 0
    if scratch[0] == 0:
        return False
    in0 = True
    in1 = False
    for t in range(n):
        v = args[s + t]
        d = dom[v]
        keep = 0
        if in0 or in1:
            keep |= 1
        if in1 or (in0 and scratch[t + 1] == 1):
            keep |= ZERO
        if in1:
            keep |= 4
        if not _restrict(v, keep, c, dom, tvar, tdom, ctr, wptr, watch, queue, inq):
            return False
        d = dom[v]
        n0 = in0 and (d & ZERO) != 0
        n1 = in1 or (in0 and (d & 1) != 0)
        in0 = n0
        in1 = n1
        if in1 and not in0:
            # every remaining value is allowed
            return True
    return True


@njit(cache=True, nogil=True)
def propagate(kind, rhs, ptr, args, wptr, watch, dom, tvar, tdom, ctr, queue, inq, scratch):
    """Run queued propagators to a common fixpoint; returns the failing constraint id or -1."""
    nq = queue.shape[0]
    while ctr[QCOUNT] > 0:
        c = queue[ctr[QHEAD]]
        ctr[QHEAD] = (ctr[QHEAD] + 1) % nq
        ctr[QCOUNT] -= 1
        inq[c] = 0
        ctr[PROPAGATIONS] += 1
        k = kind[c]
        s = ptr[c]
        e = ptr[c + 1]
        if k == BRENT:
            ok = _prop_brent(c, rhs[c], args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq, scratch)
        elif k == LEX:
            ok = _prop_lex(c, args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq)
        elif k == COUNT_GE or k == COUNT_LE:
            ok = _prop_count(c, k, rhs[c], args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq)
        elif k == DIFF_GE:
            ok = _prop_diff(c, rhs[c], args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq, scratch)
        else:
            ok = _prop_first_neg(c, args, s, e, dom, tvar, tdom, ctr, wptr, watch, queue, inq, scratch)
        if not ok:
            while ctr[QCOUNT] > 0:
                inq[queue[ctr[QHEAD]]] = 0
                ctr[QHEAD] = (ctr[QHEAD] + 1) % nq
                ctr[QCOUNT] -= 1
            ctr[CONFLICT] = c
            return c
    return -1


@njit(cache=True, nogil=True)
def undo_to(target, dom, tvar, tdom, ctr):
    t = ctr[TRAIL]
    while t > target:
        t -= 1
        dom[tvar[t]] = tdom[t]
    ctr[TRAIL] = target


@njit(cache=True, nogil=True)
def select_var(dom, prio, vweight):
    """Unfixed variable minimising domain size / weight, ties by lowest priority; -1 if all fixed.

    With all weights equal this is the plain smallest-domain rule.
    """
    best = -1
    best_size = 4
    best_w = 1
    best_prio = 0
    for v in range(dom.shape[0]):
        sz = POPCNT[dom[v]]
        if sz < 2:
            continue
        w = vweight[v]
        lhs = sz * best_w
        rhs = best_size * w
        if best < 0 or lhs < rhs or (lhs == rhs and prio[v] < best_prio):
            best = v
            best_size = sz
            best_w = w
            best_prio = prio[v]
    return best


@njit(cache=True, nogil=True)
def _bump(c, ptr, args, kind, cweight, vweight):
    cweight[c] += 1
    s = ptr[c]
    e = ptr[c + 1]
    for q in range(s, e):
        v = args[q]
        if v >= 0:
            vweight[v] += 1


@njit(cache=True, nogil=True)
def first_value(d, order, v):
    for q in range(3):
        val = order[v, q]
        if (d >> (val + 1)) & 1:
            return val
    return 2


@njit(cache=True, nogil=True)
def _backtrack(dom, tvar, tdom, ctr, wptr, watch, queue, inq, dvar, dval, dtrail, dright):
    """Undo to the deepest open left branch and take its right branch (x != value)."""
    while ctr[DEPTH] > 0:
        d = ctr[DEPTH] - 1
        undo_to(dtrail[d], dom, tvar, tdom, ctr)
        if dright[d] == 0:
            dright[d] = 1
            v = dvar[d]
            nd = dom[v] & ~(1 << (dval[d] + 1))
            _set_dom(v, nd, -1, dom, tvar, tdom, ctr, wptr, watch, queue, inq)
            return True
        ctr[DEPTH] = d
    return False


@njit(cache=True, nogil=True)
def run(kind, rhs, ptr, args, wptr, watch, dom, tvar, tdom, ctr, queue, inq, scratch,
        dvar, dval, dtrail, dright, prio, order, cweight, vweight, learn, node_limit, restart_after,
        enumerate_all, cancel):
    """Advance the depth-first search by at most ``node_limit`` decisions.

    The state is left consistent between calls, so the driver can resume it.
    With ``enumerate_all`` every solution is counted and the search continues
    until the tree is exhausted.
    """
    nodes = 0
    while True:
        if cancel[0] != 0:
            return CANCELLED
        conf = propagate(kind, rhs, ptr, args, wptr, watch, dom, tvar, tdom, ctr, queue, inq, scratch)
        if conf < 0:
            v = select_var(dom, prio, vweight)
            if v < 0:
                ctr[SOLUTIONS] += 1
                if not enumerate_all:
                    return SAT
            else:
                if nodes >= node_limit:
                    return CONTINUE
                nodes += 1
                val = first_value(dom[v], order, v)
                d = ctr[DEPTH]
                dvar[d] = v
                dval[d] = val
                dtrail[d] = ctr[TRAIL]
                dright[d] = 0
                ctr[DEPTH] = d + 1
                ctr[BRANCHES] += 1
                if d + 1 > ctr[MAX_DEPTH]:
                    ctr[MAX_DEPTH] = d + 1
                _set_dom(v, 1 << (val + 1), -1, dom, tvar, tdom, ctr, wptr, watch, queue, inq)
                continue
        else:
            ctr[FAILS] += 1
            ctr[SINCE_RESTART] += 1
            if learn:
                _bump(conf, ptr, args, kind, cweight, vweight)
        # conflict, or a counted solution in enumeration mode
        if not _backtrack(dom, tvar, tdom, ctr, wptr, watch, queue, inq, dvar, dval, dtrail, dright):
            return UNSAT
        if restart_after > 0 and ctr[SINCE_RESTART] >= restart_after:
            return RESTART


@njit(cache=True, nogil=True)
def restart(dom, tvar, tdom, ctr, dtrail):
    if ctr[DEPTH] > 0:
        undo_to(dtrail[0], dom, tvar, tdom, ctr)
    ctr[DEPTH] = 0
    ctr[SINCE_RESTART] = 0
