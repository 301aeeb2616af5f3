# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot loop; mirrors ``_pykernel.run_slots`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def run_slots(state_idx, arrivals, rates, src_ptr, src_idx, dst_ptr, dst_idx,
              bint strict=False, Py_ssize_t every=0, bint log=False):
    cdef cnp.int64_t[::1] sidx = np.ascontiguousarray(state_idx, dtype=np.int64)
    cdef double[::1] arr = np.ascontiguousarray(arrivals, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef cnp.int64_t[::1] sp = np.ascontiguousarray(src_ptr, dtype=np.int64)
    cdef cnp.int64_t[::1] si = np.ascontiguousarray(src_idx, dtype=np.int64)
    cdef cnp.int64_t[::1] dp = np.ascontiguousarray(dst_ptr, dtype=np.int64)
    cdef cnp.int64_t[::1] di = np.ascontiguousarray(dst_idx, dtype=np.int64)
    cdef Py_ssize_t T = sidx.shape[0]
    cdef Py_ssize_t K = r.shape[0]

    q_np = np.zeros(K, dtype=np.int64)
    enq_np = np.zeros(K, dtype=np.int64)
    deq_np = np.zeros(K, dtype=np.int64)
    cdef cnp.int64_t[::1] q = q_np
    cdef cnp.int64_t[::1] enq = enq_np
    cdef cnp.int64_t[::1] deq = deq_np
    cdef cnp.int64_t[::1] head = np.full(K, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] tail = np.full(K, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] nxt = np.full(max(T, 1), -1, dtype=np.int64)
    cdef double[::1] payload = np.zeros(max(T, 1), dtype=np.float64)
    cdef cnp.int64_t[::1] birth = np.zeros(max(T, 1), dtype=np.int64)

    cdef Py_ssize_t n_cp = T // every if every > 0 else 0
    cp_np = np.zeros(n_cp, dtype=np.float64)
    cdef double[::1] cp = cp_np
    counts_np = np.zeros(3, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_np

    cdef Py_ssize_t LT = T if log else 0
    lg_kind_np = np.zeros(LT, dtype=np.int8)
    lg_k_np = np.full(LT, -1, dtype=np.int32)
    lg_moved_np = np.zeros(LT, dtype=np.float64)
    lg_qs_np = np.zeros(LT, dtype=np.float64)
    lg_backlog_np = np.zeros(LT, dtype=np.float64)
    lg_lyap_np = np.zeros(LT, dtype=np.float64)
    cdef cnp.int8_t[::1] lg_kind = lg_kind_np
    cdef cnp.int32_t[::1] lg_k = lg_k_np
    cdef double[::1] lg_moved = lg_moved_np
    cdef double[::1] lg_qs = lg_qs_np
    cdef double[::1] lg_backlog = lg_backlog_np
    cdef double[::1] lg_lyap = lg_lyap_np

    cdef double qs = 0.0, delivered = 0.0, best_s, best_d, w, rk, moved, s, v, x
    cdef Py_ssize_t t, i, j, k, ks, kd, k_act, p, rep
    cdef Py_ssize_t n_pkt = 0
    cdef long long delay_sum = 0
    cdef int kind

    for t in range(T):
        qs += arr[t]
        i = sidx[t]
        best_s = -INFINITY
        ks = -1
        for j in range(sp[i], sp[i + 1]):
            k = si[j]
            rk = r[k]
            w = (qs - rk * <double>(2 * q[k])) * rk
            if w > best_s:
                best_s = w
                ks = k
        best_d = -INFINITY
        kd = -1
        for j in range(dp[i], dp[i + 1]):
            k = di[j]
            rk = r[k]
            w = (rk * <double>(2 * q[k])) * rk
            if w > best_d:
                best_d = w
                kd = k

        kind = 0
        k_act = -1
        moved = 0.0
        if ks >= 0 and best_s > 0 and best_s >= best_d:
            rk = r[ks]
            if not (strict and qs < rk):
                kind = 1
                k_act = ks
                moved = qs if qs < rk else rk
                qs -= moved
                p = n_pkt
                n_pkt += 1
                payload[p] = moved
                birth[p] = t
                if tail[ks] >= 0:
                    nxt[tail[ks]] = p
                else:
                    head[ks] = p
                tail[ks] = p
                q[ks] += 1
                enq[ks] += 1
        elif kd >= 0 and best_d > 0:
            kind = 2
            k_act = kd
            p = head[kd]
            head[kd] = nxt[p]
            if head[kd] < 0:
                tail[kd] = -1
            moved = payload[p]
            delivered += moved
            delay_sum += t - birth[p]
            q[kd] -= 1
            deq[kd] += 1
        counts[kind] += 1

        if log:
            lg_kind[t] = kind
            lg_k[t] = k_act
            lg_moved[t] = moved
            lg_qs[t] = qs
            s = 0.0
            for k in range(K):
                s += r[k] * <double>(2 * q[k])
            lg_backlog[t] = qs + s
            v = qs * qs
            for rep in range(2):
                for k in range(K):
                    x = r[k] * <double>q[k]
                    v += x * x
            lg_lyap[t] = v
        if every > 0 and (t + 1) % every == 0:
            s = 0.0
            for k in range(K):
                s += r[k] * <double>(2 * q[k])
            cp[(t + 1) // every - 1] = qs + s

    out = {
        "q_s": qs,
        "delivered": delivered,
        "queues": q_np,
        "enqueued": enq_np,
        "drained": deq_np,
        "backlog": cp_np,
        "action_counts": counts_np,
        "delay_sum": delay_sum,
    }
    if log:
        out["log"] = {
            "kind": lg_kind_np,
            "k": lg_k_np,
            "moved": lg_moved_np,
            "q_s": lg_qs_np,
            "backlog": lg_backlog_np,
            "lyapunov": lg_lyap_np,
        }
    return out
