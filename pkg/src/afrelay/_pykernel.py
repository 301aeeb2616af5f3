"""Pure-Python slot loop; fallback for the compiled ``_ckernel``.

Both implementations must perform the same floating-point operations in the
same order so that trajectories are bit-identical across backends.
"""

import numpy as np


def run_slots(state_idx, arrivals, rates, src_ptr, src_idx, dst_ptr, dst_idx,
              strict=False, every=0, log=False):
    T = len(state_idx)
    K = len(rates)
    sidx = np.asarray(state_idx).tolist()
    arr = np.asarray(arrivals, dtype=np.float64).tolist()
    r = np.asarray(rates, dtype=np.float64).tolist()
    sp = np.asarray(src_ptr).tolist()
    si = np.asarray(src_idx).tolist()
    dp = np.asarray(dst_ptr).tolist()
    di = np.asarray(dst_idx).tolist()

    q = [0] * K
    enq = [0] * K
    deq = [0] * K
    head = [-1] * K
    tail = [-1] * K
    nxt = [-1] * T
    payload = [0.0] * T
    birth = [0] * T
    n_pkt = 0
    qs = 0.0
    delivered = 0.0
    delay_sum = 0
    counts = [0, 0, 0]

    n_cp = T // every if every > 0 else 0
    cp = [0.0] * n_cp
    if log:
        lg_kind = [0] * T
        lg_k = [-1] * T
        lg_moved = [0.0] * T
        lg_qs = [0.0] * T
        lg_backlog = [0.0] * T
        lg_lyap = [0.0] * T

    for t in range(T):
        qs += arr[t]
        i = sidx[t]
        best_s = float("-inf")
        ks = -1
        for j in range(sp[i], sp[i + 1]):
            k = si[j]
            rk = r[k]
            w = (qs - rk * (2 * q[k])) * rk
            if w > best_s:
                best_s = w
                ks = k
        best_d = float("-inf")
        kd = -1
        for j in range(dp[i], dp[i + 1]):
            k = di[j]
            rk = r[k]
            w = (rk * (2 * q[k])) * rk
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
                s += r[k] * (2 * q[k])
            lg_backlog[t] = qs + s
            v = qs * qs
            for _ in range(2):
                for k in range(K):
                    x = r[k] * q[k]
                    v += x * x
            lg_lyap[t] = v
        if every > 0 and (t + 1) % every == 0:
            s = 0.0
            for k in range(K):
                s += r[k] * (2 * q[k])
            cp[(t + 1) // every - 1] = qs + s

    out = {
        "q_s": qs,
        "delivered": delivered,
        "queues": np.array(q, dtype=np.int64),
        "enqueued": np.array(enq, dtype=np.int64),
        "drained": np.array(deq, dtype=np.int64),
        "backlog": np.array(cp, dtype=np.float64),
        "action_counts": np.array(counts, dtype=np.int64),
        "delay_sum": delay_sum,
    }
    if log:
        out["log"] = {
            "kind": np.array(lg_kind, dtype=np.int8),
            "k": np.array(lg_k, dtype=np.int32),
            "moved": np.array(lg_moved, dtype=np.float64),
            "q_s": np.array(lg_qs, dtype=np.float64),
            "backlog": np.array(lg_backlog, dtype=np.float64),
            "lyapunov": np.array(lg_lyap, dtype=np.float64),
        }
    return out
