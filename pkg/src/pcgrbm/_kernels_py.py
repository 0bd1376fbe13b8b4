"""NumPy implementations of the hot clustering kernels.

Mirrors pcgrbm._kernels (the compiled extension) operation for operation so
either backend can be selected at import. Rotation and message-update
formulas are kept identical to the compiled code so the two backends agree
to floating-point noise.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def jacobi_eigh(A: np.ndarray, V: np.ndarray, tol: float, max_sweeps: int) -> int:
    """Cyclic Jacobi diagonalization of a symmetric matrix, in place.

    A is overwritten (diagonal converges to the eigenvalues) and V accumulates
    the rotations (columns converge to eigenvectors). Sweeps run until the
    off-diagonal Frobenius norm falls below tol * max(1, ||A_0||_F). Returns
    the number of sweeps performed.
    """
    n = A.shape[0]
    scale = max(1.0, float(np.sqrt((A**2).sum())))
    threshold = tol * scale
    sweeps = 0
    while sweeps < max_sweeps:
        off = np.sqrt(max(0.0, (A**2).sum() - (np.diagonal(A) ** 2).sum()))
        if off <= threshold:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if 2.0 * abs(apq) * 1e150 < abs(diff):
                    t = apq / diff  # limit of the stable tangent for huge theta
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :].copy()
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return sweeps


def ap_iterate(S: np.ndarray, R: np.ndarray, A: np.ndarray, damping: float) -> None:
    """One damped responsibility/availability update, in place.

    Responsibilities use the current availabilities; availabilities then use
    the fresh responsibilities.
    """
    n = S.shape[0]
    idx = np.arange(n)

    AS = A + S
    top = AS.argmax(axis=1)
    best = AS[idx, top]
    AS[idx, top] = -np.inf
    second = AS.max(axis=1)
    AS[idx, top] = best
    Rnew = S - best[:, None]
    Rnew[idx, top] = S[idx, top] - second
    R *= damping
    R += (1.0 - damping) * Rnew

    Rp = np.maximum(R, 0.0)
    Rp[idx, idx] = R[idx, idx]
    colsum = Rp.sum(axis=0)
    Anew = np.minimum(0.0, colsum[None, :] - Rp)
    Anew[idx, idx] = colsum - Rp[idx, idx]
    A *= damping
    A += (1.0 - damping) * Anew


def constrained_assign(
    order: np.ndarray,
    must_indptr: np.ndarray,
    must_indices: np.ndarray,
    cannot_indptr: np.ndarray,
    cannot_indices: np.ndarray,
    out: np.ndarray,
) -> int:
    """Assign instances, in index order, to the first feasible cluster.

    order[i] lists candidate clusters for instance i from nearest to
    farthest. A cluster is infeasible when an already-assigned must partner
    sits elsewhere or an already-assigned cannot partner sits in it. Returns
    -1 on success, else the first instance with no feasible cluster.
    """
    n, k = order.shape
    out[:] = -1
    for i in range(n):
        must = must_indices[must_indptr[i] : must_indptr[i + 1]]
        cannot = cannot_indices[cannot_indptr[i] : cannot_indptr[i + 1]]
        assigned = -1
        for slot in range(k):
            c = order[i, slot]
            ok = True
            for j in must:
                if out[j] != -1 and out[j] != c:
                    ok = False
                    break
            if ok:
                for j in cannot:
                    if out[j] == c:
                        ok = False
                        break
            if ok:
                assigned = c
                break
        if assigned == -1:
            return i
        out[i] = assigned
    return -1
