"""Eigendecomposition of real symmetric 3x3 matrices.

Eigenvalues come from the trigonometric solution of the characteristic
cubic and eigenvectors from cross products of rows of ``A - lambda I``.
When two eigenvalues nearly coincide the cross products lose accuracy, so
the cyclic Jacobi method takes over.
"""

from __future__ import annotations

import math

import numpy as np

_GAP_TOL = 1e-4
_CHECK_TOL = 1e-11


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi rotations. Returns (eigenvalues, columns of eigenvectors), unsorted."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(n) for q in range(n) if p != q))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    return np.diag(a).copy(), v


def _closed_form_values(a):
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    if p1 == 0:
        return np.sort(np.diag(a))[::-1]
    q = np.trace(a) / 3.0
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = np.linalg.det(b) / 2.0
    phi = math.acos(min(1.0, max(-1.0, r))) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return np.array([e1, e2, e3])


def _null_vector(m):
    rows = (m[0], m[1], m[2])
    crosses = [np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]), np.cross(rows[1], rows[2])]
    best = max(crosses, key=lambda c: float(np.dot(c, c)))
    norm = math.sqrt(float(np.dot(best, best)))
    return best / norm if norm > 0 else None


def eigh3(a):
    """Eigenvalues in descending order and matching orthonormal eigenvector columns."""
    a = np.asarray(a, dtype=float)
    if a.shape != (3, 3):
        raise ValueError(f"eigh3 needs a 3x3 matrix, got {a.shape}")
    a = 0.5 * (a + a.T)
    scale = float(np.max(np.abs(a)))
    if scale == 0:
        return np.zeros(3), np.eye(3)
    vals = _closed_form_values(a)
    gaps = np.abs(np.diff(vals))
    vecs = None
    if np.all(gaps > _GAP_TOL * scale):
        v1 = _null_vector(a - vals[0] * np.eye(3))
        v3 = _null_vector(a - vals[2] * np.eye(3))
        if v1 is not None and v3 is not None:
            v2 = np.cross(v3, v1)
            v2 /= np.linalg.norm(v2)
            cand = np.column_stack([v1, v2, v3])
            ortho = np.max(np.abs(cand.T @ cand - np.eye(3)))
            resid = np.max(np.abs(a @ cand - cand * vals))
            if ortho < _CHECK_TOL and resid < _CHECK_TOL * scale:
                vecs = cand
    if vecs is None:
        vals, vecs = jacobi_eigh(a)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]
