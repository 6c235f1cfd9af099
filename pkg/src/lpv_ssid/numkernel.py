"""Small dense-matrix kernels: LU inversion and QR-based spectral radius.

Matrices are plain ``float64`` numpy arrays in row-major (C) order. Every
reshape elsewhere in the package assumes that layout.

``invert`` accepts a stack of matrices with shape ``(..., n, n)`` so the
training loop can invert one bracket matrix per trajectory in a single call.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-12
MAX_EIG_DIM = 64
_EPS = np.finfo(float).eps


@functools.lru_cache(maxsize=None)
def _eye(n):
    e = np.eye(n)
    e.flags.writeable = False
    return e


class SingularMatrix(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    def __init__(self, msg, partial_moduli):
        super().__init__(msg)
        self.partial_moduli = partial_moduli


@dataclass(frozen=True)
class SpectralReport:
    eigenvalue_moduli: tuple
    spectral_radius: float
    iterations_used: int


def as_mat(a, rows=None, cols=None, name="matrix"):
    """Coerce to a finite 2-D float64 array, optionally checking the shape."""
    m = np.array(a, dtype=float, ndmin=2)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows or cols is not None and m.shape[1] != cols:
        raise ValueError(f"{name} has shape {m.shape}, expected ({rows}, {cols})")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def invert(M, pivoting=True):
    """Invert a square matrix (or a stack of them) by Gauss-Jordan elimination.

    A pivot whose magnitude falls below ``PIVOT_TOL`` times the largest
    absolute entry of its original row raises :class:`SingularMatrix`.
    ``pivoting=False`` skips row exchanges; only safe for matrices whose
    symmetric part is positive definite, where elimination never meets a
    zero pivot.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"invert needs square matrices, got shape {M.shape}")
    n = M.shape[-1]
    batch = M.shape[:-2]
    a = M.reshape((-1, n, n))
    scale = np.abs(a).max(axis=2)
    if not np.all(scale > 0.0):
        raise SingularMatrix("matrix has an all-zero row")
    aug = np.concatenate([a, np.broadcast_to(_eye(n), a.shape)], axis=2)

    # Gauss-Jordan on [a | I]; row swaps carry the original row scales along.
    for k in range(n):
        if pivoting:
            piv = k + np.argmax(np.abs(aug[:, k:, k]), axis=1)
            swap = np.nonzero(piv != k)[0]
        if pivoting and swap.size:
            p = piv[swap]
            tmp = aug[swap, k].copy()
            aug[swap, k] = aug[swap, p]
            aug[swap, p] = tmp
            tmp = scale[swap, k].copy()
            scale[swap, k] = scale[swap, p]
            scale[swap, p] = tmp
        pivot = aug[:, k, k].copy()
        if not np.all(np.abs(pivot) > PIVOT_TOL * scale[:, k]):
            raise SingularMatrix(f"pivot {k} below tolerance {PIVOT_TOL:g}")
        aug[:, k] /= pivot[:, None]
        f = aug[:, :, k].copy()
        f[:, k] = 0.0
        aug -= f[:, :, None] * aug[:, None, k]
    return aug[:, :, n:].reshape(batch + (n, n))


def hessenberg(M):
    """Householder reduction to upper Hessenberg form (similarity transform)."""
    h = np.array(M, dtype=float)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        h[k + 1 :, k:] -= 2.0 * np.outer(v, v @ h[k + 1 :, k:])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v)
        h[k + 2 :, k] = 0.0
    return h


def _hqr(a):
    """Francis double-shift QR on an upper Hessenberg matrix given as lists.

    Returns (real parts, imaginary parts, iterations). Modifies ``a``.
    """
    n = len(a)
    wr = [0.0] * n
    wi = [0.0] * n
    found = [False] * n
    anorm = sum(abs(a[i][j]) for i in range(n) for j in range(max(i - 1, 0), n))
    cap = 100 * n
    total = 0
    nn = n - 1
    t = 0.0
    x = y = w = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                if s == 0.0:
                    s = anorm
                if abs(a[l][l - 1]) <= _EPS * s:
                    a[l][l - 1] = 0.0
                    break
                l -= 1
            x = a[nn][nn]
            if l == nn:
                wr[nn], wi[nn] = x + t, 0.0
                found[nn] = True
                nn -= 1
                break
            y = a[nn - 1][nn - 1]
            w = a[nn][nn - 1] * a[nn - 1][nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1], wi[nn] = -z, z
                found[nn - 1] = found[nn] = True
                nn -= 2
                break
            if total >= cap:
                partial = [math.hypot(wr[i], wi[i]) for i in range(n) if found[i]]
                raise NoConvergence(f"QR iteration cap {cap} reached", partial)
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i][i] -= x
                s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m][m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                q = a[m + 1][m + 1] - z - r - s
                r = a[m + 2][m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                if u <= _EPS * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i][i - 2] = 0.0
                if i != m + 2:
                    a[i][i - 3] = 0.0
            k = m
            while k <= nn - 1:
                if k != m:
                    p = a[k][k - 1]
                    q = a[k + 1][k - 1]
                    r = a[k + 2][k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s != 0.0:
                    if k == m:
                        if l != m:
                            a[k][k - 1] = -a[k][k - 1]
                    else:
                        a[k][k - 1] = -s * x
                    p += s
                    x = p / s
                    y = q / s
                    z = r / s
                    q /= p
                    r /= p
                    for j in range(k, nn + 1):
                        p = a[k][j] + q * a[k + 1][j]
                        if k != nn - 1:
                            p += r * a[k + 2][j]
                            a[k + 2][j] -= p * z
                        a[k + 1][j] -= p * y
                        a[k][j] -= p * x
                    for i in range(l, min(nn, k + 3) + 1):
                        p = x * a[i][k] + y * a[i][k + 1]
                        if k != nn - 1:
                            p += z * a[i][k + 2]
                            a[i][k + 2] -= p * r
                        a[i][k + 1] -= p * q
                        a[i][k] -= p
                k += 1
    return wr, wi, total


def _scaled_hqr(M):
    """QR on ``M / max|M|`` so the convergence tests never underflow or overflow."""
    scale = float(np.abs(M).max()) if M.size else 0.0
    if scale == 0.0:
        n = M.shape[0]
        return [0.0] * n, [0.0] * n, 0, 1.0
    wr, wi, its = _hqr(hessenberg(M / scale).tolist())
    return wr, wi, its, scale


def eigenvalues(M):
    """Eigenvalues of a small real matrix as a list of (real, imag) pairs."""
    M = as_mat(M)
    n = M.shape[0]
    if M.shape[1] != n:
        raise ValueError(f"eigenvalues needs a square matrix, got shape {M.shape}")
    if n > MAX_EIG_DIM:
        raise ValueError(f"dimension {n} exceeds the supported limit {MAX_EIG_DIM}")
    wr, wi, _, scale = _scaled_hqr(M)
    return [(r * scale, i * scale) for r, i in zip(wr, wi)]


def spectral_radius(M):
    """Spectral radius of a square matrix of dimension at most 64.

    Eigenvalues come from Householder-Hessenberg reduction followed by
    Francis double-shift QR, capped at ``100 * n`` iterations.
    """
    M = as_mat(M)
    n = M.shape[0]
    if M.shape[1] != n:
        raise ValueError(f"spectral_radius needs a square matrix, got shape {M.shape}")
    if n > MAX_EIG_DIM:
        raise ValueError(f"dimension {n} exceeds the supported limit {MAX_EIG_DIM}")
    wr, wi, its, scale = _scaled_hqr(M)
    moduli = tuple(scale * math.hypot(r, i) for r, i in zip(wr, wi))
    return SpectralReport(moduli, max(moduli), its)
