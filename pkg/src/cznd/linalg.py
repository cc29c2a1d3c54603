"""Dense real/complex linear algebra at desk scale.

Matrices are carried as :class:`CMatrix`, which stores the real and
imaginary parts as separate float arrays so that ``M = M_r + i M_i`` can be
split without copies.  Every function here also accepts plain numpy arrays
and then returns plain arrays; the ZND models use that path on their hot
loop.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, NumericalFailure, SingularMatrix

__all__ = [
    "CMatrix",
    "SvdResult",
    "LUFactor",
    "kron",
    "vec",
    "unvec",
    "matmul",
    "conjugate",
    "transpose",
    "hermitian",
    "add",
    "sub",
    "scale",
    "frobenius_norm",
    "lu_factor",
    "lu_solve",
    "slogdet",
    "svd",
    "pinv",
    "condition_number",
    "hessenberg",
    "eigenvalues",
    "identity",
]


@dataclass(frozen=True, eq=False)
class CMatrix:
    """Dense complex matrix held as paired real and imaginary parts."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.array(self.re, dtype=float, ndmin=2)
        im = np.array(self.im, dtype=float, ndmin=2)
        if re.ndim != 2 or re.shape != im.shape:
            raise DimensionError(f"re {re.shape} and im {im.shape} must be equal 2-D shapes")
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, z) -> CMatrix:
        z = np.asarray(z)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        return cls(np.real(z), np.imag(z))

    @classmethod
    def real(cls, a) -> CMatrix:
        a = np.array(a, dtype=float, ndmin=2)
        return cls(a, np.zeros_like(a))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> CMatrix:
        return cls(np.zeros((rows, cols)), np.zeros((rows, cols)))

    @property
    def rows(self) -> int:
        return self.re.shape[0]

    @property
    def cols(self) -> int:
        return self.re.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.re.shape

    @property
    def z(self) -> np.ndarray:
        """The matrix as a complex128 array."""
        return self.re + 1j * self.im

    def is_real(self) -> bool:
        return not np.any(self.im)

    def __array__(self, dtype=None, copy=None):
        return self.z if dtype is None else self.z.astype(dtype)

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return CMatrix(-self.re, -self.im)

    def __mul__(self, s):
        return scale(self, s)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, CMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.re, other.re)
            and np.array_equal(self.im, other.im)
        )

    def __repr__(self):
        return f"CMatrix({self.rows}x{self.cols}, z={self.z.tolist()!r})"


def _unwrap(x) -> np.ndarray:
    if isinstance(x, CMatrix):
        return x.z if not x.is_real() else x.re.copy()
    return np.asarray(x)


def _wrap(result, *like):
    if any(isinstance(x, CMatrix) for x in like):
        return CMatrix.from_complex(result)
    return result


def _check_2d(a: np.ndarray, name: str):
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")


def identity(n: int) -> CMatrix:
    return CMatrix.real(np.eye(n))


def kron(a, b):
    """Kronecker product; entry ``(i*p + k, j*q + l)`` is ``a[i, j] * b[k, l]``."""
    x, y = _unwrap(a), _unwrap(b)
    _check_2d(x, "a")
    _check_2d(y, "b")
    (m, n), (p, q) = x.shape, y.shape
    out = x[:, None, :, None] * y[None, :, None, :]
    return _wrap(out.reshape(m * p, n * q), a, b)


def vec(m):
    """Column-major stacking into an ``(rows*cols) x 1`` column."""
    x = _unwrap(m)
    _check_2d(x, "m")
    return _wrap(x.reshape(-1, 1, order="F"), m)


def unvec(v, rows: int, cols: int):
    """Inverse of :func:`vec`."""
    x = _unwrap(v)
    if x.size != rows * cols or (x.ndim == 2 and 1 not in x.shape):
        raise DimensionError(f"cannot unvec {x.shape} into {rows}x{cols}")
    return _wrap(x.reshape(rows, cols, order="F"), v)


def matmul(a, b):
    x, y = _unwrap(a), _unwrap(b)
    if x.ndim != 2 or y.ndim not in (1, 2) or x.shape[1] != y.shape[0]:
        raise DimensionError(f"matmul of {x.shape} and {y.shape}")
    return _wrap(x @ y, a, b)


def conjugate(m):
    if isinstance(m, CMatrix):
        return CMatrix(m.re, -m.im)
    return np.conj(m)


def transpose(m):
    if isinstance(m, CMatrix):
        return CMatrix(m.re.T, m.im.T)
    return np.asarray(m).T


def hermitian(m):
    return transpose(conjugate(m))


def add(a, b):
    x, y = _unwrap(a), _unwrap(b)
    if x.shape != y.shape:
        raise DimensionError(f"add of {x.shape} and {y.shape}")
    return _wrap(x + y, a, b)


def sub(a, b):
    x, y = _unwrap(a), _unwrap(b)
    if x.shape != y.shape:
        raise DimensionError(f"sub of {x.shape} and {y.shape}")
    return _wrap(x - y, a, b)


def scale(m, s: complex):
    return _wrap(_unwrap(m) * s, m)


def frobenius_norm(m) -> float:
    x = _unwrap(m)
    return float(np.sqrt(np.sum(np.abs(x) ** 2)))


# -- LU ------------------------------------------------------------------


class LUFactor(NamedTuple):
    lu: np.ndarray  # unit-lower L below the diagonal, U on and above
    perm: np.ndarray  # row permutation: (P a) = a[perm]
    sign: int  # parity of the permutation
    singular: bool


_PIVOT_RTOL = 1e-14


def lu_factor(a) -> LUFactor:
    """Doolittle LU with partial pivoting.

    Never raises: a pivot below ``1e-14 * max|a|`` marks the factorization
    ``singular`` and elimination continues on the remaining columns.
    """
    x = _unwrap(a)
    _check_2d(x, "a")
    n = x.shape[0]
    if x.shape[1] != n:
        raise DimensionError(f"LU needs a square matrix, got {x.shape}")
    lu = np.array(x, dtype=complex if np.iscomplexobj(x) else float)
    perm = np.arange(n)
    sign = 1
    singular = False
    tol = _PIVOT_RTOL * (np.max(np.abs(lu)) if lu.size else 0.0)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        piv = lu[k, k]
        if abs(piv) <= tol or piv == 0:
            singular = True
            continue
        lu[k + 1 :, k] /= piv
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return LUFactor(lu, perm, sign, singular)


def _lu_substitute(f: LUFactor, b: np.ndarray) -> np.ndarray:
    lu = f.lu
    n = lu.shape[0]
    dtype = np.result_type(lu, b, float)
    y = np.array(b[f.perm], dtype=dtype)
    for i in range(1, n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1 :] @ y[i + 1 :]) / lu[i, i]
    return y


def lu_solve(a, b):
    """Solve ``a x = b`` by LU with partial pivoting.

    ``a`` may also be a precomputed :class:`LUFactor`.  Raises
    :class:`SingularMatrix` when a pivot vanishes to tolerance.
    """
    f = a if isinstance(a, LUFactor) else lu_factor(a)
    if f.singular:
        raise SingularMatrix("matrix is singular to working precision")
    y = _unwrap(b)
    if y.shape[0] != f.lu.shape[0]:
        raise DimensionError(f"rhs has {y.shape[0]} rows, matrix has {f.lu.shape[0]}")
    x = _lu_substitute(f, y)
    if isinstance(b, CMatrix) or isinstance(a, CMatrix):
        return CMatrix.from_complex(x)
    return x


def slogdet(a) -> tuple[complex, float]:
    """``(sign, log|det|)`` from the LU factors; a singular matrix gives ``(0, -inf)``.

    For complex input ``sign`` is a unit-modulus complex number.
    """
    f = lu_factor(a)
    if f.singular:
        return 0.0, -np.inf
    d = np.diag(f.lu)
    logabs = float(np.sum(np.log(np.abs(d))))
    phase = f.sign * np.prod(d / np.abs(d))
    if not np.iscomplexobj(d):
        phase = float(np.sign(phase))
    return phase, logabs


# -- SVD / pseudo-inverse ----------------------------------------------------


class SvdResult(NamedTuple):
    u: CMatrix
    singular_values: np.ndarray
    v: CMatrix


def svd(m) -> SvdResult:
    """Thin SVD ``m = u diag(s) v^H`` with ``s`` descending."""
    x = _unwrap(m)
    _check_2d(x, "m")
    try:
        u, s, vh = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return SvdResult(CMatrix.from_complex(u), s, CMatrix.from_complex(vh.conj().T))


def pinv(m, rcond: float = 1e-12):
    """Moore-Penrose pseudo-inverse; singular values below ``rcond * s_max`` count as zero."""
    x = _unwrap(m)
    res = svd(x)
    s = res.singular_values
    cutoff = rcond * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    out = (res.v.z * inv) @ res.u.z.conj().T
    if not np.iscomplexobj(x):
        out = out.real
    return _wrap(out, m)


def condition_number(m) -> float:
    """2-norm condition number (``inf`` for singular input)."""
    s = svd(m).singular_values
    if s.size == 0 or s[-1] == 0:
        return np.inf
    return float(s[0] / s[-1])


# -- eigenvalues --------------------------------------------------------------


def hessenberg(m) -> np.ndarray:
    """Upper Hessenberg form by Householder similarity transforms (complex)."""
    h = np.array(_unwrap(m), dtype=complex)
    _check_2d(h, "m")
    n = h.shape[0]
    if h.shape[1] != n:
        raise DimensionError(f"Hessenberg reduction needs a square matrix, got {h.shape}")
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * norm_x
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
        h[k + 2 :, k] = 0.0
    return h


def _wilkinson_shift(a, b, c, d):
    tr_half = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    l1, l2 = tr_half + disc, tr_half - disc
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def _givens(a, b):
    """(c, s) with c real such that [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, np.conj(b) / abs(b)
    r = np.hypot(abs(a), abs(b))
    c = abs(a) / r
    s = (a / abs(a)) * np.conj(b) / r
    return c, s


def eigenvalues(m) -> list[complex]:
    """Eigenvalues by Hessenberg reduction and Wilkinson-shifted complex QR.

    Raises :class:`NumericalFailure` if ``100 * n`` QR sweeps are not enough.
    """
    h = hessenberg(m)
    n = h.shape[0]
    eps = np.finfo(float).eps
    eig = np.zeros(n, dtype=complex)
    hi = n - 1
    sweeps = 0
    since_deflation = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        lo = hi
        while lo > 0:
            scale_ = abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])
            if scale_ == 0.0:
                scale_ = np.abs(h[: hi + 1, : hi + 1]).max()
            if abs(h[lo, lo - 1]) <= eps * scale_:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            since_deflation = 0
            continue
        sweeps += 1
        since_deflation += 1
        if sweeps > 100 * n:
            raise NumericalFailure(f"QR iteration did not converge within {100 * n} sweeps")
        if since_deflation % 11 == 10:
            # exceptional shift breaks cycles the Wilkinson shift can fall into
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1])
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        block = h[lo : hi + 1, lo : hi + 1]
        k = block.shape[0]
        block -= mu * np.eye(k)
        rots = []
        for j in range(k - 1):
            c, s = _givens(block[j, j], block[j + 1, j])
            g = np.array([[c, s], [-np.conj(s), c]])
            block[j : j + 2, j:] = g @ block[j : j + 2, j:]
            rots.append(g)
        for j, g in enumerate(rots):
            block[: j + 2, j : j + 2] = block[: j + 2, j : j + 2] @ g.conj().T
        block += mu * np.eye(k)
    return [complex(v) for v in eig]
