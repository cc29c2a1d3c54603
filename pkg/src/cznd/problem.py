"""Time-variant Sylvester-conjugate problems ``X F - A conj(X) = C``.

A problem holds ``F`` (n x n), ``A`` (m x m), ``C`` (m x n) as
:class:`TimeMatrix` values and optionally the exact solution.  This module
also builds the 2mn-dimensional real system ``W_R X_R = B_R`` and checks the
two pointwise uniqueness conditions on a grid.
"""
from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import linalg, texpr
from .errors import DimensionError, NumericalFailure, ParseError, ProblemFormatError
from .linalg import CMatrix

log = logging.getLogger(__name__)

EPS_EIG = 1e-8
EPS_DET = 1e-12


class TimeMatrix:
    """A matrix-valued function of time together with its time derivative.

    ``value`` and ``derivative`` map ``tau`` to a complex array of shape
    ``(rows, cols)``.  When built from expressions, ``exprs`` keeps the
    ``(re, im)`` expression grids so the matrix can be written back to a
    problem file.
    """

    def __init__(
        self,
        rows: int,
        cols: int,
        value: Callable[[float], np.ndarray],
        derivative: Callable[[float], np.ndarray],
        exprs: tuple | None = None,
    ):
        if rows < 1 or cols < 1:
            raise DimensionError(f"TimeMatrix needs positive dimensions, got {rows}x{cols}")
        self.rows = rows
        self.cols = cols
        self._value = value
        self._derivative = derivative
        self.exprs = exprs

    @classmethod
    def from_exprs(cls, re: Sequence[Sequence[texpr.Expr]], im: Sequence[Sequence[texpr.Expr]]) -> TimeMatrix:
        rows, cols = len(re), len(re[0])
        if len(im) != rows or any(len(r) != cols for r in (*re, *im)):
            raise DimensionError("re and im expression grids must have the same rectangular shape")
        flat = [e for r in re for e in r] + [e for r in im for e in r]
        k = rows * cols
        val_fn = texpr.compile_expr(*flat)
        der_fn = texpr.compile_expr(*[texpr.differentiate(e) for e in flat])

        def unpack(fn):
            def at(tau):
                v = fn(float(tau))
                z = np.array(v[:k]) + 1j * np.array(v[k:])
                return z.reshape(rows, cols)

            return at

        return cls(rows, cols, unpack(val_fn), unpack(der_fn), exprs=(tuple(map(tuple, re)), tuple(map(tuple, im))))

    @classmethod
    def from_text(cls, re: Sequence[Sequence[str]], im: Sequence[Sequence[str]]) -> TimeMatrix:
        return cls.from_exprs([[texpr.parse(s) for s in r] for r in re], [[texpr.parse(s) for s in r] for r in im])

    @classmethod
    def constant(cls, z) -> TimeMatrix:
        z = np.array(z, dtype=complex, ndmin=2)
        zero = np.zeros_like(z)
        return cls(z.shape[0], z.shape[1], lambda tau: z.copy(), lambda tau: zero.copy())

    def value(self, tau: float) -> np.ndarray:
        return self._value(tau)

    def derivative(self, tau: float) -> np.ndarray:
        return self._derivative(tau)

    def eval_at(self, tau: float) -> CMatrix:
        return CMatrix.from_complex(self.value(tau))

    def derivative_at(self, tau: float) -> CMatrix:
        return CMatrix.from_complex(self.derivative(tau))

    def __repr__(self):
        return f"TimeMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class TvsscmeProblem:
    m: int
    n: int
    F: TimeMatrix
    A: TimeMatrix
    C: TimeMatrix
    exact: TimeMatrix | None = None
    name: str = ""

    def __post_init__(self):
        for label, tm, shape in (
            ("F", self.F, (self.n, self.n)),
            ("A", self.A, (self.m, self.m)),
            ("C", self.C, (self.m, self.n)),
            ("EXACT", self.exact, (self.m, self.n)),
        ):
            if tm is not None and (tm.rows, tm.cols) != shape:
                raise DimensionError(f"{label} is {tm.rows}x{tm.cols}, expected {shape[0]}x{shape[1]}")

    @property
    def dim(self) -> int:
        """Length of the real state vector, 2mn."""
        return 2 * self.m * self.n

    def residual_matrix(self, tau: float, x: np.ndarray) -> np.ndarray:
        """``X F - A conj(X) - C`` for a complex m x n array ``x``."""
        return x @ self.F.value(tau) - self.A.value(tau) @ np.conj(x) - self.C.value(tau)


# -- Example 3 ------------------------------------------------------------------


def _example3_F(t):
    s, c = np.sin(t), np.cos(t)
    return np.array([[6 + s, c], [c, 4 + s]]) + 1j * np.array([[c, s], [s, c]])


def _example3_dF(t):
    s, c = np.sin(t), np.cos(t)
    return np.array([[c, -s], [-s, c]]) + 1j * np.array([[-s, c], [c, -s]])


def _example3_A(t):
    s, c = np.sin(t), np.cos(t)
    return np.array([[c, s], [-s, c]]) + 1j * np.array([[s, c], [c, -s]])


def _example3_dA(t):
    s, c = np.sin(t), np.cos(t)
    return np.array([[-s, c], [-c, -s]]) + 1j * np.array([[c, -s], [-s, -c]])


def _example3_C(t):
    s, c, s2 = np.sin(t), np.cos(t), np.sin(2 * t)
    re = [
        [2 * c**2 - 2 * c * s + 6 * s, 4 * c + 2 * c * s - 2 * c**2],
        [-2 * s2 - 6 * c + 2, 2 * s2 - 4 * s - 2],
    ]
    im = [
        [2 * c**2 + 2 * c * s + 6 * s, 4 * c + 2 * c * s + 2 * c**2],
        [-2 * s2 - 6 * c - 2, -2 * s2 - 4 * s - 2],
    ]
    return np.array(re) + 1j * np.array(im)


def _example3_dC(t):
    s, c, s2, c2 = np.sin(t), np.cos(t), np.sin(2 * t), np.cos(2 * t)
    re = [
        [-2 * s2 - 2 * c2 + 6 * c, -4 * s + 2 * c2 + 2 * s2],
        [-4 * c2 + 6 * s, 4 * c2 - 4 * c],
    ]
    im = [
        [-2 * s2 + 2 * c2 + 6 * c, -4 * s + 2 * c2 - 2 * s2],
        [-4 * c2 + 6 * s, -4 * c2 - 4 * c],
    ]
    return np.array(re) + 1j * np.array(im)


def _example3_X(t):
    s, c = np.sin(t), np.cos(t)
    return (1 + 1j) * np.array([[s, c], [-c, -s]])


def _example3_dX(t):
    s, c = np.sin(t), np.cos(t)
    return (1 + 1j) * np.array([[c, -s], [s, -c]])


def example3() -> TvsscmeProblem:
    """The 2x2 benchmark with exact solution ``X*(t) = (1 + i) [[s, c], [-c, -s]]``."""
    return TvsscmeProblem(
        m=2,
        n=2,
        F=TimeMatrix(2, 2, _example3_F, _example3_dF),
        A=TimeMatrix(2, 2, _example3_A, _example3_dA),
        C=TimeMatrix(2, 2, _example3_C, _example3_dC),
        exact=TimeMatrix(2, 2, _example3_X, _example3_dX),
        name="example3",
    )


# -- real-field embedding -----------------------------------------------------------


class RealEmbedding(NamedTuple):
    w: CMatrix
    b: np.ndarray
    w_dot: CMatrix
    b_dot: np.ndarray


def real_coefficients(F: np.ndarray, A: np.ndarray) -> np.ndarray:
    """``[[K11, K12], [K21, K22]]`` from complex ``F`` (n x n) and ``A`` (m x m) arrays."""
    m, n = A.shape[0], F.shape[0]
    Im, In = np.eye(m), np.eye(n)
    fr, fi = linalg.kron(F.real.T, Im), linalg.kron(F.imag.T, Im)
    ar, ai = linalg.kron(In, A.real), linalg.kron(In, A.imag)
    return np.block([[fr - ar, -(fi + ai)], [fi - ai, fr + ar]])


def _stack(c: np.ndarray) -> np.ndarray:
    z = c.reshape(-1, order="F")
    return np.concatenate([z.real, z.imag])


def embedding_arrays(p: TvsscmeProblem, tau: float):
    """Array form of :func:`build_wr_br`: ``(W_R, B_R, dW_R, dB_R)``."""
    F, A, C = p.F.value(tau), p.A.value(tau), p.C.value(tau)
    dF, dA, dC = p.F.derivative(tau), p.A.derivative(tau), p.C.derivative(tau)
    return real_coefficients(F, A), _stack(C), real_coefficients(dF, dA), _stack(dC)


def build_wr_br(p: TvsscmeProblem, tau: float) -> RealEmbedding:
    """Real 2mn x 2mn coefficient matrix ``W_R``, right side ``B_R`` and their derivatives.

    The unknown is ordered ``[vec(X_r); vec(X_i)]``.  Because the blocks are
    linear in ``F`` and ``A``, the derivative uses the same assembly applied
    to ``dF`` and ``dA``.
    """
    w, b, w_dot, b_dot = embedding_arrays(p, tau)
    return RealEmbedding(CMatrix.real(w), b, CMatrix.real(w_dot), b_dot)


# -- uniqueness ---------------------------------------------------------------------


@dataclass
class UniquenessReport:
    """Pointwise-on-grid uniqueness diagnostics.

    ``min_eigen_gap`` is the smallest distance between the spectra of
    ``A conj(A)`` and ``F conj(F)`` over the grid; ``min_abs_det`` the
    smallest ``|det W_R|``.  Either may be ``None`` if that check was not run.
    """

    tau_grid: np.ndarray
    min_eigen_gap: float | None = None
    min_abs_det: float | None = None
    unique: bool = False
    eigen_gaps: np.ndarray | None = None
    spectra_a: np.ndarray | None = None
    spectra_f: np.ndarray | None = None
    log_abs_dets: np.ndarray | None = None
    det_signs: np.ndarray | None = None
    det_sign_changes: int | None = None
    eps_eig: float = EPS_EIG
    eps_det: float = EPS_DET
    notes: list = field(default_factory=list)


def _grid(tau_grid, warn: bool = True) -> np.ndarray:
    g = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if g.size == 0:
        raise ValueError("uniqueness check needs a non-empty grid")
    if g.size == 1 and warn:
        log.warning("uniqueness checked at a single point; coverage of the interval is minimal")
    return g


def uniqueness_eigen(p: TvsscmeProblem, tau_grid, eps_eig: float = EPS_EIG) -> UniquenessReport:
    grid = _grid(tau_grid)
    gaps = np.empty(grid.size)
    spec_a = np.empty((grid.size, p.m), dtype=complex)
    spec_f = np.empty((grid.size, p.n), dtype=complex)
    notes = []
    for k, tau in enumerate(grid):
        A, F = p.A.value(tau), p.F.value(tau)
        try:
            la = np.array(linalg.eigenvalues(A @ np.conj(A)))
            lf = np.array(linalg.eigenvalues(F @ np.conj(F)))
        except NumericalFailure as exc:
            notes.append(f"tau={tau:.17g}: eigensolver failed ({exc})")
            spec_a[k], spec_f[k], gaps[k] = np.nan, np.nan, np.nan
            continue
        spec_a[k], spec_f[k] = la, lf
        gaps[k] = np.min(np.abs(la[:, None] - lf[None, :]))
    gap = float(np.nanmin(gaps)) if not np.all(np.isnan(gaps)) else float("nan")
    return UniquenessReport(
        tau_grid=grid,
        min_eigen_gap=gap,
        unique=bool(gap > eps_eig) and not notes,
        notes=notes,
        eigen_gaps=gaps,
        spectra_a=spec_a,
        spectra_f=spec_f,
        eps_eig=eps_eig,
    )


def uniqueness_det(p: TvsscmeProblem, tau_grid, eps_det: float = EPS_DET, _warn: bool = True) -> UniquenessReport:
    grid = _grid(tau_grid, _warn)
    logs = np.empty(grid.size)
    signs = np.empty(grid.size)
    for k, tau in enumerate(grid):
        signs[k], logs[k] = linalg.slogdet(real_coefficients(p.F.value(tau), p.A.value(tau)))
    min_abs = float(np.exp(logs.min()))
    changes = int(np.count_nonzero(signs[1:] * signs[:-1] <= 0)) if grid.size > 1 else 0
    if np.any(signs == 0):
        changes = max(changes, 1)
    return UniquenessReport(
        tau_grid=grid,
        min_abs_det=min_abs,
        unique=min_abs > eps_det,
        log_abs_dets=logs,
        det_signs=signs,
        det_sign_changes=changes,
        eps_det=eps_det,
    )


def uniqueness(p: TvsscmeProblem, tau_grid, eps_eig: float = EPS_EIG, eps_det: float = EPS_DET) -> UniquenessReport:
    """Both checks on one grid; ``unique`` requires both to pass."""
    e = uniqueness_eigen(p, tau_grid, eps_eig)
    d = uniqueness_det(p, e.tau_grid, eps_det, _warn=False)
    e.min_abs_det = d.min_abs_det
    e.log_abs_dets = d.log_abs_dets
    e.det_signs = d.det_signs
    e.det_sign_changes = d.det_sign_changes
    e.eps_det = eps_det
    e.unique = e.unique and d.unique
    return e


# -- problem files ------------------------------------------------------------------

_SECTIONS = ("F", "A", "C", "EXACT")


def example3_path():
    """Location of the shipped ``example3.tvp``."""
    return resources.files("cznd") / "data" / "example3.tvp"


def loads(text: str, name: str = "") -> TvsscmeProblem:
    """Parse the ``.tvp`` problem format.

    Layout: a ``dims m n`` header, then sections ``[F]``, ``[A]``, ``[C]``
    and optionally ``[EXACT]``.  Each section lists its entries in row-major
    order, one ``re_expr ; im_expr`` per line.  ``#`` starts a comment.
    """
    dims = None
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ProblemFormatError(f"line {lineno}: malformed section header {line!r}")
            current = line[1:-1].strip().upper()
            if current not in _SECTIONS:
                raise ProblemFormatError(f"line {lineno}: unknown section [{current}]")
            if current in sections:
                raise ProblemFormatError(f"line {lineno}: duplicate section [{current}]")
            sections[current] = []
            continue
        if line.split()[0] == "dims":
            parts = line.split()
            if len(parts) != 3 or not all(s.isdigit() and int(s) > 0 for s in parts[1:]):
                raise ProblemFormatError(f"line {lineno}: expected 'dims m n' with positive integers")
            dims = int(parts[1]), int(parts[2])
            continue
        if current is None:
            raise ProblemFormatError(f"line {lineno}: entry outside any section")
        sections[current].append((lineno, line))

    if dims is None:
        raise ProblemFormatError("missing 'dims m n' header")
    for required in ("F", "A", "C"):
        if required not in sections:
            raise ProblemFormatError(f"missing section [{required}]")
    m, n = dims
    shapes = {"F": (n, n), "A": (m, m), "C": (m, n), "EXACT": (m, n)}
    mats = {}
    for sec, entries in sections.items():
        rows, cols = shapes[sec]
        if len(entries) != rows * cols:
            raise DimensionError(
                f"section [{sec}] has {len(entries)} entries, expected {rows}x{cols} = {rows * cols}"
            )
        re_grid = [[None] * cols for _ in range(rows)]
        im_grid = [[None] * cols for _ in range(rows)]
        for k, (lineno, line) in enumerate(entries):
            i, j = divmod(k, cols)
            if line.count(";") != 1:
                raise ParseError(f"line {lineno}: expected 're_expr ; im_expr'", 0, sec, i + 1, j + 1)
            re_txt, im_txt = line.split(";")
            for grid, txt, shift in ((re_grid, re_txt, 0), (im_grid, im_txt, len(re_txt) + 1)):
                try:
                    grid[i][j] = texpr.parse(txt)
                except ParseError as exc:
                    raise ParseError(
                        f"line {lineno}: {exc.message}", exc.offset + len(line[:shift].encode()), sec, i + 1, j + 1
                    ) from None
        mats[sec] = TimeMatrix.from_exprs(re_grid, im_grid)
    return TvsscmeProblem(m, n, mats["F"], mats["A"], mats["C"], mats.get("EXACT"), name=name)


def load_problem(source) -> TvsscmeProblem:
    """Load a problem from a path, an open text file, or the builtin name ``example3``."""
    if isinstance(source, str) and source == "example3":
        return example3()
    if hasattr(source, "read"):
        return loads(source.read(), name=getattr(source, "name", ""))
    path = os.fspath(source)
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), name=os.path.splitext(os.path.basename(path))[0])


def dumps(p: TvsscmeProblem) -> str:
    """Write an expression-backed problem back to ``.tvp`` text."""
    out = [f"dims {p.m} {p.n}"]
    for sec, tm in (("F", p.F), ("A", p.A), ("C", p.C), ("EXACT", p.exact)):
        if tm is None:
            continue
        if tm.exprs is None:
            raise ValueError(f"[{sec}] is not expression-backed and cannot be written as text")
        out.append(f"[{sec}]")
        re, im = tm.exprs
        for i in range(tm.rows):
            for j in range(tm.cols):
                out.append(f"{texpr.to_string(re[i][j])} ; {texpr.to_string(im[i][j])}")
    return "\n".join(out) + "\n"
