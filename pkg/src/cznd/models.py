"""Zeroing-neural-dynamics models in mass-matrix form.

Each model is an implicit-linear ODE ``mass(tau) @ x' = forcing(tau, x)``
over the real state ``x = [vec(X_r); vec(X_i)]`` of length 2mn:

* ``con-cznd2``: the error ``W_R x - B_R`` lives in R^{2mn}.
* ``con-cznd1``: the error ``X F - A conj(X) - C`` is an m x n complex matrix.
* ``con-cznd1-conj``: the error of the conjugated equation,
  ``conj(X) conj(F) - conj(A) X - conj(C)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ComplexGainUnsupported, UsageError
from .linalg import kron
from .problem import TvsscmeProblem, embedding_arrays

MODEL_NAMES = ("con-cznd1", "con-cznd2", "con-cznd1-conj")


@dataclass(frozen=True)
class Gain:
    """Convergence gain; the real part must be positive, the imaginary part is free."""

    re: float
    im: float = 0.0

    def __post_init__(self):
        if not self.re > 0:
            raise ValueError(f"gain real part must be > 0, got {self.re!r}")

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def is_real(self) -> bool:
        return self.im == 0

    @classmethod
    def parse(cls, text: str) -> Gain:
        """Accepts ``10``, ``10+20i``, ``10-20i``, ``2.5e1+1i``."""
        s = text.strip().replace(" ", "")
        if not s:
            raise ValueError("empty gain")
        if not s.endswith("i"):
            return cls(float(s))
        body = s[:-1]
        split = None
        for k in range(len(body) - 1, 0, -1):
            if body[k] in "+-" and body[k - 1] not in "eE":
                split = k
                break
        if split is None:
            # purely imaginary: rejected by the re > 0 invariant
            return cls(0.0, float(body or "1"))
        im_txt = body[split:]
        if im_txt in ("+", "-"):
            im_txt += "1"
        return cls(float(body[:split]), float(im_txt))

    def __str__(self):
        re = f"{self.re:g}"
        if self.im == 0:
            return re
        sign = "+" if self.im > 0 else "-"
        return f"{re}{sign}{abs(self.im):g}i"


class Activation:
    """Odd, monotonically increasing map applied entrywise to the error."""

    name = "activation"

    def __call__(self, e: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Linear(Activation):
    name = "linear"

    def __call__(self, e):
        return e


class SplitActivation(Activation):
    """Apply a real odd increasing ``fn`` separately to real and imaginary parts.

    This is the convention for nonlinear activations on complex errors; on a
    real error it is simply ``fn``.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], name: str = "split"):
        self.fn = fn
        self.name = name

    def __call__(self, e):
        if np.iscomplexobj(e):
            return self.fn(e.real) + 1j * self.fn(e.imag)
        return self.fn(e)


LINEAR = Linear()


@dataclass(frozen=True)
class ModelSystem:
    dim: int
    mass_at: Callable[[float, np.ndarray], np.ndarray]
    forcing_at: Callable[[float, np.ndarray], np.ndarray]
    label: str
    mass_state_dependent: bool = False

    def derivative(self, tau: float, x: np.ndarray) -> np.ndarray:
        """Solve ``mass x' = forcing`` at one point (LU, pinv fallback)."""
        from .ode import solve_mass

        xdot, _ = solve_mass(self.mass_at(tau, x), self.forcing_at(tau, x))
        return xdot


def lift_state(v: np.ndarray, m: int, n: int) -> np.ndarray:
    """R^{2mn} -> C^{m x n}: ``unvec(v[:mn]) + i unvec(v[mn:])``."""
    mn = m * n
    return (v[:mn] + 1j * v[mn:]).reshape(m, n, order="F")


def flatten_state(x: np.ndarray) -> np.ndarray:
    """C^{m x n} -> R^{2mn}, inverse of :func:`lift_state`."""
    z = np.asarray(x).reshape(-1, order="F")
    return np.concatenate([z.real, z.imag])


def _split(z: np.ndarray) -> np.ndarray:
    z = z.reshape(-1, order="F")
    return np.concatenate([z.real, z.imag])


def con_cznd2_system(p: TvsscmeProblem, gamma: Gain, act: Activation = LINEAR) -> ModelSystem:
    """Real-field model: ``W_R x' = dB_R - dW_R x - gamma act(W_R x - B_R)``."""
    if not gamma.is_real:
        raise ComplexGainUnsupported(
            f"con-cznd2 works on a real error vector; complex gain {gamma} is not defined for it"
        )
    g = gamma.re
    cache = {}

    def embedding(tau):
        if cache.get("tau") != tau:
            cache["tau"], cache["emb"] = tau, embedding_arrays(p, tau)
        return cache["emb"]

    def mass(tau, x):
        return embedding(tau)[0]

    def forcing(tau, x):
        w, b, w_dot, b_dot = embedding(tau)
        return b_dot - w_dot @ x - g * act(w @ x - b)

    return ModelSystem(p.dim, mass, forcing, "con-cznd2")


def con_cznd1_system(p: TvsscmeProblem, gamma: Gain, act: Activation = LINEAR) -> ModelSystem:
    """Complex-error model ``d/dt (X F - A conj(X) - C) = -gamma (.) act(error)``."""
    m, n = p.m, p.n
    Im, In = np.eye(m), np.eye(n)
    g = gamma.value

    def mass(tau, x):
        P = kron(p.F.value(tau).T, Im)
        Q = kron(In, p.A.value(tau))
        return np.block([[P.real - Q.real, -(P.imag + Q.imag)], [P.imag - Q.imag, P.real + Q.real]])

    def forcing(tau, x):
        X = lift_state(x, m, n)
        F, A, C = p.F.value(tau), p.A.value(tau), p.C.value(tau)
        dF, dA, dC = p.F.derivative(tau), p.A.derivative(tau), p.C.derivative(tau)
        err = X @ F - A @ np.conj(X) - C
        G = dC + dA @ np.conj(X) - X @ dF - g * act(err)
        return _split(G)

    return ModelSystem(p.dim, mass, forcing, "con-cznd1")


def con_cznd1_conj_system(p: TvsscmeProblem, gamma: Gain, act: Activation = LINEAR) -> ModelSystem:
    """Conjugated-equation model.

    Mass ``[[H_r - L_r, H_i + L_i], [H_i - L_i, -(H_r + L_r)]]`` with
    ``H = F^H (x) I_m`` and ``L = I_n (x) conj(A)``.
    """
    m, n = p.m, p.n
    Im, In = np.eye(m), np.eye(n)
    g = gamma.value

    def mass(tau, x):
        H = kron(p.F.value(tau).conj().T, Im)
        L = kron(In, p.A.value(tau).conj())
        return np.block([[H.real - L.real, H.imag + L.imag], [H.imag - L.imag, -(H.real + L.real)]])

    def forcing(tau, x):
        X = lift_state(x, m, n)
        Xc = np.conj(X)
        Fc, Ac, Cc = np.conj(p.F.value(tau)), np.conj(p.A.value(tau)), np.conj(p.C.value(tau))
        dFc, dAc, dCc = np.conj(p.F.derivative(tau)), np.conj(p.A.derivative(tau)), np.conj(p.C.derivative(tau))
        err = Xc @ Fc - Ac @ X - Cc
        O = dCc + dAc @ X - Xc @ dFc - g * act(err)
        return _split(O)

    return ModelSystem(p.dim, mass, forcing, "con-cznd1-conj")


_BUILDERS = {
    "con-cznd1": con_cznd1_system,
    "con-cznd2": con_cznd2_system,
    "con-cznd1-conj": con_cznd1_conj_system,
}


def build_model(name: str, p: TvsscmeProblem, gamma: Gain, act: Activation = LINEAR) -> ModelSystem:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UsageError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}") from None
    return builder(p, gamma, act)
