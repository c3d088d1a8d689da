"""Kernel logistic regression fitted by damped Newton in dual coordinates.

With Gram matrix ``K`` and dual coefficients ``c`` the fitted function is
``f = K c`` and the objective is::

    J(c) = lam/2 * c' K c + mean(log(1 + exp(-y * (K c))))

with labels ``y`` in {-1, +1}.  The gradient is ``K g`` with
``g = lam * c + v / m`` and ``v_i = -y_i * sigmoid(-y_i f_i)``.  The Newton
system ``(lam K + K W K / m) d = -K g`` is solved without dividing by the
weights ``W``::

    d = -(g - S A^{-1} S K g) / lam,    A = m lam I + S K S,  S = W^{1/2}

which only needs a Cholesky factor of the well-conditioned matrix ``A``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import pdist
from scipy.special import expit

from .distributions import LabeledSample
from .exceptions import InvalidInput, SingularKernelMatrix

log = logging.getLogger(__name__)

JITTER = 1e-10
ARMIJO_C = 1e-4
_CHUNK = 4096


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel ``exp(-|x - z|^2 / (2 h^2))`` with bandwidth ``h``."""

    bandwidth: float
    kind: str = "Gaussian"

    def __post_init__(self):
        if self.kind != "Gaussian":
            raise InvalidInput(f"unsupported kernel {self.kind!r}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InvalidInput(f"bandwidth must be positive, got {self.bandwidth}")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
        np.maximum(sq, 0.0, out=sq)
        sq *= -0.5 / self.bandwidth**2
        return np.exp(sq, out=sq)


def median_heuristic(features: np.ndarray) -> float:
    """Median pairwise Euclidean distance, falling back to 1 when it is zero."""
    x = np.asarray(features, dtype=float)
    if len(x) < 2:
        return 1.0
    med = float(np.median(pdist(x)))
    return med if med > 0 else 1.0


def resolve_kernel(bandwidth, features: np.ndarray) -> KernelSpec:
    """``bandwidth`` may be a number or ``"median"``."""
    if bandwidth is None or bandwidth == "median":
        return KernelSpec(median_heuristic(features))
    return KernelSpec(float(bandwidth))


def resolve_lambda(lam, m: int) -> float:
    """``lam`` may be a number or ``"auto"`` (meaning ``m ** -0.5``)."""
    if lam is None or lam == "auto":
        return m ** -0.5
    lam = float(lam)
    if not lam > 0:
        raise InvalidInput(f"regularisation must be positive, got {lam}")
    return lam


def objective_and_gradient(coef: np.ndarray, gram: np.ndarray, labels: np.ndarray, lam: float):
    """Objective value and gradient in dual coordinates (``labels`` in {0, 1})."""
    y = 2.0 * np.asarray(labels, dtype=float) - 1.0
    f = gram @ coef
    return _obj(coef, f, y, lam), gram @ _inner_grad(coef, f, y, lam)


def _obj(coef, f, y, lam) -> float:
    return float(0.5 * lam * coef @ f + np.mean(np.logaddexp(0.0, -y * f)))


def _inner_grad(coef, f, y, lam):
    return lam * coef - y * expit(-y * f) / len(y)


@dataclass
class FitDiagnostics:
    iterations: int = 0
    converged: bool = False
    grad_norm: float = np.nan
    objective: float = np.nan
    objective_history: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    fallback_steps: int = 0
    message: str = ""


@dataclass(frozen=True, eq=False)
class KlrModel:
    """Fitted kernel logistic regression."""

    features: np.ndarray
    coef: np.ndarray
    kernel: KernelSpec
    lam: float
    diagnostics: FitDiagnostics

    def decision_function(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.features.shape[1])
        out = np.empty(len(x))
        for start in range(0, len(x), _CHUNK):
            out[start:start + _CHUNK] = self.kernel.gram(x[start:start + _CHUNK], self.features) @ self.coef
        return out

    def predict_posterior(self, x) -> np.ndarray:
        return expit(self.decision_function(x))

    __call__ = predict_posterior


def fit_klr(
    data: LabeledSample,
    kernel: KernelSpec | None = None,
    lam: float | str = "auto",
    tol: float = 1e-8,
    max_iter: int = 100,
) -> KlrModel:
    """Minimise the regularised logistic loss by damped Newton steps.

    Each accepted step strictly decreases the objective (Armijo backtracking).
    A gradient step is used if the Newton system cannot be factorised; when
    neither works :class:`SingularKernelMatrix` is raised.  Non-convergence
    within ``max_iter`` is reported in the diagnostics, not raised.
    """
    x = np.asarray(data.features, dtype=float)
    m = len(x)
    if m < 2:
        raise InvalidInput("kernel logistic regression needs at least two examples")
    kernel = kernel if kernel is not None else KernelSpec(median_heuristic(x))
    lam = resolve_lambda(lam, m)
    y = 2.0 * np.asarray(data.labels, dtype=float) - 1.0
    gram = kernel.gram(x, x)
    gram[np.diag_indices(m)] += JITTER

    coef = np.zeros(m)
    f = np.zeros(m)
    diag = FitDiagnostics()
    obj = _obj(coef, f, y, lam)
    diag.objective_history.append(obj)
    a_mat = np.empty_like(gram)
    for it in range(max_iter):
        g_in = _inner_grad(coef, f, y, lam)
        grad = gram @ g_in
        gnorm = float(np.linalg.norm(grad))
        diag.grad_norm = gnorm
        if gnorm <= tol:
            diag.converged = True
            break
        direction = _newton_direction(gram, f, g_in, grad, lam, a_mat)
        if direction is None:
            direction = -grad
            diag.fallback_steps += 1
        k_dir = gram @ direction
        slope = float(grad @ direction)
        if slope >= 0:
            direction, k_dir, slope = -grad, gram @ -grad, -gnorm**2
            diag.fallback_steps += 1
        step, accepted = 1.0, False
        while step >= 1e-12:
            c_new = coef + step * direction
            f_new = f + step * k_dir
            obj_new = _obj(c_new, f_new, y, lam)
            if obj_new <= obj + ARMIJO_C * step * slope and obj_new < obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            diag.message = "line search made no progress"
            diag.converged = gnorm <= 1e3 * tol
            break
        coef, f, obj = c_new, f_new, obj_new
        diag.objective_history.append(obj)
        diag.step_sizes.append(step)
        diag.iterations = it + 1
    else:
        g_in = _inner_grad(coef, f, y, lam)
        diag.grad_norm = float(np.linalg.norm(gram @ g_in))
        diag.converged = diag.grad_norm <= tol
        if not diag.converged:
            diag.message = f"no convergence in {max_iter} iterations"
    diag.objective = obj
    if not diag.converged:
        log.warning("kernel logistic regression: %s (gradient norm %.3g)", diag.message, diag.grad_norm)
    return KlrModel(x, coef, kernel, lam, diag)


def _newton_direction(gram, f, g_in, grad, lam, a_mat):
    m = len(f)
    s = np.sqrt(expit(f) * expit(-f))
    np.multiply(gram, s[:, None], out=a_mat)
    a_mat *= s[None, :]
    a_mat[np.diag_indices(m)] += m * lam
    for jitter in (0.0, 1e-8 * m * lam, 1e-4 * m * lam):
        if jitter:
            a_mat[np.diag_indices(m)] += jitter
        try:
            factor = cho_factor(a_mat, lower=True, overwrite_a=False, check_finite=False)
        except LinAlgError:
            continue
        return -(g_in - s * cho_solve(factor, s * grad, check_finite=False)) / lam
    if not np.all(np.isfinite(grad)):
        raise SingularKernelMatrix("non-finite gradient in the Newton system")
    return None
