"""Sequential scale-estimate terms for half-integer Matérn kernels on a line.

In one dimension a Matérn process with nu = p + 1/2 is the first coordinate
of the (p+1)-dimensional Gauss-Markov state (f, f', ..., f^(p)) driven by
(D + theta)^{p+1} f = white noise. Visiting the design points in increasing
order, the model's one-step prediction variances follow from a Kalman
recursion and the expected squared prediction residuals under the
data-generating kernel follow from a joint covariance recursion for

    (K-state, model filter mean - embedded K-state).

Neither recursion forms an N x N Gram matrix, so the result does not inherit
the condition number of R_N. For smooth model kernels (nu = 5/2 at N ~ 10^3)
that condition number exceeds 1/eps and the dense route cannot resolve the
trace at all.

Transition matrices, process-noise covariances and the differences between
the two transitions are evaluated from Taylor series when theta * dt is small,
which keeps each entry accurate relative to its own (tiny) size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov

from .errors import DomainError, NumericalError
from .specfun import half_integer_index

__all__ = ["MaternStateSpace", "SequentialTerms", "is_eligible", "sequential_terms"]

_SERIES_LIMIT = 1.0  # use Taylor series while theta * dt <= this
_SERIES_TERMS = 60


def is_eligible(k_params, r_params, d):
    return d == 1 and k_params.half_integer and r_params.half_integer


class MaternStateSpace:
    """State-space form of a half-integer Matérn kernel in the unnormalised convention."""

    def __init__(self, params):
        p = half_integer_index(params.nu)
        if p is None:
            raise DomainError(f"state-space form needs half-integer nu, got {params.nu}")
        self.params = params
        self.p = p
        self.theta = params.theta
        n = p + 1
        F = np.zeros((n, n))
        F[np.arange(p), np.arange(1, n)] = 1.0
        F[p, :] = [-math.comb(n, k) * self.theta ** (n - k) for k in range(n)]
        self.F = F
        noise = np.zeros((n, n))
        noise[p, p] = 1.0
        unit = solve_continuous_lyapunov(F, -noise)
        self.q = params.diagonal / unit[0, 0]
        self.P_inf = unit * self.q
        self.noise = noise * self.q

    @property
    def dim(self):
        return self.p + 1

    def transition(self, dt):
        """Transition matrix A(dt) = exp(F dt) and process-noise covariance Q(dt)."""
        if self.theta * dt > _SERIES_LIMIT:
            A = expm(self.F * dt)
            return A, self.P_inf - A @ self.P_inf @ A.T
        n = self.dim
        A = np.eye(n)
        term = np.eye(n)
        Q = np.zeros((n, n))
        M = self.noise.copy()
        coef = dt
        for k in range(1, _SERIES_TERMS):
            term = term @ self.F * (dt / k)
            A = A + term
            # Q = sum_k dt^{k+1}/(k+1)! M_k with M_k = F M_{k-1} + M_{k-1} F^T
            Q = Q + coef * M
            M = self.F @ M + M @ self.F.T
            coef = coef * dt / (k + 1)
        return A, Q


def _embedding(n_model, n_true):
    E = np.zeros((n_model, n_true))
    m = min(n_model, n_true)
    E[np.arange(m), np.arange(m)] = 1.0
    return E


def _transition_gap(true, model, E, dt):
    """A_model E - E A_true, with the low-order cancellation done exactly."""
    if max(true.theta, model.theta) * dt > _SERIES_LIMIT:
        return expm(model.F * dt) @ E - E @ expm(true.F * dt)
    gap = np.zeros_like(E)
    tm = E.copy()
    tt = E.copy()
    coef = 1.0
    for k in range(1, _SERIES_TERMS):
        tm = model.F @ tm
        tt = tt @ true.F
        coef = coef * dt / k
        gap = gap + coef * (tm - tt)
    return gap


@dataclass(frozen=True)
class SequentialTerms:
    """Per-point terms of the sequential decomposition, in visiting order."""

    order: np.ndarray
    numerators: np.ndarray
    denominators: np.ndarray

    @property
    def ratios(self):
        return self.numerators / self.denominators

    def mean(self):
        return float(np.mean(self.ratios))


def sequential_terms(k_params, r_params, points):
    """Decomposition terms for data kernel ``k_params`` and model ``r_params`` in 1-d.

    Points are visited in increasing order; ``order`` maps visit index to the
    position in ``points``. The denominators are the model's one-step
    conditional variances and the numerators the expected squared one-step
    prediction residuals under the data-generating kernel.
    """
    x = np.asarray(points, dtype=float).reshape(-1)
    if x.size == 0:
        raise DomainError("sequential terms need at least one point")
    order = np.argsort(x, kind="stable")
    t = x[order]
    if np.any(np.diff(t) <= 0):
        raise DomainError("points must be distinct")
    true = MaternStateSpace(k_params)
    model = MaternStateSpace(r_params)
    nk, nr = true.dim, model.dim
    E = _embedding(nr, nk)
    hk = np.zeros(nk)
    hk[0] = 1.0
    N = t.size
    num = np.empty(N)
    den = np.empty(N)

    # first point: nothing to condition on
    P_pred = model.P_inf.copy()
    S = P_pred[0, 0]
    G = P_pred[:, 0] / S
    num[0] = true.P_inf[0, 0]
    den[0] = S
    T = np.outer(G, hk) - E
    sig = np.block([[true.P_inf, true.P_inf @ T.T], [T @ true.P_inf, T @ true.P_inf @ T.T]])
    P_post = _posterior(P_pred, S)

    for n in range(1, N):
        dt = t[n] - t[n - 1]
        A_k, Q_k = true.transition(dt)
        A_r, Q_r = model.transition(dt)
        gap = _transition_gap(true, model, E, dt)
        d = -gap[0, :]  # A_true[0] - (A_model E)[0]
        P_pred = A_r @ P_post @ A_r.T + Q_r
        S = P_pred[0, 0]
        if not S > 0.0:
            raise NumericalError(f"non-positive model prediction variance at visit {n + 1}")
        G = P_pred[:, 0] / S
        c = np.concatenate([d, -A_r[0, :]])
        num[n] = c @ sig @ c + Q_k[0, 0]
        den[n] = S
        M = np.block([[A_k, np.zeros((nk, nr))], [gap + np.outer(G, d), A_r - np.outer(G, A_r[0, :])]])
        B = np.vstack([np.eye(nk), np.outer(G, hk) - E])
        sig = M @ sig @ M.T + B @ Q_k @ B.T
        sig = 0.5 * (sig + sig.T)
        P_post = _posterior(P_pred, S)
    return SequentialTerms(order, num, den)


def _posterior(P_pred, S):
    """State covariance after observing the first coordinate without noise."""
    P = P_pred - np.outer(P_pred[:, 0], P_pred[0, :]) / S
    P[0, :] = 0.0
    P[:, 0] = 0.0
    return 0.5 * (P + P.T)
