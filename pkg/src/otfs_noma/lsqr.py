"""Damped LSQR over matrix-free operators.

Standard Golub-Kahan bidiagonalization with the two-term update recurrence
(Paige & Saunders), extended with a damping term so the solver minimizes
||y - G x||^2 + damp^2 ||x||^2. Exactly one operator apply and one adjoint
apply per iteration; G^H G is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DimensionError
from .numerics import LinearOperator

__all__ = ["LsqrConfig", "LsqrResult", "lsqr_solve"]


@dataclass(frozen=True)
class LsqrConfig:
    max_iterations: int = 15
    tolerance: float = 1e-2  # on the relative residual ||y - Gx|| / ||y||
    damp: float = 0.0  # noise standard deviation when used as the equalizer
    # Least-squares optimality test: stop when ||G^H r|| <= tol * ||G|| ||r||.
    # Catches rhs vectors whose optimal residual is large (e.g. warm-start
    # corrections), where the relative-residual test can never fire.
    # 0 disables the test.
    optimality_tolerance: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ConfigurationError("tolerance must be positive")
        if self.damp < 0:
            raise ConfigurationError("damp must be nonnegative")
        if self.optimality_tolerance < 0:
            raise ConfigurationError("optimality_tolerance must be nonnegative")


@dataclass(frozen=True)
class LsqrResult:
    x: np.ndarray
    iterations: int
    relative_residual: float
    reason: str  # "tolerance" | "optimality" | "max_iterations" | "breakdown"
    residual_history: np.ndarray = field(default_factory=lambda: np.array([]))


def lsqr_solve(G: LinearOperator, y, cfg: LsqrConfig) -> LsqrResult:
    """Minimize ||y - Gx||^2 + damp^2 ||x||^2 over a growing Krylov subspace.

    Starts from x = 0 and stops once the estimated relative residual
    ||y - G x_u|| / ||y|| drops to cfg.tolerance or u reaches
    cfg.max_iterations.
    """
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim != 1 or y.shape[0] != G.out_dim:
        raise DimensionError(
            f"rhs of length {y.shape[0] if y.ndim == 1 else y.shape} "
            f"does not match operator {G.shape}")

    n = G.in_dim
    x = np.zeros(n, dtype=np.complex128)
    bnorm = float(np.linalg.norm(y))
    if bnorm == 0.0:
        return LsqrResult(x, 0, 0.0, "tolerance")

    damp = cfg.damp
    dampsq = damp * damp

    beta = bnorm
    u = y / beta
    v = G.adjoint_apply(u)
    alpha = float(np.linalg.norm(v))
    if alpha == 0.0:
        # y is orthogonal to the range of G; x = 0 is optimal.
        return LsqrResult(x, 0, 1.0, "breakdown")
    v = v / alpha
    w = v.copy()

    phibar = beta
    rhobar = alpha

    # Running estimates for ||y - Gx|| without extra operator applies.
    res2 = 0.0
    xxnorm = 0.0
    z = 0.0
    cs2, sn2 = -1.0, 0.0

    rel_res = 1.0
    history = [bnorm]
    reason = "max_iterations"
    itn = 0
    anorm2 = alpha * alpha

    while itn < cfg.max_iterations:
        itn += 1

        u = G.apply(v) - alpha * u
        beta = float(np.linalg.norm(u))
        anorm2 += beta * beta + dampsq
        if beta > 0:
            u = u / beta
            v = G.adjoint_apply(u) - beta * v
            alpha = float(np.linalg.norm(v))
            if alpha > 0:
                v = v / alpha
            anorm2 += alpha * alpha

        # Rotation eliminating the damping term.
        if damp > 0:
            rhobar1 = np.hypot(rhobar, damp)
            cs1 = rhobar / rhobar1
            sn1 = damp / rhobar1
            psi = sn1 * phibar
            phibar = cs1 * phibar
        else:
            rhobar1 = rhobar
            psi = 0.0

        # Rotation eliminating the subdiagonal of the bidiagonal system.
        rho = np.hypot(rhobar1, beta)
        cs = rhobar1 / rho
        sn = beta / rho
        theta = sn * alpha
        rhobar = -cs * alpha
        phi = cs * phibar
        phibar = sn * phibar

        x += (phi / rho) * w
        w = v - (theta / rho) * w

        # Norm estimates (Paige & Saunders); r1 is the residual of y - Gx.
        delta = sn2 * rho
        gambar = -cs2 * rho
        rhs = phi - delta * z
        gamma = np.hypot(gambar, theta)
        cs2 = gambar / gamma
        sn2 = theta / gamma
        z = rhs / gamma
        xxnorm += z * z

        res2 += psi * psi
        rnorm = np.sqrt(res2 + phibar * phibar)  # augmented residual, monotone
        r1sq = rnorm * rnorm - dampsq * xxnorm
        r1norm = np.sqrt(abs(r1sq))

        # Augmented residual never increases (small slack for roundoff).
        assert rnorm <= history[-1] * (1.0 + 1e-10) + 1e-14
        history.append(rnorm)

        rel_res = r1norm / bnorm
        if rel_res <= cfg.tolerance:
            reason = "tolerance"
            break
        # ||G^H r|| for the damped system (Paige & Saunders stopping test 2).
        arnorm = alpha * abs(sn * phi)
        if (cfg.optimality_tolerance > 0
                and arnorm <= cfg.optimality_tolerance
                * np.sqrt(anorm2) * rnorm + np.finfo(float).tiny):
            reason = "optimality"
            break
        if beta == 0.0 or alpha == 0.0:
            reason = "breakdown"
            break

    return LsqrResult(x, itn, float(rel_res), reason, np.array(history))
