"""Solvers for the mask-refinement program.

The refined saliency m* minimizes

    J(m) = (m - m0)^T Lambda (m - m0) + lam * m^T L m

where Lambda = diag(confidence weights) is positive definite and L is the
graph Laplacian. The objective is strictly convex; the unique minimizer
solves the linear system (Lambda + lam * L) m = Lambda m0, which is solved
either by a dense symmetric factorization or by Jacobi-preconditioned
conjugate gradients.

All arithmetic is float64. Matrix-vector products delegate to BLAS with a
fixed thread count, so repeated runs on identical inputs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse

from .attention import confidence_weights, symmetrize
from .config import RefineConfig
from .errors import NumericalError, ShapeError, ValidationError
from .graph import laplacian, quadratic_form


@dataclass
class RefineResult:
    """Solver output: refined map plus bookkeeping.

    ``cg_iterations`` is 0 for the dense solver. ``converged`` is False only
    when conjugate gradients hit its iteration cap; ``m_star`` then holds the
    best iterate seen and ``residual_norm`` its residual.
    """

    m_star: np.ndarray
    objective_initial: float
    objective_final: float
    solver_used: str
    cg_iterations: int
    residual_norm: float
    converged: bool = True


def _check_inputs(m, m0, weights, L, lam):
    m = np.asarray(m, dtype=np.float64)
    m0 = np.asarray(m0, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if m.ndim != 1 or m0.shape != m.shape or w.shape != m.shape:
        raise ShapeError(
            f"m {m.shape}, m0 {m0.shape}, weights {w.shape} must be equal-length vectors"
        )
    if L.shape != (m.size, m.size):
        raise ShapeError(f"L has shape {L.shape}, expected {(m.size, m.size)}")
    if not lam >= 0:
        raise ValidationError(f"lambda must be >= 0, got {lam!r}")
    return m, m0, w


def objective(m, m0, weights, L, lam: float) -> float:
    """Fidelity (m-m0)^T Lambda (m-m0) plus lam times smoothness m^T L m."""
    m, m0, w = _check_inputs(m, m0, weights, L, lam)
    d = m - m0
    fidelity = float(d @ (w * d))
    return fidelity + lam * quadratic_form(L, m)


def gradient(m, m0, weights, L, lam: float) -> np.ndarray:
    """Gradient 2 Lambda (m - m0) + 2 lam L m of the objective."""
    m, m0, w = _check_inputs(m, m0, weights, L, lam)
    return 2.0 * w * (m - m0) + 2.0 * lam * (L @ m)


def _l_diagonal(L) -> np.ndarray:
    if sparse.issparse(L):
        return np.asarray(L.diagonal(), dtype=np.float64)
    return np.ascontiguousarray(np.diagonal(L)).astype(np.float64)


def _result(m_star, m0, weights, L, lam, solver, iters, residual, converged=True):
    return RefineResult(
        m_star=m_star,
        objective_initial=objective(m0, m0, weights, L, lam),
        objective_final=objective(m_star, m0, weights, L, lam),
        solver_used=solver,
        cg_iterations=iters,
        residual_norm=float(residual),
        converged=converged,
    )


def solve_dense(m0, weights, L, lam: float) -> RefineResult:
    """Solve (Lambda + lam L) m = Lambda m0 by direct factorization.

    Uses a Cholesky factorization for the symmetric positive-definite case
    and falls back to LU when L is asymmetric (no-symmetrize ablation; the
    system is still strictly diagonally dominant, hence nonsingular).
    """
    _, m0, w = _check_inputs(m0, m0, weights, L, lam)
    dense_l = L.toarray() if sparse.issparse(L) else np.asarray(L, dtype=np.float64)
    A = lam * dense_l
    A[np.diag_indices_from(A)] += w
    b = w * m0
    symmetric = np.array_equal(dense_l, dense_l.T)
    try:
        if symmetric:
            m_star = scipy.linalg.cho_solve(
                scipy.linalg.cho_factor(A, lower=True, check_finite=False), b,
                check_finite=False,
            )
        else:
            m_star = np.linalg.solve(A, b)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(
            f"factorization failed: {exc} "
            f"(lambda={lam!r}, weight range [{w.min()!r}, {w.max()!r}])"
        ) from exc
    residual = np.linalg.norm(A @ m_star - b)
    return _result(m_star, m0, w, L, lam, "dense", 0, residual)


def solve_cg(m0, weights, L, lam: float, tol: float = 1e-8,
             max_iter: int | None = None) -> RefineResult:
    """Jacobi-preconditioned conjugate gradients on the same system.

    Converges when ||r|| <= tol * ||Lambda m0||. If the iteration cap is
    reached first the result carries the best iterate seen, its residual
    norm, and ``converged=False``; the caller decides what to do with it.
    """
    _, m0, w = _check_inputs(m0, m0, weights, L, lam)
    n = m0.size
    if max_iter is None:
        max_iter = 10 * n
    if not tol > 0:
        raise ValidationError(f"cg_tol must be > 0, got {tol!r}")
    if max_iter < 1:
        raise ValidationError(f"cg_max_iter must be >= 1, got {max_iter!r}")

    b = w * m0
    precond = 1.0 / (w + lam * _l_diagonal(L))

    def matvec(v):
        return w * v + lam * (L @ v)

    x = m0.copy()
    r = b - matvec(x)
    target = float(tol * np.linalg.norm(b))
    best_x, best_rnorm = x.copy(), float(np.linalg.norm(r))
    iters = 0
    converged = best_rnorm <= target
    if not converged:
        z = precond * r
        p = z.copy()
        rz = float(r @ z)
        for iters in range(1, max_iter + 1):
            Ap = matvec(p)
            pAp = float(p @ Ap)
            if pAp <= 0:
                # only reachable with invariant-violating inputs
                raise NumericalError("system matrix is not positive definite under cg")
            step = rz / pAp
            x = x + step * p
            r = r - step * Ap
            rnorm = float(np.linalg.norm(r))
            if rnorm < best_rnorm:
                best_x, best_rnorm = x.copy(), rnorm
            if rnorm <= target:
                converged = True
                break
            z = precond * r
            rz_next = float(r @ z)
            p = z + (rz_next / rz) * p
            rz = rz_next
    return _result(best_x, m0, w, L, lam, "cg", iters, best_rnorm, converged)


def refine(m0, S, config: RefineConfig) -> RefineResult:
    """Full single-map refinement: weights, Laplacian, then solve.

    Builds the confidence weights from m0 itself, symmetrizes S (unless the
    no-symmetrize ablation is on), forms the Laplacian, and dispatches to
    the solver chosen by the config. Asymmetric systems (possible only under
    the ablation) are always solved densely.
    """
    m0 = np.asarray(m0, dtype=np.float64)
    w = confidence_weights(
        m0, config.alpha,
        uniform=config.ablation_uniform_weights,
        floor=config.lambda_floor,
    )
    S_in = symmetrize(S, skip=config.ablation_no_symmetrize)
    asymmetric = config.ablation_no_symmetrize and not np.array_equal(S_in, S_in.T)
    L = laplacian(S_in, allow_asymmetric=asymmetric)
    solver = config.resolve_solver(m0.size)
    if solver == "cg" and not asymmetric:
        return solve_cg(m0, w, L, config.lam, tol=config.cg_tol,
                        max_iter=config.resolve_cg_max_iter(m0.size))
    return solve_dense(m0, w, L, config.lam)
