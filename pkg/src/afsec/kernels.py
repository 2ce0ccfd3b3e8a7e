"""Reusable numerical kernels.

Four independent pieces used by the solvers:

  * maximize_linear_over_ellipsoids -- maximize c'v subject to v'A_j v <= 1
    for a stack of PSD matrices A_j, via a log-barrier interior-point method
    with damped Newton steps.  v = 0 is strictly interior to every
    constraint, so no phase-I is needed.
  * golden_section_max -- derivative-free maximization of a unimodal
    function on an interval.
  * positive_quartic_root -- the unique positive root of
    c0 - c1 x - c2 x^2 - c3 x^3 - x^4 (one sign change), by exponential
    bracketing plus bisection.
  * min_norm_qp -- minimize w'w subject to equalities and inequalities
    (delegated to cvxopt's interior-point QP behind the contract; the
    wrapper reduces rank-deficient equality systems and verifies the KKT
    conditions of the returned point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadSignPattern,
    Infeasible,
    InvalidBracket,
    InvalidConstraintSet,
    NoConvergence,
    Unbounded,
)

__all__ = [
    "SolverConfig",
    "EllipsoidSet",
    "maximize_linear_over_ellipsoids",
    "golden_section_max",
    "positive_quartic_root",
    "min_norm_qp",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_LOG_PHI = math.log((1.0 + math.sqrt(5.0)) / 2.0)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps shared by all solvers."""

    feasibility_tol: float = 1e-8
    kkt_tol: float = 1e-6
    barrier_mu: float = 10.0
    barrier_t0: float = 1.0
    max_newton_iters: int = 200
    golden_tol: float = 1e-7
    root_tol: float = 1e-10

    def __post_init__(self):
        for name in (
            "feasibility_tol",
            "kkt_tol",
            "barrier_mu",
            "barrier_t0",
            "golden_tol",
            "root_tol",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_newton_iters <= 0:
            raise ValueError("max_newton_iters must be positive")


class EllipsoidSet:
    """Intersection of centered ellipsoids {v : v'A_j v <= 1}.

    Each A_j must be symmetric PSD; at least one must be positive definite
    so the intersection is bounded.  The PSD tolerance is relative to the
    matrix scale to absorb assembly noise in very ill-scaled constraints.
    """

    def __init__(self, matrices, validate: bool = True):
        A = np.asarray(matrices, dtype=float)
        if A.ndim == 2:
            A = A[None, :, :]
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise InvalidConstraintSet(f"expected stack of square matrices, got {A.shape}")
        self.A = A
        self.has_pd = True
        if validate:
            asym = np.max(np.abs(A - np.transpose(A, (0, 2, 1))))
            if asym > 1e-12:
                raise InvalidConstraintSet(f"asymmetry {asym} exceeds 1e-12")
            eigs = np.linalg.eigvalsh(A)
            scale = np.maximum(1.0, np.max(np.abs(eigs), axis=1))
            if np.any(eigs[:, 0] < -1e-10 * scale):
                raise InvalidConstraintSet("a constraint matrix is not PSD")
            self.has_pd = bool(np.any(eigs[:, 0] > 1e-12 * scale))
            if not self.has_pd:
                raise InvalidConstraintSet(
                    "need at least one positive definite constraint for boundedness"
                )

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def margins(self, v: np.ndarray) -> np.ndarray:
        """Slack 1 - v'A_j v for every constraint."""
        Av = self.A @ v
        return 1.0 - Av @ v

    def contains(self, v: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(self.margins(v) >= -tol))


def maximize_linear_over_ellipsoids(
    c, constraints: EllipsoidSet, cfg: SolverConfig | None = None, v0=None
):
    """Maximize c'v over an intersection of centered ellipsoids.

    Returns (v, value, diagnostics).  The point is strictly feasible; the
    barrier multipliers lambda_j = 1/(t s_j) certify KKT stationarity
    ||c - sum 2 lambda_j A_j v||_inf <= kkt_tol with complementary
    slackness |lambda_j (v'A_j v - 1)| = 1/t at the final barrier weight.

    `v0` optionally warm-starts the Newton iteration; it is shrunk toward
    the origin until strictly feasible, so any vector is acceptable.
    """
    cfg = cfg or SolverConfig()
    c = np.asarray(c, dtype=float)
    A = constraints.A
    m, n = A.shape[0], A.shape[1]
    if c.shape != (n,):
        raise ValueError(f"objective vector must have shape ({n},)")

    cnorm = float(np.max(np.abs(c)))
    if cnorm == 0.0:
        return np.zeros(n), 0.0, {"newton_iters": 0, "stationarity": 0.0, "gap": 0.0}

    # Boundedness along the objective ray: some constraint must grow with c.
    if float(np.max((A @ c) @ c)) <= 0.0:
        raise Unbounded("no constraint is positive definite on span(c)")

    # Strictly feasible start; v = 0 always qualifies (all margins are 1).
    # A warm-start point is pulled toward the origin so every margin is at
    # least ~2e-2, which lets the barrier begin at a much larger t.
    scale = max(1.0, cnorm)
    t = cfg.barrier_t0
    v = np.zeros(n)
    if v0 is not None:
        vw = np.asarray(v0, dtype=float)
        if np.all(np.isfinite(vw)):
            q = float(np.max((A @ vw) @ vw))
            if q > 0.98:
                vw = vw * math.sqrt(0.98 / q)
            if np.min(constraints.margins(vw)) > 1e-3:
                v = vw.copy()
                t = max(cfg.barrier_t0, 1e3 * m / scale)

    gap_coarse = 1e-2 * scale
    gap_target = 1e-7 * scale
    total_newton = 0
    A2 = A.reshape(m, n * n)

    while True:
        # Center at the current t with damped Newton.  The stop criterion
        # targets the barrier gradient directly: the final stationarity
        # residual is ||grad||_inf / t, so grad_stop/t stays far below
        # kkt_tol at every stage.
        grad_stop = 1e-8 * t * scale
        for it in range(cfg.max_newton_iters):
            Av = A @ v  # (m, n)
            s = 1.0 - Av @ v
            w1 = 2.0 / s
            grad = -t * c + w1 @ Av
            total_newton += 1
            if float(np.max(np.abs(grad))) <= grad_stop:
                break
            hess = (w1 @ A2).reshape(n, n) + (w1 * w1 * Av.T) @ Av
            try:
                dv = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                dv = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            decrement = -0.5 * float(grad @ dv)
            if decrement <= 0.0:
                break
            # Backtracking: stay strictly feasible, require simple decrease.
            phi0 = -t * float(c @ v) - float(np.sum(np.log(s)))
            alpha = 1.0
            for _ in range(60):
                vn = v + alpha * dv
                sn = 1.0 - (A @ vn) @ vn
                if np.min(sn) > 0.0:
                    phin = -t * float(c @ vn) - float(np.sum(np.log(sn)))
                    if phin <= phi0 - 0.01 * alpha * 2.0 * decrement:
                        break
                alpha *= 0.5
            else:
                break  # step stalled at numerical precision
            # Progress below the float noise of phi means the stage is as
            # centered as ill-scaled constraints allow; move on.
            if phi0 - phin <= 1e-12 * (1.0 + abs(phi0)):
                v = vn
                break
            v = vn
        else:
            raise NoConvergence(
                "barrier Newton did not center",
                {"t": t, "newton_iters": total_newton},
            )
        polished = None
        if m / t <= gap_coarse:
            # Try to land exactly on the KKT point of the near-active set;
            # success ends the barrier sweep early.
            s = constraints.margins(v)
            lam = 1.0 / (t * s)
            polished = _active_set_polish(c, A, v, lam, s, m / t, cfg.feasibility_tol)
            if polished is not None or m / t <= gap_target:
                break
        t *= cfg.barrier_mu

    if polished is not None:
        v, lam = polished
        s = constraints.margins(v)
    else:
        s = constraints.margins(v)
        lam = 1.0 / (t * s)
    stationarity = float(np.max(np.abs(c - 2.0 * (lam @ (A @ v)))))
    diagnostics = {
        "newton_iters": total_newton,
        "t_final": t,
        "gap": m / t,
        "polished": polished is not None,
        "stationarity": stationarity,
        "comp_slack": float(np.max(np.abs(lam * s))),
        "min_margin": float(np.min(s)),
    }
    if stationarity > cfg.kkt_tol * max(1.0, cnorm):
        raise NoConvergence("KKT stationarity not met", diagnostics)
    return v, float(c @ v), diagnostics


def _active_set_polish(c, A, v, lam, s, gap, feas_tol):
    """Newton projection onto the KKT system of the near-active constraints.

    Solves  c = sum_J 2 lam_j A_j v,  v'A_j v = 1 (j in J)  starting from the
    barrier point.  Returns (v, full lambda) on success, None when the guess
    is rejected (wrong active set, negative multiplier, or divergence).
    """
    m, n = A.shape[0], A.shape[1]
    eps = np.finfo(float).eps
    scale = max(1.0, float(np.max(np.abs(c))))
    absA = np.abs(A)
    for thresh in (max(1e-4, 1e3 * gap / scale), 1e-2):
        J = np.where(s <= thresh)[0]
        if J.size == 0 or J.size > n:
            continue
        AJ = A[J]
        absAJ = absA[J]
        vk = v.copy()
        lk = lam[J].copy()

        def residuals(vk, lk):
            AJv = AJ @ vk
            r1 = c - 2.0 * (lk @ AJv)
            r2 = 1.0 - AJv @ vk
            # Quadratic forms with internal cancellation (ill-scaled C_e)
            # cannot be evaluated below this rounding floor.
            noise = 64.0 * eps * (1.0 + (absAJ @ np.abs(vk)) @ np.abs(vk))
            res = max(
                float(np.max(np.abs(r1))) / scale,
                float(np.max(np.maximum(np.abs(r2) - noise, 0.0))),
            )
            return AJv, r1, r2, res

        best = np.inf
        best_state = None
        for _ in range(25):
            AJv, r1, r2, res = residuals(vk, lk)
            if res < best:
                best = res
                best_state = (vk.copy(), lk.copy())
            if res <= 1e-13:
                break
            if best_state is not None and res > 10.0 * best:
                break
            H = -2.0 * np.einsum("j,jkl->kl", lk, AJ)
            B = -2.0 * AJv.T
            K = np.block([[H, B], [B.T, np.zeros((J.size, J.size))]])
            rhs = -np.concatenate([r1, r2])
            try:
                dx = np.linalg.solve(K, rhs)
                # One step of iterative refinement recovers accuracy lost to
                # the mixed constraint scales in K.
                dx += np.linalg.solve(K, rhs - K @ dx)
            except np.linalg.LinAlgError:
                break
            vk = vk + dx[:n]
            lk = lk + dx[n:]
        if best_state is None or best > 1e-10:
            continue
        vk, lk = best_state
        if np.min(lk) < -1e-9 * scale:
            continue
        if float(np.max(np.abs(vk - v))) > 1e-2:
            continue
        margins = 1.0 - (A @ vk) @ vk
        if np.min(margins) < -feas_tol:
            continue
        full = np.zeros(m)
        full[J] = np.maximum(lk, 0.0)
        return vk, full
    return None


def golden_section_max(f, lo: float, hi: float, tol: float):
    """Golden-section search for the maximum of a unimodal f on [lo, hi].

    Returns (x, f(x)) with |x - argmax| <= tol.  Uses the fixed iteration
    count implied by the bracket/tolerance ratio; on exact ties the bracket
    shrinks from the right, so plateaus resolve to their smallest x.
    """
    if lo >= hi:
        raise InvalidBracket(f"need lo < hi, got [{lo}, {hi}]")
    h = hi - lo
    if h <= tol:
        x = 0.5 * (lo + hi)
        return x, f(x)
    n = int(math.ceil(math.log(h / tol) / _LOG_PHI))
    c = hi - _INV_PHI * h
    d = lo + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(n - 1):
        if yc >= yd:
            hi, d, yd = d, c, yc
            h *= _INV_PHI
            c = hi - _INV_PHI * h
            yc = f(c)
        else:
            lo, c, yc = c, d, yd
            h *= _INV_PHI
            d = lo + _INV_PHI * h
            yd = f(d)
    return (c, yc) if yc >= yd else (d, yd)


def positive_quartic_root(c0: float, c1: float, c2: float, c3: float, root_tol: float = 1e-10) -> float:
    """Unique positive root of P(x) = c0 - c1 x - c2 x^2 - c3 x^3 - x^4.

    The coefficient pattern (c0 > 0, c1..c3 >= 0) gives exactly one sign
    change, hence exactly one positive root; bisection on a sign-change
    bracket is therefore unconditionally robust.
    """
    if c0 <= 0.0:
        raise BadSignPattern(f"c0 must be positive, got {c0}")
    if c1 < 0.0 or c2 < 0.0 or c3 < 0.0:
        raise BadSignPattern("c1, c2, c3 must be nonnegative")

    def P(x: float) -> float:
        return c0 - x * (c1 + x * (c2 + x * (c3 + x)))

    hi = 1.0
    while P(hi) > 0.0:
        hi *= 2.0
        if hi > 1e154:
            raise BadSignPattern("no sign change found (coefficients malformed)")
    lo = 0.0
    target = root_tol * max(1.0, c0)
    x = 0.5 * (lo + hi)
    for _ in range(200):
        px = P(x)
        if abs(px) <= target or (hi - lo) <= 4.0 * np.finfo(float).eps * max(1.0, hi):
            break
        if px > 0.0:
            lo = x
        else:
            hi = x
        x = 0.5 * (lo + hi)
    return x


def _reduce_equalities(Heq: np.ndarray, beq: np.ndarray, tol: float):
    """Full-row-rank equivalent of Heq w = beq via SVD; Infeasible if inconsistent."""
    K, N = Heq.shape
    U, sv, Vt = np.linalg.svd(Heq, full_matrices=False)
    scale = sv[0] if sv.size and sv[0] > 0 else 1.0
    r = int(np.sum(sv > max(K, N) * np.finfo(float).eps * scale))
    # Residual of the least-squares solution detects inconsistent systems,
    # including the rank-0 case 0*w = b with b != 0.
    if r < K:
        w_ls = Vt[:r].T @ ((U[:, :r].T @ beq) / sv[:r]) if r > 0 else np.zeros(N)
        if np.max(np.abs(Heq @ w_ls - beq)) > tol * max(1.0, float(np.max(np.abs(beq)))):
            raise Infeasible("equality system is inconsistent")
    A_red = sv[:r, None] * Vt[:r]
    b_red = U[:, :r].T @ beq
    return A_red, b_red


def min_norm_qp(Heq, beq, Gineq=None, cfg: SolverConfig | None = None) -> np.ndarray:
    """Minimize w'w subject to Heq w = beq and Gineq w <= 0.

    Equality systems may be rank deficient; they are reduced to full row
    rank first (raising Infeasible when inconsistent).  The inequality-
    constrained case is solved by cvxopt's interior-point QP and the KKT
    conditions of the result are verified before returning.
    """
    cfg = cfg or SolverConfig()
    Heq = np.atleast_2d(np.asarray(Heq, dtype=float))
    beq = np.atleast_1d(np.asarray(beq, dtype=float))
    N = Heq.shape[1]
    A_red, b_red = _reduce_equalities(Heq, beq, cfg.feasibility_tol)

    if Gineq is None or np.size(Gineq) == 0:
        # Minimum-norm solution of a consistent full-row-rank system.
        w = A_red.T @ np.linalg.solve(A_red @ A_red.T, b_red) if A_red.shape[0] else np.zeros(N)
        return w

    G = np.atleast_2d(np.asarray(Gineq, dtype=float))
    if G.shape[1] != N:
        raise ValueError("Gineq column count mismatch")

    from cvxopt import matrix, solvers

    opts = {
        "show_progress": False,
        "abstol": 1e-10,
        "reltol": 1e-10,
        "feastol": 1e-9,
        "maxiters": 200,
    }
    P = matrix(2.0 * np.eye(N))
    q = matrix(np.zeros(N))
    Gm = matrix(G)
    h = matrix(np.zeros(G.shape[0]))
    if A_red.shape[0]:
        sol = solvers.qp(P, q, Gm, h, matrix(A_red), matrix(b_red), options=opts)
    else:
        sol = solvers.qp(P, q, Gm, h, options=opts)
    if sol["status"] == "primal infeasible":
        raise Infeasible("no point satisfies the constraint polytope")
    if sol["status"] not in ("optimal", "unknown"):
        raise NoConvergence(f"QP solver status {sol['status']}")
    w = np.array(sol["x"]).ravel()
    z = np.array(sol["z"]).ravel()
    y = np.array(sol["y"]).ravel() if A_red.shape[0] else np.zeros(0)

    scale = max(1.0, float(np.max(np.abs(w))))
    eq_res = float(np.max(np.abs(A_red @ w - b_red))) if A_red.shape[0] else 0.0
    ineq_res = float(np.max(G @ w)) if G.shape[0] else 0.0
    stat = 2.0 * w + G.T @ z
    if A_red.shape[0]:
        stat = stat + A_red.T @ y
    kkt_res = float(np.max(np.abs(stat)))
    if (
        eq_res > cfg.feasibility_tol * scale
        or ineq_res > cfg.feasibility_tol * scale
        or kkt_res > cfg.kkt_tol * scale
    ):
        raise NoConvergence(
            "QP KKT verification failed",
            {"eq_res": eq_res, "ineq_res": ineq_res, "kkt_res": kkt_res},
        )
    return w
