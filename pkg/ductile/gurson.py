"""Gurson-Tvergaard-Needleman porous plasticity with non-local porosity evolution."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ductile import tensors as tn
from ductile.errors import HardeningError, ReturnMappingError
from ductile.materials import ElasticModuli, Material, VoxelState

logger = logging.getLogger(__name__)

# bound on the cosh argument of the yield function
MAX_COSH_ARG = 100.0


@dataclass(frozen=True)
class GTNParams:
    """GTN yield, coalescence and nucleation parameters (stresses in MPa)."""
    sigma_Y: float = 1000.0
    N: float = 0.1
    q1: float = 1.5
    q2: float = 1.0
    q3: float = 2.25
    f_C: float = 0.15
    f_F: float = 0.25
    f_N: float = 0.04
    eps_N: float = 0.3
    s_N: float = 0.1
    f0: float = 0.0
    f_star_max: Optional[float] = None
    tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        if self.sigma_Y <= 0.0:
            raise ValueError(f"sigma_Y must be positive, got {self.sigma_Y}")
        if not 0.0 < self.N < 1.0:
            raise ValueError(f"Hardening exponent must lie in (0, 1), got {self.N}")
        if not 0.0 < self.f_C < self.f_F:
            raise ValueError(f"Need 0 < f_C < f_F, got f_C={self.f_C}, f_F={self.f_F}")
        if self.q3 <= 0.0 or self.q1 ** 2 < self.q3:
            raise ValueError(f"Need q1^2 >= q3 > 0, got q1={self.q1}, q3={self.q3}")
        if self.s_N <= 0.0:
            raise ValueError(f"s_N must be positive, got {self.s_N}")
        if not 0.0 <= self.f0 < 1.0:
            raise ValueError(f"Initial porosity must lie in [0, 1), got {self.f0}")
        if self.f_star_max is None:
            object.__setattr__(self, "f_star_max", 0.9 * self.f_V)
        if not 0.0 < self.f_star_max < self.f_V:
            raise ValueError(f"f_star_max must lie in (0, {self.f_V:.6g}), got {self.f_star_max}")

    @property
    def f_V(self) -> float:
        """Effective porosity at which the yield surface collapses."""
        return (self.q1 + math.sqrt(self.q1 ** 2 - self.q3)) / self.q3


def hardening_aravas(
    eps0_p,
    sigma_Y: float,
    mu: float,
    N: float,
    with_slope: bool = False,
    tol: float = 1e-14,
    max_iter: int = 100,
):
    """Flow stress from sigma0/sigma_Y = (sigma0/sigma_Y + 3 mu eps0_p / sigma_Y)^N.

    Solved per entry by Newton iterations safeguarded by bisection on
    x = sigma0/sigma_Y >= 1. With with_slope, also returns d(sigma0)/d(eps0_p).
    """
    eps = np.asarray(eps0_p, dtype=float)
    if np.any(eps < 0.0):
        raise ValueError(f"Matrix plastic strain must be non-negative, min is {eps.min()}")
    if not 0.0 < N < 1.0:
        raise ValueError(f"Hardening exponent must lie in (0, 1), got {N}")

    c = 3.0 * mu * eps / sigma_Y
    lo = np.ones_like(c)
    hi = 1.0 + 2.0 ** (N / (1.0 - N)) + (2.0 * c) ** N
    x = np.ones_like(c)
    converged = np.zeros(c.shape, dtype=bool)
    for _ in range(max_iter):
        y = (x + c) ** N
        h = x - y
        converged = np.abs(h) <= tol * x
        if np.all(converged):
            break
        lo = np.where(h < 0.0, x, lo)
        hi = np.where(h > 0.0, x, hi)
        step = h / (1.0 - N * y / (x + c))
        x_new = x - step
        outside = (x_new <= lo) | (x_new >= hi)
        x = np.where(converged, x, np.where(outside, 0.5 * (lo + hi), x_new))
    else:
        y = (x + c) ** N
        converged = np.abs(x - y) <= tol * x
        if not np.all(converged):
            worst = float(np.max(np.abs(x - y)))
            raise HardeningError(
                f"Aravas hardening did not converge (residual {worst:.3e})", eps0_p=eps[~converged]
            )

    sigma0 = sigma_Y * x
    if not with_slope:
        return sigma0
    w = N * (x + c) ** (N - 1.0)
    slope = 3.0 * mu * w / (1.0 - w)
    return sigma0, slope


def effective_porosity(f, params: GTNParams) -> np.ndarray:
    """Coalescence acceleration of the void fraction, capped at f_star_max."""
    f = np.asarray(f, dtype=float)
    accel = (params.f_V - params.f_C) / (params.f_F - params.f_C)
    f_star = np.where(
        f < params.f_C,
        f,
        np.where(f < params.f_F, params.f_C + accel * (f - params.f_C), params.f_V),
    )
    return np.minimum(f_star, params.f_star_max)


def nucleation_rate(eps0_p_bar, params: GTNParams) -> np.ndarray:
    """Strain-controlled Gaussian nucleation intensity."""
    z = (np.asarray(eps0_p_bar, dtype=float) - params.eps_N) / params.s_N
    return params.f_N / (params.s_N * math.sqrt(2.0 * math.pi)) * np.exp(-0.5 * z ** 2)


def gtn_yield(p, q, sigma0, f_star, params: GTNParams) -> np.ndarray:
    """Yield function in terms of the pressure p = -tr(sigma)/3 and the von Mises stress q."""
    a = np.clip(1.5 * params.q2 * p / sigma0, -MAX_COSH_ARG, MAX_COSH_ARG)
    return (q / sigma0) ** 2 + 2.0 * f_star * params.q1 * np.cosh(a) - 1.0 - params.q3 * f_star ** 2


def update_porosity(f_n, f_star_n, eps_bar_np1, eps_bar_n, tr_bar_np1, tr_bar_n, params: GTNParams):
    """Backward-Euler porosity from the non-local increments; f and f_star never decrease."""
    d_eps_bar = eps_bar_np1 - eps_bar_n
    d_tr = tr_bar_np1 - tr_bar_n
    f = (f_n + nucleation_rate(eps_bar_np1, params) * d_eps_bar + d_tr) / (1.0 + d_tr)
    f = np.clip(np.maximum(f, f_n), 0.0, 1.0)
    f_star = np.maximum(f_star_n, effective_porosity(f, params))
    return f, f_star


class _MatrixStrain:
    """Matrix plastic strain from the plastic work identity (e - e_n)(1 - f) sigma0(e) = W."""

    def __init__(self, e_n, f, sigma_Y, mu, N):
        self.e_n = e_n
        self.one_minus_f = np.maximum(1.0 - f, 1e-8)
        self.sigma_Y, self.mu, self.N = sigma_Y, mu, N

    def solve(self, W, tol=1e-12, max_iter=60):
        """Returns (e, sigma0(e), sigma0'(e), dg/de)."""
        e_n, omf = self.e_n, self.one_minus_f
        W = np.maximum(W, 0.0)
        s_n = hardening_aravas(e_n, self.sigma_Y, self.mu, self.N)
        # unknown is the increment d = e - e_n, bracketed by [0, W / ((1 - f) sigma0(e_n))]
        lo = np.zeros_like(W)
        hi = W / (omf * s_n)
        d = hi.copy()
        for _ in range(max_iter):
            s0, ds0 = hardening_aravas(e_n + d, self.sigma_Y, self.mu, self.N, with_slope=True)
            g = d * omf * s0 - W
            done = (np.abs(g) <= tol * W) | (hi - lo <= 1e-15 * (e_n + hi))
            if np.all(done):
                break
            gp = omf * (s0 + d * ds0)
            lo = np.where(g < 0.0, d, lo)
            hi = np.where(g > 0.0, d, hi)
            d_new = d - g / gp
            outside = (d_new < lo) | (d_new > hi)
            d = np.where(done, d, np.where(outside, 0.5 * (lo + hi), d_new))
        else:
            raise HardeningError("matrix plastic strain update did not converge", eps0_p=e_n + d)
        s0, ds0 = hardening_aravas(e_n + d, self.sigma_Y, self.mu, self.N, with_slope=True)
        gp = omf * (s0 + d * ds0)
        return e_n + d, s0, ds0, gp


def _residuals(x1, x2, p_tr, q_tr, f_star, matrix: _MatrixStrain, K, mu, params: GTNParams):
    """Scaled return-mapping residuals, Jacobian and partials for the tangent.

    Unknowns are the volumetric (x1) and deviatoric (x2) plastic strain increments.
    """
    q1, q2, q3 = params.q1, params.q2, params.q3
    p = p_tr + K * x1
    q = q_tr - 3.0 * mu * x2
    W = -p * x1 + q * x2
    e, s0, ds0, gp = matrix.solve(W)
    positive = W > 0.0

    a = np.clip(1.5 * q2 * p / s0, -MAX_COSH_ARG, MAX_COSH_ARG)
    sh, ch = np.sinh(a), np.cosh(a)
    fq = 3.0 * f_star * q1 * q2

    R1 = 2.0 * q * x1 / s0 + fq * sh * x2
    R2 = (q / s0) ** 2 + 2.0 * f_star * q1 * ch - 1.0 - q3 * f_star ** 2

    dR1_dp = fq * ch * 1.5 * q2 / s0 * x2
    dR1_dq = 2.0 * x1 / s0
    dR1_ds = -2.0 * q * x1 / s0 ** 2 - fq * ch * a / s0 * x2
    dR2_dp = fq * sh / s0
    dR2_dq = 2.0 * q / s0 ** 2
    dR2_ds = -2.0 * q ** 2 / s0 ** 3 - 2.0 * f_star * q1 * sh * a / s0

    # d(sigma0)/d(.) through the plastic work identity
    ds_dx1 = np.where(positive, ds0 * (-p - K * x1) / gp, 0.0)
    ds_dx2 = np.where(positive, ds0 * (q - 3.0 * mu * x2) / gp, 0.0)
    ds_dptr = np.where(positive, ds0 * (-x1) / gp, 0.0)
    ds_dqtr = np.where(positive, ds0 * x2 / gp, 0.0)

    J = np.array([
        [2.0 * q / s0 + dR1_dp * K + dR1_ds * ds_dx1,
         fq * sh - 3.0 * mu * dR1_dq + dR1_ds * ds_dx2],
        [dR2_dp * K + dR2_ds * ds_dx1,
         -3.0 * mu * dR2_dq + dR2_ds * ds_dx2],
    ])
    B = np.array([
        [dR1_dp + dR1_ds * ds_dptr, dR1_dq + dR1_ds * ds_dqtr],
        [dR2_dp + dR2_ds * ds_dptr, dR2_dq + dR2_ds * ds_dqtr],
    ])
    return {"R1": R1, "R2": R2, "J": J, "B": B, "p": p, "q": q, "e": e, "sigma0": s0}


def _solve2(A, b1, b2):
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return (A[1, 1] * b1 - A[0, 1] * b2) / det, (-A[1, 0] * b1 + A[0, 0] * b2) / det


def _residual_norm(res, mu, params: GTNParams):
    r1 = res["R1"] * 3.0 * mu / params.sigma_Y
    return np.sqrt(r1 ** 2 + res["R2"] ** 2)


def _return_map(p_tr, q_tr, f, f_star, e_n, K, mu, params: GTNParams):
    matrix = _MatrixStrain(e_n, f, params.sigma_Y, mu, params.N)
    s_n = hardening_aravas(e_n, params.sigma_Y, mu, params.N)
    a_tr = np.clip(1.5 * params.q2 * p_tr / s_n, -MAX_COSH_ARG, MAX_COSH_ARG)
    radius = np.sqrt(np.maximum(1.0 + params.q3 * f_star ** 2 - 2.0 * f_star * params.q1 * np.cosh(a_tr), 0.0))
    x1 = np.zeros_like(p_tr)
    x2 = np.maximum(q_tr - s_n * radius, 0.0) / (3.0 * mu)
    x2_max = q_tr / (3.0 * mu)

    res = _residuals(x1, x2, p_tr, q_tr, f_star, matrix, K, mu, params)
    norm = _residual_norm(res, mu, params)
    for iteration in range(params.max_iter):
        if np.all(norm <= params.tol):
            break
        d1, d2 = _solve2(res["J"], -res["R1"], -res["R2"])
        step = np.ones_like(x1)
        for _ in range(12):
            t1 = x1 + step * d1
            t2 = np.clip(x2 + step * d2, 0.0, x2_max)
            trial = _residuals(t1, t2, p_tr, q_tr, f_star, matrix, K, mu, params)
            t_norm = _residual_norm(trial, mu, params)
            worse = (t_norm > norm) & (norm > params.tol)
            if not np.any(worse) or np.min(step[worse]) < 1e-3:
                break
            step = np.where(worse, 0.5 * step, step)
        x1, x2, res, norm = t1, t2, trial, t_norm
    failed = norm > params.tol
    if np.any(failed):
        raise ReturnMappingError("GTN", int(np.sum(failed)), float(np.max(norm)))
    logger.debug("GTN return mapping: %d voxel(s), %d iteration(s)", p_tr.size, iteration)
    return x1, x2, res


def gtn_update(
    state_n: VoxelState,
    eps: np.ndarray,
    nonlocal_np1: Dict[str, np.ndarray],
    nonlocal_n: Dict[str, np.ndarray],
    moduli: ElasticModuli,
    params: GTNParams,
) -> Tuple[np.ndarray, np.ndarray, VoxelState]:
    """Backward-Euler GTN update of a voxel batch with frozen non-local fields.

    Returns: (stress, consistent tangent, new state)
    """
    K, mu = moduli.K, moduli.mu
    n = eps.shape[0]
    f, f_star = update_porosity(
        state_n.get("f"), state_n.get("f_star"),
        nonlocal_np1["eps0_p"], nonlocal_n["eps0_p"],
        nonlocal_np1["tr_eps_p"], nonlocal_n["tr_eps_p"],
        params,
    )
    e_n = state_n.get("eps0_p")

    eps_e = eps - state_n.eps_p
    p_tr = -K * tn.trace(eps_e)
    s_tr = 2.0 * mu * tn.dev(eps_e)
    q_tr = np.sqrt(1.5 * tn.ddot22(s_tr, s_tr))
    has_dir = q_tr > 1e-12 * params.sigma_Y
    safe_q = np.where(has_dir, q_tr, 1.0)
    n_dir = np.where(has_dir[:, None, None], 1.5 * s_tr / safe_q[:, None, None], 0.0)

    sigma = -p_tr[:, None, None] * tn.I2 + s_tr
    tangent = np.broadcast_to(moduli.stiffness(), (n, 3, 3, 3, 3)).copy()
    eps_p = state_n.eps_p.copy()
    e = e_n.copy()

    s_n = hardening_aravas(e_n, params.sigma_Y, mu, params.N)
    plastic = gtn_yield(p_tr, q_tr, s_n, f_star, params) > params.tol
    if np.any(plastic):
        idx = np.flatnonzero(plastic)
        x1, x2, res = _return_map(p_tr[idx], q_tr[idx], f[idx], f_star[idx], e_n[idx], K, mu, params)
        nd = n_dir[idx]
        p, q = res["p"], res["q"]
        eps_p[idx] += x1[:, None, None] * tn.I2 / 3.0 + x2[:, None, None] * nd
        sigma[idx] = -p[:, None, None] * tn.I2 + (2.0 / 3.0) * q[:, None, None] * nd
        e[idx] = np.maximum(res["e"], e_n[idx])

        J, B = res["J"], res["B"]
        m11, m21 = _solve2(J, -B[0, 0], -B[1, 0])
        m12, m22 = _solve2(J, -B[0, 1], -B[1, 1])
        ratio = np.where(has_dir[idx], q / safe_q[idx], 1.0)
        nn = tn.dyad22(nd, nd)
        r4 = tn.expand4
        tangent[idx] = (
            r4(K * (1.0 + K * m11)) * tn.II
            - r4(2.0 * mu * K * m12) * tn.dyad22(np.broadcast_to(tn.I2, nd.shape), nd)
            + r4(2.0 * mu * K * m21) * tn.dyad22(nd, np.broadcast_to(tn.I2, nd.shape))
            + r4(4.0 / 3.0 * mu * (1.0 - 3.0 * mu * m22)) * nn
            + r4(2.0 * mu * ratio) * (tn.I4d - 2.0 / 3.0 * nn)
        )

    internal = {
        "eps0_p": e,
        "f": f,
        "f_star": f_star,
        "active": plastic.astype(float),
        "eps0_p_bar": np.asarray(nonlocal_np1["eps0_p"], dtype=float).copy(),
        "tr_eps_p_bar": np.asarray(nonlocal_np1["tr_eps_p"], dtype=float).copy(),
    }
    return sigma, tangent, VoxelState(sigma=sigma, eps_p=eps_p, internal=internal)


class GursonMaterial(Material):
    """Non-local GTN matrix: regularizes the matrix plastic strain and the plastic dilatation."""
    name = "gtn"
    nonlocal_variables = ("eps0_p", "tr_eps_p")
    damage_variable = "f_star"

    def __init__(self, moduli: ElasticModuli, params: Optional[GTNParams] = None):
        super().__init__(moduli)
        self.params = params or GTNParams()

    def initial_state(self, n: int) -> VoxelState:
        state = VoxelState.zeros(n, scalars=("eps0_p", "f", "f_star", "active", "eps0_p_bar", "tr_eps_p_bar"))
        state.internal["f"][:] = self.params.f0
        state.internal["f_star"][:] = effective_porosity(self.params.f0, self.params)
        return state

    def update(self, state_n, eps, nonlocal_np1, nonlocal_n):
        return gtn_update(state_n, eps, nonlocal_np1, nonlocal_n, self.moduli, self.params)

    def local_sources(self, state: VoxelState) -> Dict[str, np.ndarray]:
        return {"eps0_p": state.get("eps0_p"), "tr_eps_p": tn.trace(state.eps_p)}

    def flow_stress(self, state: VoxelState) -> np.ndarray:
        return hardening_aravas(state.get("eps0_p"), self.params.sigma_Y, self.moduli.mu, self.params.N)

    def yield_value(self, state: VoxelState) -> np.ndarray:
        """Yield function at the stored stress and flow stress."""
        p = -tn.trace(state.sigma) / 3.0
        q = np.sqrt(1.5 * tn.ddot22(tn.dev(state.sigma), tn.dev(state.sigma)))
        return gtn_yield(p, q, self.flow_stress(state), state.get("f_star"), self.params)

    def reference_stress(self) -> float:
        return self.params.sigma_Y

    def describe(self) -> str:
        p = self.params
        return f"gtn(E={self.moduli.E:g}, nu={self.moduli.nu:g}, sigma_Y={p.sigma_Y:g}, N={p.N:g})"
