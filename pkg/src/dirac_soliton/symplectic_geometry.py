"""The symplectic form Omega, the matrix Omega(v) with its quadrature K,
and the symplectic orthogonal projection onto the solitary manifold.

Omega(Y1, Y2) = <psi1_1, psi2_2> - <psi2_1, psi1_2> + q1.p2 - p1.q2 in the
real-pair notation; with the complex field convention used here this is
Im <psi_1, psi_2>_C + q1.p2 - p1.q2, and the field inner product is taken
in k-space through the exact discrete Parseval identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field_grid import FOURIER, GridSpec, SpinorField
from .phase_space import PhaseState
from .quadrature import QuadResult, tensor_trapezoid_3d
from .soliton_manifold import (
    SolitonParams,
    TangentBasis,
    soliton_state,
    tangent_basis,
    velocity_from_momentum,
)
from .spinor_algebra import ChargeDensity

K_QUAD_NODES = 96          # pinned quadrature for the matrix K
K_QUAD_KMAX_SIGMAS = 8.0   # box half-width in units of 1/sigma


def omega(Y1: PhaseState, Y2: PhaseState) -> float:
    """The symplectic form; antisymmetric, grid-consistent."""
    if Y1.grid != Y2.grid:
        raise ValueError("grid mismatch")
    a = Y1.psi.to_fourier()
    b = Y2.psi.to_fourier()
    field_part = float(np.imag(np.sum(a.data.conj() * b.data))) * a.grid.dk**3
    return field_part + float(Y1.q @ Y2.p - Y1.p @ Y2.q)


def _omega_rows(tb: TangentBasis, psi_hat: np.ndarray, q: np.ndarray,
                p: np.ndarray, b_phase: np.ndarray) -> np.ndarray:
    """Omega(Y, tau_j(sigma)) for all six j at once; Y given by raw k-space
    field data plus (q, p); tau fields are translated by the phase."""
    dk3 = tb.grid.dk**3
    fields = tb.field_hat * b_phase
    r = np.imag(np.einsum("cxyz,jcxyz->j", psi_hat.conj(), fields)) * dk3
    r += tb.p_parts @ q - tb.q_parts @ p
    return r


def omega_matrix_grid(tb: TangentBasis) -> np.ndarray:
    """The 6x6 matrix with entries Omega(tau_l, tau_j) (l row, j column),
    computed from grid inner products of the tangent fields."""
    dk3 = tb.grid.dk**3
    gram = np.einsum("lcxyz,jcxyz->lj", tb.field_hat.conj(), tb.field_hat)
    out = np.imag(gram) * dk3
    out += tb.q_parts @ tb.p_parts.T - tb.p_parts @ tb.q_parts.T
    return out


def matrix_K(v, rho: ChargeDensity, n: int = K_QUAD_NODES,
             kmax: float | None = None) -> QuadResult:
    """K_jl = integral k_j k_l B(k) (k^2 + m^2 + 3 (v.k)^2) / D^3 dk with
    D = k^2 + m^2 - (v.k)^2, by the pinned tensor trapezoid."""
    v = np.asarray(v, dtype=float)
    m = rho.mass
    if kmax is None:
        kmax = K_QUAD_KMAX_SIGMAS / rho.sigma

    def integrand(k1, k2, k3):
        k2tot = k1**2 + k2**2 + k3**2
        B = rho.mass * rho.fourier(k2tot) ** 2
        vk = v[0] * k1 + v[1] * k2 + v[2] * k3
        D = k2tot + m * m - vk**2
        core = B * (k2tot + m * m + 3.0 * vk**2) / D**3
        ks = (k1, k2, k3)
        out = np.empty((3, 3) + np.broadcast_shapes(k1.shape, k2.shape,
                                                    k3.shape))
        for i in range(3):
            for j in range(3):
                out[i, j] = ks[i] * ks[j] * core
        return out

    return tensor_trapezoid_3d(integrand, kmax, n)


@dataclass(frozen=True)
class OmegaMatrix:
    """Closed-form Omega(v): the 3x3 block Omega^+ and the full 6x6 form."""

    block: np.ndarray
    quad_error: float
    full: np.ndarray = field(init=False)

    def __post_init__(self):
        full = np.zeros((6, 6))
        full[:3, 3:] = self.block
        full[3:, :3] = -self.block
        object.__setattr__(self, "full", full)

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.block)))


def omega_plus(v, rho: ChargeDensity, n: int = K_QUAD_NODES) -> OmegaMatrix:
    """Omega^+(v) = K + gamma E + gamma^3 v (x) v, symmetric positive
    definite for |v| < 1."""
    v = np.asarray(v, dtype=float)
    v2 = float(v @ v)
    if v2 >= 1.0:
        raise ValueError("|v| must be < 1")
    g = 1.0 / np.sqrt(1.0 - v2)
    K = matrix_K(v, rho, n=n)
    block = K.value + g * np.eye(3) + g**3 * np.outer(v, v)
    return OmegaMatrix(block=block, quad_error=K.error)


def omega_vs_direct(v, rho: ChargeDensity, grid: GridSpec) -> float:
    """Maximum relative discrepancy over the 36 entries between the
    grid-computed Omega(tau_l, tau_j) and the closed form (grid inner
    products versus momentum-space quadrature, two independent routes)."""
    tb = tangent_basis(v, rho, grid)
    grid_mat = omega_matrix_grid(tb)
    closed = omega_plus(v, rho).full
    scale = np.max(np.abs(closed))
    return float(np.max(np.abs(grid_mat - closed)) / scale)


@dataclass(frozen=True)
class ProjectionResult:
    params: SolitonParams
    Z: PhaseState
    residuals: np.ndarray
    iterations: int
    converged: bool


class ProjectionError(RuntimeError):
    """Raised when the Newton solve does not converge (state left the
    neighborhood of the solitary manifold where the projection is
    defined)."""


def project_to_manifold(Y: PhaseState, rho: ChargeDensity,
                        sigma_guess: SolitonParams | None = None,
                        tol: float = 1e-10, max_iter: int = 50,
                        raise_on_failure: bool = True) -> ProjectionResult:
    """Symplectic orthogonal projection: find sigma = (b, v) with
    Omega(Y - S(sigma), tau_j(sigma)) = 0 for j = 1..6 and return sigma
    with the transversal component Z = Y - S(sigma).

    Damped Newton on sigma in R^6; the Jacobian is approximated by the
    invertible matrix -Omega(tau_l, tau_j), exact up to O(||Z||). The
    initial guess defaults to (q, v(p)) read off the state.
    """
    Yk = Y.to_fourier()
    grid = Y.grid
    if sigma_guess is None:
        sigma_guess = SolitonParams(b=Yk.q, v=velocity_from_momentum(Yk.p))

    b = sigma_guess.b.copy()
    v = sigma_guess.v.copy()
    tb = None
    v_cached = None

    def residuals_at(b_, v_):
        nonlocal tb, v_cached
        if v_cached is None or not np.array_equal(v_cached, v_):
            tb = tangent_basis(v_, rho, grid)
            v_cached = v_.copy()
        S = soliton_state(SolitonParams(b_, v_), rho, grid)
        dpsi = Yk.psi.data - S.psi.data
        phase = grid.phase_shift(b_)
        r = _omega_rows(tb, dpsi, Yk.q - S.q, Yk.p - S.p, phase)
        return r, S

    r, S = residuals_at(b, v)
    scale = max(1.0, Yk.psi.norm())
    it = 0
    converged = bool(np.max(np.abs(r)) <= tol * scale)
    while not converged and it < max_iter:
        J = -omega_matrix_grid(tb).T
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        for _ in range(12):
            b_new = b + step * delta[:3]
            v_new = v + step * delta[3:]
            if np.linalg.norm(v_new) < 1.0:
                r_new, S_new = residuals_at(b_new, v_new)
                if np.max(np.abs(r_new)) < np.max(np.abs(r)):
                    break
            step *= 0.5
        else:
            break
        b, v, r, S = b_new, v_new, r_new, S_new
        it += 1
        converged = bool(np.max(np.abs(r)) <= tol * scale)

    if not converged and raise_on_failure:
        raise ProjectionError(
            f"projection did not converge: max residual {np.max(np.abs(r)):.3e}"
            f" after {it} iterations")
    params = SolitonParams(b, v)
    Z = Yk - soliton_state(params, rho, grid).to_fourier()
    return ProjectionResult(params=params, Z=Z, residuals=r, iterations=it,
                            converged=converged)


def symplectic_orthogonalize(Z: PhaseState, tb: TangentBasis,
                             b=None) -> PhaseState:
    """Remove the tangent components of Z: returns Z - sum c_l tau_l with
    Omega(result, tau_j) = 0 for all j (used to build transversal data)."""
    Zk = Z.to_fourier()
    grid = Z.grid
    phase = grid.phase_shift(b) if b is not None else np.ones(1)
    r = _omega_rows(tb, Zk.psi.data, Zk.q, Zk.p, phase)
    M = omega_matrix_grid(tb).T        # M[j,l] = Omega(tau_l, tau_j)
    c = np.linalg.solve(M, r)
    fields = tb.field_hat * phase
    new_psi = Zk.psi.data - np.tensordot(c, fields, axes=(0, 0))
    new_q = Zk.q - c @ tb.q_parts
    new_p = Zk.p - c @ tb.p_parts
    return PhaseState(SpinorField(grid, new_psi, FOURIER), new_q, new_p)
