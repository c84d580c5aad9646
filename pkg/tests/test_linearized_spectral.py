"""Tests for the linearized generator, the matrix symbols L/H/M with the
cut boundary values, the closed-form translated kernel, and the
symplectic-orthogonality functionals."""

import numpy as np
import pytest
from scipy.special import exp1, expi, kv

from dirac_soliton.field_grid import (
    FOURIER,
    GridSpec,
    SpinorField,
    gaussian_packet,
    shift_field,
)
from dirac_soliton.linearized_spectral import (
    _scaled_e1,
    apply_A,
    boost_matrix,
    cut_endpoints,
    f_jj_checks,
    g_lambda,
    invertibility_scan,
    linearized_operator,
    matrix_H,
    matrix_H_on_axis,
    matrix_L,
    orthogonality_check,
    phi_lambda,
    phi_prime_zero,
    spectral_matrices,
    velocity_frame,
)
from dirac_soliton.phase_space import PhaseState, zero_state
from dirac_soliton.quadrature import gauss_panels_1d, monte_carlo_gaussian_3d
from dirac_soliton.soliton_manifold import (
    SolitonParams,
    momentum_jacobian,
    soliton_state,
    tangent_basis,
)
from dirac_soliton.spinor_algebra import ChargeDensity
from dirac_soliton.symplectic_geometry import omega, project_to_manifold

RHO = ChargeDensity()
V6 = np.array([0.6, 0.0, 0.0])

# Frozen products of the pinned engines (defaults A = sigma = m = 1).
L11_V06 = 1.104368177407497
L22_V06 = 1.002698984746731
L11_REST = 0.9572778310966837
H11_AX03 = 1.1837320690495599
H11_AX12 = -0.25772658113539315 - 1.51317864339927j
H22_AX12 = 1.4578380029611249 - 1.7688860189875386j
M11_LIMIT_V06 = -0.7085182441704763j


def _random_state(grid, seed, decay=4.0):
    r = np.random.default_rng(seed)
    shape = (4, grid.N, grid.N, grid.N)
    data = r.standard_normal(shape) + 1j * r.standard_normal(shape)
    data *= np.exp(-grid.k2 / decay)
    return PhaseState(SpinorField(grid, data, FOURIER),
                      r.standard_normal(3), r.standard_normal(3))


# ---------------------------------------------------------------------------
# frames and the scaled exponential integral
# ---------------------------------------------------------------------------

def test_velocity_frame_rotation():
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = rng.uniform(-0.5, 0.5, 3)
        s, R = velocity_frame(v)
        assert abs(s - np.linalg.norm(v)) < 1e-14
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-14)
        assert np.allclose(R @ v, [s, 0, 0], atol=1e-14)
    s, R = velocity_frame([0.0, 0.0, 0.0])
    assert s == 0.0 and np.array_equal(R, np.eye(3))
    s, R = velocity_frame([0.3, 0.0, 0.0])
    assert np.array_equal(R, np.eye(3))
    with pytest.raises(ValueError):
        velocity_frame([0.8, 0.8, 0.0])


def test_boost_matrix_is_inverse_momentum_jacobian():
    B = boost_matrix(V6)
    assert np.allclose(np.diag(B), [0.512, 0.8, 0.8], atol=1e-15)
    for v in ([0.0, 0.0, 0.0], [0.3, -0.4, 0.1]):
        prod = boost_matrix(v) @ momentum_jacobian(v)
        assert np.max(np.abs(prod - np.eye(3))) < 1e-14


def test_scaled_e1_matches_direct_product():
    # points where exp(z)*exp1(z) is still safe to form directly
    for z in (35.0 + 0j, 30.0 + 20.0j, -35.0 + 2.0j, 80.0 - 15.0j):
        direct = np.exp(z) * exp1(z)
        mine = _scaled_e1(np.array([z]))[0]
        assert abs(mine - direct) / abs(direct) < 1e-12


def test_scaled_e1_plemelj_limit():
    # E1(x + i0) = -Ei(-x) - i pi for x < 0
    for x in (-0.5, -3.0, -12.0, -25.0):
        lim = np.exp(x) * (-expi(-x) - 1j * np.pi)
        above = _scaled_e1(np.array([x + 1e-12j]))[0]
        assert abs(above - lim) < 1e-10


# ---------------------------------------------------------------------------
# the static matrix L and the dispersive matrix H
# ---------------------------------------------------------------------------

def test_matrix_l_diagonal_positive_frozen():
    res = matrix_L(V6, RHO)
    L = res.value
    off = L - np.diag(np.diag(L))
    assert np.max(np.abs(off)) < 1e-12
    assert np.all(np.diag(L) > 0)
    assert abs(L[0, 0] - L11_V06) < 1e-9
    assert abs(L[1, 1] - L22_V06) < 1e-9
    assert abs(L[1, 1] - L[2, 2]) < 1e-12
    rest = matrix_L(0.0, RHO).value
    assert np.allclose(np.diag(rest), L11_REST, atol=1e-9)


def test_matrix_l_against_monte_carlo():
    s, m = 0.6, RHO.mass
    C = RHO.mass * RHO.amplitude**2 * RHO.sigma**6

    def rest(k1, k2, k3):
        k2tot = k1**2 + k2**2 + k3**2
        return C * k1**2 / (k2tot + m * m - (s * k1) ** 2)

    est, err = monte_carlo_gaussian_3d(rest, RHO.sigma, 400_000, 5)
    assert err < 2e-3
    assert abs(L11_V06 - est) < 4.0 * err


def test_matrix_l_rejects_oblique_velocity():
    with pytest.raises(ValueError):
        matrix_L(np.array([0.3, 0.2, 0.0]), RHO)


def test_matrix_h_at_zero_equals_l():
    # two independent engines: cylindrical E1 reduction vs 3D trapezoid
    H0 = matrix_H(0.0, 0.6, RHO).value
    L = matrix_L(V6, RHO).value
    assert np.max(np.abs(H0 - L)) < 1e-8
    assert np.max(np.abs(H0.imag)) == 0.0


def test_matrix_h_against_monte_carlo():
    lam, s, m = 0.5, 0.6, RHO.mass
    C = RHO.mass * RHO.amplitude**2 * RHO.sigma**6

    def rest(k1, k2, k3):
        k2tot = k1**2 + k2**2 + k3**2
        return C * k1**2 / (k2tot + m * m - (s * k1 - 1j * lam) ** 2)

    est, err = monte_carlo_gaussian_3d(rest, RHO.sigma, 400_000, 7)
    H = matrix_H(lam, 0.6, RHO).value
    assert abs(H[0, 0] - est) < 4.0 * err


def test_matrix_h_domain_validation():
    with pytest.raises(ValueError):
        matrix_H(1.2j, 0.6, RHO)        # on the cut, mu = 0.8
    with pytest.raises(ValueError):
        matrix_H(-0.1 + 0.2j, 0.6, RHO)  # left half plane
    # strictly between the branch points is regular
    H = matrix_H(0.5j, 0.6, RHO).value
    assert np.max(np.abs(H.imag)) < 1e-14


def test_matrix_h_on_axis_below_cut():
    res = matrix_H_on_axis(0.3, 0.6, RHO)
    assert abs(res.value[0, 0] - H11_AX03) < 1e-9
    assert np.max(np.abs(res.value.imag)) == 0.0


def _plemelj_oracle(omega_, speed):
    """H(i w + 0) integrating the exact boundary values of the inner
    transverse integral, instead of extrapolating in eps."""
    m, s2 = RHO.mass, RHO.sigma**2
    C = RHO.mass * RHO.amplitude**2 * RHO.sigma**6
    sgn = np.sign(omega_)
    mu = m * np.sqrt(1 - speed**2)

    def inner(c):
        z = s2 * np.asarray(c, dtype=complex)
        out = np.empty_like(z)
        neg = z.real < 0
        zr = z[neg].real
        out[neg] = np.exp(zr) * (-expi(-zr) - 1j * np.pi * sgn)
        out[~neg] = _scaled_e1(z[~neg])
        return out

    def integrand(k1):
        c = k1**2 + m * m - (speed * k1 + omega_) ** 2
        i0 = inner(c)
        i1 = 1.0 / s2 - c * i0
        gauss = np.exp(-s2 * k1**2)
        return np.stack([np.pi * C * k1**2 * gauss * i0,
                         0.5 * np.pi * C * gauss * i1])

    g2 = 1.0 / (1 - speed**2)
    breaks = [g2 * speed * omega_]
    if abs(omega_) >= mu:
        r = np.sqrt(omega_**2 - mu**2)
        for kc in (g2 * (speed * omega_ - r), g2 * (speed * omega_ + r)):
            breaks.append(kc)
            breaks += [kc + o for o in (1, 1e-1, 1e-2, 1e-3)]
            breaks += [kc - o for o in (1, 1e-1, 1e-2, 1e-3)]
    kmax = 8.0 / RHO.sigma + abs(g2 * speed * omega_)
    res = gauss_panels_1d(integrand, -kmax, kmax, breakpoints=breaks,
                          order=40, panels_per_interval=8)
    return np.diag([res.value[0], res.value[1], res.value[1]])


def test_matrix_h_cut_extrapolation_against_plemelj():
    for om in (1.2, 3.0, -1.2):
        ax = matrix_H_on_axis(om, 0.6, RHO)
        oracle = _plemelj_oracle(om, 0.6)
        assert np.max(np.abs(ax.value - oracle)) < 1e-6
    # frozen boundary values
    ax = matrix_H_on_axis(1.2, 0.6, RHO)
    assert abs(ax.value[0, 0] - H11_AX12) < 1e-6
    assert abs(ax.value[1, 1] - H22_AX12) < 1e-6


def test_matrix_h_cut_near_branch_point_error_is_honest():
    # eps-polynomial extrapolation degrades next to the branch point, but the
    # reported error must cover the gap to the exact boundary value
    ax = matrix_H_on_axis(0.81, 0.6, RHO)
    oracle = _plemelj_oracle(0.81, 0.6)
    gap = np.max(np.abs(ax.value - oracle))
    assert gap < 5e-4
    assert gap < 10.0 * ax.error


def test_matrix_h_on_axis_conjugate_symmetry():
    a = matrix_H_on_axis(1.5, 0.6, RHO).value
    b = matrix_H_on_axis(-1.5, 0.6, RHO).value
    assert np.max(np.abs(a - b.conj())) < 1e-12


def test_matrix_h_decays_in_right_half_plane():
    H50 = matrix_H(50.0, 0.6, RHO).value
    L = matrix_L(V6, RHO).value
    assert np.max(np.abs(H50)) < 1e-2 * np.max(np.abs(L))


def test_branch_point_continuity():
    mu = 0.8
    diffs = []
    for d in (1e-2, 1e-4):
        a = matrix_H_on_axis(mu - d, 0.6, RHO).value
        b = matrix_H_on_axis(mu + d, 0.6, RHO).value
        diffs.append(np.max(np.abs(a - b)))
    assert diffs[0] < 2.0
    assert diffs[1] < 0.2
    # square-root onset: shrinking d by 100 shrinks the gap by about 10
    assert diffs[1] / diffs[0] < 0.15


def test_cut_endpoints():
    assert cut_endpoints(0.5, 0.6, RHO) is None
    lo, hi = cut_endpoints(1.2, 0.6, RHO)
    s, m = 0.6, RHO.mass
    for k1 in (lo, hi):
        c = k1**2 + m * m - (s * k1 + 1.2) ** 2
        assert abs(c) < 1e-12
    lo_n, hi_n = cut_endpoints(-1.2, 0.6, RHO)
    assert abs(lo_n + hi) < 1e-12 and abs(hi_n + lo) < 1e-12


# ---------------------------------------------------------------------------
# the pencil M, determinants and inverse blocks
# ---------------------------------------------------------------------------

def test_spectral_matrices_frame_data():
    mats = spectral_matrices(V6, RHO)
    assert abs(mats.gamma - 1.25) < 1e-15
    assert abs(mats.mu - 0.8) < 1e-15
    assert np.allclose(np.diag(mats.Bv), [0.512, 0.8, 0.8], atol=1e-15)
    assert abs(mats.L[0, 0] - L11_V06) < 1e-9
    # oblique velocities are rotated internally
    v = np.array([0.0, 0.6, 0.0])
    m2 = spectral_matrices(v, RHO)
    assert abs(m2.speed - 0.6) < 1e-15
    assert np.allclose(m2.rotation @ v, [0.6, 0, 0], atol=1e-15)
    assert np.max(np.abs(m2.L - mats.L)) < 1e-12


def test_determinant_factorization_agrees_with_direct():
    mats = spectral_matrices(V6, RHO)
    rng = np.random.default_rng(3)
    omegas = [0.3, 0.79, 1.5] + list(rng.uniform(0.05, 3.0, 100)
                                     * rng.choice([-1.0, 1.0], 100))
    for om in omegas:
        d1 = mats.det_M_direct(om)
        d2 = mats.det_M_factorized(om)
        assert abs(d1 - d2) <= 1e-10 * abs(d1)


def test_minv_block_relations():
    mats = spectral_matrices(V6, RHO)
    Bv_inv = np.linalg.inv(mats.Bv)
    for om in (0.3, 1.2, 0.01, 1e-7):
        blk = mats.minv_blocks(om)
        assert np.max(np.abs(blk.M22 - blk.M11)) < 1e-10
        assert np.max(np.abs(blk.M11 - 1j * blk.M12 @ Bv_inv)) < 1e-10
    assert mats.minv_blocks(1e-7).factorized
    assert not mats.minv_blocks(0.01).factorized


def test_minv_reconstructs_inverse():
    mats = spectral_matrices(V6, RHO)
    for om in (0.4, 2.0):
        blk = mats.minv_blocks(om)
        prod = blk.inverse() @ mats.M_on_axis(om)
        assert np.max(np.abs(prod - np.eye(6))) < 1e-10
    with pytest.raises(ValueError):
        mats.minv_blocks(0.0).inverse()


def test_minv_zero_frequency_limit():
    mats = spectral_matrices(V6, RHO)
    blk = mats.minv_blocks(0.0)
    # first entry -i g^3 / (g^3 + f_11(0)) with f(0) = diag K
    assert abs(blk.M11[0, 0] - M11_LIMIT_V06) < 1e-9
    g = mats.gamma
    expected = np.diag([-1j * g**3 / (g**3 + mats.k_diag[0]),
                        -1j * g / (g + mats.k_diag[1]),
                        -1j * g / (g + mats.k_diag[2])])
    assert np.max(np.abs(blk.M11 - expected)) < 1e-12
    # continuity across the factorized/direct crossover
    near = mats.minv_blocks(2e-3).M11
    assert np.max(np.abs(near - blk.M11)) < 1e-4


def test_minv_m21_has_cubed_gamma_in_first_entry():
    # the raw bottom-left block per direction j is F_j / det_j, which gives
    # -g^3 f_1/(g^3 + f_1) in the first slot, not -g f_1/(g^3 + f_1)
    mats = spectral_matrices(V6, RHO)
    om = 0.5
    blk = mats.minv_blocks(om)
    f = mats.f(om)
    g = mats.gamma
    a = np.array([g**3, g, g])
    cubic = np.diag(-a * f / (a + f))
    variant = np.diag(np.array([-g * f[0] / (g**3 + f[0]),
                                -g * f[1] / (g + f[1]),
                                -g * f[2] / (g + f[2])]))
    assert np.max(np.abs(blk.M21 - cubic)) < 1e-12
    assert np.max(np.abs(blk.M21 - variant)) > 0.1


def test_minv_large_omega_tail():
    mats = spectral_matrices(V6, RHO)
    D0 = -1j * np.eye(6)
    oms = np.geomspace(10.0, 100.0, 8)
    devs = np.array([np.linalg.norm(mats.minv_blocks(om).inverse()
                                    - D0 / om, 2) for om in oms])
    slope = np.polyfit(np.log(oms), np.log(devs), 1)[0]
    assert -2.3 < slope < -1.7
    assert devs[-1] < 2e-4


def test_invertibility_scan_bounded_away_from_zero():
    mats = spectral_matrices(V6, RHO)
    _, dets, mn = invertibility_scan(mats)
    # the only root in [-3, 3] is omega = 0 (order 6); outside |w| < 0.05
    # the determinant stays above the frozen floor
    assert 1e-8 < mn < 1e-7
    assert np.all(np.abs(dets) >= mn)


def test_f_curvature_checks():
    mats = spectral_matrices(V6, RHO)
    chk = f_jj_checks(mats)
    assert np.max(np.abs(chk.f_zero)) == 0.0       # identical evaluations
    assert np.max(np.abs(chk.slope)) < 1e-11       # F is even in omega
    assert chk.max_relative_curvature_error() < 1e-5
    # f = F / omega^2 approaches diag K continuously
    assert np.max(np.abs(mats.f(2e-3) - mats.k_diag)) < 1e-4


# ---------------------------------------------------------------------------
# the linearized generator on the grid
# ---------------------------------------------------------------------------

def test_apply_a_annihilates_translation_tangents():
    grid = GridSpec(20.0, 32)
    op = linearized_operator(V6, V6, RHO, grid)
    tb = tangent_basis(V6, RHO, grid)
    for j in range(3):
        out = apply_A(op, tb.phase_state(j))
        assert out.energy_norm() < 1e-13


def test_apply_a_maps_boosts_to_translations():
    grid = GridSpec(20.0, 32)
    op = linearized_operator(V6, V6, RHO, grid)
    tb = tangent_basis(V6, RHO, grid)
    for j in range(3):
        out = apply_A(op, tb.phase_state(j + 3))
        diff = out - tb.phase_state(j)
        assert diff.energy_norm() < 1e-13 * tb.phase_state(j).energy_norm()


def test_apply_a_depends_on_frame_drift():
    grid = GridSpec(20.0, 32)
    w = np.array([0.2, 0.1, 0.0])
    op = linearized_operator(V6, w, RHO, grid)
    tb = tangent_basis(V6, RHO, grid)
    out = apply_A(op, tb.phase_state(0))
    assert out.energy_norm() > 1e-3


def test_apply_a_skew_symmetry():
    grid = GridSpec(20.0, 32)
    op = linearized_operator(V6, V6, RHO, grid)
    for seed in range(5):
        Z1 = _random_state(grid, 2 * seed)
        Z2 = _random_state(grid, 2 * seed + 1)
        s = omega(apply_A(op, Z1), Z2) + omega(Z1, apply_A(op, Z2))
        assert abs(s) < 1e-12 * Z1.energy_norm() * Z2.energy_norm()


def test_linearized_operator_validation():
    grid = GridSpec(20.0, 32)
    with pytest.raises(ValueError):
        linearized_operator(np.array([1.1, 0, 0]), V6, RHO, grid)
    with pytest.raises(ValueError):
        linearized_operator(np.array([0.1, 0.2]), V6, RHO, grid)
    op = linearized_operator(V6, V6, RHO, grid)
    other = zero_state(GridSpec(20.0, 16))
    with pytest.raises(ValueError):
        apply_A(op, other)


# ---------------------------------------------------------------------------
# the closed-form kernel
# ---------------------------------------------------------------------------

def _kernel_oracle(y, lam, v, m=1.0):
    """Numerical inversion of the symbol: transverse plane analytic
    (a K0 Bessel factor), then one oscillatory k1 quadrature."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.linalg.norm(v)
    y1 = float(v @ y) / s if s > 0 else y[0]
    rperp = np.sqrt(float(y @ y) - y1 * y1)

    def integrand(k1):
        c = k1**2 + m * m - (s * k1 - 1j * lam) ** 2
        return np.exp(-1j * k1 * y1) * kv(0, np.sqrt(c) * rperp)

    res = gauss_panels_1d(integrand, -40.0, 40.0, breakpoints=[0.0],
                          order=40, panels_per_interval=12)
    return res.value / (2.0 * np.pi) ** 2


def test_g_lambda_free_limit():
    y = np.array([0.7, -0.3, 0.2])
    lam = 0.8 + 0.3j
    r = np.linalg.norm(y)
    free = np.exp(-np.sqrt(lam**2 + 1.0) * r) / (4.0 * np.pi * r)
    assert abs(g_lambda(y, lam, np.zeros(3)) - free) < 1e-15


def test_g_lambda_stationary_limit_is_soliton_kernel():
    y = np.array([0.7, -0.3, 0.2])
    g = 1.0 / np.sqrt(1.0 - 0.36)
    yt = np.array([g * y[0], y[1], y[2]])
    r = np.linalg.norm(yt)
    kernel = g * np.exp(-r) / (4.0 * np.pi * r)
    assert abs(g_lambda(y, 0.0, V6) - kernel) < 1e-15


def test_g_lambda_matches_k_space_inversion():
    cases = [
        ((0.8, 1.1, -0.4), 0.5 + 0.4j, (0.6, 0.0, 0.0)),
        ((0.8, 1.1, -0.4), 0.9, (0.6, 0.0, 0.0)),
        ((-0.5, 0.7, 1.3), 0.31 + 1.7j, (0.0, 0.0, 0.0)),
        ((1.2, -0.3, 0.9), 0.25 + 0.5j, (0.2, -0.4, 0.1)),
    ]
    for y, lam, v in cases:
        closed = g_lambda(y, lam, v)
        oracle = _kernel_oracle(y, lam, v)
        assert abs(closed - oracle) / abs(oracle) < 1e-10


def test_g_lambda_domain_errors():
    with pytest.raises(ValueError):
        g_lambda(np.zeros(3), 0.5, V6)
    with pytest.raises(ValueError):
        g_lambda([1.0, 0, 0], -0.2, V6)
    with pytest.raises(ValueError):
        g_lambda([1.0, 0, 0], 0.9j, V6)   # on the cut, mu = 0.8
    with pytest.raises(ValueError):
        g_lambda([1.0, 0, 0], 0.5, [1.0, 0, 0])


# ---------------------------------------------------------------------------
# orthogonality functionals
# ---------------------------------------------------------------------------

def test_phi_prime_matches_finite_difference():
    grid = GridSpec(20.0, 32)
    psi = gaussian_packet(grid, width=1.4, center=(0.8, -0.5, 0.3),
                          spinor=(0.6, 0.3, -0.2, 0.4), k0=(0.4, 0, 0),
                          amplitude=0.7)
    v = np.array([0.45, 0.0, 0.0])
    h = 1e-3
    d1 = (phi_lambda(psi, h, v, RHO) - phi_lambda(psi, -h, v, RHO)) / (2 * h)
    d2 = (phi_lambda(psi, h / 2, v, RHO)
          - phi_lambda(psi, -h / 2, v, RHO)) / h
    fd = (4.0 * d2 - d1) / 3.0
    closed = phi_prime_zero(psi, v, RHO)
    scale = np.max(np.abs(closed))
    assert np.max(np.abs(fd - closed)) < 1e-10 * scale


def test_orthogonality_trivial_field():
    grid = GridSpec(20.0, 32)
    Q0 = np.array([0.3, -0.2, 0.5])
    P0 = np.array([0.1, 0.4, -0.3])
    Z0 = PhaseState(zero_state(grid).psi, Q0, P0)
    chk = orthogonality_check(Z0, V6, RHO)
    assert np.array_equal(chk.functional_translations, P0.astype(complex))
    expected = momentum_jacobian(V6) @ Q0
    assert np.array_equal(chk.functional_boosts, expected.astype(complex))


def test_orthogonality_equivalence_family():
    # -Omega(Z, tau_j) = Phi(0) + P and Omega(Z, tau_{j+3}) = Phi'(0)
    # + Bv^{-1} Q hold identically, so both formulations agree on
    # arbitrary states, not only on orthogonal ones
    grid = GridSpec(20.0, 32)
    tb = tangent_basis(V6, RHO, grid)
    for seed in range(20):
        Z = _random_state(grid, 300 + seed)
        chk = orthogonality_check(Z, V6, RHO, tb=tb)
        assert chk.equivalence_gap() < 1e-8 * Z.energy_norm()


def test_orthogonality_discriminates():
    grid = GridSpec(20.0, 32)
    Y_sol = soliton_state(SolitonParams(np.zeros(3), V6), RHO, grid)
    bump = gaussian_packet(grid, width=1.2, center=(1.5, 0, 0),
                           spinor=(1, 0, 0, 0), amplitude=0.05)
    Y = PhaseState((Y_sol.psi.to_position() + bump).to_fourier(),
                   Y_sol.q + np.array([0.05, 0.0, -0.02]),
                   Y_sol.p + np.array([0.02, -0.01, 0.0]))
    res = project_to_manifold(Y, RHO)
    chk = orthogonality_check(res.Z, res.params.v, RHO, b=res.params.b)
    assert chk.max_residual() < 1e-6
    # a tangent direction is maximally non-orthogonal
    tb = tangent_basis(res.params.v, RHO, grid)
    chk4 = orthogonality_check(tb.phase_state(3), res.params.v, RHO, tb=tb)
    assert chk4.max_residual() > 1e-2


def test_orthogonality_recentering_matches_shifted_field():
    grid = GridSpec(20.0, 32)
    Z = _random_state(grid, 77)
    b = np.array([0.9, -0.4, 0.3])
    direct = orthogonality_check(Z, V6, RHO, b=b)
    shifted = PhaseState(shift_field(Z.psi, -b), Z.q, Z.p)
    manual = orthogonality_check(shifted, V6, RHO)
    assert np.allclose(direct.functional_translations,
                       manual.functional_translations, atol=1e-12)
    assert np.allclose(direct.form_boosts, manual.form_boosts, atol=1e-12)
