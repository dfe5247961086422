"""Receive beamformer and transmit-coefficient updates of the AO loop."""

import numpy as np
import scipy.optimize

from airfl.complexlin import hermitian_solve
from airfl.errors import InfeasibleRisBudget, NotPositiveDefinite, SingularR


def receive_covariance(h_e, b, g_psi, noise):
    """R = Σ|b_i|² h_e,i h_e,i^H + σ_A² GΨ(GΨ)^H + σ_E² I."""
    h_e = np.atleast_2d(h_e)
    w = h_e * b[:, None]
    r = w.T @ w.conj()
    if g_psi is not None:
        r = r + noise.sigma_a_sq * (g_psi @ g_psi.conj().T)
    r = r + noise.sigma_e_sq * np.eye(h_e.shape[1])
    return 0.5 * (r + r.conj().T)


def optimal_receive_beamformer(h_e, b, g_psi, stats, noise):
    """MMSE receive beamformer ``m = R^{-1} Σ h_e,i b_i K_i δ_i``.

    ``g_psi`` is GΨ, or ``None`` when no RIS noise reaches the server.
    """
    h_e = np.atleast_2d(np.asarray(h_e, dtype=np.complex128))
    b = np.asarray(b, dtype=np.complex128)
    rhs = h_e.T @ (b * stats.targets)
    if not np.any(rhs):
        return np.zeros(h_e.shape[1], dtype=np.complex128)
    try:
        return hermitian_solve(receive_covariance(h_e, b, g_psi, noise), rhs)
    except NotPositiveDefinite as exc:
        raise SingularR("receive covariance is singular") from exc


def _clipped_coeffs(c, t, rho, p_node, lam):
    denom = np.abs(c) ** 2 + lam * rho
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(denom > 0, c.conj() * t / denom, 0.0)
    mag = np.abs(b)
    cap = np.sqrt(p_node)
    scale = np.where(mag > cap, cap / np.where(mag > 0, mag, 1.0), 1.0)
    return b * scale


def solve_transmit_coeffs(m, h_e, psi_hr_norms, stats, p_node, p_ris, ris_noise_power=0.0, bisect_tol=1e-8):
    """Optimal transmit coefficients under per-node and RIS power limits.

    Minimizes Σ|c_i b_i − K_iδ_i|² with ``c_i = m^H h_e,i`` subject to
    ``|b_i|² ≤ P_i`` and ``Σ ρ_i|b_i|² ≤ P_A − σ_A² tr(ΨΨ^H)``, where
    ``ρ_i = ‖Ψ h_r,i‖²`` and ``ris_noise_power`` is the trace term. For a
    fixed multiplier λ each coordinate is a disk-projected scalar least
    squares; λ is the root of the monotone coupled-power excess.
    """
    h_e = np.atleast_2d(np.asarray(h_e, dtype=np.complex128))
    c = h_e @ np.asarray(m, dtype=np.complex128).conj()
    t = stats.targets.astype(float)
    rho = np.asarray(psi_hr_norms, dtype=float)
    p_node = np.broadcast_to(np.asarray(p_node, float), c.shape)
    budget = p_ris - ris_noise_power
    if not np.isfinite(budget):
        return _clipped_coeffs(c, t, rho, p_node, 0.0)
    if budget < -bisect_tol * max(abs(p_ris), 1e-300):
        raise InfeasibleRisBudget(f"RIS noise alone uses {ris_noise_power:.6g} > P_A = {p_ris:.6g}")
    budget = max(budget, 0.0)

    def excess(lam):
        return float(rho @ np.abs(_clipped_coeffs(c, t, rho, p_node, lam)) ** 2) - budget

    if excess(0.0) <= bisect_tol * max(budget, 1e-300):
        return _clipped_coeffs(c, t, rho, p_node, 0.0)
    active = rho > 0
    if budget <= 0:
        b = _clipped_coeffs(c, t, rho, p_node, 0.0)
        b[active] = 0.0
        return b
    # |b_i| <= |c_i| t_i / (λ ρ_i) bounds the coupled power by Σ|c|²t²/ρ / λ²
    hi = float(np.sqrt(np.sum(np.abs(c[active]) ** 2 * t[active] ** 2 / rho[active]) / budget))
    while excess(hi) > 0:
        hi *= 2.0
    lam = scipy.optimize.brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if excess(lam) > 0:
        lo = lam
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if excess(mid) > 0:
                lo = mid
            else:
                hi = mid
        lam = hi
    return _clipped_coeffs(c, t, rho, p_node, lam)
