"""RIS configuration update: the penalty-coupled pair of QCQPs.

The true RIS reflection term ``(I + ΦH)Φ`` is quartic in φ once squared.
Splitting it as ``(I + Φ̃H)Φ`` with a penalty ``τ‖φ − φ̃‖²`` makes the
problem a convex QCQP in φ for fixed φ̃ and vice versa; τ is grown until
the two copies agree.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from airfl.airlink import RisMode, RisState, Transceiver, effective_ris_matrix, link_mse
from airfl.channel import ChannelSet
from airfl.optimizer.qcqp import QcqpInstance, solve_qcqp_kkt

log = logging.getLogger(__name__)

SI_FREE_TAU = 1e-9  # relative proximal weight when φ and φ̃ are decoupled


def _tx_residuals(m, b, ch, stats, base):
    """K_iδ_i − m^H (h_d,i + extra_i) b_i with ``base`` the (U, M) channel part."""
    return stats.targets - (base @ m.conj()) * b


def build_phi_subproblem(m, b, ch, phi_tilde, stats, noise, tau, p_ris=np.inf, ris_noise=True):
    """QCQP in φ with φ̃ fixed (Ω = I + Φ̃H)."""
    n = ch.num_elements
    sa = noise.sigma_a_sq if ris_noise else 0.0
    omega = np.eye(n) + phi_tilde[:, None] * ch.h_si
    c = omega.conj().T @ (ch.g_mat.conj().T @ m)  # Ω^H G^H m
    a_rows = (ch.h_r * b[:, None]).conj() * c[None, :]  # row i = a_i
    a_mat = a_rows.T @ a_rows.conj() + tau * np.eye(n) + sa * np.diag(np.abs(c) ** 2)
    s_mat = (np.abs(b) ** 2 * ch.h_r.T.conj()) @ ch.h_r + sa * np.eye(n)
    b_mat = (omega.conj().T @ omega) * s_mat
    e = _tx_residuals(m, b, ch, stats, ch.h_d)
    v = a_rows.T @ e + tau * phi_tilde
    return QcqpInstance(a_mat=a_mat, b_mat=b_mat, v=v, budget=p_ris)


def build_phitilde_subproblem(m, b, ch, phi, stats, noise, tau, p_ris=np.inf, ris_noise=True):
    """QCQP in φ̃ with φ fixed; the constraint gains a linear term and tr(D)."""
    n = ch.num_elements
    sa = noise.sigma_a_sq if ris_noise else 0.0
    h = ch.h_si
    u = ch.g_mat.conj().T @ m  # G^H m
    refl = (ch.h_r * phi[None, :]) @ h.T  # row i = H Φ h_r,i
    at_rows = (refl * b[:, None]).conj() * u[None, :]  # row i = ã_i
    mix = h.conj() @ ((np.abs(phi) ** 2)[:, None] * h.T)  # H^* |Φ|² H^T
    a_mat = at_rows.T @ at_rows.conj() + tau * np.eye(n) + sa * mix * np.outer(u, u.conj())
    s_mat = (np.abs(b) ** 2 * ch.h_r.T) @ ch.h_r.conj() + sa * np.eye(n)  # Σ|b|² h h^H + σ_A² I
    d_mat = np.outer(phi, phi.conj()) * s_mat
    hdh = h @ d_mat @ h.conj().T
    b_mat = np.diag(np.real(np.diag(hdh))).astype(np.complex128)
    q = np.diag(d_mat @ h.conj().T).copy()
    direct = ch.h_d + (ch.h_r * phi[None, :]) @ ch.g_mat.T  # h_d,i + GΦh_r,i
    e = _tx_residuals(m, b, ch, stats, direct)
    v = at_rows.T @ e + tau * phi - sa * (h.conj() @ (np.abs(phi) ** 2 * u.conj())) * u
    return QcqpInstance(
        a_mat=a_mat, b_mat=b_mat, v=v, q=q, const_term=float(np.real(np.trace(d_mat))), budget=p_ris
    )


def split_psi(phi, phi_tilde, h_si):
    """(I + Φ̃H)Φ."""
    return np.diag(phi) + phi_tilde[:, None] * h_si * phi[None, :]


def penalized_objective(m, b, ch, phi, phi_tilde, stats, noise, tau, ris_noise=True):
    """f₂(φ, φ̃) + τ‖φ − φ̃‖², evaluated directly from the signal model."""
    psi = split_psi(phi, phi_tilde, ch.h_si)
    h_e = ch.h_d + ch.h_r @ (ch.g_mat @ psi).T
    bias = (h_e @ m.conj()) * b - stats.targets
    val = float(np.sum(np.abs(bias) ** 2))
    if ris_noise:
        val += noise.sigma_a_sq * float(np.sum(np.abs(m.conj() @ ch.g_mat @ psi) ** 2))
    return val + tau * float(np.sum(np.abs(phi - phi_tilde) ** 2))


def coupled_ris_power(b, ch, phi, phi_tilde, noise, ris_noise=True):
    """g₂(φ, φ̃): reflected power with the split reflection matrix."""
    psi = split_psi(phi, phi_tilde, ch.h_si)
    refl = ch.h_r @ psi.T
    val = float(np.sum(np.abs(b) ** 2 * np.sum(np.abs(refl) ** 2, axis=1)))
    if ris_noise:
        val += noise.sigma_a_sq * float(np.sum(np.abs(psi) ** 2))
    return val


def true_ris_power(b, ch, phi, noise):
    return coupled_ris_power(b, ch, phi, phi, noise)


@dataclass
class PenaltyResult:
    phi: np.ndarray
    phi_tilde: np.ndarray
    passes: int
    gap: float
    stalled: bool = False
    rescaled: bool = False
    objective_log: list = field(default_factory=list)  # (tau, before, after_phi, after_phi_tilde)


def _tau_scale(inst_quad, n):
    s = float(np.real(np.trace(inst_quad.a_mat))) / n
    return s if s > 0 else 1.0


def scale_into_budget(b, ch, phi, noise, p_ris, rtol=1e-9):
    """Shrink φ uniformly until the exact RIS power fits the budget."""
    if true_ris_power(b, ch, phi, noise) <= p_ris:
        return phi, False
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if true_ris_power(b, ch, mid * phi, noise) <= p_ris:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol:
            break
    return lo * phi, True


def penalty_phi_loop(m, b, ch, phi0, stats, noise, p_ris, config):
    """Inner loop for an active RIS: alternate the φ and φ̃ QCQPs, growing τ."""
    n = ch.num_elements
    qkw = dict(bisect_tol=config.bisect_tol, lambda_grid_points=config.lambda_grid_points,
               force_active=config.force_active_power)
    si_free = not np.any(ch.h_si)
    phi, phi_t = phi0.copy(), phi0.copy()
    scale = _tau_scale(build_phi_subproblem(m, b, ch, phi_t, stats, noise, 0.0), n)
    tau = (SI_FREE_TAU if si_free else config.tau0) * scale
    tau_max = config.tau_max * scale
    result = PenaltyResult(phi, phi_t, 0, np.inf)

    track = config.track_objective

    def objective(phi_, phi_t_):
        return penalized_objective(m, b, ch, phi_, phi_t_, stats, noise, tau) if track else np.nan

    for k in range(1, config.inner_max_iters + 1):
        before = objective(phi, phi_t)
        inst = build_phi_subproblem(m, b, ch, phi_t, stats, noise, tau, p_ris)
        phi = solve_qcqp_kkt(inst, **qkw).x
        after_phi = objective(phi, phi_t)
        inst = build_phitilde_subproblem(m, b, ch, phi, stats, noise, tau, p_ris)
        phi_t = solve_qcqp_kkt(inst, **qkw).x
        if track:
            result.objective_log.append((tau, before, after_phi, objective(phi, phi_t)))
        gap = float(np.linalg.norm(phi - phi_t) / max(np.linalg.norm(phi), 1.0))
        result.passes, result.gap = k, gap
        if gap <= config.inner_tol:
            break
        tau *= config.tau_growth
        if tau > tau_max:
            break

    result.stalled = result.gap > 10 * config.inner_tol
    if result.stalled:
        log.warning("penalty loop stalled: gap %.3e after %d passes", result.gap, result.passes)
    phi, result.rescaled = scale_into_budget(b, ch, phi, noise, p_ris)
    if result.stalled:
        # fall back to whichever feasible copy has the lower true MSE
        cand_t, _ = scale_into_budget(b, ch, phi_t, noise, p_ris)
        if _true_mse(m, b, ch, cand_t, stats, noise) < _true_mse(m, b, ch, phi, stats, noise):
            phi = cand_t
    result.phi, result.phi_tilde = phi, phi_t
    return result


def _true_mse(m, b, ch, phi, stats, noise, mode=RisMode.ACTIVE):
    tx = Transceiver(m=m, b=b, p_node=np.inf)
    return link_mse(tx, ch, RisState(phi, mode), stats, noise)


def passive_phase_update(m, b, ch, phi0, stats, noise, config, max_backtracks=30):
    """Projected proximal step for a unit-modulus RIS.

    Solves the φ-QCQP with no power limit, no self-interference and no RIS
    noise, keeps only the phases, then backtracks on the proximal weight
    until the true MSE does not increase.
    """
    n = ch.num_elements
    no_si = ChannelSet(h_d=ch.h_d, h_r=ch.h_r, g_mat=ch.g_mat, h_si=np.zeros((n, n)))
    quad = build_phi_subproblem(m, b, no_si, phi0, stats, noise, 0.0, ris_noise=False)
    tau = config.tau0 * _tau_scale(quad, n)
    current = _true_mse(m, b, ch, phi0, stats, noise, RisMode.PASSIVE)
    for _ in range(max_backtracks):
        inst = build_phi_subproblem(m, b, no_si, phi0, stats, noise, tau, ris_noise=False)
        raw = solve_qcqp_kkt(inst).x
        phi = np.exp(1j * np.angle(raw))
        if _true_mse(m, b, ch, phi, stats, noise, RisMode.PASSIVE) <= current:
            return phi
        tau *= 4.0
    return phi0.copy()


def effective_psi(phi, ch, mode):
    return effective_ris_matrix(RisState(phi, mode), ch.h_si)
