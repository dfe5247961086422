"""Outer alternating optimization over (m, b, Φ)."""

import logging
from dataclasses import dataclass, field

import numpy as np

from airfl.airlink import (
    RisMode,
    RisState,
    Transceiver,
    effective_channel,
    link_mse,
    ris_noise_active,
    ris_psi,
)
from airfl.optimizer.ris import passive_phase_update, penalty_phi_loop, scale_into_budget, true_ris_power
from airfl.optimizer.transceiver import optimal_receive_beamformer, solve_transmit_coeffs

log = logging.getLogger(__name__)

MSE_SLACK = 1e-9


@dataclass
class AoConfig:
    outer_tol: float = 1e-6
    outer_max_iters: int = 50
    inner_tol: float = 1e-4
    inner_max_iters: int = 200
    tau0: float = 1.0  # relative to the mean diagonal of the φ quadratic form
    tau_growth: float = 1.1
    tau_max: float = 1e6
    bisect_tol: float = 1e-8
    lambda_grid_points: int = 2000
    force_active_power: bool = False
    track_objective: bool = False  # log the penalized objective around every inner pass

    def __post_init__(self):
        if min(self.outer_tol, self.inner_tol, self.bisect_tol, self.tau0) <= 0:
            raise ValueError("tolerances and tau0 must be positive")
        if self.tau_growth <= 1:
            raise ValueError("tau_growth must exceed 1")
        if self.outer_max_iters < 1 or self.inner_max_iters < 1 or self.lambda_grid_points < 2:
            raise ValueError("iteration counts must be >= 1")


@dataclass
class AoResult:
    m: np.ndarray
    b: np.ndarray
    phi: np.ndarray  # None without a RIS
    mode: RisMode
    mse_trace: list
    step_log: list = field(default_factory=list)  # (outer iter, step name, MSE after the step)
    feasible: bool = True
    iters_used: int = 0
    inner_passes: int = 0
    inner_stalls: int = 0
    phi_increases: int = 0

    @property
    def ris(self):
        return RisState(self.phi, self.mode) if self.mode is not RisMode.NONE else RisState.none()

    @property
    def final_mse(self):
        return self.mse_trace[-1]

    def transceiver(self, p_node, p_ris=np.inf):
        return Transceiver(m=self.m, b=self.b, p_node=p_node, p_ris=p_ris)


def _principal_direction(h_d):
    cov = h_d.T @ h_d.conj()  # Σ h h^H
    _, vecs = np.linalg.eigh(0.5 * (cov + cov.conj().T))
    return vecs[:, -1]


def initialize(ch, mode, p_node, p_ris, noise, rng):
    """Feasible, phase-aligned starting point for the AO loop."""
    p_node = np.broadcast_to(np.asarray(p_node, float), (ch.num_nodes,))
    m0 = _principal_direction(ch.h_d)
    c = ch.h_d @ m0.conj()
    mag = np.abs(c)
    b0 = np.sqrt(p_node) * np.where(mag > 0, c.conj() / np.where(mag > 0, mag, 1.0), 1.0)
    if mode is RisMode.NONE:
        return m0, b0.astype(np.complex128), None
    phases = np.exp(1j * rng.uniform(0.0, 2 * np.pi, ch.num_elements))
    if mode is RisMode.PASSIVE:
        return m0, b0.astype(np.complex128), phases
    # largest uniform amplitude meeting the RIS budget
    amp = 1.0
    while true_ris_power(b0, ch, amp * phases, noise) < p_ris and amp < 1e12:
        amp *= 2.0
    phi0, _ = scale_into_budget(b0, ch, amp * phases, noise, p_ris)
    if true_ris_power(b0, ch, phi0, noise) > p_ris:
        b0 = np.zeros_like(b0)
        phi0 = np.zeros_like(phases)
    return m0, b0.astype(np.complex128), phi0


def _ris_state(phi, mode):
    return RisState.none() if mode is RisMode.NONE else RisState(phi, mode)


def alternating_optimize(ch, mode, stats, p_node, p_ris, noise, config=None, rng=None):
    """Minimize the aggregation MSE over the receiver, transmitters and RIS."""
    config = config or AoConfig()
    mode = RisMode(mode)
    rng = rng if rng is not None else np.random.default_rng(0)
    p_node = np.broadcast_to(np.asarray(p_node, float), (ch.num_nodes,)).copy()
    ris_budget = p_ris if mode is RisMode.ACTIVE else np.inf

    m, b, phi = initialize(ch, mode, p_node, ris_budget, noise, rng)

    def mse(m_, b_, phi_):
        return link_mse(Transceiver(m_, b_, p_node), ch, _ris_state(phi_, mode), stats, noise)

    res = AoResult(m=m, b=b, phi=phi, mode=mode, mse_trace=[])
    prev = None
    for it in range(1, config.outer_max_iters + 1):
        ris = _ris_state(phi, mode)
        psi = ris_psi(ris, ch)
        h_e = effective_channel(ch.h_d, ch.g_mat, psi, ch.h_r)
        g_psi = ch.g_mat @ psi if (psi is not None and ris_noise_active(ris)) else None

        m = optimal_receive_beamformer(h_e, b, g_psi, stats, noise)
        res.step_log.append((it, "m", mse(m, b, phi)))

        if psi is None or mode is RisMode.PASSIVE:
            rho = np.zeros(ch.num_nodes)
            ris_noise = 0.0
        else:
            rho = np.sum(np.abs(ch.h_r @ psi.T) ** 2, axis=1)
            ris_noise = noise.sigma_a_sq * float(np.sum(np.abs(psi) ** 2))
        b = solve_transmit_coeffs(m, h_e, rho, stats, p_node, ris_budget, ris_noise, config.bisect_tol)
        res.step_log.append((it, "b", mse(m, b, phi)))

        if mode is RisMode.ACTIVE:
            before = res.step_log[-1][2]
            pen = penalty_phi_loop(m, b, ch, phi, stats, noise, ris_budget, config)
            phi = pen.phi
            res.inner_passes += pen.passes
            res.inner_stalls += int(pen.stalled)
            after = mse(m, b, phi)
            if after > before + MSE_SLACK * max(before, 1e-300):
                res.phi_increases += 1
                log.info("outer iter %d: RIS update raised MSE %.6g -> %.6g", it, before, after)
            res.step_log.append((it, "phi", after))
        elif mode is RisMode.PASSIVE:
            phi = passive_phase_update(m, b, ch, phi, stats, noise, config)
            res.inner_passes += 1
            res.step_log.append((it, "phi", mse(m, b, phi)))

        cur = res.step_log[-1][2]
        res.mse_trace.append(cur)
        res.iters_used = it
        if prev is not None and abs(prev - cur) <= config.outer_tol * max(abs(prev), 1e-300):
            break
        prev = cur

    res.m, res.b, res.phi = m, b, phi
    res.feasible = check_feasible(res, ch, p_node, p_ris, noise)
    return res


def check_feasible(res, ch, p_node, p_ris, noise, rtol=1e-6):
    ok = bool(np.all(np.abs(res.b) ** 2 <= np.asarray(p_node) * (1 + rtol)))
    if res.mode is RisMode.ACTIVE:
        ok &= true_ris_power(res.b, ch, res.phi, noise) <= p_ris * (1 + rtol)
    return ok
