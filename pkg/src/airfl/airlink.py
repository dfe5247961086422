"""Active-RIS reflection, the over-the-air aggregation chain, and its closed forms.

Conventions: channels are stacked row-wise per node (see ``ChannelSet``);
a node's transmit coefficient multiplies unit-power complex symbols, so a
packed pair of real gradient entries is scaled by ``1/sqrt(2)`` before
transmission and rescaled after reception.
"""

import enum
from dataclasses import dataclass

import numpy as np

from airfl.complexlin import as_vector, sample_complex_gaussian
from airfl.errors import DimensionMismatch, ModeNone, PowerViolation, SingularReflectionLoop

DELTA_FLOOR = 1e-8
LOOP_COND_MAX = 1e12
POWER_SLACK = 1e-9


class RisMode(str, enum.Enum):
    ACTIVE = "active"
    PASSIVE = "passive"
    NONE = "none"


@dataclass
class RisState:
    phi: np.ndarray
    mode: RisMode = RisMode.ACTIVE

    def __post_init__(self):
        self.mode = RisMode(self.mode)
        if self.phi is not None:
            self.phi = as_vector(self.phi, "phi")
        if self.mode is RisMode.PASSIVE and not np.allclose(np.abs(self.phi), 1.0, atol=1e-9):
            raise ValueError("passive RIS coefficients must be unit modulus")

    @classmethod
    def none(cls):
        return cls(phi=None, mode=RisMode.NONE)

    @property
    def phi_mat(self):
        return np.diag(self.phi)


@dataclass
class Transceiver:
    m: np.ndarray
    b: np.ndarray
    p_node: np.ndarray
    p_ris: float = np.inf

    def __post_init__(self):
        self.m = as_vector(self.m, "m")
        self.b = as_vector(self.b, "b")
        self.p_node = np.broadcast_to(np.asarray(self.p_node, float), self.b.shape).copy()

    def check_power(self):
        excess = np.abs(self.b) ** 2 - self.p_node * (1 + POWER_SLACK)
        if np.any(excess > POWER_SLACK):
            i = int(np.argmax(excess))
            raise PowerViolation(f"node {i}: |b|^2 = {abs(self.b[i])**2:.6g} > P = {self.p_node[i]:.6g}")


@dataclass
class GradientStats:
    means: np.ndarray
    stds: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, float).reshape(-1)
        self.stds = np.maximum(np.asarray(self.stds, float).reshape(-1), DELTA_FLOOR)
        self.sizes = np.asarray(self.sizes, dtype=np.int64).reshape(-1)
        if not (self.means.shape == self.stds.shape == self.sizes.shape):
            raise DimensionMismatch("means, stds and sizes must have equal length")
        if np.any(self.sizes < 1):
            raise ValueError("dataset sizes must be >= 1")

    @property
    def targets(self):
        """Per-node aggregation weights ``K_i * delta_i``."""
        return self.sizes * self.stds

    @property
    def total_size(self):
        return int(self.sizes.sum())


@dataclass(frozen=True)
class NoiseParams:
    sigma_a_sq: float = 1e-8
    sigma_e_sq: float = 1e-8

    def __post_init__(self):
        if self.sigma_a_sq < 0 or self.sigma_e_sq < 0:
            raise ValueError("noise variances must be nonnegative")


# --- reflection models -------------------------------------------------------


def exact_ris_output(ris, h_si, x_in, z_a):
    """Reflected signal with the full self-interference loop ``(I - ΦH)^-1 Φ (x + z)``."""
    if ris.mode is not RisMode.ACTIVE:
        raise ValueError("exact reflection model applies to an active RIS")
    phi = ris.phi
    loop = np.eye(phi.size) - phi[:, None] * h_si
    if np.linalg.cond(loop) > LOOP_COND_MAX:
        raise SingularReflectionLoop("I - ΦH is numerically singular")
    return np.linalg.solve(loop, phi * (np.asarray(x_in) + np.asarray(z_a)))


def approx_ris_output(ris, h_si, x_in, z_a):
    """First-order loop expansion ``(I + ΦH) Φ (x + z)``."""
    return effective_ris_matrix(ris, h_si) @ (np.asarray(x_in) + np.asarray(z_a))


def effective_ris_matrix(ris, h_si):
    """Ψ = (I + ΦH)Φ for an active RIS, Φ for a passive one."""
    if ris.mode is RisMode.NONE:
        raise ModeNone("no RIS deployed")
    phi = ris.phi
    if ris.mode is RisMode.PASSIVE:
        return np.diag(phi)
    h_si = np.asarray(h_si, dtype=np.complex128)
    if h_si.shape != (phi.size, phi.size):
        raise DimensionMismatch(f"h_si must be {(phi.size, phi.size)}")
    # (I + ΦH)Φ = Φ + ΦHΦ, with diagonal Φ applied as row/column scalings
    return np.diag(phi) + phi[:, None] * h_si * phi[None, :]


def effective_channel(h_d, g_mat, psi, h_r):
    """``h_d + G Ψ h_r``; with ``psi=None`` (no RIS) this is just ``h_d``.

    Accepts one node (1-D ``h_d``/``h_r``) or a row-stack of nodes.
    """
    h_d = np.asarray(h_d, dtype=np.complex128)
    if psi is None:
        return h_d.copy()
    g_mat = np.atleast_2d(np.asarray(g_mat, dtype=np.complex128))
    psi = np.atleast_2d(np.asarray(psi, dtype=np.complex128))
    h_r = np.asarray(h_r, dtype=np.complex128)
    m, n = g_mat.shape
    if psi.shape != (n, n) or h_r.shape[-1] != n or h_d.shape[-1] != m:
        raise DimensionMismatch(
            f"inconsistent shapes h_d{h_d.shape} G{g_mat.shape} Psi{psi.shape} h_r{h_r.shape}"
        )
    return h_d + h_r @ (g_mat @ psi).T


def ris_psi(ris, ch):
    """Ψ for the current mode, or ``None`` without a RIS."""
    if ris.mode is RisMode.NONE:
        return None
    return effective_ris_matrix(ris, ch.h_si)


def ris_noise_active(ris):
    # a passive surface injects no thermal noise
    return ris.mode is RisMode.ACTIVE


# --- gradient normalization ----------------------------------------------------


def normalize_gradient(g):
    """Zero-mean, unit-variance normalization using population statistics."""
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.size < 1:
        raise ValueError("gradient must be non-empty")
    mean = float(g.mean())
    std = max(float(g.std()), DELTA_FLOOR)
    return (g - mean) / std, mean, std


def denormalize_gradient(s, mean, std):
    return np.asarray(s, dtype=float) * std + mean


def pack_complex(s):
    s = np.asarray(s, dtype=float).reshape(-1)
    half = (s.size + 1) // 2
    padded = np.zeros(2 * half)
    padded[: s.size] = s
    return padded[:half] + 1j * padded[half:]


def unpack_complex(c, d):
    c = np.asarray(c, dtype=np.complex128).reshape(-1)
    return np.concatenate([c.real, c.imag])[:d]


# --- AirComp chain -------------------------------------------------------------


def aircomp_round(signals, tx, ch, ris, noise, rng):
    """Receive-side estimate ``ŝ = m^H y`` for every entry of the node signals.

    ``signals`` is (U, L) complex; returns an (L,) complex vector. Noise is
    drawn fresh per entry.
    """
    signals = np.atleast_2d(np.asarray(signals, dtype=np.complex128))
    u, n_entries = signals.shape
    if u != ch.num_nodes or tx.b.size != u:
        raise DimensionMismatch("signals, b and channels disagree on the number of nodes")
    tx.check_power()
    psi = ris_psi(ris, ch)
    h_e = effective_channel(ch.h_d, ch.g_mat, psi, ch.h_r)
    m_h = tx.m.conj()
    gains = (h_e @ m_h) * tx.b  # m^H h_{e,i} b_i
    s_hat = gains @ signals
    if psi is not None and ris_noise_active(ris) and noise.sigma_a_sq > 0:
        z_a = sample_complex_gaussian(0, noise.sigma_a_sq, rng, size=(ch.num_elements, n_entries))
        s_hat = s_hat + (m_h @ (ch.g_mat @ psi)) @ z_a
    if noise.sigma_e_sq > 0:
        z_e = sample_complex_gaussian(0, noise.sigma_e_sq, rng, size=(ch.num_antennas, n_entries))
        s_hat = s_hat + m_h @ z_e
    return s_hat


def recover_global_gradient(s_hat, stats):
    """ĝ = (ŝ + Σ K_i ḡ_i) / K."""
    return (np.asarray(s_hat, dtype=float) + float(stats.sizes @ stats.means)) / stats.total_size


def aggregate_over_the_air(packed, stats, d, tx, ch, ris, noise, rng):
    """Transmit packed unit-power symbols and recover the length-``d`` global gradient.

    ``packed`` and ``stats`` come from :func:`gradient_statistics`; the
    statistics are taken as known at the server.
    """
    s_hat = aircomp_round(packed, tx, ch, ris, noise, rng)
    s_hat_real = unpack_complex(s_hat * np.sqrt(2.0), d)
    return recover_global_gradient(s_hat_real, stats)


def gradient_statistics(grads, sizes=None):
    """Normalize each row; returns stats and unit-power packed symbols (U, ceil(d/2))."""
    grads = np.atleast_2d(np.asarray(grads, dtype=float))
    means, stds, packed = [], [], []
    for g in grads:
        s, mu, sd = normalize_gradient(g)
        means.append(mu)
        stds.append(sd)
        packed.append(pack_complex(s) / np.sqrt(2.0))
    if sizes is None:
        sizes = np.ones(len(grads), dtype=np.int64)
    return GradientStats(means, stds, sizes), np.array(packed)


# --- closed forms --------------------------------------------------------------


def mse_closed_form(tx, h_e, g_psi, stats, noise):
    """Per-entry MSE(ŝ, s) under independent unit-power node symbols.

    ``g_psi`` is GΨ; pass ``None`` when the RIS contributes no thermal noise.
    """
    h_e = np.atleast_2d(np.asarray(h_e, dtype=np.complex128))
    if h_e.shape != (tx.b.size, tx.m.size):
        raise DimensionMismatch(f"h_e must be {(tx.b.size, tx.m.size)}, got {h_e.shape}")
    m_h = tx.m.conj()
    bias = (h_e @ m_h) * tx.b - stats.targets
    total = float(np.sum(np.abs(bias) ** 2)) + noise.sigma_e_sq * float(np.vdot(tx.m, tx.m).real)
    if g_psi is not None:
        g_psi = np.atleast_2d(np.asarray(g_psi, dtype=np.complex128))
        if g_psi.shape[0] != tx.m.size:
            raise DimensionMismatch("GΨ rows must match the beamformer length")
        total += noise.sigma_a_sq * float(np.sum(np.abs(m_h @ g_psi) ** 2))
    return total


def ris_reflect_power(tx, psi, h_r, sigma_a_sq):
    """Expected reflected power Σ|b_i|²‖Ψh_{r,i}‖² + σ_A² tr(ΨΨ^H)."""
    psi = np.atleast_2d(np.asarray(psi, dtype=np.complex128))
    h_r = np.atleast_2d(np.asarray(h_r, dtype=np.complex128))
    if h_r.shape != (tx.b.size, psi.shape[1]):
        raise DimensionMismatch(f"h_r must be {(tx.b.size, psi.shape[1])}, got {h_r.shape}")
    refl = h_r @ psi.T  # row i = Ψ h_{r,i}
    signal = float(np.sum(np.abs(tx.b) ** 2 * np.sum(np.abs(refl) ** 2, axis=1)))
    return signal + sigma_a_sq * float(np.sum(np.abs(psi) ** 2))


def link_mse(tx, ch, ris, stats, noise):
    """MSE(ŝ, s) of the configured link, honoring the RIS mode."""
    psi = ris_psi(ris, ch)
    h_e = effective_channel(ch.h_d, ch.g_mat, psi, ch.h_r)
    g_psi = ch.g_mat @ psi if (psi is not None and ris_noise_active(ris)) else None
    return mse_closed_form(tx, h_e, g_psi, stats, noise)


def link_ris_power(tx, ch, ris, noise):
    if ris.mode is not RisMode.ACTIVE:
        return 0.0
    return ris_reflect_power(tx, effective_ris_matrix(ris, ch.h_si), ch.h_r, noise.sigma_a_sq)
