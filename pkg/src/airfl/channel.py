"""Per-round channel realizations: path loss, Rician fading, RIS self-interference."""

from dataclasses import dataclass, field

import numpy as np

from airfl.complexlin import sample_complex_gaussian
from airfl.errors import DimensionMismatch, NonPositiveDistance


@dataclass(frozen=True)
class Geometry:
    server_pos: tuple
    ris_pos: tuple
    node_pos: tuple  # U entries of (x, y, z)

    def __post_init__(self):
        if len(self.node_pos) < 1:
            raise ValueError("geometry needs at least one node")
        pts = [np.asarray(self.server_pos, float), np.asarray(self.ris_pos, float)]
        pts += [np.asarray(p, float) for p in self.node_pos]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.linalg.norm(pts[i] - pts[j]) <= 0:
                    raise NonPositiveDistance(f"points {i} and {j} coincide")

    @property
    def num_nodes(self):
        return len(self.node_pos)


@dataclass(frozen=True)
class PathLossParams:
    c0_db: float = 30.0  # loss at the reference distance
    ref_dist: float = 1.0
    exponent_dr: float = 2.8  # device-RIS
    exponent_dd: float = 3.6  # device-server
    exponent_rs: float = 2.2  # RIS-server

    def __post_init__(self):
        if self.ref_dist <= 0:
            raise ValueError("ref_dist must be positive")
        if min(self.exponent_dr, self.exponent_dd, self.exponent_rs) < 0:
            raise ValueError("path-loss exponents must be nonnegative")


@dataclass(frozen=True)
class FadingParams:
    rician_db_dr: float = 0.0
    rician_db_dd: float = 0.0
    rician_db_rs: float = 3.0
    si_std_db: float = -30.0
    # "amplitude": nu = 10^(x/20); "power": nu = 10^(x/10)
    si_db_convention: str = "amplitude"

    def __post_init__(self):
        if self.si_db_convention not in ("amplitude", "power"):
            raise ValueError(f"unknown si_db_convention {self.si_db_convention!r}")

    @property
    def si_std(self):
        if np.isneginf(self.si_std_db):
            return 0.0
        div = 20.0 if self.si_db_convention == "amplitude" else 10.0
        return float(10.0 ** (self.si_std_db / div))


@dataclass
class ChannelSet:
    """One realization of every link.

    Shapes: ``h_d`` (U, M), ``h_r`` (U, N), ``g_mat`` (M, N), ``h_si`` (N, N).
    Row ``i`` of ``h_d`` / ``h_r`` is the channel of node ``i``.
    """

    h_d: np.ndarray
    h_r: np.ndarray
    g_mat: np.ndarray
    h_si: np.ndarray = field(default=None)

    def __post_init__(self):
        self.h_d = np.atleast_2d(np.asarray(self.h_d, dtype=np.complex128))
        self.h_r = np.atleast_2d(np.asarray(self.h_r, dtype=np.complex128))
        self.g_mat = np.atleast_2d(np.asarray(self.g_mat, dtype=np.complex128))
        n = self.h_r.shape[1]
        if self.h_si is None:
            self.h_si = np.zeros((n, n), dtype=np.complex128)
        self.h_si = np.atleast_2d(np.asarray(self.h_si, dtype=np.complex128))
        u, m = self.h_d.shape
        if self.h_r.shape[0] != u:
            raise DimensionMismatch("h_d and h_r disagree on the number of nodes")
        if self.g_mat.shape != (m, n):
            raise DimensionMismatch(f"g_mat must be {(m, n)}, got {self.g_mat.shape}")
        if self.h_si.shape != (n, n):
            raise DimensionMismatch(f"h_si must be {(n, n)}, got {self.h_si.shape}")

    @property
    def num_nodes(self):
        return self.h_d.shape[0]

    @property
    def num_antennas(self):
        return self.h_d.shape[1]

    @property
    def num_elements(self):
        return self.h_r.shape[1]


def distance(a, b):
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


def path_loss(dist, exponent, params):
    """Linear power gain ``C0 (dist/ref)^(-exponent)`` with ``C0`` given as a loss in dB."""
    if dist <= 0:
        raise NonPositiveDistance(f"distance must be positive, got {dist}")
    return 10.0 ** (-params.c0_db / 10.0) * (dist / params.ref_dist) ** (-exponent)


def ula_steering(n, angle):
    """Half-wavelength ULA response; unit-modulus entries."""
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def azimuth(src, dst):
    d = np.asarray(dst, float) - np.asarray(src, float)
    return float(np.arctan2(d[1], d[0]))


def rician_channel(rows, cols, rician_db, gain, los, rng):
    los = np.asarray(los, dtype=np.complex128)
    if los.size != rows * cols:
        raise DimensionMismatch(f"los must have {rows * cols} entries, got {los.size}")
    los = los.reshape(rows, cols)
    kappa = 10.0 ** (rician_db / 10.0)
    if np.isinf(kappa):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = np.sqrt(kappa / (1 + kappa)), np.sqrt(1 / (1 + kappa))
    scatter = sample_complex_gaussian(0, 1.0, rng, size=(rows, cols))
    return np.sqrt(gain) * (w_los * los + w_nlos * scatter)


def draw_node_positions(num_nodes, region, rng):
    """Uniform node placement in ``region = ((x0, x1), (y0, y1), z)``."""
    (x0, x1), (y0, y1), z = region
    xs = rng.uniform(x0, x1, num_nodes)
    ys = rng.uniform(y0, y1, num_nodes)
    return tuple((float(x), float(y), float(z)) for x, y in zip(xs, ys))


def generate_channels(geom, pl, fade, num_antennas, num_elements, rng):
    m, n = num_antennas, num_elements
    if m < 1 or n < 1:
        raise ValueError("M and N must be positive")
    u = geom.num_nodes

    d_rs = distance(geom.ris_pos, geom.server_pos)
    los_g = np.outer(
        ula_steering(m, azimuth(geom.server_pos, geom.ris_pos)),
        ula_steering(n, azimuth(geom.ris_pos, geom.server_pos)).conj(),
    )
    g_mat = rician_channel(m, n, fade.rician_db_rs, path_loss(d_rs, pl.exponent_rs, pl), los_g, rng)

    h_d = np.empty((u, m), dtype=np.complex128)
    h_r = np.empty((u, n), dtype=np.complex128)
    for i, pos in enumerate(geom.node_pos):
        gain_dd = path_loss(distance(pos, geom.server_pos), pl.exponent_dd, pl)
        los_dd = ula_steering(m, azimuth(geom.server_pos, pos))
        h_d[i] = rician_channel(1, m, fade.rician_db_dd, gain_dd, los_dd, rng)[0]
        gain_dr = path_loss(distance(pos, geom.ris_pos), pl.exponent_dr, pl)
        los_dr = ula_steering(n, azimuth(geom.ris_pos, pos))
        h_r[i] = rician_channel(1, n, fade.rician_db_dr, gain_dr, los_dr, rng)[0]

    nu = fade.si_std
    h_si = sample_complex_gaussian(0, nu**2, rng, size=(n, n))
    return ChannelSet(h_d=h_d, h_r=h_r, g_mat=g_mat, h_si=h_si)
