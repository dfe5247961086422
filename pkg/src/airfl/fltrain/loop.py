"""Federated gradient descent with ideal or over-the-air aggregation."""

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from airfl.airlink import NoiseParams, RisMode, aggregate_over_the_air, gradient_statistics
from airfl.channel import FadingParams, Geometry, PathLossParams, generate_channels
from airfl.errors import DimensionMismatch
from airfl.fltrain.model import LinearModel, evaluate_accuracy, global_loss, local_gradient
from airfl.optimizer import AoConfig, alternating_optimize


class Aggregation(str, enum.Enum):
    IDEAL = "ideal"
    AIRCOMP = "active"  # active RIS
    AIRCOMP_PASSIVE = "passive"
    AIRCOMP_NO_RIS = "none"

    @property
    def ris_mode(self):
        return {
            Aggregation.AIRCOMP: RisMode.ACTIVE,
            Aggregation.AIRCOMP_PASSIVE: RisMode.PASSIVE,
            Aggregation.AIRCOMP_NO_RIS: RisMode.NONE,
        }.get(self)


@dataclass
class FlConfig:
    rounds: int = 50
    learning_rate: object = 0.05  # float, or a sequence with one entry per round
    aggregation: Aggregation = Aggregation.AIRCOMP

    def __post_init__(self):
        self.aggregation = Aggregation(self.aggregation)
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        rates = np.atleast_1d(np.asarray(self.learning_rate, dtype=float))
        if np.any(rates <= 0):
            raise ValueError("learning rate must be positive")
        if rates.size not in (1, self.rounds):
            raise ValueError("learning-rate schedule needs one entry per round")

    def eta(self, t):
        rates = np.atleast_1d(np.asarray(self.learning_rate, dtype=float))
        return float(rates[0] if rates.size == 1 else rates[t - 1])


@dataclass
class Scenario:
    """Everything a training run needs besides the FL and AO settings."""

    shards: list
    model: LinearModel  # initial model
    geometry: Geometry
    test: object = None  # DataShard or None
    path_loss: PathLossParams = field(default_factory=PathLossParams)
    fading: FadingParams = field(default_factory=FadingParams)
    num_antennas: int = 4
    num_elements: int = 32
    p_node: float = 1.0
    p_ris: float = 1.0
    noise: NoiseParams = field(default_factory=NoiseParams)
    static_channel: bool = False  # reuse the first draw in every round

    def __post_init__(self):
        if len(self.shards) != self.geometry.num_nodes:
            raise DimensionMismatch(f"{len(self.shards)} shards for {self.geometry.num_nodes} nodes")

    @property
    def sizes(self):
        return np.array([s.size for s in self.shards], dtype=np.int64)


@dataclass
class RoundRecord:
    round: int
    nmse: float  # ‖ĝ − g‖² / d
    error_sq: float  # ‖ĝ − g‖²
    predicted_mse: float  # closed-form per-entry prediction
    train_loss: float  # global loss after the update
    test_accuracy: float
    ao_iters: int
    elapsed_ms: float


@dataclass
class RoundTrace:
    records: list = field(default_factory=list)
    initial_loss: float = float("nan")
    final_weights: np.ndarray = None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def error_sq(self):
        return self.column("error_sq")

    @property
    def losses(self):
        return self.column("train_loss")


def aggregate_ideal(grads, sizes):
    grads = np.atleast_2d(np.asarray(grads, dtype=float))
    sizes = np.asarray(sizes, dtype=float).reshape(-1)
    if grads.shape[0] != sizes.size:
        raise DimensionMismatch("one size per gradient required")
    return sizes @ grads / sizes.sum()


def global_update(w, g_hat, eta):
    w = np.asarray(w, dtype=float)
    g_hat = np.asarray(g_hat, dtype=float)
    if w.shape != g_hat.shape:
        raise DimensionMismatch("weights and gradient differ in shape")
    return w - eta * g_hat


def round_channels(scenario, channel_seed, t):
    """Channel draw for round ``t``; identical across arms for one seed."""
    t_eff = 1 if scenario.static_channel else t
    rng = np.random.default_rng([channel_seed, t_eff])
    return generate_channels(
        scenario.geometry, scenario.path_loss, scenario.fading, scenario.num_antennas, scenario.num_elements, rng
    )


def run_fl(fl, scenario, optimizer_config=None, rng=None, channel_seed=None):
    """Train for ``fl.rounds`` rounds and record one :class:`RoundRecord` per round.

    ``rng`` drives the receiver and RIS noise; ``channel_seed`` (drawn from
    ``rng`` when omitted) fixes the per-round channel realizations.
    """
    optimizer_config = optimizer_config or AoConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    if channel_seed is None:
        channel_seed = int(rng.integers(2**31))
    model = scenario.model
    w = model.flat()
    shards, sizes = scenario.shards, scenario.sizes
    total = float(sizes.sum())
    mode = fl.aggregation.ris_mode

    trace = RoundTrace(initial_loss=global_loss(model, shards))
    for t in range(1, fl.rounds + 1):
        start = time.perf_counter()
        current = model.with_flat(w)
        grads = np.array([local_gradient(current, s) for s in shards])
        g = aggregate_ideal(grads, sizes)
        if mode is None:
            g_hat, predicted, iters = g, 0.0, 0
        else:
            ch = round_channels(scenario, channel_seed, t)
            stats, packed = gradient_statistics(grads, sizes)
            ao = alternating_optimize(
                ch, mode, stats, scenario.p_node, scenario.p_ris, scenario.noise, optimizer_config,
                rng=np.random.default_rng([channel_seed, t, 1]),
            )
            tx = ao.transceiver(scenario.p_node, scenario.p_ris)
            g_hat = aggregate_over_the_air(packed, stats, g.size, tx, ch, ao.ris, scenario.noise, rng)
            predicted, iters = ao.final_mse / total**2, ao.iters_used
        err = float(np.sum((g_hat - g) ** 2))
        w = global_update(w, g_hat, fl.eta(t))
        updated = model.with_flat(w)
        acc = evaluate_accuracy(updated, scenario.test) if scenario.test is not None else float("nan")
        trace.records.append(
            RoundRecord(
                round=t,
                nmse=err / g.size,
                error_sq=err,
                predicted_mse=predicted,
                train_loss=global_loss(updated, shards),
                test_accuracy=acc,
                ao_iters=iters,
                elapsed_ms=1e3 * (time.perf_counter() - start),
            )
        )
    trace.final_weights = w
    return trace
