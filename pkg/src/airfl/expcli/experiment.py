"""Arms x seeds orchestration and CSV trace output."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from airfl.channel import Geometry, draw_node_positions
from airfl.expcli.dataset import load_dataset
from airfl.fltrain import FlConfig, LinearModel, Scenario, run_fl, shard_noniid

log = logging.getLogger(__name__)

TRACE_HEADER = "arm,seed,round,nmse,predicted_mse,train_loss,test_accuracy,ao_iters,elapsed_ms"
SUMMARY_HEADER = (
    "arm,round,n_seeds,nmse_mean,nmse_se,predicted_mse_mean,train_loss_mean,train_loss_se,"
    "test_accuracy_mean,test_accuracy_se"
)
NUM_CLASSES = 10


def _num(x):
    """Locale-independent shortest round-trip float text."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def build_scenario(cfg, data, seed):
    """Node placement and shard assignment for one seed (shared by all arms)."""
    sc = cfg.scenario
    rng = np.random.default_rng([seed, 0])
    shards = shard_noniid(
        data.train_x, data.train_y, cfg.dataset.num_shards, cfg.dataset.shards_per_node, sc.num_nodes, rng
    )
    nodes = draw_node_positions(sc.num_nodes, sc.region, rng)
    return Scenario(
        shards=shards,
        model=LinearModel.zeros(NUM_CLASSES, data.train_x.shape[1], cfg.loss, cfg.reg),
        geometry=Geometry(sc.server_pos, sc.ris_pos, nodes),
        test=data.test,
        path_loss=sc.path_loss,
        fading=sc.fading,
        num_antennas=sc.num_antennas,
        num_elements=sc.num_elements,
        p_node=sc.p_node,
        p_ris=sc.p_ris,
        noise=sc.noise,
        static_channel=sc.static_channel,
    )


def run_arm(cfg, data, arm, seed, scenario=None):
    scenario = scenario or build_scenario(cfg, data, seed)
    fl = FlConfig(rounds=cfg.fl.rounds, learning_rate=cfg.fl.learning_rate, aggregation=arm)
    return run_fl(fl, scenario, cfg.ao, rng=np.random.default_rng([seed, 2]), channel_seed=seed)


def trace_rows(arm, seed, trace, record_timing=False):
    for r in trace.records:
        elapsed = r.elapsed_ms if record_timing else 0.0
        yield ",".join(
            [
                arm,
                str(seed),
                str(r.round),
                _num(r.nmse),
                _num(r.predicted_mse),
                _num(r.train_loss),
                _num(r.test_accuracy),
                str(r.ao_iters),
                _num(elapsed),
            ]
        )


def write_trace(path, arm, seed, trace, record_timing=False):
    lines = [TRACE_HEADER, *trace_rows(arm, seed, trace, record_timing)]
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), se


def summary_rows(traces, arms, seeds):
    for arm in arms:
        per_seed = [traces[(arm, s)] for s in seeds]
        rounds = len(per_seed[0].records)
        for t in range(rounds):
            recs = [tr.records[t] for tr in per_seed]
            nmse = _mean_se([r.nmse for r in recs])
            pred = _mean_se([r.predicted_mse for r in recs])
            loss = _mean_se([r.train_loss for r in recs])
            acc = _mean_se([r.test_accuracy for r in recs])
            yield ",".join(
                [arm, str(t + 1), str(len(recs)), _num(nmse[0]), _num(nmse[1]), _num(pred[0]),
                 _num(loss[0]), _num(loss[1]), _num(acc[0]), _num(acc[1])]
            )


@dataclass
class ExperimentResult:
    output_dir: Path
    traces: dict = field(default_factory=dict)  # (arm, seed) -> RoundTrace
    exit_status: int = 0

    def final(self, arm, column):
        return np.array([tr.column(column)[-1] for (a, _), tr in sorted(self.traces.items()) if a == arm])

    def mean_curve(self, arm, column):
        curves = [tr.column(column) for (a, _), tr in sorted(self.traces.items()) if a == arm]
        return np.mean(curves, axis=0)


def _worker(args):
    cfg, arm, seed = args
    data = load_dataset(cfg.dataset)
    return arm, seed, run_arm(cfg, data, arm, seed)


def run_experiment(cfg, output_dir=None, data=None):
    """Run every arm for every seed, writing per-run traces and a summary.

    Identical configs give byte-identical CSVs: all randomness is seeded from
    the seed list, and ``elapsed_ms`` is written as 0 unless timing is enabled.
    """
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(cfg.resolved_text(), encoding="ascii")
    result = ExperimentResult(output_dir=out)
    tasks = [(arm, seed) for seed in cfg.seeds for arm in cfg.arms]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for arm, seed, trace in pool.map(_worker, [(cfg, a, s) for a, s in tasks]):
                result.traces[(arm, seed)] = trace
    else:
        data = data or load_dataset(cfg.dataset)
        scenarios = {}
        for arm, seed in tasks:
            if seed not in scenarios:
                scenarios[seed] = build_scenario(cfg, data, seed)
            result.traces[(arm, seed)] = run_arm(cfg, data, arm, seed, scenarios[seed])
            log.info("finished arm=%s seed=%d", arm, seed)
    for (arm, seed), trace in result.traces.items():
        write_trace(out / f"{arm}_seed{seed}.csv", arm, seed, trace, cfg.record_timing)
    lines = [SUMMARY_HEADER, *summary_rows(result.traces, cfg.arms, cfg.seeds)]
    with open(out / "summary.csv", "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return result
