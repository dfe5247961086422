"""Flat ``section.key = value`` experiment configuration.

Defaults reproduce the full-scale reference setting (M = 10, N = 200,
U = 20). Decibel keys end in ``_db`` and are converted once, here; power
quantities use 10^(x/10) and the self-interference amplitude uses the
convention named by ``fading.si_convention``.
"""

import logging
from dataclasses import dataclass, fields
from pathlib import Path

from airfl.airlink import NoiseParams
from airfl.channel import FadingParams, PathLossParams
from airfl.errors import ConfigTypeError, MissingFile, UnknownKey
from airfl.fltrain import FlConfig, LossKind
from airfl.optimizer import AoConfig

log = logging.getLogger(__name__)

ARMS = ("active", "passive", "none", "ideal")


def _floats(n):
    def parse(text):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return tuple(float(p) for p in parts)

    return parse


def _int_list(text):
    vals = tuple(int(p) for p in text.split(",") if p.strip())
    if not vals:
        raise ValueError("list must be nonempty")
    return vals


def _arm_list(text):
    vals = tuple(p.strip() for p in text.split(",") if p.strip())
    if not vals or any(v not in ARMS for v in vals):
        raise ValueError(f"arms must be a nonempty subset of {ARMS}")
    return vals


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {options}")
        return text

    return parse


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (parser, default, check); every key is documented by its default
SCHEMA = {
    "scenario.M": (int, 10, _positive),
    "scenario.N": (int, 200, _positive),
    "scenario.U": (int, 20, _positive),
    "scenario.server_pos": (_floats(3), (-50.0, 0.0, 10.0), None),
    "scenario.ris_pos": (_floats(3), (0.0, 0.0, 10.0), None),
    "scenario.region": (_floats(5), (0.0, 20.0, -10.0, 10.0, 0.0), None),  # x0,x1,y0,y1,z
    "scenario.p_node_db": (float, 0.0, None),
    "scenario.p_ris_db": (float, 0.0, None),
    "scenario.static_channel": (_bool, False, None),
    "pathloss.c0_db": (float, 30.0, None),
    "pathloss.ref_dist": (float, 1.0, _positive),
    "pathloss.exponent_dr": (float, 2.8, _nonneg),
    "pathloss.exponent_dd": (float, 3.6, _nonneg),
    "pathloss.exponent_rs": (float, 2.2, _nonneg),
    "fading.rician_db_dr": (float, 0.0, None),
    "fading.rician_db_dd": (float, 0.0, None),
    "fading.rician_db_rs": (float, 3.0, None),
    "fading.si_db": (float, -30.0, None),
    "fading.si_convention": (_choice("amplitude", "power"), "amplitude", None),
    "noise.sigma_a_db": (float, -80.0, None),
    "noise.sigma_e_db": (float, -80.0, None),
    "ao.outer_tol": (float, 1e-6, _positive),
    "ao.outer_max_iters": (int, 50, _positive),
    "ao.inner_tol": (float, 1e-4, _positive),
    "ao.inner_max_iters": (int, 200, _positive),
    "ao.tau0": (float, 1.0, _positive),
    "ao.tau_growth": (float, 1.1, lambda x: x > 1),
    "ao.tau_max": (float, 1e6, _positive),
    "ao.bisect_tol": (float, 1e-8, _positive),
    "ao.lambda_grid_points": (int, 2000, lambda x: x >= 2),
    "ao.force_active_power": (_bool, False, None),
    "fl.rounds": (int, 50, _positive),
    "fl.learning_rate": (float, 0.05, _positive),
    "fl.loss": (_choice("cross_entropy", "least_squares"), "cross_entropy", None),
    "fl.reg": (float, 0.0, _nonneg),
    "dataset.path": (str, "", None),  # directory with the four MNIST IDX files; empty = bundled subset
    "dataset.desk_scale": (_bool, True, None),
    "dataset.train_size": (int, 4000, _positive),
    "dataset.test_size": (int, 1000, _positive),
    "dataset.num_shards": (int, 40, _positive),
    "dataset.shards_per_node": (int, 2, _positive),
    "dataset.subsample_seed": (int, 0, _nonneg),
    "experiment.seeds": (_int_list, (0, 1, 2, 3, 4), None),
    "experiment.arms": (_arm_list, ("active", "passive", "none"), None),
    "experiment.output_dir": (str, "results", None),
    "experiment.record_timing": (_bool, False, None),
    "experiment.workers": (int, 1, _positive),
}


def db_to_power(x_db):
    return float(10.0 ** (x_db / 10.0))


@dataclass
class ScenarioSettings:
    num_antennas: int
    num_elements: int
    num_nodes: int
    server_pos: tuple
    ris_pos: tuple
    region: tuple  # ((x0, x1), (y0, y1), z)
    p_node: float
    p_ris: float
    static_channel: bool
    path_loss: PathLossParams
    fading: FadingParams
    noise: NoiseParams


@dataclass
class DatasetSettings:
    path: str
    desk_scale: bool
    train_size: int
    test_size: int
    num_shards: int
    shards_per_node: int
    subsample_seed: int


@dataclass
class ExperimentConfig:
    scenario: ScenarioSettings
    ao: AoConfig
    fl: FlConfig
    loss: LossKind
    reg: float
    dataset: DatasetSettings
    seeds: tuple
    arms: tuple
    output_dir: str
    record_timing: bool
    workers: int
    values: dict  # resolved key -> value, defaults included

    def resolved_text(self):
        return "".join(f"{k} = {_fmt(self.values[k])}\n" for k in SCHEMA)


def parse_config_text(text, source="<string>"):
    """Parse config text into a dict of resolved values (defaults filled in)."""
    values = {k: entry[1] for k, entry in SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigTypeError(f"{source}:{lineno}: expected 'section.key = value', got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise UnknownKey(f"{source}:{lineno}: unknown key {key!r}")
        parser, _, check = SCHEMA[key]
        try:
            parsed = parser(val)
        except ValueError as exc:
            raise ConfigTypeError(f"{key}: cannot parse {val!r} ({exc})") from None
        if check is not None and not check(parsed):
            raise ConfigTypeError(f"{key}: value {val!r} out of range")
        values[key] = parsed
    return values


def build_config(values):
    v = values
    for key in ("scenario.p_node_db", "scenario.p_ris_db", "noise.sigma_a_db", "noise.sigma_e_db"):
        log.info("%s = %g dB -> %.6g (power, 10^(x/10))", key, v[key], db_to_power(v[key]))
    fading = FadingParams(
        rician_db_dr=v["fading.rician_db_dr"],
        rician_db_dd=v["fading.rician_db_dd"],
        rician_db_rs=v["fading.rician_db_rs"],
        si_std_db=v["fading.si_db"],
        si_db_convention=v["fading.si_convention"],
    )
    log.info("fading.si_db = %g dB -> nu = %.6g (%s convention)", v["fading.si_db"], fading.si_std, fading.si_db_convention)
    region = v["scenario.region"]
    scenario = ScenarioSettings(
        num_antennas=v["scenario.M"],
        num_elements=v["scenario.N"],
        num_nodes=v["scenario.U"],
        server_pos=v["scenario.server_pos"],
        ris_pos=v["scenario.ris_pos"],
        region=((region[0], region[1]), (region[2], region[3]), region[4]),
        p_node=db_to_power(v["scenario.p_node_db"]),
        p_ris=db_to_power(v["scenario.p_ris_db"]),
        static_channel=v["scenario.static_channel"],
        path_loss=PathLossParams(
            c0_db=v["pathloss.c0_db"],
            ref_dist=v["pathloss.ref_dist"],
            exponent_dr=v["pathloss.exponent_dr"],
            exponent_dd=v["pathloss.exponent_dd"],
            exponent_rs=v["pathloss.exponent_rs"],
        ),
        fading=fading,
        noise=NoiseParams(db_to_power(v["noise.sigma_a_db"]), db_to_power(v["noise.sigma_e_db"])),
    )
    ao = AoConfig(**{f.name: v[f"ao.{f.name}"] for f in fields(AoConfig) if f"ao.{f.name}" in v})
    dataset = DatasetSettings(
        path=v["dataset.path"],
        desk_scale=v["dataset.desk_scale"],
        train_size=v["dataset.train_size"],
        test_size=v["dataset.test_size"],
        num_shards=v["dataset.num_shards"],
        shards_per_node=v["dataset.shards_per_node"],
        subsample_seed=v["dataset.subsample_seed"],
    )
    if dataset.path and not Path(dataset.path).exists():
        raise MissingFile(f"dataset.path does not exist: {dataset.path}")
    if dataset.num_shards != dataset.shards_per_node * scenario.num_nodes:
        raise ConfigTypeError(
            f"dataset.num_shards: {dataset.num_shards} != shards_per_node x scenario.U"
            f" = {dataset.shards_per_node * scenario.num_nodes}"
        )
    return ExperimentConfig(
        scenario=scenario,
        ao=ao,
        fl=FlConfig(rounds=v["fl.rounds"], learning_rate=v["fl.learning_rate"]),
        loss=LossKind(v["fl.loss"]),
        reg=v["fl.reg"],
        dataset=dataset,
        seeds=v["experiment.seeds"],
        arms=v["experiment.arms"],
        output_dir=v["experiment.output_dir"],
        record_timing=v["experiment.record_timing"],
        workers=v["experiment.workers"],
        values=dict(v),
    )


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"config file not found: {path}")
    return build_config(parse_config_text(path.read_text(), str(path)))


def default_config():
    return build_config(parse_config_text(""))


def with_overrides(cfg, **overrides):
    """Copy of ``cfg`` with dotted keys replaced, given as ``section__key=value``.

    Overrides go through the text parser, so they are validated like file input.
    """
    extra = "".join(f"{k.replace('__', '.')} = {_fmt(val)}\n" for k, val in overrides.items())
    return build_config(parse_config_text(cfg.resolved_text() + extra, "<overrides>"))


__all__ = [
    "ARMS",
    "SCHEMA",
    "DatasetSettings",
    "ExperimentConfig",
    "ScenarioSettings",
    "build_config",
    "db_to_power",
    "default_config",
    "load_config",
    "parse_config_text",
    "with_overrides",
]
