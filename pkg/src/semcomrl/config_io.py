"""Flat key=value experiment configuration files.

Format: one `section.key = value` per line, `#` comments, blank lines
ignored.  Two sections exist: `scenario.*` maps onto ScenarioConfig fields
and `experiment.*` onto ExperimentSpec.  Unknown or duplicate keys are
rejected with line numbers; all problems in a file are reported together.

Units are SI with one deliberate exception: the noise power spectral
density may be given as `scenario.noise_psd_w_per_mhz` (the unit the
scenario tables are usually quoted in); ingestion divides by 1e6 to obtain
W/Hz.  Serialization always emits the W/Hz key so values round-trip
exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .netmodel import ScenarioConfig

ALGORITHMS = ("ppo", "dqn", "random", "oracle")

_INT, _FLOAT, _STR, _BOOL, _INT_LIST, _FLOAT_LIST = range(6)

_SCENARIO_KEYS = {
    "users": _INT,
    "rbs": _INT,
    "rb_bandwidth_hz": _FLOAT,
    "tx_power_w": _FLOAT,
    "noise_psd_w_per_hz": _FLOAT,
    "noise_psd_w_per_mhz": _FLOAT,
    "interference_min_w": _FLOAT,
    "interference_max_w": _FLOAT,
    "cell_radius_m": _FLOAT,
    "bs_cpu_hz_min": _FLOAT,
    "bs_cpu_hz_max": _FLOAT,
    "bs_cycles_per_bit_min": _FLOAT,
    "bs_cycles_per_bit_max": _FLOAT,
    "user_cpu_hz": _FLOAT_LIST,
    "user_cycles_per_bit": _FLOAT_LIST,
    "image_size_bits": _FLOAT,
    "decoder_size_bits": _FLOAT,
    "energy_coeff_bs": _FLOAT,
    "energy_coeff_user": _FLOAT,
    "delay_cap_s": _FLOAT,
    "energy_cap_j": _FLOAT,
    "penalty_delay": _FLOAT,
    "penalty_energy": _FLOAT,
    "feature_noise_kappa": _FLOAT,
    "similarity_temperature": _FLOAT,
    "num_classes": _INT,
    "intra_class_jitter": _FLOAT,
    "draws_per_user": _INT,
}

_EXPERIMENT_KEYS = {
    "algorithm": _STR,
    "seeds": _INT_LIST,
    "iterations": _INT,
    "output_dir": _STR,
    "sinr_grid_db": _FLOAT_LIST,
    "oracle_samples": _INT,
    "fixed_channel": _BOOL,
    "record_timing": _BOOL,
}

_REQUIRED = ("experiment.algorithm", "experiment.seeds")


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run: algorithm, seeds, budget and output destination."""

    algorithm: str
    seeds: tuple[int, ...]
    iterations: int = 500
    output_dir: str = "runs"
    sinr_grid_db: tuple[float, ...] = ()
    oracle_samples: int = 1000
    fixed_channel: bool = False
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "sinr_grid_db", tuple(float(v) for v in self.sinr_grid_db))
        problems = self.validate()
        if problems:
            raise ValueError("invalid experiment spec: " + "; ".join(problems))

    def validate(self) -> list[str]:
        p = []
        if self.algorithm not in ALGORITHMS:
            p.append(f"algorithm {self.algorithm!r} not one of {ALGORITHMS}")
        if not self.seeds:
            p.append("need at least one seed")
        if self.iterations < 1:
            p.append("iterations must be >= 1")
        if self.oracle_samples < 1:
            p.append("oracle_samples must be >= 1")
        if not self.output_dir:
            p.append("output_dir must be non-empty")
        return p


def _parse_value(raw: str, kind: int, where: str) -> object:
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _BOOL:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError("expected true or false")
            return low == "true"
        if kind == _INT_LIST:
            return tuple(int(v.strip()) for v in raw.split(",") if v.strip())
        if kind == _FLOAT_LIST:
            return tuple(float(v.strip()) for v in raw.split(",") if v.strip())
        return raw
    except ValueError as err:
        raise ValueError(f"{where}: cannot parse {raw!r} ({err})") from None


def parse_config(text: str) -> tuple[ScenarioConfig, ExperimentSpec]:
    """Parse config text; collects every problem before raising."""
    scenario: dict[str, object] = {}
    experiment: dict[str, object] = {}
    problems: list[str] = []
    seen: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'section.key = value'")
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in seen:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        seen.add(key)
        section, _, field = key.partition(".")
        table = {"scenario": _SCENARIO_KEYS, "experiment": _EXPERIMENT_KEYS}.get(section)
        if table is None or field not in table:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            parsed = _parse_value(value, table[field], f"line {lineno} ({key})")
        except ValueError as err:
            problems.append(str(err))
            continue
        (scenario if section == "scenario" else experiment)[field] = parsed

    for req in _REQUIRED:
        if req.split(".", 1)[1] not in experiment:
            problems.append(f"missing required field {req!r}")
    if problems:
        raise ValueError("config errors: " + "; ".join(problems))

    return _build_scenario(scenario), _build_experiment(experiment)


def _build_scenario(fields: dict[str, object]) -> ScenarioConfig:
    kwargs = dict(fields)
    if "noise_psd_w_per_mhz" in kwargs:
        if "noise_psd_w_per_hz" in kwargs:
            raise ValueError(
                "config errors: give noise_psd_w_per_hz or noise_psd_w_per_mhz, not both"
            )
        kwargs["noise_psd_w_per_hz"] = kwargs.pop("noise_psd_w_per_mhz") / 1e6
    for base in ("bs_cpu_hz", "bs_cycles_per_bit"):
        lo, hi = kwargs.pop(f"{base}_min", None), kwargs.pop(f"{base}_max", None)
        if (lo is None) != (hi is None):
            raise ValueError(f"config errors: {base}_min and {base}_max go together")
        if lo is not None:
            kwargs[f"{base}_range"] = (lo, hi)
    users = kwargs.get("users", ScenarioConfig.users)
    for per_user in ("user_cpu_hz", "user_cycles_per_bit"):
        vals = kwargs.get(per_user)
        if vals is not None and len(vals) == 1:
            kwargs[per_user] = tuple(vals) * users
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as err:
        raise ValueError(f"config errors: {err}") from None


def _build_experiment(fields: dict[str, object]) -> ExperimentSpec:
    try:
        return ExperimentSpec(**fields)
    except ValueError as err:
        raise ValueError(f"config errors: {err}") from None


def load_config(path) -> tuple[ScenarioConfig, ExperimentSpec]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: ScenarioConfig, spec: ExperimentSpec) -> str:
    """Emit every key explicitly so defaults survive a round trip."""
    lines = ["# semcomrl experiment config"]
    lines.append(f"scenario.users = {cfg.users}")
    lines.append(f"scenario.rbs = {cfg.rbs}")
    lines.append(f"scenario.rb_bandwidth_hz = {cfg.rb_bandwidth_hz!r}")
    lines.append(f"scenario.tx_power_w = {cfg.tx_power_w!r}")
    lines.append(f"scenario.noise_psd_w_per_hz = {cfg.noise_psd_w_per_hz!r}")
    lines.append(f"scenario.interference_min_w = {cfg.interference_min_w!r}")
    lines.append(f"scenario.interference_max_w = {cfg.interference_max_w!r}")
    lines.append(f"scenario.cell_radius_m = {cfg.cell_radius_m!r}")
    lines.append(f"scenario.bs_cpu_hz_min = {cfg.bs_cpu_hz_range[0]!r}")
    lines.append(f"scenario.bs_cpu_hz_max = {cfg.bs_cpu_hz_range[1]!r}")
    lines.append(f"scenario.bs_cycles_per_bit_min = {cfg.bs_cycles_per_bit_range[0]!r}")
    lines.append(f"scenario.bs_cycles_per_bit_max = {cfg.bs_cycles_per_bit_range[1]!r}")
    lines.append("scenario.user_cpu_hz = " + ",".join(repr(v) for v in cfg.user_cpu_hz))
    lines.append(
        "scenario.user_cycles_per_bit = " + ",".join(repr(v) for v in cfg.user_cycles_per_bit)
    )
    lines.append(f"scenario.image_size_bits = {cfg.image_size_bits!r}")
    lines.append(f"scenario.decoder_size_bits = {cfg.decoder_size_bits!r}")
    lines.append(f"scenario.energy_coeff_bs = {cfg.energy_coeff_bs!r}")
    lines.append(f"scenario.energy_coeff_user = {cfg.energy_coeff_user!r}")
    lines.append(f"scenario.delay_cap_s = {cfg.delay_cap_s!r}")
    lines.append(f"scenario.energy_cap_j = {cfg.energy_cap_j!r}")
    lines.append(f"scenario.penalty_delay = {cfg.penalty_delay!r}")
    lines.append(f"scenario.penalty_energy = {cfg.penalty_energy!r}")
    lines.append(f"scenario.feature_noise_kappa = {cfg.feature_noise_kappa!r}")
    lines.append(f"scenario.similarity_temperature = {cfg.similarity_temperature!r}")
    lines.append(f"scenario.num_classes = {cfg.num_classes}")
    lines.append(f"scenario.intra_class_jitter = {cfg.intra_class_jitter!r}")
    lines.append(f"scenario.draws_per_user = {cfg.draws_per_user}")
    lines.append(f"experiment.algorithm = {spec.algorithm}")
    lines.append("experiment.seeds = " + ",".join(str(s) for s in spec.seeds))
    lines.append(f"experiment.iterations = {spec.iterations}")
    lines.append(f"experiment.output_dir = {spec.output_dir}")
    if spec.sinr_grid_db:
        lines.append("experiment.sinr_grid_db = " + ",".join(repr(v) for v in spec.sinr_grid_db))
    lines.append(f"experiment.oracle_samples = {spec.oracle_samples}")
    lines.append(f"experiment.fixed_channel = {'true' if spec.fixed_channel else 'false'}")
    lines.append(f"experiment.record_timing = {'true' if spec.record_timing else 'false'}")
    return "\n".join(lines) + "\n"
