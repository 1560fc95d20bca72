# src/uavmec/utils/settings.py

import logging
import math
import os
from dataclasses import fields, replace
from typing import Any, Dict, Optional, Tuple

from uavmec.models.scenario import DEVIATION_MODES, UAV_MOVEMENTS, ScenarioConfig
from uavmec.models.training import SECTION_NAMES, TRANSITION_REWARDS, Settings
from uavmec.utils.errors import ConfigError

SETTINGS_FILE = os.path.join(os.path.dirname(__file__), '../../../config/default.conf')

PAIR_FIELDS = {"device_locations"}
INT_TUPLE_FIELDS = {"hidden_layers"}
FLOAT_TUPLE_FIELDS = {"mean_directions"}
DB_KEYS = {"beta0_db": "beta0", "noise_power_dbm": "noise_power"}

logger = logging.getLogger(__name__)


def _field_index(settings: Settings) -> Dict[str, Tuple[str, Any]]:
    index = {}
    for section_name in SECTION_NAMES:
        section = getattr(settings, section_name)
        for f in fields(section):
            index[f.name] = (section_name, getattr(section, f.name))
    return index


def _parse_bool(key: str, raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(key, f"expected a boolean, got '{raw}'")


def _parse_value(key: str, raw: str, default: Any) -> Any:
    try:
        if key in PAIR_FIELDS:
            if not raw:
                return ()
            pairs = []
            for item in raw.split(','):
                x, y = item.split(':')
                pairs.append((float(x), float(y)))
            return tuple(pairs)
        if key in INT_TUPLE_FIELDS:
            return tuple(int(v) for v in raw.split(',') if v.strip())
        if key in FLOAT_TUPLE_FIELDS:
            return tuple(float(v) for v in raw.split(',') if v.strip())
        if isinstance(default, bool):
            return _parse_bool(key, raw)
        if isinstance(default, int):
            value = float(raw)
            if not value.is_integer():
                raise ConfigError(key, f"expected an integer, got '{raw}'")
            return int(value)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(key, f"cannot parse '{raw}': {e}") from e


def parse_settings(text: str, source: str = "<string>") -> Settings:
    """
    Parse a flat key/value document into validated Settings.

    :param text: Document contents, one `key = value` per line, `#` comments
    :param source: Name used in log messages
    :return: Validated Settings
    """
    defaults = Settings()
    index = _field_index(defaults)
    values: Dict[str, Any] = {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got '{line}'")
        key, raw = (part.strip() for part in line.split('=', 1))
        if key in seen:
            raise ConfigError(key, "duplicate key")
        seen.add(key)
        if key in DB_KEYS:
            target = DB_KEYS[key]
            if target in seen:
                raise ConfigError(key, f"conflicts with '{target}'")
            db = _parse_value(key, raw, 0.0)
            values[target] = 10 ** (db / 10) if key == "beta0_db" else 10 ** ((db - 30) / 10)
            seen.add(target)
            continue
        if key not in index:
            raise ConfigError(key, "unknown key")
        values[key] = _parse_value(key, raw, index[key][1])

    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTION_NAMES}
    for key, value in values.items():
        sections[index[key][0]][key] = value
    settings = Settings(**{
        name: replace(getattr(defaults, name), **sections[name]) for name in SECTION_NAMES
    })
    validate_settings(settings)
    logger.debug(f"Loaded {len(values)} settings from {source}")
    return settings


def load_settings(path: Optional[str] = None) -> Settings:
    """
    Load settings from a config file; built-in defaults when no path is given.

    :param path: Config file path
    :return: Validated Settings
    """
    if path is None:
        path = SETTINGS_FILE if os.path.exists(SETTINGS_FILE) else None
    if path is None:
        settings = Settings()
        validate_settings(settings)
        return settings
    if not os.path.exists(path):
        raise ConfigError("path", f"config file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return parse_settings(f.read(), source=path)


def load_config(path: str) -> ScenarioConfig:
    return load_settings(path).scenario


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{x!r}:{y!r}" for x, y in value)
        return ", ".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def format_settings(settings: Settings) -> str:
    lines = []
    for section_name in SECTION_NAMES:
        section = getattr(settings, section_name)
        lines.append(f"# [{section_name}]")
        for f in fields(section):
            lines.append(f"{f.name} = {_format_value(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)


def save_settings(settings: Settings, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(format_settings(settings))


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(key, message)


def validate_settings(settings: Settings) -> None:
    """
    Check every configuration invariant; raises ConfigError naming the field.

    :param settings: Settings to check
    """
    s = settings.scenario
    for key in ("num_mtus", "num_devices", "fhp_rows", "fhp_cols", "num_slots"):
        _require(getattr(s, key) >= 1, key, "must be at least 1")
    for key in ("slot_length", "uav_altitude", "bandwidth", "noise_power", "beta0",
                "fly_power", "hover_power", "uav_speed", "fhp_min_spacing",
                "task_bits_min", "task_cycles_per_bit", "deadline_min",
                "mtu_f_max", "device_f_max", "uav_f_max",
                "mtu_kappa", "device_kappa", "uav_kappa",
                "mtu_p_max", "mtu_p_max_uav", "uav_p_max",
                "mtu_energy_budget", "device_energy_budget", "uav_energy_budget"):
        value = getattr(s, key)
        _require(math.isfinite(value) and value > 0, key, "must be positive and finite")
    _require(s.region_x_min < s.region_x_max, "region_x_max", "must exceed region_x_min")
    _require(s.region_y_min < s.region_y_max, "region_y_max", "must exceed region_y_min")
    _require(s.task_bits_min <= s.task_bits_max, "task_bits_max", "must be >= task_bits_min")
    _require(s.deadline_min <= s.deadline_max, "deadline_max", "must be >= deadline_min")
    _require(s.deadline_max <= s.slot_share * (1 + 1e-12), "deadline_max",
             f"exceeds the TDMA share slot_length/num_mtus = {s.slot_share!r}")
    _require(0 <= s.deviation_delta < 1, "deviation_delta",
             "must lie in [0, 1) or the actual frequency may reach zero")
    _require(s.deviation_mode in DEVIATION_MODES, "deviation_mode", f"one of {DEVIATION_MODES}")
    _require(s.uav_movement in UAV_MOVEMENTS, "uav_movement", f"one of {UAV_MOVEMENTS}")
    _require(0 <= s.initial_fhp < s.num_fhps, "initial_fhp", "outside the FHP grid")
    _require(s.region.width / s.fhp_cols >= s.fhp_min_spacing, "fhp_cols", "region too small for grid")
    _require(s.region.height / s.fhp_rows >= s.fhp_min_spacing, "fhp_rows", "region too small for grid")
    _require(not s.region.contains(s.bs_x, s.bs_y), "bs_x", "BS must lie outside the MTU region")
    if s.device_locations:
        _require(len(s.device_locations) == s.num_devices, "device_locations",
                 f"expected {s.num_devices} entries")
        _require(len(set(s.device_locations)) == len(s.device_locations), "device_locations",
                 "duplicate device coordinates")
        _require(all(s.region.contains(x, y) for x, y in s.device_locations), "device_locations",
                 "devices must lie inside the region")

    m = settings.mobility
    _require(0 <= m.mu1 <= 1, "mu1", "must lie in [0, 1]")
    _require(0 <= m.mu2 <= 1, "mu2", "must lie in [0, 1]")
    _require(m.mean_speed >= 0, "mean_speed", "must be non-negative")
    _require(m.speed_noise_std >= 0, "speed_noise_std", "must be non-negative")
    _require(m.direction_noise_std >= 0, "direction_noise_std", "must be non-negative")

    r = settings.reward
    _require(r.penalty > 0, "penalty", "must be positive")
    _require(r.reward_scale > 0, "reward_scale", "must be positive")

    t = settings.train
    _require(0 <= t.discount <= 1, "discount", "must lie in [0, 1]")
    _require(0 < t.learning_rate <= 1, "learning_rate", "must lie in (0, 1]")
    _require(1 <= t.batch_size <= t.memory_size, "batch_size", "must lie in [1, memory_size]")
    _require(0 <= t.epsilon_floor <= t.epsilon_init <= 1, "epsilon_init",
             "need 0 <= epsilon_floor <= epsilon_init <= 1")
    _require(t.epsilon_decrement >= 0, "epsilon_decrement", "must be non-negative")
    _require(t.target_sync_interval >= 1, "target_sync_interval", "must be at least 1")
    _require(t.episodes >= 1, "episodes", "must be at least 1")
    _require(all(h >= 1 for h in t.hidden_layers), "hidden_layers", "sizes must be positive")
    _require(t.transition_reward in TRANSITION_REWARDS, "transition_reward",
             f"one of {TRANSITION_REWARDS}")

    j = settings.joint
    _require(j.threshold > 0, "threshold", "must be positive")
    _require(j.max_iterations >= 1, "max_iterations", "must be at least 1")
    _require(j.retrain_episodes >= 1, "retrain_episodes", "must be at least 1")
