"""Scenario config files: sectioned key-value text with line-anchored errors.

Schema (all keys optional unless noted; ``#`` starts a comment anywhere):

    [scenario]
    frames = 200                  # required, >= 1
    seed = 7

    [ground_truth]
    lidar_cam   = 1 0 0 0  0 0 0  # required; 7 numbers (qw qx qy qz tx ty tz)
    radar_cam   = ...             # required; or 16 row-major matrix entries
    lidar_radar = ...             # optional; derived from the loop when absent

    [noise]
    rot_sigma_deg = 0.015
    trans_sigma_m = 0.003
    outlier_prob = 0.01
    outlier_scale = 10

    [events]
    <name> = FRAME SENSOR ROLL PITCH YAW DX DY DZ
                                  # sensor in {lidar, radar, camera};
                                  # angles in degrees, offsets in meters

    [monitor]
    window = 12
    decay = 0.65
    tau_r_deg = 0.05
    tau_t_m = 0.01
    tau_cal_r_deg = 0.05
    tau_cal_t_m = 0.01

    [mpn]
    enabled = false
    iterations = 4
    alphas = 0.5 0.5 0.5 0.5
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .monitor import MonitorConfig
from .refiner import CalibrationTriple, MpnConfig
from .se3 import EulerAngles, RigidTransform, Translation3, UnitQuaternion, parse_transform
from .simulate import SENSORS, DriftEvent, DriftScenario, NoiseModel


class ConfigError(ValueError):
    """Malformed scenario config; message carries file and line."""

    def __init__(self, path, lineno: int | None, message: str):
        anchor = f"{path}:{lineno}" if lineno is not None else str(path)
        super().__init__(f"{anchor}: {message}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class _Entry:
    value: str
    lineno: int


def _read_sections(path: Path) -> dict[str, dict[str, _Entry]]:
    sections: dict[str, dict[str, _Entry]] = {}
    current: dict[str, _Entry] | None = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if not name:
                raise ConfigError(path, lineno, "empty section name")
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(path, lineno, f"expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(path, lineno, "key-value pair before any [section] header")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current:
            raise ConfigError(path, lineno, f"duplicate key {key!r}")
        current[key] = _Entry(value, lineno)
    return sections


def _take(section: dict[str, _Entry], key: str) -> _Entry | None:
    return section.pop(key, None)


def _number(path, entry: _Entry, kind=float):
    try:
        return kind(entry.value)
    except ValueError:
        raise ConfigError(path, entry.lineno, f"expected a {kind.__name__}, got {entry.value!r}") from None


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything a simulate run needs, as parsed from one file."""

    scenario: DriftScenario
    monitor: MonitorConfig
    mpn: MpnConfig | None


def bundled_path(name: str) -> Path:
    """Path of a data file shipped with the package (e.g. ``no_drift.cfg``)."""
    path = Path(str(resources.files("tricalib") / "scenarios" / name))
    if not path.exists():
        available = ", ".join(sorted(p.name for p in path.parent.iterdir()))
        raise FileNotFoundError(f"no bundled file {name!r}; available: {available}")
    return path


def resolve_config_path(value: str) -> Path:
    """Interpret a --config value: an existing path wins; otherwise a bare
    name (optionally without .cfg) is looked up among the bundled scenarios."""
    direct = Path(value)
    if direct.exists():
        return direct
    if "/" not in value and "\\" not in value:
        name = value if value.endswith(".cfg") else f"{value}.cfg"
        try:
            return bundled_path(name)
        except FileNotFoundError:
            pass
    raise FileNotFoundError(f"scenario config not found: {value}")


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scenario config not found: {path}")
    sections = _read_sections(path)

    scenario_sec = sections.pop("scenario", {})
    frames_entry = _take(scenario_sec, "frames")
    if frames_entry is None:
        raise ConfigError(path, None, "missing [scenario] frames")
    frames = _number(path, frames_entry, int)
    seed_entry = _take(scenario_sec, "seed")
    seed = _number(path, seed_entry, int) if seed_entry else 0

    gt_sec = sections.pop("ground_truth", {})
    transforms = {}
    for pair in ("lidar_cam", "radar_cam", "lidar_radar"):
        entry = _take(gt_sec, pair)
        if entry is None:
            continue
        try:
            transforms[pair] = parse_transform(entry.value)
        except ValueError as exc:
            raise ConfigError(path, entry.lineno, f"{pair}: {exc}") from None
    for pair in ("lidar_cam", "radar_cam"):
        if pair not in transforms:
            raise ConfigError(path, None, f"missing [ground_truth] {pair}")
    if "lidar_radar" in transforms:
        ground_truth = CalibrationTriple(**transforms)
    else:
        ground_truth = CalibrationTriple.from_camera_pairs(transforms["lidar_cam"], transforms["radar_cam"])

    noise_sec = sections.pop("noise", {})
    noise_kwargs = {}
    for key, attr in (
        ("rot_sigma_deg", "rot_sigma_deg"),
        ("trans_sigma_m", "trans_sigma_m"),
        ("outlier_prob", "outlier_prob"),
        ("outlier_scale", "outlier_scale"),
    ):
        entry = _take(noise_sec, key)
        if entry is not None:
            noise_kwargs[attr] = _number(path, entry)

    events = []
    for name, entry in sections.pop("events", {}).items():
        tokens = entry.value.split()
        if len(tokens) != 8:
            raise ConfigError(
                path, entry.lineno, f"event {name!r} needs FRAME SENSOR ROLL PITCH YAW DX DY DZ (8 fields)"
            )
        sensor = tokens[1].lower()
        if sensor not in SENSORS:
            raise ConfigError(path, entry.lineno, f"event {name!r}: unknown sensor {tokens[1]!r}")
        try:
            frame = int(tokens[0])
            roll, pitch, yaw, dx, dy, dz = (float(t) for t in tokens[2:])
        except ValueError:
            raise ConfigError(path, entry.lineno, f"event {name!r}: non-numeric field") from None
        events.append(
            DriftEvent(
                frame=frame,
                sensor=sensor,
                delta=RigidTransform(
                    UnitQuaternion.from_euler(EulerAngles(roll, pitch, yaw)),
                    Translation3(dx, dy, dz),
                ),
            )
        )

    monitor_sec = sections.pop("monitor", {})
    monitor_kwargs = {}
    for key, kind in (
        ("window", int),
        ("decay", float),
        ("tau_r_deg", float),
        ("tau_t_m", float),
        ("tau_cal_r_deg", float),
        ("tau_cal_t_m", float),
    ):
        entry = _take(monitor_sec, key)
        if entry is not None:
            monitor_kwargs[key] = _number(path, entry, kind)

    mpn = None
    mpn_sec = sections.pop("mpn", {})
    if mpn_sec:
        enabled_entry = _take(mpn_sec, "enabled")
        enabled = (enabled_entry.value.lower() in ("1", "true", "yes")) if enabled_entry else True
        iters_entry = _take(mpn_sec, "iterations")
        alphas_entry = _take(mpn_sec, "alphas")
        if enabled:
            iterations = _number(path, iters_entry, int) if iters_entry else 4
            if alphas_entry is not None:
                try:
                    alphas = tuple(float(t) for t in alphas_entry.value.split())
                except ValueError:
                    raise ConfigError(path, alphas_entry.lineno, "alphas must be numbers") from None
            else:
                alphas = (0.5,) * iterations
            try:
                mpn = MpnConfig(iterations=iterations, alphas=alphas)
            except ValueError as exc:
                raise ConfigError(path, (iters_entry or alphas_entry).lineno if (iters_entry or alphas_entry) else None, str(exc)) from None
        for key, entry in mpn_sec.items():
            raise ConfigError(path, entry.lineno, f"unknown [mpn] key {key!r}")

    for section_name, section in sections.items():
        first = next(iter(section.values()), None)
        raise ConfigError(path, first.lineno if first else None, f"unknown section [{section_name}]")
    for sec_name, sec in (("scenario", scenario_sec), ("ground_truth", gt_sec), ("noise", noise_sec), ("monitor", monitor_sec)):
        for key, entry in sec.items():
            raise ConfigError(path, entry.lineno, f"unknown [{sec_name}] key {key!r}")

    try:
        scenario = DriftScenario(
            frames=frames,
            ground_truth=ground_truth,
            events=tuple(events),
            noise=NoiseModel(**noise_kwargs),
            seed=seed,
        )
        monitor = MonitorConfig(**monitor_kwargs)
    except ValueError as exc:
        raise ConfigError(path, None, str(exc)) from None
    return ScenarioSpec(scenario=scenario, monitor=monitor, mpn=mpn)
