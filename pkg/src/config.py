"""
Run configuration: sectioned `key = value` text parsed into a validated RunConfig.
"""
import configparser
import logging
from dataclasses import dataclass, field, fields
from typing import Callable, Dict, List, Optional, Tuple

from .exceptions import ConfigError, ConfigValidationError, GridError, ModelError
from .field_core import Grid
from .model import RateTable, ReactionFamily, ReactionModel, barenblatt_support_radius
from .scheme import SchemeParams

logger = logging.getLogger(__name__)

PRESETS = ('barenblatt', 'gaussian_bumps', 'two_bumps_segregated', 'homeostatic_plateau')


@dataclass
class GridConfig:
    dim: int = 1
    L_box: float = 6.0
    cells_per_axis: int = 128
    boundary: str = 'neumann'
    localizer_radius: Optional[float] = None
    moment_radius: Optional[float] = None

    def build(self) -> Grid:
        return Grid(self.dim, self.L_box, self.cells_per_axis, self.boundary)


@dataclass
class ModelConfig:
    gamma: float = 2.0
    P_H: float = 1.0
    family: str = 'linear_shared'
    growth_rate: float = 1.0
    theta: float = 0.5
    eta: float = 0.5
    kappa: float = 0.0
    custom_pressures: Optional[Tuple[float, ...]] = None
    custom_F1: Optional[Tuple[float, ...]] = None
    custom_F2: Optional[Tuple[float, ...]] = None
    custom_G1: Optional[Tuple[float, ...]] = None
    custom_G2: Optional[Tuple[float, ...]] = None

    def build(self) -> ReactionModel:
        family = ReactionFamily(self.family)
        table = None
        if family is ReactionFamily.CUSTOM:
            columns = ('custom_pressures', 'custom_F1', 'custom_F2', 'custom_G1', 'custom_G2')
            missing = [name for name in columns if getattr(self, name) is None]
            if missing:
                raise ModelError(f"the custom family needs {', '.join(missing)}")
            table = RateTable(self.custom_pressures, self.custom_F1, self.custom_F2,
                              self.custom_G1, self.custom_G2)
        return ReactionModel(
            gamma=self.gamma,
            P_H=self.P_H,
            family=family,
            growth_rate=self.growth_rate,
            theta=self.theta,
            eta=self.eta,
            kappa=self.kappa,
            table=table,
        )


@dataclass
class SchemeConfig:
    epsilon: float = 0.0
    delta: float = 0.0
    cfl_safety: float = 0.4
    t_end: float = 1.0
    diag_every: int = 10
    allow_invalid_model: bool = False

    def build(self) -> SchemeParams:
        return SchemeParams(self.epsilon, self.delta, self.cfl_safety, self.t_end, self.diag_every)


@dataclass
class InitialConfig:
    preset: str = 'gaussian_bumps'
    snapshot: Optional[str] = None
    t0: Optional[float] = None
    mass: float = 1.0
    amplitude: Optional[float] = None
    width: float = 1.0
    offset: float = 1.5
    fraction: float = 0.5


@dataclass
class OutputConfig:
    directory: Optional[str] = None
    snapshot_every: float = 0.0
    emit_plots: bool = False
    checkpoints: int = 0


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    applied_defaults: List[str] = field(default_factory=list)

    @property
    def start_time(self) -> float:
        """Preset start time: t0 if given, 0.5 for the Barenblatt preset, 0 otherwise."""
        if self.initial.t0 is not None:
            return self.initial.t0
        return 0.5 if self.initial.preset == 'barenblatt' and not self.initial.snapshot else 0.0


def _to_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered not in ('true', 'false'):
        raise ValueError(f"expected true or false, got {text!r}")
    return lowered == 'true'


def _to_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _to_table(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in text.split(',') if item.strip())


def _to_str(text: str) -> str:
    return text.strip()


SCHEMA: Dict[str, Tuple[type, Dict[str, Callable[[str], object]]]] = {
    'grid': (GridConfig, {
        'dim': _to_int, 'L_box': float, 'cells_per_axis': _to_int, 'boundary': _to_str,
        'localizer_radius': float, 'moment_radius': float,
    }),
    'model': (ModelConfig, {
        'gamma': float, 'P_H': float, 'family': _to_str, 'growth_rate': float, 'theta': float,
        'eta': float, 'kappa': float, 'custom_pressures': _to_table, 'custom_F1': _to_table,
        'custom_F2': _to_table, 'custom_G1': _to_table, 'custom_G2': _to_table,
    }),
    'scheme': (SchemeConfig, {
        'epsilon': float, 'delta': float, 'cfl_safety': float, 't_end': float,
        'diag_every': _to_int, 'allow_invalid_model': _to_bool,
    }),
    'initial': (InitialConfig, {
        'preset': _to_str, 'snapshot': _to_str, 't0': float, 'mass': float, 'amplitude': float,
        'width': float, 'offset': float, 'fraction': float,
    }),
    'output': (OutputConfig, {
        'directory': _to_str, 'snapshot_every': float, 'emit_plots': _to_bool, 'checkpoints': _to_int,
    }),
}


def _line_of(text: str, section: Optional[str], key: Optional[str] = None) -> Optional[int]:
    """1-based line of a section header, or of a key inside that section."""
    current = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith('[') and line.endswith(']'):
            current = line[1:-1].strip()
            if key is None and current == section:
                return number
            continue
        if key is not None and current == section and line and line[0] not in '#;':
            name = line.split('=', 1)[0].split(':', 1)[0].strip()
            if name == key:
                return number
    return None


def _read_parser(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as err:
        raise ConfigError("key outside of any [section]", line=err.lineno) from err
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as err:
        raise ConfigError(str(err), line=err.lineno) from err
    except configparser.ParsingError as err:
        line, content = err.errors[0]
        raise ConfigError(f"cannot parse {content.strip()!r}", line=line) from err
    return parser


def parse_config(text: str) -> RunConfig:
    """
    Parse and validate a run configuration.

    Args:
        text (str): Sectioned `key = value` text

    Returns:
        RunConfig: Validated configuration with every default applied

    Raises:
        ConfigError: for syntax errors, unknown sections or keys and unparsable values
        ConfigValidationError: for cross-field invariant violations
    """
    parser = _read_parser(text)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=_line_of(text, section))

    config = RunConfig()
    for section, (config_type, converters) in SCHEMA.items():
        values = dict(parser.items(section)) if parser.has_section(section) else {}
        kwargs = {}
        for key, raw in values.items():
            if key not in converters:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line=_line_of(text, section, key))
            try:
                kwargs[key] = converters[key](raw)
            except ValueError as err:
                raise ConfigError(f"[{section}] {key}: {err}", line=_line_of(text, section, key)) from err
        section_config = config_type(**kwargs)
        for spec in fields(config_type):
            if spec.name not in kwargs:
                default = getattr(section_config, spec.name)
                config.applied_defaults.append(f"[{section}] {spec.name} = {default!r}")
                logger.info("default applied: [%s] %s = %r", section, spec.name, default)
        setattr(config, section, section_config)

    validate_config(config)
    return config


def load_config(path: str) -> RunConfig:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_config(f.read())


def _check(condition: bool, invariant: str, message: str):
    if not condition:
        raise ConfigValidationError(invariant, message)


def validate_config(config: RunConfig):
    """Cross-field checks; raises ConfigValidationError naming the broken invariant."""
    grid_config, model_config = config.grid, config.model
    scheme_config, initial = config.scheme, config.initial

    try:
        grid = grid_config.build()
    except GridError as err:
        raise ConfigValidationError('GridGeometry', str(err)) from err
    _check(model_config.gamma > 1, 'GammaAboveOne', f"gamma must exceed 1, got {model_config.gamma}")
    _check(model_config.family in {f.value for f in ReactionFamily}, 'ReactionFamily',
           f"family must be one of {[f.value for f in ReactionFamily]}, got {model_config.family!r}")
    try:
        model = model_config.build()
        scheme_config.build()
    except (ModelError, ValueError) as err:
        raise ConfigValidationError('ParameterRange', str(err)) from err

    for name in ('localizer_radius', 'moment_radius'):
        radius = getattr(grid_config, name)
        if radius is not None:
            _check(0 <= radius and radius + 1.0 <= grid_config.L_box, 'LocalizerExceedsBox',
                   f"{name} = {radius} plus the unit bridge does not fit in L_box = {grid_config.L_box}")
    _check(grid_config.L_box >= 1.0, 'LocalizerExceedsBox',
           f"L_box = {grid_config.L_box} leaves no room for the unit-width localizer bridge")

    t0 = config.start_time
    _check(scheme_config.t_end >= t0, 'TimeOrder', f"t_end = {scheme_config.t_end} precedes t0 = {t0}")
    _check(config.output.snapshot_every >= 0, 'ParameterRange', "snapshot_every must be non-negative")
    _check(config.output.checkpoints >= 0, 'ParameterRange', "checkpoints must be non-negative")

    if initial.snapshot:
        return
    _check(initial.preset in PRESETS, 'PresetName', f"preset must be one of {PRESETS}, got {initial.preset!r}")
    _check(initial.width > 0, 'PresetOutOfRange', f"width must be positive, got {initial.width}")
    _check(initial.offset >= 0, 'PresetOutOfRange', f"offset must be non-negative, got {initial.offset}")
    _check(0.0 <= initial.fraction <= 1.0, 'PresetOutOfRange', f"fraction must lie in [0, 1], got {initial.fraction}")
    n_star = model.homeostatic_density
    if initial.amplitude is not None:
        _check(initial.amplitude > 0, 'PresetOutOfRange', f"amplitude must be positive, got {initial.amplitude}")

    if initial.preset == 'barenblatt':
        _check(t0 > 0, 'PresetOutOfRange', f"the Barenblatt preset needs t0 > 0, got {t0}")
        _check(initial.mass > 0, 'PresetOutOfRange', f"mass must be positive, got {initial.mass}")
        radius = barenblatt_support_radius(model.gamma, grid.dim, scheme_config.t_end, initial.mass)
        _check(radius < grid_config.L_box, 'BarenblattSupportFitsBox',
               f"support radius {radius:.6g} at t_end reaches the box edge {grid_config.L_box}")
    elif initial.preset == 'gaussian_bumps':
        if initial.amplitude is not None:
            _check(initial.amplitude <= 0.5 * n_star, 'PresetOutOfRange',
                   f"amplitude must not exceed half the homeostatic density {n_star:.6g}")
    elif initial.preset == 'two_bumps_segregated':
        _check(initial.offset >= initial.width, 'PresetOutOfRange',
               f"offset {initial.offset} < width {initial.width}: the bumps overlap")
        if initial.amplitude is not None:
            _check(initial.amplitude <= n_star, 'PresetOutOfRange',
                   f"amplitude must not exceed the homeostatic density {n_star:.6g}")
    elif initial.preset == 'homeostatic_plateau':
        _check(scheme_config.delta == 0, 'FloorBreaksHomeostatic',
               "the plateau already sits at P_H; any delta > 0 pushes the pressure above it")
