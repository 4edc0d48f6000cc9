"""
Run configuration, report bundles and the CSV/JSON files the front end writes.
"""
from dataclasses import (
    asdict,
    dataclass,
    field,
    fields,
    replace,
)
import json
from pathlib import (
    Path,
)
import platform
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import scipy

import soliton_lab
from soliton_lab.exceptions import (
    ConfigError,
)
from soliton_lab.utils import (
    canonical_json,
    digest_hex,
    to_builtin,
)

PathLike = Union[str, Path]


def _number(value: Any, name: str, positive: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{name}' must be a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"'{name}' must be positive, got {value!r}")
    return float(value)


def _integer(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"'{name}' must be at least {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class GridConfig:
    r_max_over_inv_alpha: float = 30.0
    n: int = 3000
    n_dense: int = 1200

    def __post_init__(self):
        _number(self.r_max_over_inv_alpha, 'grid.r_max_over_inv_alpha')
        _integer(self.n, 'grid.n', 16)
        _integer(self.n_dense, 'grid.n_dense', 16)


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    eig_tol: float = 1e-6
    kernel_tol: float = 1e-4
    ode_dt: float = 1e-3

    def __post_init__(self):
        for item in fields(self):
            _number(getattr(self, item.name), f'solver.{item.name}')


@dataclass(frozen=True)
class ExperimentConfig:
    epsilon_list: Tuple[float, ...] = (0.003, 0.01, 0.03)
    T_run: Optional[float] = None
    exit_threshold: float = 0.2
    ell_max: int = 3
    seed: int = 1234
    decay_T: float = 20.0
    n_probes: int = 5

    def __post_init__(self):
        if not isinstance(self.epsilon_list, (list, tuple)):
            raise ConfigError("'experiment.epsilon_list' must be a list of numbers")
        values = tuple(_number(e, 'experiment.epsilon_list') for e in self.epsilon_list)
        if not values:
            raise ConfigError("'experiment.epsilon_list' must not be empty")
        if list(values) != sorted(values):
            raise ConfigError("'experiment.epsilon_list' must be sorted ascending")
        object.__setattr__(self, 'epsilon_list', values)
        if self.T_run is not None:
            _number(self.T_run, 'experiment.T_run')
        _number(self.exit_threshold, 'experiment.exit_threshold')
        _integer(self.ell_max, 'experiment.ell_max', 2)
        _integer(self.seed, 'experiment.seed', 0)
        _number(self.decay_T, 'experiment.decay_T')
        _integer(self.n_probes, 'experiment.n_probes', 1)


@dataclass(frozen=True)
class RunConfig:
    alpha0: float = 1.0
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def __post_init__(self):
        _number(self.alpha0, 'alpha0')

    @property
    def r_max(self) -> float:
        return self.grid.r_max_over_inv_alpha / self.alpha0

    def as_dict(self) -> Dict[str, Any]:
        return to_builtin(asdict(self))

    def override(self, alpha0=None, n=None, n_dense=None, r_max_over_inv_alpha=None, seed=None,
                 ell_max=None, epsilon_list=None, T_run=None) -> 'RunConfig':
        """
        A copy with the command-line overrides applied; None leaves a value untouched.
        """
        def pick(**values):
            return {key: value for key, value in values.items() if value is not None}

        grid = replace(self.grid, **pick(
            n=n, n_dense=n_dense, r_max_over_inv_alpha=r_max_over_inv_alpha
        ))
        experiment = replace(self.experiment, **pick(
            seed=seed, ell_max=ell_max, T_run=T_run,
            epsilon_list=None if epsilon_list is None else tuple(sorted(epsilon_list)),
        ))
        top = pick(alpha0=alpha0)
        return replace(self, grid=grid, experiment=experiment, **top)


_SECTIONS = {
    'grid': GridConfig,
    'solver': SolverConfig,
    'experiment': ExperimentConfig,
}


def _section(cls, value: Any, name: str):
    if not isinstance(value, dict):
        raise ConfigError(f"'{name}' must be an object, got {type(value).__name__}")
    known = {item.name for item in fields(cls)}
    unknown = sorted(set(value) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in '{name}': {', '.join(unknown)}")
    return cls(**value)


def config_from_dict(document: Any) -> RunConfig:
    if not isinstance(document, dict):
        raise ConfigError("Run configuration must be a JSON object")
    known = {'alpha0', *_SECTIONS}
    unknown = sorted(set(document) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in run configuration: {', '.join(unknown)}")
    kwargs = {
        name: _section(cls, document[name], name)
        for name, cls in _SECTIONS.items() if name in document
    }
    if 'alpha0' in document:
        kwargs['alpha0'] = document['alpha0']
    return RunConfig(**kwargs)


def parse_config(text: str) -> RunConfig:
    try:
        document = json.loads(text)
    except json.decoder.JSONDecodeError as exc:
        raise ConfigError(str(exc), exc.lineno, exc.colno) from exc
    return config_from_dict(document)


def load_config(path: PathLike) -> RunConfig:
    with Path(path).open() as fh:
        return parse_config(fh.read())


def save_config(config: RunConfig, path: PathLike) -> None:
    with Path(path).open('w') as fh:
        fh.write(json.dumps(config.as_dict(), indent=2, sort_keys=True))
        fh.write('\n')


def write_csv(path: PathLike, header: Sequence[str], columns: Sequence[Sequence[float]]) -> str:
    """
    Write equal-length columns as CSV at full double precision and return the file's digest.
    """
    data = np.column_stack([np.asarray(column, dtype=float) for column in columns])
    path = Path(path)
    np.savetxt(path, data, fmt='%.17g', delimiter=',', header=','.join(header), comments='')
    return digest_hex(path.read_bytes())


def provenance(config: RunConfig, outputs: Dict[str, str],
               resolutions: Dict[str, Any], wall_clock: Optional[float] = None) -> Dict[str, Any]:
    block: Dict[str, Any] = {
        'versions': {
            'soliton_lab': f'{soliton_lab.__version__}+commit.{soliton_lab.__commit__}',
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'python': platform.python_version(),
        },
        'config_keccak256': digest_hex(canonical_json(config.as_dict()).encode('utf-8')),
        'outputs': dict(sorted(outputs.items())),
        'resolutions': resolutions,
    }
    if wall_clock is not None:
        block['wall_clock_seconds'] = wall_clock
    return block


@dataclass
class ReportBundle:
    command: str
    config: RunConfig
    results: Dict[str, Any] = field(default_factory=dict)
    errors: List[Dict[str, Any]] = field(default_factory=list)
    warnings: List[Dict[str, Any]] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    def as_dict(self) -> Dict[str, Any]:
        return to_builtin({
            'command': self.command,
            'config': self.config.as_dict(),
            'results': self.results,
            'errors': self.errors,
            'warnings': self.warnings,
            'provenance': self.provenance,
        })


def render_report(bundle: ReportBundle, pretty: bool = False) -> str:
    return json.dumps(bundle.as_dict(), indent=2 if pretty else None, sort_keys=True, default=str)


def save_report(bundle: ReportBundle, path: PathLike, pretty: bool = True) -> Path:
    output_path = Path(path).resolve()
    with output_path.open('w') as fh:
        fh.write(render_report(bundle, pretty))
        fh.write('\n')
    return output_path
