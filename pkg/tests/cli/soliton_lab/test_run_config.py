#!/usr/bin/env python3

import json

import numpy as np
import pytest

from soliton_lab.cli.run_config import (
    ExperimentConfig,
    GridConfig,
    ReportBundle,
    RunConfig,
    config_from_dict,
    load_config,
    parse_config,
    provenance,
    render_report,
    save_config,
    write_csv,
)
from soliton_lab.exceptions import (
    ConfigError,
)


def test_empty_object_gives_defaults():
    config = parse_config('{}')
    assert config == RunConfig()
    assert config.grid.n == 3000
    assert config.experiment.epsilon_list == (0.003, 0.01, 0.03)
    assert config.r_max == 30.0


def test_empty_text_is_a_config_error():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('')
    assert excinfo.value.lineno == 1


@pytest.mark.parametrize('document', [
    [],
    {'alpha': 1.0},
    {'grid': {'nodes': 10}},
    {'grid': []},
    {'alpha0': 0},
    {'alpha0': True},
    {'grid': {'n': 10.5}},
    {'solver': {'newton_tol': -1e-10}},
    {'experiment': {'epsilon_list': [0.03, 0.01]}},
    {'experiment': {'epsilon_list': []}},
    {'experiment': {'epsilon_list': 0.01}},
    {'experiment': {'ell_max': 1}},
])
def test_rejected_documents(document):
    with pytest.raises(ConfigError):
        config_from_dict(document)


def test_sections_are_read():
    config = config_from_dict({
        'alpha0': 2,
        'grid': {'r_max_over_inv_alpha': 20, 'n': 400},
        'experiment': {'epsilon_list': [0.01, 0.02], 'T_run': 15},
    })
    assert config.alpha0 == 2.0
    assert config.r_max == 10.0
    assert config.grid == GridConfig(20, 400)
    assert config.experiment.epsilon_list == (0.01, 0.02)
    assert config.experiment.T_run == 15


def test_override_sorts_epsilons():
    config = RunConfig().override(n=500, epsilon_list=[0.02, 0.005], seed=7)
    assert config.grid.n == 500
    assert config.grid.n_dense == 1200
    assert config.experiment.epsilon_list == (0.005, 0.02)
    assert config.experiment.seed == 7
    assert config.alpha0 == 1.0
    with pytest.raises(ConfigError):
        RunConfig().override(n=2)


def test_save_and_load(tmp_path):
    config = RunConfig(alpha0=0.5, experiment=ExperimentConfig(epsilon_list=(0.01,)))
    path = tmp_path.joinpath('run.json')
    save_config(config, path)
    assert load_config(path) == config
    assert json.loads(path.read_text())['experiment']['epsilon_list'] == [0.01]


def test_csv_is_exact_and_deterministic(tmp_path):
    t = np.linspace(0.0, 1.0, 11)
    columns = (t, np.exp(-t) / 3.0)
    first = write_csv(tmp_path.joinpath('a.csv'), ('t', 'value'), columns)
    second = write_csv(tmp_path.joinpath('b.csv'), ('t', 'value'), columns)
    assert first == second
    assert first.startswith('0x') and len(first) == 66
    data = np.loadtxt(tmp_path.joinpath('a.csv'), delimiter=',', skiprows=1)
    assert np.array_equal(data[:, 1], columns[1])


def test_provenance_block():
    config = RunConfig()
    block = provenance(config, {'b.csv': '0x2', 'a.csv': '0x1'}, {'ground': [10, 21]})
    assert set(block) == {'versions', 'config_keccak256', 'outputs', 'resolutions'}
    assert list(block['outputs']) == ['a.csv', 'b.csv']
    assert set(block['versions']) == {'soliton_lab', 'numpy', 'scipy', 'python'}
    assert block['config_keccak256'] == provenance(RunConfig(), {}, {})['config_keccak256']
    assert provenance(config, {}, {}, 1.5)['wall_clock_seconds'] == 1.5


def test_report_bundle():
    bundle = ReportBundle('ground', RunConfig())
    assert bundle.ok
    bundle.results['ground'] = {'sigma': np.float64(0.5), 'value': 1j}
    bundle.errors.append({'type': 'NoConvergence'})
    assert not bundle.ok
    report = json.loads(render_report(bundle))
    assert report['results']['ground'] == {'sigma': 0.5, 'value': {'re': 0.0, 'im': 1.0}}
    assert render_report(bundle) == render_report(bundle)
    assert '\n' in render_report(bundle, pretty=True)
