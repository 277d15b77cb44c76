import json

import numpy as np
import pandas as pd
import pytest

from blowrate.cli import main
from blowrate.constants import EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESES, EXIT_VERDICT
from blowrate.fileio import read_manifest

THEOREM = """
[model]
p1 = 2
p2 = 3
q1 = 1.2
q2 = 1.2
"""

# spatially homogeneous data: the system is the ODE u' = v^2, v' = u^2
ODE = """
[model]
p1 = 2
p2 = 2
q1 = 1.5
q2 = 1.5

[domain]
kind = "truncated-space"
radius = 10.0
boundary = "neumann"

[grid]
nodes = 5

[time]
reaction_cap = 2e-4
m_stop = 1e4

[init]
kind = "constant"
amplitude_u = 1.0
amplitude_v = 1.0
"""


@pytest.fixture
def write_config(tmp_path):
    def write(text, name='run.toml'):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def test_check_passes(write_config, capsys):
    assert main(['check', '--config', write_config(THEOREM)]) == EXIT_OK
    assert 'hypotheses hold' in capsys.readouterr().out


def test_check_fujita_fails(write_config):
    text = THEOREM.replace('p2 = 3', 'p2 = 2') + 'n = 3\n'
    assert main(['check', '--config', write_config(text)]) == EXIT_HYPOTHESES


def test_check_json(write_config, capsys):
    main(['check', '--json', '--config', write_config(THEOREM)])
    out = json.loads(capsys.readouterr().out)
    assert out['holds'] is True
    assert out['exponents']['alpha'] == pytest.approx(0.6)
    assert 'scalar' not in out


def test_check_reports_the_scalar_case(write_config, capsys):
    # p = 2, q = 1.2: 1 < q < 4/3 holds, p <= 1 + 2/n holds for n = 1
    text = THEOREM.replace('p2 = 3', 'p2 = 2')
    assert main(['check', '--config', write_config(text)]) == EXIT_OK
    assert 'scalar case u = v' in capsys.readouterr().out

    main(['check', '--json', '--config', write_config(text)])
    scalar = json.loads(capsys.readouterr().out)['scalar']
    assert scalar['holds'] is True
    assert scalar['rate'] == pytest.approx(1.0)
    assert scalar['theta'] == pytest.approx(2 / 3)
    assert scalar['margin_q'] == pytest.approx(4 / 3 - 1.2)

    # q = 1.5 is past 2p/(1+p)
    text = text.replace('q1 = 1.2', 'q1 = 1.5').replace('q2 = 1.2', 'q2 = 1.5')
    main(['check', '--json', '--config', write_config(text)])
    scalar = json.loads(capsys.readouterr().out)['scalar']
    assert scalar['cond_q'] is False


def test_check_malformed(write_config, tmp_path):
    assert main(['check', '--config', write_config('[model\n')]) == EXIT_USAGE
    assert main(['check', '--config', str(tmp_path / 'nope.toml')]) == EXIT_USAGE


def test_usage_errors():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == EXIT_USAGE

    with pytest.raises(SystemExit) as err:
        main(['check'])
    assert err.value.code == EXIT_USAGE


def test_fit_needs_a_prior_run(tmp_path):
    assert main(['fit']) == EXIT_USAGE
    assert main(['fit', '--out', str(tmp_path / 'empty')]) == EXIT_USAGE


@pytest.fixture(scope='module')
def ode_run(tmp_path_factory):
    base = tmp_path_factory.mktemp('ode')
    config = base / 'ode.toml'
    config.write_text(ODE)
    out = base / 'run'
    code = main(['run', '--config', str(config), '--out', str(out)])
    assert code == EXIT_OK
    return out


def test_run_writes_artifacts(ode_run):
    for name in ['series.csv', 'snapshots.csv', 'manifest.json']:
        assert (ode_run / name).exists()

    manifest = read_manifest(ode_run)
    assert manifest['stop_reason'] == 'threshold'
    assert manifest['config_echo']['grid']['nodes'] == 5
    assert len(manifest['doubling_times']) >= 10


def test_replay_is_bit_identical(ode_run, tmp_path):
    again = tmp_path / 'again'
    echo = read_manifest(ode_run)['config_echo']
    lines = []
    for section, values in echo.items():
        lines.append(f'[{section}]')
        lines += [f'{key} = {json.dumps(value)}' for key, value in values.items()]
    path = tmp_path / 'echo.toml'
    path.write_text('\n'.join(lines) + '\n')

    assert main(['run', '--config', str(path), '--out', str(again)]) == EXIT_OK
    assert ((again / 'series.csv').read_bytes()
            == (ode_run / 'series.csv').read_bytes())


def test_analysis_commands_on_ode_run(ode_run, capsys):
    out = str(ode_run)

    assert main(['fit', '--out', out, '--svg']) == EXIT_OK
    assert (ode_run / 'fit.csv').exists()
    assert (ode_run / 'fit.svg').exists()
    manifest = read_manifest(ode_run)
    assert manifest['T_est'] == pytest.approx(1.0, abs=1e-3)
    assert manifest['empirical_constants']['C1'] > 0

    assert main(['doubling', '--out', out]) == EXIT_OK
    assert (ode_run / 'doubling.csv').exists()

    capsys.readouterr()
    assert main(['ratio', '--out', out, '--json']) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result['phi_min'] == pytest.approx(1.0, abs=1e-10)
    assert result['phi_max'] == pytest.approx(1.0, abs=1e-10)

    assert main(['blowup-set', '--out', out]) == EXIT_OK
    assert read_manifest(ode_run)['blowup_set']['classification'] == 'global'

    # five nodes are far too coarse for a rescaled frame
    assert main(['rescale-verify', '--out', out]) == EXIT_VERDICT


def test_oracle_ode(write_config, tmp_path, capsys):
    code = main(['oracle-ode', '--config', write_config(ODE),
                 '--out', str(tmp_path / 'oracle'), '--json'])
    result = json.loads(capsys.readouterr().out)

    assert code == EXIT_OK
    assert result['passed'] is True
    assert result['T_exact'] == 1.0
    assert result['T_est'] == pytest.approx(1.0, abs=1e-3)
    assert result['exponent'] == pytest.approx(1.0, abs=0.02)


def test_oracle_transform_needs_quadratic_gradient(write_config):
    assert main(['oracle-transform',
                 '--config', write_config(THEOREM)]) == EXIT_USAGE


# desk-scale reproductions of the rate estimates

@pytest.mark.slow
def test_system_rate_reproduction(write_config, tmp_path):
    out = str(tmp_path / 'system')
    assert main(['run', '--config', write_config(THEOREM),
                 '--out', out]) == EXIT_OK

    assert main(['fit', '--out', out]) == EXIT_OK
    assert main(['ratio', '--out', out]) == EXIT_OK
    assert main(['doubling', '--out', out]) == EXIT_OK

    assert main(['rescale-verify', '--out', out]) == EXIT_OK
    frames = pd.read_csv(tmp_path / 'system' / 'rescale.csv')
    assert len(frames) == 3
    assert (frames['sup'] <= 1.05).all()
    assert (frames['center'] >= 0.45).all()
    assert (np.diff(frames['gradient_share_u']) <= 0).all()
    assert (frames['involution'] <= 1e-3).all()


@pytest.mark.slow
def test_scalar_rate_reproduction(write_config, tmp_path):
    text = THEOREM.replace('p2 = 3', 'p2 = 2')
    out = str(tmp_path / 'scalar')
    assert main(['run', '--config', write_config(text), '--out', out]) == EXIT_OK
    assert main(['fit', '--out', out]) == EXIT_OK


@pytest.mark.slow
def test_single_point_blowup_set(write_config, tmp_path):
    text = """
[model]
p1 = 3
p2 = 3
q1 = 2
q2 = 2
"""
    out = str(tmp_path / 'q2')
    assert main(['run', '--config', write_config(text), '--out', out]) == EXIT_OK
    assert main(['blowup-set', '--out', out]) == EXIT_OK
    assert read_manifest(tmp_path / 'q2')['blowup_set']['classification'] \
        == 'single_point'
