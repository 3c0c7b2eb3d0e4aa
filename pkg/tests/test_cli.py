import json

import pytest

from lowrank.cli import build_parser, main

SMALL_SENSE = ['sense', '--m', '12', '--n', '12', '--T', '20', '--seed', '3', '--no-timing']


def last_error_line(capsys):
    return capsys.readouterr().err.strip().splitlines()[-1]


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_sense_writes_artifacts(tmp_path, capsys):
    code, report = run_json(capsys, SMALL_SENSE + ['--out', str(tmp_path)])
    assert code == 0
    assert report['pass'] is True
    assert report['config']['solver'] == 'altmin'
    assert (tmp_path / 'trace.csv').read_text().startswith('iter,residual,dist_u,dist_v,elapsed_ms\n')
    assert json.loads((tmp_path / 'report.json').read_text()) == report


def test_sense_failure_exit_code(capsys):
    code, report = run_json(capsys, SMALL_SENSE + ['--T', '1', '--max-rel-error', '1e-15'])
    assert code == 1
    assert report['pass'] is False


def test_flags_override_config_file(tmp_path, capsys):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'m': 12, 'n': 12, 'T': 5, 'seed': 9, 'd-mult': 8}))
    code, report = run_json(capsys, ['sense', '--config', str(config), '--seed', '4',
                                     '--no-timing'])
    assert report['config']['seed'] == 4
    assert report['config']['T'] == 5
    assert report['config']['d_mult'] == 8


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv('LOWRANK_SEED', '21')
    args = ['sense', '--m', '12', '--n', '12', '--T', '2', '--no-timing']
    _, report = run_json(capsys, args)
    assert report['config']['seed'] == 21

    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'seed': 5}))
    _, report = run_json(capsys, args + ['--config', str(config)])
    assert report['config']['seed'] == 5


def test_invalid_config_exit_code(capsys):
    assert main(['sense', '--m', '0']) == 2
    line = last_error_line(capsys)
    assert line.startswith('lowrank: error: invalid configuration')
    assert 'm: must be a positive integer' in line


def test_unknown_config_field(tmp_path, capsys):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'rows': 12}))
    assert main(['sense', '--config', str(config)]) == 2
    assert 'rows: unknown field' in last_error_line(capsys)


@pytest.mark.parametrize('text', ['{"m": 12,', '[1, 2]'])
def test_malformed_config_file(tmp_path, capsys, text):
    config = tmp_path / 'config.json'
    config.write_text(text)
    assert main(['complete', '--config', str(config)]) == 2
    assert last_error_line(capsys).startswith('lowrank: error: ')


def test_missing_config_file(tmp_path, capsys):
    assert main(['sense', '--config', str(tmp_path / 'nope.json')]) == 2
    assert 'no such config file' in last_error_line(capsys)


def test_complete(tmp_path, capsys):
    code, report = run_json(capsys, ['complete', '--m', '20', '--n', '20', '--p', '1.0',
                                     '--T', '2', '--seed', '1', '--no-timing', '--no-clip',
                                     '--out', str(tmp_path)])
    assert code == 0
    assert report['final_rel_error'] <= 1e-10
    assert report['config']['clip'] is False
    assert report['partition_audit']['parts'] == 5


def test_report(tmp_path, capsys):
    assert main(SMALL_SENSE + ['--out', str(tmp_path)]) == 0
    capsys.readouterr()
    code, summary = run_json(capsys, ['report', '--trace', str(tmp_path / 'trace.csv')])
    assert code == 0
    assert summary['series'] == 'dist_u'
    assert summary['points'] >= 3
    assert summary['slope'] < 0


def test_report_missing_trace(tmp_path, capsys):
    assert main(['report', '--trace', str(tmp_path / 'missing.csv')]) == 2
    assert 'no such trace file' in last_error_line(capsys)


def test_probe_rip(capsys):
    code, result = run_json(capsys, ['probe-rip', '--m', '5', '--n', '5', '--k', '1',
                                     '--d', '200', '--trials', '10', '--seed', '1'])
    assert code == 0
    assert result['seed'] == 1 and result['trials'] == 10
    assert 0 <= result['delta'] < 1


def test_probe_rip_rejects_zero_trials(capsys):
    assert main(['probe-rip', '--trials', '0', '--seed', '1']) == 2
    assert 'trials' in last_error_line(capsys)


def test_parser_rejects_unknown_choices():
    parser = build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(['sense', '--solver', 'svp'])
    with pytest.raises(SystemExit):
        parser.parse_args([])


def test_log_file(tmp_path, capsys):
    log_file = tmp_path / 'run.log'
    main(SMALL_SENSE + ['--T', '2', '--log-file', str(log_file)])
    assert 'sensing 12x12 rank-2' in log_file.read_text()


def test_log_flags_before_subcommand(tmp_path, capsys):
    log_file = tmp_path / 'run.log'
    main(['--log-file', str(log_file), '--log-level', 'DEBUG'] + SMALL_SENSE + ['--T', '2'])
    assert 'sensing 12x12 rank-2' in log_file.read_text()
    args = build_parser().parse_args(['--log-level', 'DEBUG', 'report', '--trace', 'x.csv'])
    assert args.log_level == 'DEBUG' and args.log_file is None
    args = build_parser().parse_args(['report', '--trace', 'x.csv', '--log-level', 'ERROR'])
    assert args.log_level == 'ERROR'
