import errno
import json
import os

import pytest

from newsflow import Cache
from newsflow.cli import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_OUTPUT_ERROR, EXIT_PARTIAL_FAILURE, build_parser, main

from tests import corpus


@pytest.fixture
def workspace(tmpdir):
    root = str(tmpdir)
    cache_dir = os.path.join(root, 'cache')
    corpus.write_offline(cache_dir)
    config = corpus.write_config(os.path.join(root, 'config.json'))
    return config, cache_dir, os.path.join(root, 'out')


def run_args(command, config, cache_dir, out_dir, *extra):
    return [command, '--config', config, '--cache', cache_dir, '--offline', '--out', out_dir, '--log-level', 'warning', *extra]


def drop_from_offline_index(cache_dir, uris):
    path = os.path.join(cache_dir, 'offline-index.json')
    with open(path) as f:
        index = json.load(f)
    for uri in uris:
        del index[uri]
    with open(path, 'w') as f:
        json.dump(index, f)


def test_score_then_oracle(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('score', config, cache_dir, out_dir)) == EXIT_OK
    assert sorted(os.listdir(out_dir)) == ['manifest.json', 'series.csv', 'stories.csv', 'summary.csv']
    with open(os.path.join(out_dir, 'series.csv'), newline='') as f:
        rows = f.read().split('\r\n')
    assert rows[0] == 'date,k,score,n_documents,n_excluded'
    assert len(rows) == 1 + 3 * 3 + 1
    assert main(['oracle', '--out', out_dir, '--cache', cache_dir, '--log-level', 'warning']) == EXIT_OK


def test_score_with_range_and_k(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('score', config, cache_dir, out_dir, '--from', '2016-11-02', '--to', '2016-11-02', '--k', '1,3',
                         '--dump-matrices')) == EXIT_OK
    with open(os.path.join(out_dir, 'series.csv')) as f:
        assert [line.split(',')[:2] for line in f.read().splitlines()[1:]] == [['2016-11-02', '1'], ['2016-11-02', '3']]
    assert sorted(os.listdir(os.path.join(out_dir, 'matrices'))) == ['2016-11-02-k1.json', '2016-11-02-k3.json']


def test_score_two_ranges(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('score', config, cache_dir, out_dir, '--to', '2016-11-02')) == EXIT_OK
    assert main(run_args('score', config, cache_dir, out_dir, '--from', '2016-11-03')) == EXIT_OK
    with open(os.path.join(out_dir, 'series.csv')) as f:
        lines = f.read().splitlines()
    assert [line.split(',')[0] for line in lines[1:]] == ['2016-11-01'] * 3 + ['2016-11-02'] * 3 + ['2016-11-03'] * 3
    with open(os.path.join(out_dir, 'manifest.json')) as f:
        assert sorted(json.load(f)['days']) == ['2016-11-01', '2016-11-02', '2016-11-03']
    assert main(['oracle', '--out', out_dir, '--cache', cache_dir]) == EXIT_OK


def test_cache_and_output_in_one_directory(workspace):
    config, cache_dir, _ = workspace
    assert main(run_args('score', config, cache_dir, cache_dir)) == EXIT_OK
    assert main(run_args('score', config, cache_dir, cache_dir)) == EXIT_OK
    assert main(['oracle', '--out', cache_dir, '--cache', cache_dir]) == EXIT_OK


def test_foreign_manifest_is_config_error(workspace):
    config, cache_dir, out_dir = workspace
    os.makedirs(out_dir)
    with open(os.path.join(out_dir, 'manifest.json'), 'w') as f:
        json.dump({'version': 1, 'entries': {}}, f)
    assert main(run_args('score', config, cache_dir, out_dir)) == EXIT_CONFIG_ERROR


def test_oracle_detects_tampering(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('score', config, cache_dir, out_dir)) == EXIT_OK
    path = os.path.join(out_dir, 'manifest.json')
    with open(path) as f:
        manifest = json.load(f)
    manifest['days']['2016-11-01']['k_results'][0]['score'] += 0.01
    with open(path, 'w') as f:
        json.dump(manifest, f)
    assert main(['oracle', '--out', out_dir, '--cache', cache_dir]) == EXIT_PARTIAL_FAILURE


def test_oracle_without_run(tmpdir):
    assert main(['oracle', '--out', str(tmpdir), '--cache', str(tmpdir)]) == EXIT_CONFIG_ERROR


def test_extract(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('extract', config, cache_dir, out_dir)) == EXIT_OK
    with open(os.path.join(out_dir, 'stories.csv')) as f:
        lines = f.read().splitlines()
    assert lines[0] == 'date,site_id,n_stories,status'
    assert lines[1] == '2016-11-01,alpha,4,ok'
    assert len(lines) == 1 + 3 * 3


def test_fetch(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('fetch', config, cache_dir, out_dir)) == EXIT_OK
    assert len(Cache(cache_dir)) > 0
    assert not os.path.exists(os.path.join(cache_dir, 'manifest.json'))


def test_report(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('report', config, cache_dir, out_dir, '--month', '2016-11')) == EXIT_OK
    for name in ['histogram.csv', 'offsets.csv', 'counts.csv']:
        assert os.path.exists(os.path.join(out_dir, name))
    with open(os.path.join(out_dir, 'counts.csv')) as f:
        assert f.read().splitlines()[1] == 'alpha,2016-11,12'


def test_report_bad_month(workspace):
    config, cache_dir, out_dir = workspace
    assert main(run_args('report', config, cache_dir, out_dir, '--month', '2016-13')) == EXIT_CONFIG_ERROR


def test_bad_config(tmpdir):
    path = os.path.join(str(tmpdir), 'config.json')
    with open(path, 'w') as f:
        json.dump({'version': 2}, f)
    assert main(['score', '--config', path, '--out', str(tmpdir)]) == EXIT_CONFIG_ERROR
    assert main(['score', '--config', os.path.join(str(tmpdir), 'missing.json')]) == EXIT_CONFIG_ERROR


def test_unwritable_output(workspace):
    config, cache_dir, out_dir = workspace
    with open(out_dir, 'w') as f:
        f.write('in the way')
    assert main(run_args('score', config, cache_dir, out_dir)) == EXIT_OUTPUT_ERROR


def test_full_cache_disk_is_output_error(workspace, monkeypatch):
    config, cache_dir, out_dir = workspace

    def no_space(self, uri, result=None, error=None):
        raise OSError(errno.ENOSPC, 'No space left on device')

    monkeypatch.setattr(Cache, 'store', no_space)
    assert main(run_args('score', config, cache_dir, out_dir)) == EXIT_OUTPUT_ERROR


def test_failed_day_is_partial_failure(workspace):
    config, cache_dir, out_dir = workspace
    day = corpus.days[1]
    selected = corpus.captures(day)[1]
    drop_from_offline_index(cache_dir, [corpus.memento_uri(corpus.homepage_uri(site_id), selected) for site_id in corpus.site_ids])
    assert main(run_args('score', config, cache_dir, out_dir)) == EXIT_PARTIAL_FAILURE
    with open(os.path.join(out_dir, 'series.csv')) as f:
        lines = f.read().splitlines()
    assert lines[4] == '2016-11-02,1,,0,0'
    assert lines[1].split(',')[2] != ''


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
