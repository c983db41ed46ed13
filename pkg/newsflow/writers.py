import csv
import io
import json
import logging
import os
from typing import Dict, Iterable, List, Optional

import pandas as pd

from .cache import atomic_write
from .dtypes import ConfigError, DailyResult, EmptyInput, OutputUnwritable
from .similarity import SimilarityMatrix, dump_matrix

logger = logging.getLogger(__name__)

manifest_file_name = 'manifest.json'
manifest_version = 1

series_header = ['date', 'k', 'score', 'n_documents', 'n_excluded']
summary_header = ['k', 'n_days', 'min', 'mean', 'max']
stories_header = ['date', 'site_id', 'n_stories', 'status']
histogram_header = ['site_id'] + [f'h{hour:02d}' for hour in range(24)]
offsets_header = ['site_id', 'n', 'min', 'q1', 'median', 'q3', 'max', 'mean']
counts_header = ['site_id', 'year_month', 'mementos']


def format_score(value: Optional[float]) -> str:
    return '' if value is None else f'{value:.6f}'


def _write(path: str, data: str):
    try:
        atomic_write(path, data.encode('utf-8'))
    except OSError as ex:
        raise OutputUnwritable(f'Failed to write {path}: {ex}') from ex
    logger.info('Wrote %s', path)


def _write_csv(path: str, header: List[str], rows: Iterable[list]):
    buffer = io.StringIO(newline='')
    writer = csv.writer(buffer, lineterminator='\r\n')
    writer.writerow(header)
    writer.writerows(rows)
    _write(path, buffer.getvalue())


def _write_json(path: str, data):
    _write(path, json.dumps(data, indent=1, sort_keys=True) + '\n')


def series_rows(results: List[DailyResult]) -> List[list]:
    rows = []
    for result in sorted(results, key=lambda daily: daily.date):
        for k_result in sorted(result.k_results, key=lambda k_result: k_result.k):
            rows.append([result.date.isoformat(), k_result.k, format_score(k_result.score), k_result.n_documents, k_result.n_excluded])
    return rows


def summary_frame(results: List[DailyResult]) -> pd.DataFrame:
    """Minimum, mean and maximum score per k over the days that produced a score."""
    records = [{'k': k_result.k, 'score': k_result.score} for result in results for k_result in result.k_results
               if k_result.score is not None]
    if not records:
        return pd.DataFrame(columns=summary_header)
    df = pd.DataFrame.from_records(records)
    summary = df.groupby('k')['score'].agg(['count', 'min', 'mean', 'max']).reset_index()
    summary.columns = summary_header
    return summary.sort_values('k')


def stories_rows(results: List[DailyResult]) -> List[list]:
    rows = []
    for result in sorted(results, key=lambda daily: daily.date):
        for site in result.sites:
            rows.append([result.date.isoformat(), site.site_id, len(site.stories), site.status])
    return rows


def manifest_dict(results: List[DailyResult], run: Optional[dict] = None) -> dict:
    return {'version': manifest_version, 'run': run or {},
            'days': {result.date.isoformat(): result.to_dict() for result in results}}


def write_manifest(out_dir: str, results: List[DailyResult], run: Optional[dict] = None):
    _write_json(os.path.join(out_dir, manifest_file_name), manifest_dict(results, run))


def merge_results(previous: Dict[str, DailyResult], results: List[DailyResult]) -> List[DailyResult]:
    """previous (keyed by ISO date) updated with results, in date order."""
    merged = dict(previous)
    for result in results:
        merged[result.date.isoformat()] = result
    return [merged[day] for day in sorted(merged)]


def read_manifest(out_dir: str) -> Dict[str, DailyResult]:
    """Loads the per-day results of a previous run, keyed by ISO date. Missing manifest gives an empty dict."""
    path = os.path.join(out_dir, manifest_file_name)
    if not os.path.exists(path):
        return {}
    with open(path, encoding='utf-8') as f:
        manifest = json.load(f)
    if not isinstance(manifest, dict) or manifest.get('version') != manifest_version or 'days' not in manifest:
        raise ConfigError(f'{path} is not a run manifest of version {manifest_version}')
    return {day: DailyResult.from_dict(data) for day, data in manifest['days'].items()}


def read_manifest_run(out_dir: str) -> dict:
    path = os.path.join(out_dir, manifest_file_name)
    with open(path, encoding='utf-8') as f:
        return json.load(f).get('run', {})


def emit_series(results: List[DailyResult], out_dir: str, run: Optional[dict] = None):
    """
    Writes the outputs of a scoring run into out_dir.

    series.csv holds one row per (date, k) with the score at six decimals (empty when no score could be computed),
    summary.csv the minimum, mean and maximum score per k, stories.csv the number of stories per site-day and
    manifest.json the full per-site detail.
    Days already recorded in an existing manifest of out_dir are kept, so outputs cover every day scored there so far;
    results replace recorded days with the same date.

    :param results: Results of at least one day.
    :param out_dir: Output directory, created if missing.
    :param run: Run parameters recorded in the manifest.
    :raises EmptyInput: results is empty. Nothing is written.
    :raises OutputUnwritable: a file could not be written.
    """
    if not results:
        raise EmptyInput('emit_series needs at least one result')
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as ex:
        raise OutputUnwritable(f'Failed to create {out_dir}: {ex}') from ex
    results = merge_results(read_manifest(out_dir), results)
    _write_csv(os.path.join(out_dir, 'series.csv'), series_header, series_rows(results))
    summary = summary_frame(results)
    _write_csv(os.path.join(out_dir, 'summary.csv'), summary_header,
               [[int(row.k), int(row.n_days), format_score(row.min), format_score(row.mean), format_score(row.max)]
                for row in summary.itertuples(index=False)])
    _write_csv(os.path.join(out_dir, 'stories.csv'), stories_header, stories_rows(results))
    write_manifest(out_dir, results, run)


def write_stories(out_dir: str, results: List[DailyResult]):
    _write_csv(os.path.join(out_dir, 'stories.csv'), stories_header, stories_rows(results))


def write_matrix(out_dir: str, day, k: int, matrix: SimilarityMatrix, documents: List[str]):
    _write(os.path.join(out_dir, 'matrices', f'{day.isoformat()}-k{k}.json'), dump_matrix(matrix, documents) + '\n')


def offsets_frame(offsets: Dict[str, List[float]]) -> pd.DataFrame:
    """Five-number summary plus mean of the memento offsets of each site, in minutes."""
    rows = []
    for site_id, values in offsets.items():
        if not values:
            continue
        series = pd.Series(values, dtype=float)
        q1, median, q3 = series.quantile([0.25, 0.5, 0.75])
        rows.append([site_id, len(series), series.min(), q1, median, q3, series.max(), series.mean()])
    return pd.DataFrame(rows, columns=offsets_header)


def write_archival_report(out_dir: str, report) -> List[str]:
    """Writes histogram.csv, offsets.csv and counts.csv for an ArchivalReport. Returns the paths written."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as ex:
        raise OutputUnwritable(f'Failed to create {out_dir}: {ex}') from ex
    paths = [os.path.join(out_dir, name) for name in ('histogram.csv', 'offsets.csv', 'counts.csv')]

    _write_csv(paths[0], histogram_header,
               [[site_id] + [histogram[hour] for hour in range(24)] for site_id, histogram in report.histograms.items()])

    offsets = offsets_frame(report.offsets)
    _write_csv(paths[1], offsets_header,
               [[row[0], int(row[1])] + [f'{value:.1f}' for value in row[2:]] for row in offsets.itertuples(index=False)])

    counts = []
    for site_id, by_month in report.counts.items():
        for year_month in sorted(by_month):
            counts.append([site_id, year_month, by_month[year_month]])
    _write_csv(paths[2], counts_header, counts)
    return paths
