import argparse
import asyncio
import logging
import os
import sys
from typing import List, Optional

from .dtypes import ConfigError, EmptyInput, FlowError, OutputUnwritable
from .oracle import verify
from .pipeline import Pipeline, load_config
from .writers import emit_series, write_archival_report, write_stories

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL_FAILURE = 2
EXIT_OUTPUT_ERROR = 3

log_format = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _add_run_arguments(parser):
    parser.add_argument('--config', required=True, help='Site and run configuration (JSON)')
    parser.add_argument('--from', dest='start', help='First date, YYYY-MM-DD')
    parser.add_argument('--to', dest='end', help='Last date, YYYY-MM-DD (inclusive)')
    parser.add_argument('--target-time', help='Time of day to select mementos at: HH:MMZ (UTC) or HH:MM (local at --utc-offset)')
    parser.add_argument('--utc-offset', help='Fixed UTC offset of the local timezone, e.g. -5')
    parser.add_argument('--k', dest='k_values', help='Comma separated numbers of top stories per site, e.g. 1,3,10')
    parser.add_argument('--cache', dest='cache_dir', help='Cache directory (default: $NEWSFLOW_CACHE_DIR)')
    parser.add_argument('--offline', action='store_true', default=None, help='Serve requests from the cache directory only')
    parser.add_argument('--out', dest='out_dir', default='out', help='Output directory (default: out)')
    parser.add_argument('--log-level', help='Logging level (default: $NEWSFLOW_LOG_LEVEL or INFO)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='newsflow', description='Similarity of news homepage stories over archived days')
    subparsers = parser.add_subparsers(dest='command', required=True)

    fetch = subparsers.add_parser('fetch', help='Populate the cache with TimeMaps, homepages and story pages')
    _add_run_arguments(fetch)

    extract = subparsers.add_parser('extract', help='Extract top stories only and write stories.csv')
    _add_run_arguments(extract)

    score = subparsers.add_parser('score', help='Score every day of the range and write series.csv, summary.csv and manifest.json')
    _add_run_arguments(score)
    score.add_argument('--force', action='store_true', default=None, help='Recompute days already in the output manifest')
    score.add_argument('--dump-matrices', action='store_true', default=None, help='Write every similarity matrix under OUT/matrices')

    report = subparsers.add_parser('report', help='Write capture-hour histograms and memento offset statistics')
    _add_run_arguments(report)
    report.add_argument('--month', help='Only count mementos of this month in the histogram, YYYY-MM')

    oracle = subparsers.add_parser('oracle', help='Recompute the scores of a finished run and compare')
    oracle.add_argument('--out', dest='out_dir', default='out', help='Output directory of the run to check (default: out)')
    oracle.add_argument('--cache', dest='cache_dir', help='Cache directory of the run (default: $NEWSFLOW_CACHE_DIR)')
    oracle.add_argument('--tolerance', type=float, default=1e-9, help='Largest accepted difference (default: 1e-9)')
    oracle.add_argument('--log-level', help='Logging level (default: $NEWSFLOW_LOG_LEVEL or INFO)')
    return parser


def _parse_month(value):
    try:
        year, month = value.split('-')
        result = int(year), int(month)
    except ValueError:
        raise ConfigError(f'Failed to parse month "{value}", expected YYYY-MM')
    if not 1 <= result[1] <= 12:
        raise ConfigError(f'Month out of range "{value}"')
    return result


def _overrides(args) -> dict:
    names = ['start', 'end', 'target_time', 'utc_offset', 'k_values', 'cache_dir', 'offline', 'out_dir', 'force', 'dump_matrices']
    return {name: getattr(args, name, None) for name in names}


async def _execute(args) -> int:
    config = load_config(args.config, **_overrides(args))
    pipeline = Pipeline(config)
    try:
        if args.command == 'fetch':
            site_days, documents = await pipeline.populate()
            logger.info('Fetched %d site-days and %d story documents', site_days, documents)
            return EXIT_OK
        if args.command == 'extract':
            results = await pipeline.extract_range()
            os.makedirs(config.out_dir, exist_ok=True)
            write_stories(config.out_dir, results)
            return EXIT_OK if all(site.ok for result in results for site in result.sites) else EXIT_PARTIAL_FAILURE
        if args.command == 'score':
            results = await pipeline.run_range()
            emit_series(results, config.out_dir, config.run_summary())
            failed = [result.date for result in results if result.failed]
            if failed:
                logger.warning('%d of %d days failed', len(failed), len(results))
                return EXIT_PARTIAL_FAILURE
            return EXIT_OK
        month = _parse_month(args.month) if args.month else None
        report = await pipeline.report(month)
        write_archival_report(config.out_dir, report)
        return EXIT_PARTIAL_FAILURE if report.failures else EXIT_OK
    finally:
        await pipeline.close()


def _oracle(args) -> int:
    cache_dir = args.cache_dir or os.getenv('NEWSFLOW_CACHE_DIR')
    if not cache_dir:
        raise ConfigError('The oracle needs the cache directory of the run (--cache)')
    if not os.path.exists(os.path.join(args.out_dir, 'manifest.json')):
        raise ConfigError(f'No manifest.json in {args.out_dir}')
    mismatches = verify(args.out_dir, cache_dir, args.tolerance)
    for mismatch in mismatches:
        logger.error('Score mismatch: %s', mismatch)
    return EXIT_PARTIAL_FAILURE if mismatches else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = (args.log_level or os.getenv('NEWSFLOW_LOG_LEVEL') or 'INFO').upper()
    logging.basicConfig(level=level, format=log_format)
    try:
        if args.command == 'oracle':
            return _oracle(args)
        return asyncio.run(_execute(args))
    except ConfigError as ex:
        logger.error('Configuration error: %s', ex)
        return EXIT_CONFIG_ERROR
    except (OutputUnwritable, EmptyInput) as ex:
        logger.error('Output error: %s', ex)
        return EXIT_OUTPUT_ERROR
    except OSError as ex:
        logger.error('Output error: %s', ex)
        return EXIT_OUTPUT_ERROR
    except FlowError as ex:
        if not isinstance(ex.__cause__, OSError):
            raise
        logger.error('Output error: %s', ex.__cause__)
        return EXIT_OUTPUT_ERROR


if __name__ == '__main__':
    sys.exit(main())
