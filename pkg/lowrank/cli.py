"""Command-line entry point.

    lowrank sense --m 40 --n 40 --k 2 --d-mult 6 --out runs/sense
    lowrank complete --p 0.35 --T 15 --out runs/complete
    lowrank probe-rip --m 20 --n 20 --k 2 --d 800
    lowrank report --trace runs/sense/trace.csv

Flags override values from `--config FILE` (a JSON object keyed by field
name), which override the LOWRANK_SEED environment variable and defaults.
"""

import sys
import json
import logging
import argparse

from .errors import ConfigInvalid, LowRankError, MalformedFile
from .harness import (CompletionExperimentConfig, SensingExperimentConfig, SOLVERS,
                      convergence_report, read_trace, run_completion_experiment,
                      run_sensing_experiment)
from .misc import default_seed, setup_logger
from .operators import estimate_rip_constant, gaussian_ensemble
from .path import FilePath
from .sensing import FULL, ORTHONORMALIZED, PARTITIONED, STANDARD

__all__ = ['build_parser', 'main']

logger = logging.getLogger(__name__)

OK, FAILED, ERROR = 0, 1, 2

_NOT_FIELDS = ('command', 'config', 'log_level', 'log_file', 'handler')


def _add_problem_args(parser):
    keep = argparse.SUPPRESS    # absent flags must not shadow the config file
    parser.add_argument('--config', help='JSON file with experiment fields')
    parser.add_argument('--m', type=int, default=keep, help='rows')
    parser.add_argument('--n', type=int, default=keep, help='columns')
    parser.add_argument('--k', type=int, default=keep, help='rank')
    parser.add_argument('--kappa', type=float, default=keep, help='condition number sigma_1/sigma_k')
    parser.add_argument('--T', type=int, default=keep, help='alternations')
    parser.add_argument('--tol', type=float, default=keep, help='relative residual to stop at')
    parser.add_argument('--seed', type=int, default=keep)
    parser.add_argument('--max-rel-error', type=float, default=keep, dest='max_rel_error',
                        help='pass threshold on the final relative error')
    parser.add_argument('--no-timing', action='store_false', default=keep, dest='timing',
                        help='leave elapsed_ms empty so reruns are byte-identical')
    parser.add_argument('--save-inputs', action='store_true', default=keep, dest='save_inputs',
                        help='also write the ground truth and measurements')
    parser.add_argument('--out', default=keep, help='output directory')


def _logging_args(level='INFO', log_file=None):
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--log-level', default=level,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--log-file', default=log_file)
    return parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog='lowrank', description='Alternating minimization for low-rank matrix recovery.',
        parents=[_logging_args()])
    # accepted after the subcommand too; absent there, the top-level value stands
    logging_args = _logging_args(argparse.SUPPRESS, argparse.SUPPRESS)
    commands = parser.add_subparsers(dest='command', required=True)

    sense = commands.add_parser('sense', parents=[logging_args],
                                help='Gaussian matrix sensing experiment')
    _add_problem_args(sense)
    sense.add_argument('--d-mult', type=float, default=argparse.SUPPRESS, dest='d_mult',
                       help='d = d_mult * k * n * ceil(ln n)')
    sense.add_argument('--noise-ratio', type=float, default=argparse.SUPPRESS,
                       dest='noise_ratio', help='||N||_F / sigma_k')
    sense.add_argument('--solver', choices=SOLVERS, default=argparse.SUPPRESS)
    sense.add_argument('--max-dist-u', type=float, default=argparse.SUPPRESS, dest='max_dist_u')
    sense.set_defaults(handler=_sense)

    complete = commands.add_parser('complete', parents=[logging_args],
                                   help='matrix completion experiment')
    _add_problem_args(complete)
    complete.add_argument('--p', type=float, default=argparse.SUPPRESS,
                          help='sampling probability')
    complete.add_argument('--mu', type=float, default=argparse.SUPPRESS,
                          help='incoherence used by the clipping threshold')
    complete.add_argument('--schedule', choices=[PARTITIONED, FULL], default=argparse.SUPPRESS)
    complete.add_argument('--mode', choices=[STANDARD, ORTHONORMALIZED],
                          default=argparse.SUPPRESS)
    complete.add_argument('--no-clip', action='store_false', default=argparse.SUPPRESS,
                          dest='clip')
    complete.set_defaults(handler=_complete)

    probe = commands.add_parser('probe-rip', parents=[logging_args],
                                help='Monte-Carlo lower bound on the RIP constant')
    probe.add_argument('--m', type=int, default=20)
    probe.add_argument('--n', type=int, default=20)
    probe.add_argument('--k', type=int, default=2)
    probe.add_argument('--d', type=int, default=800)
    probe.add_argument('--trials', type=int, default=100)
    probe.add_argument('--seed', type=int, default=None)
    probe.set_defaults(handler=_probe_rip)

    report = commands.add_parser('report', parents=[logging_args],
                                 help='convergence summary of a trace CSV')
    report.add_argument('--trace', required=True)
    report.set_defaults(handler=_report)
    return parser


def _load_config(config_type, args):
    mapping = {}
    if args.config:
        path = FilePath(args.config)
        if not path.is_file():
            raise MalformedFile(f'{path}: no such config file')
        try:
            mapping = path.load_json()
        except json.JSONDecodeError as e:
            raise MalformedFile(f'{path}: line {e.lineno}: {e.msg}') from e
        if not isinstance(mapping, dict):
            raise ConfigInvalid(f'{path} must hold a JSON object')
    flags = {k: v for k, v in vars(args).items() if k not in _NOT_FIELDS}
    mapping.update(flags)
    return config_type.from_mapping(mapping)


def _print_json(obj):
    print(json.dumps(obj, indent=2))


def _experiment(config, run):
    report = run(config)
    logger.info('\n%s', report.trace.to_table(timing=config.timing).draw(n_rows=len(report.trace)))
    _print_json(report.to_json())
    return OK if report.passed else FAILED


def _sense(args):
    return _experiment(_load_config(SensingExperimentConfig, args), run_sensing_experiment)


def _complete(args):
    return _experiment(_load_config(CompletionExperimentConfig, args), run_completion_experiment)


def _probe_rip(args):
    seed = default_seed() if args.seed is None else args.seed
    op = gaussian_ensemble(args.m, args.n, args.d, seed)
    delta = estimate_rip_constant(op, args.k, args.trials, seed)
    _print_json({'m': args.m, 'n': args.n, 'k': args.k, 'd': args.d,
                 'trials': args.trials, 'seed': seed, 'delta': delta})
    return OK


def _report(args):
    _print_json(convergence_report(read_trace(args.trace)))
    return OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logger(level=args.log_level, log_file=args.log_file)
    try:
        return args.handler(args)
    except LowRankError as e:
        message = ' | '.join(line.strip() for line in str(e).splitlines())
        print(f'lowrank: error: {message}', file=sys.stderr)
        return ERROR


if __name__ == '__main__':
    sys.exit(main())
