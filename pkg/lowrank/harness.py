"""Problem generation and experiment orchestration.

An experiment draws a seeded ground truth, measures it, runs one solver and
leaves two artifacts in its output directory: `trace.csv` (one row per
iteration) and `report.json` (final errors and the pass verdict).

>>> instance = generate_problem(30, 20, 2, kappa=4.0, seed=1)
>>> instance.truth.sigma.tolist()
[4.0, 1.0]
>>> instance.kappa
4.0

>>> trace = ConvergenceTrace(TraceRecord(t, 1.0, dist_u=4.0 ** -t) for t in range(6))
>>> summary = convergence_report(trace)
>>> summary['ratios']
[0.25, 0.25, 0.25, 0.25, 0.25]
>>> round(summary['slope'], 3)
-0.602
"""

import math
import logging
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .completion import CompletionProblem, altmin_complete, incoherence_of
from .decorators import logs, returns_time
from .errors import ConfigInvalid, InsufficientTrace, MalformedFile, ShapeMismatch
from .linalg import SvdResult, qr_decompose, save_matrix
from .misc import RNG_NAME, default_seed, make_rng
from .operators import (apply_sensing, gaussian_ensemble, partition_omega, sample_omega,
                        save_observations, save_operator)
from .path import FilePath, Path
from .sensing import (ConvergenceTrace, SolverConfig, TraceRecord, altmin_sense, stage_altmin,
                      FULL, ORTHONORMALIZED, PARTITIONED, STANDARD)

__all__ = ['ProblemInstance', 'generate_problem', 'measurement_count',
           'SensingExperimentConfig', 'CompletionExperimentConfig', 'ExperimentReport',
           'run_sensing_experiment', 'run_completion_experiment',
           'convergence_report', 'read_trace', 'DECAY_FLOOR', 'SOLVERS']

logger = logging.getLogger(__name__)


DECAY_FLOOR = 1e-10
SOLVERS = ('altmin', 'stage', 'altmin-orth')

TRACE_FILE = 'trace.csv'
REPORT_FILE = 'report.json'


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    M: np.ndarray
    truth: SvdResult
    kappa: float
    mu: float
    seed: int


def generate_problem(m, n, k, kappa, seed, rng_name=RNG_NAME):
    """Rank-k m x n matrix with singular values spaced geometrically from
    kappa down to 1 and Gaussian (QR-orthonormalized) singular vectors.

    With k = 1 the single singular value is 1.
    """
    if not 1 <= k <= min(m, n):
        raise ShapeMismatch(f'k={k} must be in [1, {min(m, n)}]')
    if not kappa >= 1:
        raise ValueError(f'kappa must be >= 1, got {kappa}')
    rng = make_rng(seed, rng_name)
    U = qr_decompose(rng.standard_normal((m, k))).Q
    V = qr_decompose(rng.standard_normal((n, k))).Q
    if k == 1:
        sigma = np.ones(1)
    else:
        sigma = float(kappa) ** np.linspace(1.0, 0.0, k)
    truth = SvdResult(U=U, sigma=sigma, V=V)
    mu = max(incoherence_of(U).mu, incoherence_of(V).mu)
    return ProblemInstance(M=truth.reconstruct(), truth=truth,
                           kappa=float(sigma[0] / sigma[-1]), mu=float(mu), seed=seed)


def measurement_count(d_mult, k, n):
    """d = c k n ceil(ln n), rounded up to an integer."""
    return int(math.ceil(d_mult * k * n * math.ceil(math.log(n))))


def _sub_seeds(seed, count):
    # independent streams for problem, measurements and noise from one seed
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


@dataclass
class ExperimentConfig:
    """Fields shared by both experiments. `out` is where artifacts go and is
    not echoed into the report."""
    m: int = 40
    n: int = 40
    k: int = 2
    kappa: float = 2.0
    T: int = 50
    tol: float = 1e-12
    seed: int = field(default_factory=default_seed)
    rng: str = RNG_NAME
    max_rel_error: float = 1e-4
    timing: bool = True
    save_inputs: bool = False
    out: Optional[str] = None

    def _errors(self) -> Dict[str, str]:
        errors = {}
        for name in ('m', 'n', 'k', 'T'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                errors[name] = f'must be a positive integer, got {value!r}'
        if 'k' not in errors and 'm' not in errors and 'n' not in errors and \
                self.k > min(self.m, self.n):
            errors['k'] = f'must be <= min(m, n) = {min(self.m, self.n)}, got {self.k}'
        if not self.kappa >= 1:
            errors['kappa'] = f'must be >= 1, got {self.kappa!r}'
        if not self.tol >= 0:
            errors['tol'] = f'must be >= 0, got {self.tol!r}'
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            errors['seed'] = f'must be a non-negative integer, got {self.seed!r}'
        try:
            make_rng(0, self.rng)
        except ConfigInvalid as e:
            errors.update(e.errors)
        if not self.max_rel_error > 0:
            errors['max_rel_error'] = f'must be > 0, got {self.max_rel_error!r}'
        return errors

    def validate(self):
        errors = self._errors()
        if errors:
            raise ConfigInvalid(errors)
        return self

    @classmethod
    def from_mapping(cls, mapping):
        """Builds a validated config from a JSON-like mapping; unknown keys are errors."""
        mapping = {key.replace('-', '_'): value for key, value in mapping.items()}
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = {key: 'unknown field' for key in mapping if key not in names}
        if unknown:
            raise ConfigInvalid(unknown)
        return cls(**mapping).validate()

    def echo(self):
        echo = dataclasses.asdict(self)
        echo.pop('out')
        return echo


@dataclass
class SensingExperimentConfig(ExperimentConfig):
    """Gaussian sensing run: d = d_mult * k * n * ceil(ln n) measurements of
    M + N with ||N||_F = noise_ratio * sigma_k."""
    d_mult: float = 6.0
    noise_ratio: float = 0.0
    solver: str = 'altmin'
    max_dist_u: Optional[float] = None

    @property
    def d(self):
        return measurement_count(self.d_mult, self.k, self.n)

    def _errors(self):
        errors = super()._errors()
        if not self.d_mult > 0:
            errors['d_mult'] = f'must be > 0, got {self.d_mult!r}'
        if not self.noise_ratio >= 0:
            errors['noise_ratio'] = f'must be >= 0, got {self.noise_ratio!r}'
        if self.solver not in SOLVERS:
            errors['solver'] = f'must be one of {list(SOLVERS)}, got {self.solver!r}'
        if self.max_dist_u is not None and not self.max_dist_u > 0:
            errors['max_dist_u'] = f'must be > 0, got {self.max_dist_u!r}'
        return errors


@dataclass
class CompletionExperimentConfig(ExperimentConfig):
    """Entrywise sampling at probability p, split into 2T + 1 parts."""
    m: int = 150
    n: int = 150
    T: int = 15
    max_rel_error: float = 1e-3
    p: float = 0.35
    mu: float = 3.0
    schedule: str = FULL
    mode: str = STANDARD
    clip: bool = True

    def _errors(self):
        errors = super()._errors()
        if not 0 < self.p <= 1:
            errors['p'] = f'must be in (0, 1], got {self.p!r}'
        if not self.mu > 0:
            errors['mu'] = f'must be > 0, got {self.mu!r}'
        if self.schedule not in (PARTITIONED, FULL):
            errors['schedule'] = f'must be {PARTITIONED!r} or {FULL!r}, got {self.schedule!r}'
        if self.mode not in (STANDARD, ORTHONORMALIZED):
            errors['mode'] = f'must be {STANDARD!r} or {ORTHONORMALIZED!r}, got {self.mode!r}'
        return errors


@dataclass(eq=False)
class ExperimentReport:
    config: Dict[str, Any]
    trace: ConvergenceTrace
    final_rel_error: Optional[float]
    final_dist_u: Optional[float]
    final_dist_v: Optional[float]
    iterations_run: int
    decay_median_ratio: Optional[float]
    passed: bool
    wall_ms: float
    partition_audit: Optional[Dict[str, Any]] = None

    def to_json(self):
        report = {'config': self.config,
                  'final_rel_error': self.final_rel_error,
                  'final_dist_u': self.final_dist_u,
                  'final_dist_v': self.final_dist_v,
                  'iterations_run': self.iterations_run,
                  'decay_median_ratio': self.decay_median_ratio,
                  'pass': self.passed}
        if self.partition_audit is not None:
            report['partition_audit'] = self.partition_audit
        return report


def convergence_report(trace, floor=DECAY_FLOOR):
    """Geometric-decay summary of the dist columns of a trace.

    The dist_u series is used (dist_v when dist_u is absent). Ratios and the
    slope of log10(dist) against the iteration index only use values above
    `floor`; `floor_iteration` is the first iteration at or below it.

    Raises:
        InsufficientTrace: with fewer than three records carrying dist values.
    """
    series = 'dist_u' if any(r.dist_u is not None for r in trace) else 'dist_v'
    points = [(r.iter, getattr(r, series)) for r in trace if getattr(r, series) is not None]
    if len(points) < 3:
        raise InsufficientTrace(f'{len(points)} records carry dist values, need at least 3')

    floor_iteration = next((t for t, d in points if d <= floor), None)
    above = [(t, d) for t, d in points if d > floor and
             (floor_iteration is None or t < floor_iteration)]
    ratios = [d1 / d0 for (_, d0), (_, d1) in zip(above, above[1:])]
    slope = None
    if len(above) >= 2:
        ts, ds = zip(*above)
        slope = float(np.polyfit(ts, np.log10(ds), 1)[0])

    half_step = []
    for before, after in zip(trace, trace[1:]):
        if before.dist_u is not None and after.dist_v is not None and before.dist_u > floor:
            if floor_iteration is None or after.iter < floor_iteration:
                half_step.append(after.dist_v / before.dist_u)

    return {'series': series,
            'points': len(points),
            'ratios': ratios,
            'median_ratio': float(np.median(ratios)) if ratios else None,
            'floor_iteration': floor_iteration,
            'slope': slope,
            'half_step_ratios': half_step,
            'median_half_step_ratio': float(np.median(half_step)) if half_step else None}


def read_trace(path):
    """Loads a trace CSV written by an experiment."""
    path = FilePath(path)
    if not path.is_file():
        raise MalformedFile(f'{path}: no such trace file')
    try:
        table = path.read_csv(transform=float)
        return ConvergenceTrace.from_table(table)
    except ValueError as e:
        raise MalformedFile(f'{path}: {e}') from e


def _median_decay(trace):
    try:
        return convergence_report(trace)['median_ratio']
    except InsufficientTrace:
        return None


def _iterations_run(trace):
    return sum(1 for r in trace if r.residual_half is not None)


def _summarize(config, trace, wall_ms, passed, partition_audit=None):
    last = trace.last
    return ExperimentReport(config=config.echo(), trace=trace,
                            final_rel_error=last.rel_error,
                            final_dist_u=last.dist_u, final_dist_v=last.dist_v,
                            iterations_run=_iterations_run(trace),
                            decay_median_ratio=_median_decay(trace),
                            passed=passed, wall_ms=wall_ms, partition_audit=partition_audit)


def _write_artifacts(config, report):
    out = Path(config.out).mkdir()
    FilePath(out / TRACE_FILE).write_csv(report.trace.to_table(timing=config.timing))
    FilePath(out / REPORT_FILE).dump_json(report.to_json())
    logger.info('wrote %s and %s to %s', TRACE_FILE, REPORT_FILE, out)


@logs(after=logging.INFO)
def run_sensing_experiment(config):
    """Gaussian matrix sensing with the configured solver.

    The report's pass verdict reads the trace only: final relative error at
    most `max_rel_error`, and final dist_u at most `max_dist_u` when set.
    """
    config.validate()
    problem_seed, operator_seed, noise_seed = _sub_seeds(config.seed, 3)
    instance = generate_problem(config.m, config.n, config.k, config.kappa, problem_seed,
                                config.rng)
    op = gaussian_ensemble(config.m, config.n, config.d, operator_seed, config.rng)
    target = instance.M
    if config.noise_ratio > 0:
        N = make_rng(noise_seed, config.rng).standard_normal(instance.M.shape)
        N *= config.noise_ratio * instance.truth.sigma[-1] / np.linalg.norm(N)
        target = instance.M + N
    b = apply_sensing(op, target)
    logger.info('sensing %dx%d rank-%d (kappa=%g) with d=%d, solver=%s', config.m, config.n,
                config.k, config.kappa, op.d, config.solver)

    cfg = SolverConfig(T=config.T, tol=config.tol, seed=config.seed,
                       mode=ORTHONORMALIZED if config.solver == 'altmin-orth' else STANDARD)
    solver = stage_altmin if config.solver == 'stage' else altmin_sense
    (pair, trace), wall_ms = returns_time(milis=True)(solver)(op, b, config.k, cfg,
                                                             truth=instance.truth)

    last = trace.last
    passed = last.rel_error is not None and last.rel_error <= config.max_rel_error
    if config.max_dist_u is not None:
        passed = passed and last.dist_u is not None and last.dist_u <= config.max_dist_u
    report = _summarize(config, trace, wall_ms, passed)

    if config.out is not None:
        if config.save_inputs:
            out = Path(config.out).mkdir()
            save_matrix(instance.M, out / 'M.txt')
            save_operator(op, out / 'operator.txt')
            save_matrix(b[:, None], out / 'b.txt')
        _write_artifacts(config, report)
    return report


@logs(after=logging.INFO)
def run_completion_experiment(config):
    """Matrix completion from entries sampled at probability p.

    The observed set is always split into 2T + 1 parts (audited in the
    report); the 'full' schedule then solves over their union.
    """
    config.validate()
    problem_seed, sample_seed, partition_seed = _sub_seeds(config.seed, 3)
    instance = generate_problem(config.m, config.n, config.k, config.kappa, problem_seed,
                                config.rng)
    omega = sample_omega(instance.M, config.p, sample_seed, config.rng)
    parts = partition_omega(omega, config.T, partition_seed, config.rng)
    problem = CompletionProblem(parts, config.k, p_hat=config.p)
    logger.info('completing %dx%d rank-%d (kappa=%g) from %d entries (p=%g), schedule=%s',
                config.m, config.n, config.k, config.kappa, len(omega), config.p, config.schedule)

    cfg = SolverConfig(T=config.T, tol=config.tol, seed=config.seed, mode=config.mode,
                       schedule=config.schedule)
    (pair, trace), wall_ms = returns_time(milis=True)(altmin_complete)(
        problem, cfg, config.mu, truth=instance.truth, clip=config.clip)

    last = trace.last
    passed = last.rel_error is not None and last.rel_error <= config.max_rel_error
    report = _summarize(config, trace, wall_ms, passed, partition_audit=parts.audit(omega))

    if config.out is not None:
        if config.save_inputs:
            out = Path(config.out).mkdir()
            save_matrix(instance.M, out / 'M.txt')
            save_observations(omega, out / 'omega.txt')
        _write_artifacts(config, report)
    return report
