#!/usr/bin/python3
import argparse
import configparser
import json
import logging
import math
import os
import sys
import threading
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

import continuation
import discretize
import geometry
import model
import plot
import polyspec
import store
from abstract import ConfigError, ConvergenceError, NumericError, ParameterError, ToolkitError

l = logging.getLogger(__name__)

# cli.py - Command line entry point: configuration, the five commands and their output files.
# Copyright (C) 2019 Danya Generalov (https://github.com/danya02)
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

COMMANDS = ('eigen', 'poly', 'branch', 'degenerate', 'verify')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
EXIT_OK, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 2, 3
RECORD_SCHEMA = 'branch-record/1'
FLOAT_FORMAT = '%.17g'


@dataclass(frozen=True)
class RunConfig:
    n: int = 2
    delta: float = 1.0
    q: float = 3.0
    k: int = 2
    N: int = 96
    quad_points: Optional[int] = None
    newton_tol: float = 1e-10
    max_iter: int = 30
    ds_init: float = 1e-2
    ds_min: float = 1e-6
    ds_max: float = 0.1
    sigma_tol: float = 1e-6
    lambda_floor: Optional[float] = None
    s0: float = 1e-2
    h: float = 1e-3
    sample_count: int = 200
    seed: int = 0
    output_dir: str = 'output'
    max_points: int = 400
    s_max: float = 5.0
    k_max: int = 5
    poly_n_points: int = 101
    verify_profile: str = 'trivial'

    def __post_init__(self):
        try:
            params = self.params()
            if self.quad_points is None:
                object.__setattr__(self, 'quad_points', self.N + 1)
            if self.lambda_floor is None:
                object.__setattr__(self, 'lambda_floor', 1e-3 * model.lambda_k(1, params))
            self.settings()
            geometry.FDScheme(self.h)
        except ConfigError:
            raise
        except ParameterError as e:
            raise ConfigError(str(e)) from e
        if self.k < 1 or self.k_max < 1:
            raise ConfigError(f'k and k_max must be positive, got k={self.k}, k_max={self.k_max}')
        if self.N < 2:
            raise ConfigError(f'N must be at least 2, got {self.N}')
        if self.quad_points < 1:
            raise ConfigError(f'quad_points must be positive, got {self.quad_points}')
        if self.sample_count < 1 or self.max_points < 3 or self.poly_n_points < 2:
            raise ConfigError('sample_count >= 1, max_points >= 3 and poly_n_points >= 2 are required')
        if self.verify_profile not in ('trivial', 'degenerate'):
            raise ConfigError(f'verify_profile must be trivial or degenerate, got {self.verify_profile!r}')

    def params(self) -> model.ModelParams:
        return model.ModelParams(self.n, self.delta, self.q)

    def settings(self) -> continuation.ContinuationSettings:
        return continuation.ContinuationSettings(newton_tol=self.newton_tol, max_iter=self.max_iter,
                                                 ds_init=self.ds_init, ds_min=self.ds_min, ds_max=self.ds_max,
                                                 sigma_tol=self.sigma_tol, s0=self.s0)

    def stop_rule(self, stop_on_sigma_zero: bool = False) -> continuation.StopRule:
        return continuation.StopRule(self.lambda_floor, self.max_points, self.s_max, stop_on_sigma_zero)

    def system(self) -> discretize.DiscreteSystem:
        return discretize.DiscreteSystem(self.params(), self.N, self.quad_points)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)


def _optional(convert):
    def parse(text):
        return None if text.strip().lower() in ('', 'none') else convert(text)
    return parse


CONVERTERS = {
    'n': int, 'delta': float, 'q': float, 'k': int, 'N': int, 'quad_points': _optional(int),
    'newton_tol': float, 'max_iter': int, 'ds_init': float, 'ds_min': float, 'ds_max': float,
    'sigma_tol': float, 'lambda_floor': _optional(float), 's0': float, 'h': float, 'sample_count': int,
    'seed': int, 'output_dir': str, 'max_points': int, 's_max': float, 'k_max': int, 'poly_n_points': int,
    'verify_profile': str,
}


def _read_config_file(path: str) -> Dict[str, str]:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f'cannot read config file {path}: {e.strerror}') from e
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    stripped = [line.strip() for line in text.splitlines()]
    if not any(line.startswith('[') for line in stripped):
        text = '[run]\n' + text
    try:
        parser.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError('config must start with a [run] section', e.line.strip()) from e
    except configparser.ParsingError as e:
        raise ConfigError('cannot parse config', e.errors[0][1].strip() if e.errors else None) from e
    except configparser.Error as e:
        raise ConfigError(f'cannot parse config: {e.message}') from e
    extra = [s for s in parser.sections() if s != 'run']
    if extra:
        raise ConfigError(f'unknown section [{extra[0]}]')
    return dict(parser['run']) if parser.has_section('run') else {}


def parse_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Defaults, then the INI file at 'path', then key=value overrides."""
    raw = _read_config_file(path) if path else {}
    for item in overrides:
        if '=' not in item:
            raise ConfigError('override must look like key=value', item)
        key, value = item.split('=', 1)
        raw[key.strip()] = value.strip()
    values = dict()
    for key, text in raw.items():
        if key not in CONVERTERS:
            raise ConfigError(f'unknown key {key!r}', f'{key}={text}')
        try:
            values[key] = CONVERTERS[key](text)
        except ValueError as e:
            raise ConfigError(f'bad value for {key}', f'{key}={text}') from e
    config = RunConfig(**values)
    l.debug('Configuration: %s', config)
    return config


@dataclass(frozen=True)
class BranchRecord:
    s_coord: float
    lam: float
    nodal_count: int
    sigma_min: float
    u_min: float
    phi: List[float]
    event: Optional[str] = None

    @classmethod
    def from_point(cls, point: discretize.SolutionPoint, event: Optional[str] = None) -> 'BranchRecord':
        return cls(point.s_coord, point.lam, point.nodal_count, point.sigma_min, point.u_min,
                   [float(v) for v in point.phi], event)

    def validate(self):
        if self.nodal_count < 0:
            raise ParameterError(f'negative nodal count {self.nodal_count}')
        if not all(math.isfinite(v) for v in self.phi):
            raise ParameterError('non-finite profile value')
        if not self.u_min > 0:
            raise ParameterError(f'u_min = {self.u_min} is not positive')
        if not math.isclose(self.u_min, min(self.phi) + 1, rel_tol=0, abs_tol=1e-12):
            raise ParameterError(f'u_min = {self.u_min} does not match the profile minimum')
        if self.event is not None and any(e not in continuation.EVENT_KINDS for e in self.event.split(',')):
            raise ParameterError(f'unknown event {self.event!r}')
        return self

    def to_json(self) -> str:
        data = asdict(self)
        data['lambda'] = data.pop('lam')
        return json.dumps(data)

    @classmethod
    def from_json(cls, line: str) -> 'BranchRecord':
        data = json.loads(line)
        data['lam'] = data.pop('lambda')
        return cls(**data).validate()


def _schema_line(k: int, direction: int) -> str:
    return json.dumps({'schema': RECORD_SCHEMA, 'k': k, 'direction': direction,
                       'fields': ['s_coord', 'lambda', 'nodal_count', 'sigma_min', 'u_min', 'phi', 'event']})


def read_branch_records(path: str) -> List[BranchRecord]:
    """Parse and re-validate a branch file written by the branch command."""
    with open(path) as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise ParameterError(f'{path} is empty')
    header = json.loads(lines[0])
    if header.get('schema') != RECORD_SCHEMA:
        raise ParameterError(f'{path} has no {RECORD_SCHEMA} header')
    records = []
    for number, line in enumerate(lines[1:], start=2):
        try:
            records.append(BranchRecord.from_json(line))
        except (ValueError, TypeError, KeyError) as e:
            raise ParameterError(f'{path}:{number}: {e}') from e
    counts = {r.nodal_count for r in records}
    if len(counts) > 1:
        raise ParameterError(f'{path}: nodal count is not constant along the branch ({sorted(counts)})')
    return records


def _events_by_index(branch: continuation.Branch) -> Dict[int, str]:
    out = dict()
    for event in branch.events:
        out[event.index] = event.kind if event.index not in out else out[event.index] + ',' + event.kind
    return out


def write_branch_files(branch: continuation.Branch, config: RunConfig) -> str:
    """Final JSON-lines and CSV files of a branch, events attached to their points."""
    name = f'branch_k{branch.k}_{"plus" if branch.direction > 0 else "minus"}'
    events = _events_by_index(branch)
    tmp = config.path(name + '.jsonl.tmp')
    with open(tmp, 'w') as f:
        f.write(_schema_line(branch.k, branch.direction) + '\n')
        for i, point in enumerate(branch.points):
            f.write(BranchRecord.from_point(point, events.get(i)).to_json() + '\n')
    os.replace(tmp, config.path(name + '.jsonl'))
    table = np.array([[p.s_coord, p.lam, p.sigma_min] for p in branch.points]).reshape(-1, 3)
    np.savetxt(config.path(name + '.csv'), table, delimiter=',', header='s,lambda,sigma_min', comments='',
               fmt=FLOAT_FORMAT)
    l.info('Wrote %s.jsonl and %s.csv', name, name)
    return name


def _branch_key(config: RunConfig, k: int, direction: int, stop: continuation.StopRule) -> str:
    return store.fingerprint(params=config.params(), N=config.N, quad_points=config.quad_points,
                             settings=config.settings(), stop=stop, k=k, direction=direction)


def _trace_streaming(k: int, direction: int, config: RunConfig, system: discretize.DiscreteSystem,
                     stop: continuation.StopRule) -> continuation.Branch:
    """Trace one component, appending every accepted point to the JSON-lines file as it arrives."""
    name = f'branch_k{k}_{"plus" if direction > 0 else "minus"}.jsonl'
    with open(config.path(name), 'w') as f:
        f.write(_schema_line(k, direction) + '\n')

        def write_point(index, point):
            f.write(BranchRecord.from_point(point).to_json() + '\n')
            f.flush()

        return continuation.trace_branch(k, direction, stop, system, config.settings(), on_point=write_point)


def trace_both(config: RunConfig, system: discretize.DiscreteSystem,
               stop: continuation.StopRule) -> Dict[int, continuation.Branch]:
    """Trace the + and - components of branch k on two threads."""
    results, errors = dict(), dict()

    def run(direction):
        try:
            results[direction] = _trace_streaming(config.k, direction, config, system, stop)
        except Exception as e:
            errors[direction] = e

    threads = [threading.Thread(target=run, args=(d,), name=f'Branch::k{config.k}::{"plus" if d > 0 else "minus"}',
                                daemon=True) for d in (1, -1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for direction in (1, -1):
        if direction in errors:
            raise errors[direction]
    return results


def command_eigen(config: RunConfig):
    params = config.params()
    system = config.system()
    spectrum = discretize.linear_spectrum(system, min(config.k_max + 1, config.N - 1))
    rows = [[k, model.lambda_k(k, params), spectrum[k] if k < len(spectrum) else math.nan]
            for k in range(1, config.k_max + 1)]
    np.savetxt(config.path('eigen.csv'), np.array(rows), delimiter=',', header='k,lambda_k,spectrum', comments='',
               fmt=FLOAT_FORMAT)
    for row in rows:
        print('%d,%.17g' % (row[0], row[1]))
    l.info('Yamabe lambda for n=%d, delta=%g is %.12g; q-1 is %s', params.n, params.delta,
           model.yamabe_lambda(params.n, params.delta), model.criticality(params))
    l.info('Wrote %s', config.path('eigen.csv'))


def command_poly(config: RunConfig):
    n, k = config.n, config.k
    t = np.linspace(-1.0, 1.0, config.poly_n_points)
    values = np.column_stack([t] + [polyspec.gegenbauer_eval(j, n, t) for j in range(config.k_max + 1)])
    np.savetxt(config.path('poly_values.csv'), values, delimiter=',', comments='', fmt=FLOAT_FORMAT,
               header='t,' + ','.join(f'P{j}' for j in range(config.k_max + 1)))
    zeros = polyspec.gegenbauer_zeros(k, n)
    np.savetxt(config.path('poly_zeros.csv'), np.column_stack([np.arange(1, k + 1), zeros]), delimiter=',',
               header='index,zero', comments='', fmt=FLOAT_FORMAT)
    expansion = polyspec.linearization_coeffs(k, n)
    report = polyspec.gasper_recurrence_report(k, n)
    np.savetxt(config.path('poly_coeffs.csv'),
               np.column_stack([np.arange(2 * k + 1), expansion.coeffs, report.d]), delimiter=',',
               header='j,G_j,d_j', comments='', fmt=FLOAT_FORMAT)
    params = config.params()
    rows = [[j, polyspec.cube_integral(j, n), polyspec.norm_sq(j, n), model.dlambda_ds0(j, params)]
            for j in range(1, config.k_max + 1)]
    np.savetxt(config.path('poly_integrals.csv'), np.array(rows), delimiter=',',
               header='k,cube_integral,norm_sq,dlambda_ds0', comments='', fmt=FLOAT_FORMAT)
    if not report.consistent:
        l.warning('Recurrence coefficients and projection disagree for k=%d, n=%d', k, n)
    l.info('Wrote poly_values.csv, poly_zeros.csv, poly_coeffs.csv and poly_integrals.csv')


def command_branch(config: RunConfig):
    system = config.system()
    stop = config.stop_rule()
    branches = trace_both(config, system, stop)
    catalogue = store.BranchStore(config.path('branches.sqlite'))
    for direction in (1, -1):
        write_branch_files(branches[direction], config)
        catalogue.save_branch(_branch_key(config, config.k, direction, stop), branches[direction],
                              asdict(config))
    plot.save_branches([branches[1], branches[-1]], config.path(f'branch_k{config.k}.png'))


def find_degenerate(config: RunConfig, system: discretize.DiscreteSystem):
    """Trace (or reuse) the + component of branch k and locate its degenerate point."""
    stop = config.stop_rule(stop_on_sigma_zero=True)
    catalogue = store.BranchStore(config.path('branches.sqlite'))
    key = _branch_key(config, config.k, 1, stop)
    branch = catalogue.load_branch(key)
    if branch is None:
        branch = continuation.trace_branch(config.k, 1, stop, system, config.settings())
        catalogue.save_branch(key, branch, asdict(config))
    if len(branch.points) < 3:
        l.warning('Branch has only %d points, no degenerate point can be bracketed', len(branch.points))
        return branch, None
    return branch, continuation.locate_degenerate(branch, config.sigma_tol, system, config.settings())


def command_degenerate(config: RunConfig):
    system = config.system()
    branch, report = find_degenerate(config, system)
    out = {'k': config.k, 'n': config.n, 'delta': config.delta, 'q': config.q, 'N': config.N,
           'found': report is not None, 'branch_points': len(branch.points), 'lambda_min': branch.lambda_min}
    if report is not None:
        out.update(lambda_star=report.lambda_star, s_star=report.s_star, sigma_at_star=report.sigma_at_star,
                   sigma_check=report.sigma_check, scale=report.scale, nodal_count=report.nodal_count,
                   u_min=report.u_min, bracket_s=list(report.bracket_s), residual_norm=report.residual_norm,
                   lambda_min_running=report.lambda_min_running, kind=report.kind)
        profile = np.column_stack([system.grid.nodes, report.phi_star])
        np.savetxt(config.path(f'degenerate_k{config.k}_profile.csv'), profile, delimiter=',', header='t,phi',
                   comments='', fmt=FLOAT_FORMAT)
    with open(config.path(f'degenerate_k{config.k}.json'), 'w') as f:
        json.dump(out, f, indent=2)
    plot.save_branches([branch], config.path(f'degenerate_k{config.k}.png'), reports=[report])
    l.info('Wrote degenerate_k%d.json (found: %s)', config.k, report is not None)


def command_verify(config: RunConfig):
    params = config.params()
    h, half = config.h, config.h / 2
    iso = geometry.isoparametric_check(params.n, params.delta, config.sample_count, h, config.seed)
    iso_half = geometry.isoparametric_check(params.n, params.delta, config.sample_count, half, config.seed)

    def order(a, b):
        return geometry.observed_order(a, b) if a > 0 and b > 0 else None

    if config.verify_profile == 'degenerate':
        system = config.system()
        _, report = find_degenerate(config, system)
        if report is None:
            raise ConvergenceError('no degenerate point to verify')
        phi, lam = report.phi_star, report.lambda_star
    else:
        phi, lam = np.zeros(config.N + 1), model.lambda_k(config.k, params)
    pde = geometry.lifted_residual(phi, lam, params, config.sample_count, h, config.seed)
    pde_half = geometry.lifted_residual(phi, lam, params, config.sample_count, half, config.seed)
    out = {'n': params.n, 'delta': params.delta, 'q': params.q, 'h': h, 'sample_count': config.sample_count,
           'seed': config.seed, 'profile': config.verify_profile, 'lambda': lam,
           'laplacian_residual': iso['laplacian'], 'gradient_residual': iso['gradient'],
           'laplacian_residual_half': iso_half['laplacian'], 'gradient_residual_half': iso_half['gradient'],
           'laplacian_order': order(iso['laplacian'], iso_half['laplacian']),
           'gradient_order': order(iso['gradient'], iso_half['gradient']),
           'pde_residual': pde, 'pde_residual_half': pde_half, 'pde_order': order(pde, pde_half)}
    with open(config.path('verify.json'), 'w') as f:
        json.dump(out, f, indent=2)
    l.info('Wrote verify.json: identity residuals %.3e / %.3e, PDE residual %.3e', iso['laplacian'],
           iso['gradient'], pde)


HANDLERS = {
    'eigen': command_eigen,
    'poly': command_poly,
    'branch': command_branch,
    'degenerate': command_degenerate,
    'verify': command_verify,
}


def dispatch(command: str, config: RunConfig) -> int:
    if command not in HANDLERS:
        l.error('Unknown command %s', command)
        return EXIT_CONFIG
    os.makedirs(config.output_dir, exist_ok=True)
    try:
        HANDLERS[command](config)
    except ParameterError as e:
        l.error('%s', e)
        return EXIT_CONFIG
    except (ConvergenceError, NumericError) as e:
        l.error('%s failed: %s', command, e)
        return EXIT_CONVERGENCE
    except ToolkitError as e:
        l.critical('%s stopped: %s', command, e)
        return EXIT_CONVERGENCE
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description='Bifurcating and degenerate solutions of Yamabe-type equations '
                                                 'on S^n x S^n.')
    parser.add_argument('command', help='one of ' + ', '.join(COMMANDS))
    parser.add_argument('--config', help='INI file with a [run] section or bare key=value lines')
    parser.add_argument('--log-level', default='INFO', help='one of ' + ', '.join(LOG_LEVELS))
    parser.add_argument('overrides', nargs='*', metavar='key=value')
    args = parser.parse_args(argv)
    level = args.log_level.upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format='%(asctime)s %(levelname)s %(threadName)s %(name)s: %(message)s')
    if level not in LOG_LEVELS:
        l.error('Unknown log level %s', args.log_level)
        return EXIT_CONFIG
    try:
        config = parse_config(args.config, args.overrides)
    except ParameterError as e:
        l.error('%s', e)
        return EXIT_CONFIG
    return dispatch(args.command, config)


if __name__ == '__main__':
    sys.exit(main())
