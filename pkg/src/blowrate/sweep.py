"""
Parameter sweeps: one full run + fit per grid cell, cells spread over a
process pool, results reduced into phase.csv
"""
import hashlib
import itertools
import json
from copy import deepcopy
from multiprocessing import Pool
from pathlib import Path

import numpy as np
import pandas as pd

from .analysis import estimate_blowup_time, fit_rate
from .constants import LOG, DEFAULTS
from .exceptions import BlowrateError, ConfigError
from .fileio import (build_config, make_grid, emit_series_csv,
                     write_manifest, FLOAT_FORMAT)
from .model import check_theorem_hypotheses
from .solver import run_to_blowup

PHASE_FILE = 'phase.csv'


def parse_vary(spec):
    """
    'p1=1.5:3.0:0.5' -> ('model', 'p1', [1.5, 2.0, 2.5, 3.0])

    >>> parse_vary('model.q1=1.1:1.3:0.1')
    ('model', 'q1', [1.1, 1.2, 1.3])
    """
    try:
        name, rng = spec.split('=')
        lo, hi, step = (float(x) for x in rng.split(':'))
    except ValueError:
        raise ConfigError(f'--vary wants key=lo:hi:step, got {spec!r}')

    section, key = _find_key(name.strip())
    if step <= 0 or hi < lo:
        raise ConfigError(f'empty range in --vary {spec!r}')

    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    values = [round(lo + i * step, 12) for i in range(count)]
    return section, key, values


def _find_key(name):
    if '.' in name:
        section, key = name.split('.', 1)
        if key not in DEFAULTS.get(section, {}):
            raise ConfigError(f'unknown config key {name!r}')
        return section, key
    hits = [sec for sec, keys in DEFAULTS.items() if name in keys]
    if len(hits) != 1:
        raise ConfigError(f'unknown or ambiguous config key {name!r}')
    return hits[0], name


def make_cells(resolved, axes):
    """
    One resolved config per point of the product of the axes
    """
    cells = []
    for values in itertools.product(*(axis[2] for axis in axes)):
        cfg = deepcopy(resolved)
        for (section, key, _), value in zip(axes, values):
            cfg[section][key] = int(value) if isinstance(
                DEFAULTS[section][key], int) and not isinstance(
                DEFAULTS[section][key], bool) else value
        cells.append(cfg)
    return cells


def make_outdir(base, cfg):
    """
    Unique directory name for a given config
    """
    h = hashlib.sha1(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:10]
    return Path(base) / h


def worker(job):
    """
    Top-level (picklable) worker: run and fit one cell.
    Never raises; faults are written into the row
    """
    index, resolved, base, axes = job
    row = {'cell': index}
    for section, key, _ in axes:
        row[f'{section}.{key}'] = resolved[section][key]

    try:
        params, cfg, fit_cfg = build_config(resolved)
        report = check_theorem_hypotheses(params)
        exps = report.exponents
        row.update({'cond_fujita': report.cond_fujita,
                    'cond_q': report.cond_q,
                    'alpha_pred': exps.alpha, 'beta_pred': exps.beta})

        outdir = make_outdir(base, resolved)
        outdir.mkdir(parents=True, exist_ok=True)
        result = run_to_blowup(params, exps, make_grid(resolved), cfg)
        emit_series_csv(result.series, outdir / 'series.csv')
        row['stop_reason'] = result.stop_reason

        est = estimate_blowup_time(result.series, exps.alpha)
        row['T_est'] = est.T_est
        for channel, pred, label in [('M_u', exps.alpha, 'alpha'),
                                     ('M_v', exps.beta, 'beta')]:
            fit = fit_rate(result.series, est, channel, exps, fit_cfg.window)
            row[f'{label}_meas'] = fit.exponent
            row[f'{label}_rel_error'] = fit.rel_error(pred)

        write_manifest(outdir, resolved, exps, report, result.stop_reason,
                       est.T_est, wall_seconds=result.wall_seconds)
        row['error'] = ''

    except (BlowrateError, FloatingPointError) as err:
        LOG.error(f'sweep cell {index} failed: {err}')
        row['error'] = f'{type(err).__name__}: {err}'

    return row


def run_sweep(resolved, axes, outdir, jobs=1):
    if not 1 <= len(axes) <= 2:
        raise ConfigError('sweep takes one or two --vary axes')

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cells = make_cells(resolved, axes)
    work = [(i, cell, str(outdir / 'cells'), axes) for i, cell in enumerate(cells)]
    LOG.info(f'sweep of {len(work)} cells on {jobs} workers')

    if jobs > 1:
        with Pool(jobs) as P:
            rows = P.map(worker, work)
    else:
        rows = [worker(job) for job in work]

    columns = (['cell'] + [f'{s}.{k}' for s, k, _ in axes]
               + ['cond_fujita', 'cond_q', 'stop_reason', 'T_est',
                  'alpha_pred', 'alpha_meas', 'alpha_rel_error',
                  'beta_pred', 'beta_meas', 'beta_rel_error', 'error'])
    df = pd.DataFrame(rows, columns=columns).sort_values('cell')
    df.to_csv(outdir / PHASE_FILE, index=False, float_format=FLOAT_FORMAT)
    return df
