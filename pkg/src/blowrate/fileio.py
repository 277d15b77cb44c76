"""
Config parsing, run directories (csv + json manifest) and svg charts.

Config is TOML, strict: unknown sections and keys are errors. The
resolved config (defaults filled in) is what manifests echo, and
parse_config_dict(echo) replays the run.
"""
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from copy import deepcopy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .constants import (DEFAULTS, DEFAULT_WIDTH_FRACTION, SERIES_COLUMNS,
                        FIT_COLUMNS, DOUBLING_COLUMNS, VERSION)
from .exceptions import ConfigError, ParamError
from .grid import FieldState, RadialGrid
from .model import Domain, InitSpec, SystemParams
from .solver import SolverConfig, SupNormSeries

FLOAT_FORMAT = '%.17g'

INT_KEYS = {('model', 'n'), ('grid', 'nodes'), ('time', 'record_every')}
BOOL_KEYS = {('model', 'gradient')}
STR_KEYS = {('domain', 'kind'), ('domain', 'boundary'), ('init', 'kind')}

SERIES_FILE = 'series.csv'
FIT_FILE = 'fit.csv'
DOUBLING_FILE = 'doubling.csv'
SNAPSHOT_FILE = 'snapshots.csv'
MANIFEST_FILE = 'manifest.json'


@dataclass(frozen=True)
class FitConfig:
    window_lo: float = 1e-3
    window_hi: float = 1e-1

    def __post_init__(self):
        if not 0 < self.window_lo < self.window_hi < 1:
            raise ParamError('fit window needs 0 < window_lo < window_hi < 1')

    @property
    def window(self):
        return self.window_lo, self.window_hi


def _coerce(section, key, value):
    if (section, key) in BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f'[{section}] {key} must be true or false')
        return value
    if (section, key) in STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f'[{section}] {key} must be a string')
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f'[{section}] {key} must be a number, got {value!r}')
    if (section, key) in INT_KEYS:
        if int(value) != value:
            raise ConfigError(f'[{section}] {key} must be an integer')
        return int(value)
    return float(value)


def resolve_config(mapping):
    """
    Merge a raw mapping over DEFAULTS, rejecting unknown names.
    Returns the resolved nested dict
    """
    out = deepcopy(DEFAULTS)

    for section, values in mapping.items():
        if section not in DEFAULTS:
            raise ConfigError(f'unknown section [{section}]')
        if not isinstance(values, dict):
            raise ConfigError(f'[{section}] must be a table')
        for key, value in values.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f'unknown key {key!r} in [{section}]')
            out[section][key] = _coerce(section, key, value)

    missing = [k for k, v in out['model'].items() if v is None]
    if missing:
        raise ConfigError(f'[model] needs {", ".join(missing)}')

    if out['grid']['nodes'] < 3:
        raise ConfigError('[grid] nodes must be >= 3 (N >= 3)')

    if out['init']['width'] is None:
        out['init']['width'] = DEFAULT_WIDTH_FRACTION * out['domain']['radius']

    return out


def build_config(resolved):
    """
    Resolved dict -> (SystemParams, SolverConfig, FitConfig)
    """
    model = resolved['model']
    params = SystemParams(
        p1=model['p1'], p2=model['p2'], q1=model['q1'], q2=model['q2'],
        n=model['n'],
        gradient=model['gradient'],
        domain=Domain(**resolved['domain']),
        init=InitSpec(**resolved['init']),
    )
    return params, SolverConfig(**resolved['time']), FitConfig(**resolved['fit'])


def parse_config_dict(mapping):
    return build_config(resolve_config(mapping))


def parse_config(text):
    try:
        mapping = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f'cannot parse config: {err}') from err
    return parse_config_dict(mapping)


def load_config(path):
    """
    Read a config file, returning (resolved dict, params, solver cfg,
    fit cfg)
    """
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f'cannot read config {path}: {err}') from err
    try:
        mapping = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f'cannot parse config: {err}') from err
    resolved = resolve_config(mapping)
    return (resolved, *build_config(resolved))


def make_grid(resolved):
    return RadialGrid(nodes=resolved['grid']['nodes'],
                      radius=resolved['domain']['radius'])


# csv

def emit_series_csv(series, path):
    series.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def load_series_csv(path):
    df = pd.read_csv(path, float_precision='round_trip')
    if list(df.columns) != SERIES_COLUMNS:
        raise ConfigError(f'{path}: unexpected columns {list(df.columns)}')
    return SupNormSeries.from_frame(df)


def fit_rows(fits, predicted):
    """
    predicted: dict channel -> predicted exponent
    """
    rows = []
    for fit in fits:
        pred = predicted.get(fit.channel, np.nan)
        rows.append({
            'channel': fit.channel,
            'T_est': fit.T_est,
            'exponent': fit.exponent,
            'predicted_exponent': pred,
            'rel_error': fit.rel_error(pred) if np.isfinite(pred) else np.nan,
            'amplitude': fit.amplitude,
            'rms_residual': fit.rms_residual,
            'window_lo': fit.window[0],
            'window_hi': fit.window[1],
            'points_used': fit.points_used,
        })
    return rows


def emit_fit_csv(rows, path):
    pd.DataFrame(rows, columns=FIT_COLUMNS).to_csv(
        path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def emit_doubling_csv(report, path):
    df = pd.DataFrame({
        'j': np.arange(len(report.D_j)),
        't_j': report.t_j[:-1],
        'D_j': report.D_j,
        # ratio_j is one shorter
        'ratio_j': np.append(report.ratio_j, np.nan),
    }, columns=DOUBLING_COLUMNS)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def emit_snapshots_csv(snapshots, grid, path):
    """
    Long format: one row per (snapshot, node)
    """
    frames = [pd.DataFrame({'step': snap.step, 't': snap.t, 'r': grid.r,
                            'u': snap.u, 'v': snap.v})
              for snap in snapshots]
    df = (pd.concat(frames, ignore_index=True) if frames else
          pd.DataFrame(columns=['step', 't', 'r', 'u', 'v']))
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def load_snapshots_csv(path):
    df = pd.read_csv(path, float_precision='round_trip')
    return [FieldState(t=float(g['t'].iloc[0]), u=g['u'].to_numpy(),
                       v=g['v'].to_numpy(), step=int(step))
            for step, g in df.groupby('step', sort=True)]


# manifest

def write_manifest(outdir, resolved, exps, report, stop_reason=None,
                   T_est=None, fits=(), wall_seconds=None, extra=None):
    out = {
        'tool_version': VERSION,
        'config_echo': resolved,
        'exponents': exps.to_dict(),
        'hypothesis_report': report.to_dict(),
        'stop_reason': stop_reason,
        'T_est': T_est,
        'fits': fits,
        'wall_seconds': wall_seconds,
    }
    if extra:
        out.update(extra)
    path = Path(outdir) / MANIFEST_FILE
    with open(path, 'w') as fp:
        json.dump(out, fp, indent=4, default=_jsonable)
    return path


def read_manifest(outdir):
    path = Path(outdir) / MANIFEST_FILE
    with open(path) as fp:
        return json.load(fp)


def update_manifest(outdir, **fields):
    manifest = read_manifest(outdir)
    manifest.update(fields)
    with open(Path(outdir) / MANIFEST_FILE, 'w') as fp:
        json.dump(manifest, fp, indent=4, default=_jsonable)
    return manifest


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f'cannot serialise {type(obj).__name__}')


# svg

def emit_svg(x, y, path, fit=None, title='', xlabel='T - t', ylabel=''):
    """
    Log-log polyline of y against x, with the fitted power law
    fit = (amplitude, exponent) overlaid as amplitude * x^-exponent
    """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(x[keep], y[keep], '-', lw=1.2, label='data')
    if fit is not None and keep.any():
        amplitude, exponent = fit
        xs = np.geomspace(x[keep].min(), x[keep].max(), 50)
        ax.loglog(xs, amplitude * xs ** -exponent, '--', lw=1,
                  label=f'fit, exponent {exponent:.3f}')
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which='both', alpha=0.3)
    fig.savefig(path, format='svg')
    plt.close(fig)
    return Path(path)
