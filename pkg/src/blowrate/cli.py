"""
Command line front end: blowrate <command> [options]

    check             exponents and rate-estimate hypotheses
    run               integrate into blow-up, write series/snapshots/manifest
    fit               blow-up time and rate exponents of a prior run
    doubling          doubling times and the D_j sequence of a prior run
    ratio             the M_u / M_v balance of a prior run
    rescale-verify    rescaled frames at three doubling levels
    oracle-ode        spatially homogeneous run against the ODE blow-up time
    oracle-transform  q = 2 scalar run against its linearising transform
    blowup-set        half-max width of the late profiles of a prior run
    sweep             run + fit over a grid of one or two config keys

Exit codes: 0 pass, 1 usage or parse error, 2 hypotheses fail (check),
3 verdict fail
"""
import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import analysis, sweep
from .constants import (LOG, DATA_DIR, EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESES,
                        EXIT_VERDICT)
from .exceptions import AnalysisError, BlowrateError, IntegrationFault, ParamError
from .fileio import (load_config, build_config, resolve_config, make_grid,
                     emit_series_csv, load_series_csv, emit_fit_csv, fit_rows,
                     emit_doubling_csv, emit_snapshots_csv, load_snapshots_csv,
                     write_manifest, read_manifest, update_manifest, emit_svg,
                     _jsonable, FLOAT_FORMAT, SERIES_FILE, FIT_FILE,
                     DOUBLING_FILE, SNAPSHOT_FILE, MANIFEST_FILE)
from .logs import add_console
from .model import (check_theorem_hypotheses, check_scalar_hypotheses,
                    compute_exponents, initial_profiles,
                    predicted_blowup_set)
from .report import hypotheses_str, scalar_str, print_verdict, print_error
from .solver import (run_to_blowup, run_scalar, transform_oracle,
                     compare_transform)

RATIO_FILE = 'ratio.csv'
RESCALE_FILE = 'rescale.csv'
WIDTH_FILE = 'width.csv'
PHASE_FILE = sweep.PHASE_FILE

# homogeneous ODE oracle: a handful of nodes, far away boundary
ODE_NODES = 5
ODE_RADIUS = 10.0
ODE_REACTION_CAP = 2e-4

RESCALE_LEVELS = 3


class UsageError(BlowrateError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print_error(message)
        sys.exit(EXIT_USAGE)


def make_parser():
    parser = _Parser(prog='blowrate',
                     description='Blow-up rate laboratory for the coupled '
                                 'parabolic system with gradient terms')
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name, help, config=True, out=True, config_required=False):
        p = sub.add_parser(name, help=help)
        if config:
            p.add_argument('--config', type=Path, required=config_required,
                           help='TOML config file')
        if out:
            p.add_argument('--out', type=Path,
                           help='run directory (default: under ~/.blowrate/data)')
        p.add_argument('--json', action='store_true',
                       help='machine readable summary on stdout')
        p.add_argument('-v', '--verbose', action='store_true',
                       help='echo the log to stderr')
        return p

    add('check', 'exponents and hypotheses', out=False, config_required=True)

    p = add('run', 'integrate into blow-up', config_required=True)
    p.add_argument('--no-gradient', action='store_true',
                   help='drop the |grad|^q terms (semilinear comparison run)')
    p.add_argument('--svg', action='store_true', help='also write M_u.svg')

    p = add('fit', 'rate exponents of a prior run')
    p.add_argument('--svg', action='store_true', help='also write fit.svg')
    add('doubling', 'doubling times of a prior run')
    add('ratio', 'M_u / M_v balance of a prior run')

    p = add('rescale-verify', 'rescaled frames of a prior run')
    p.add_argument('--component', choices=['u', 'v'], default='u')
    p.add_argument('--levels', type=int, default=RESCALE_LEVELS)

    add('oracle-ode', 'homogeneous data against the ODE', config_required=True)

    p = add('oracle-transform', 'q = 2 scalar run against its transform',
            config_required=True)
    p.add_argument('--u-cap', type=float, default=6.0,
                   help='compare while max u stays below this')

    p = add('blowup-set', 'half-max width of a prior run')
    p.add_argument('--theta', type=float, default=0.5)

    p = add('sweep', 'run + fit over a parameter grid', config_required=True)
    p.add_argument('--vary', action='append', required=True,
                   metavar='KEY=LO:HI:STEP')
    p.add_argument('--jobs', type=int, default=1)

    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    if args.verbose:
        add_console(LOG)

    command = COMMANDS[args.command]
    try:
        return command(args)
    except (FileNotFoundError, UsageError) as err:
        print_error(str(err))
        return EXIT_USAGE
    except ParamError as err:
        print_error(str(err))
        return EXIT_USAGE
    except (AnalysisError, IntegrationFault) as err:
        LOG.error(f'{args.command}: {err}')
        _finish(args, f'{type(err).__name__}: {err}', False, {})
        return EXIT_VERDICT


def _finish(args, message, passed, data, suffix=''):
    """
    Print the summary line (or json) and return the exit code
    """
    if args.json:
        out = {'command': args.command, 'passed': passed, 'message': message}
        out.update(data)
        print(json.dumps(out, indent=4, default=_jsonable))
    else:
        print_verdict(args.command, message, passed, suffix)
    return EXIT_VERDICT if passed is False else EXIT_OK


def _outdir(args, resolved):
    out = args.out or sweep.make_outdir(DATA_DIR / 'runs', resolved)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _prior_run(args):
    """
    (outdir, resolved, params, solver cfg, fit cfg, manifest) of the run in
    --out. The manifest's config echo is replayed unless --config is given
    """
    if args.out is None:
        raise UsageError(f'{args.command} needs --out pointing at a prior run')
    outdir = Path(args.out)
    if not (outdir / MANIFEST_FILE).exists():
        raise FileNotFoundError(f'no prior run in {outdir} (missing '
                                f'{MANIFEST_FILE})')
    manifest = read_manifest(outdir)
    if args.config is not None:
        resolved, params, cfg, fit_cfg = load_config(args.config)
    else:
        resolved = resolve_config(manifest['config_echo'])
        params, cfg, fit_cfg = build_config(resolved)
    return outdir, resolved, params, cfg, fit_cfg, manifest


def _merge_constants(outdir, manifest, **values):
    constants = dict(manifest.get('empirical_constants') or {})
    constants.update(values)
    update_manifest(outdir, empirical_constants=constants)


# commands

def cmd_check(args):
    resolved, params, _, _ = load_config(args.config)
    report = check_theorem_hypotheses(params)
    # symmetric parameters and equal data reduce to the scalar equation
    scalar = (check_scalar_hypotheses(params.p1, params.q1, params.n)
              if params.symmetric else None)

    if args.json:
        out = {**report.to_dict(), 'exponents': report.exponents.to_dict()}
        if scalar is not None:
            out['scalar'] = scalar.to_dict()
        print(json.dumps(out, indent=4, default=_jsonable))
    else:
        print(hypotheses_str(params, report))
        if scalar is not None:
            print(scalar_str(params.p1, params.q1, scalar))

    return EXIT_OK if report.holds else EXIT_HYPOTHESES


def cmd_run(args):
    resolved, params, cfg, _ = load_config(args.config)
    if args.no_gradient:
        resolved['model']['gradient'] = False
        params = replace(params, gradient=False)

    report = check_theorem_hypotheses(params)
    exps = report.exponents
    grid = make_grid(resolved)
    outdir = _outdir(args, resolved)

    result = run_to_blowup(params, exps, grid, cfg)

    emit_series_csv(result.series, outdir / SERIES_FILE)
    emit_snapshots_csv(result.snapshots, grid, outdir / SNAPSHOT_FILE)
    write_manifest(outdir, resolved, exps, report, result.stop_reason,
                   wall_seconds=result.wall_seconds,
                   extra={'steps_taken': result.steps_taken,
                          'doubling_times': list(result.doubling_times)})
    if args.svg:
        emit_svg(result.series.t, result.series.M_u, outdir / 'M_u.svg',
                 title='M_u', xlabel='t', ylabel='M_u')

    message = (f'{result.stop_reason} after {result.steps_taken} steps, '
               f't={result.series.t[-1]:.9e}, M_u={result.series.M_u[-1]:.4e}, '
               f'{len(result.doubling_times)} doublings -> {outdir}')
    # a run that never got near blow-up has nothing to analyse
    passed = None if result.stop_reason == 'threshold' else False
    return _finish(args, message, passed,
                   {'outdir': str(outdir), 'stop_reason': result.stop_reason,
                    'steps_taken': result.steps_taken})


def cmd_fit(args):
    outdir, resolved, params, _, fit_cfg, manifest = _prior_run(args)
    verdict = resolved['verdict']
    exps = compute_exponents(params)
    series = load_series_csv(outdir / SERIES_FILE)

    T = analysis.estimate_blowup_time(series, exps.alpha)
    fits = [analysis.fit_rate(series, T, channel, exps, fit_cfg.window)
            for channel in ['M_u', 'M_v', 'max_u', 'max_v']]
    predicted = {fit.channel: analysis.predicted_exponent(fit.channel, exps)
                 for fit in fits}
    rows = fit_rows(fits, predicted)
    emit_fit_csv(rows, outdir / FIT_FILE)

    bounds = {channel: analysis.gradient_product_bound(
                  series, T, exps, channel, fit_cfg.window,
                  verdict['gradient_factor'])
              for channel in ['u', 'v']}

    update_manifest(outdir, T_est=T.T_est, fits=rows,
                    gradient_bounds={c: b._asdict() for c, b in bounds.items()})
    _merge_constants(outdir, manifest,
                     **analysis.empirical_constants(exps, fits=fits))

    if args.svg:
        fit = fits[0]
        emit_svg(T.T_est - series.t, series.M_u, outdir / 'fit.svg',
                 fit=(fit.amplitude, fit.exponent), title='M_u',
                 ylabel='M_u')

    err_u = fits[0].rel_error(exps.alpha)
    err_v = fits[1].rel_error(exps.beta)
    tol = verdict['exponent_tol']
    passed = (err_u <= tol and err_v <= tol
              and all(b.passed for b in bounds.values()))
    message = (f'T_est {T.T_est:.6g}, exponent {fits[0].exponent:.3f} vs '
               f'alpha {exps.alpha:.3f}, rel err {err_u:.1%}; exponent '
               f'{fits[1].exponent:.3f} vs beta {exps.beta:.3f}, rel err '
               f'{err_v:.1%}; gradient products within '
               f'{max(b.ratio for b in bounds.values()):.2f}x')
    return _finish(args, message, passed,
                   {'T_est': T.T_est, 'fits': rows,
                    'gradient_bounds': {c: b._asdict()
                                        for c, b in bounds.items()}},
                   suffix=f'@{tol:.0%}')


def cmd_doubling(args):
    outdir, resolved, params, _, _, manifest = _prior_run(args)
    verdict = resolved['verdict']
    exps = compute_exponents(params)
    series = load_series_csv(outdir / SERIES_FILE)

    report = analysis.doubling_analysis(series, exps.alpha)
    emit_doubling_csv(report, outdir / DOUBLING_FILE)
    _merge_constants(outdir, manifest,
                     **analysis.empirical_constants(exps, doubling=report))

    expected = 2 ** (-1 / exps.alpha)
    tail = report.tail_ratio()
    rel = abs(tail - expected) / expected
    passed = not report.diverging() and rel <= verdict['doubling_tol']
    message = (f'{len(report.D_j)} doublings, sup D_j {report.sup_D:.4g}, '
               f'tail ratio {tail:.4f} vs 2^(-1/alpha) {expected:.4f} '
               f'({rel:.1%})')
    return _finish(args, message, passed,
                   {'sup_D': report.sup_D, 'tail_ratio': tail,
                    'expected_ratio': expected,
                    'diverging': report.diverging()},
                   suffix=f'@{verdict["doubling_tol"]:.0%}')


def cmd_ratio(args):
    outdir, resolved, params, _, _, manifest = _prior_run(args)
    verdict = resolved['verdict']
    exps = compute_exponents(params)
    series = load_series_csv(outdir / SERIES_FILE)

    T_est = manifest.get('T_est')
    trace = analysis.ratio_trace(series, exps.alpha, exps.beta, T_est)
    pd.DataFrame({'t': trace.t, 'phi': trace.phi}).to_csv(
        outdir / RATIO_FILE, index=False, float_format=FLOAT_FORMAT)
    _merge_constants(outdir, manifest,
                     **analysis.empirical_constants(exps, ratio=trace))

    spread = trace.phi_max / trace.phi_min
    passed = spread <= verdict['ratio_max']
    message = f'Phi in [{trace.phi_min:.6g},{trace.phi_max:.6g}]'
    return _finish(args, message, passed,
                   {'phi_min': trace.phi_min, 'phi_max': trace.phi_max},
                   suffix=f'@{verdict["ratio_max"]:g}x')


def cmd_rescale_verify(args):
    outdir, resolved, params, _, _, manifest = _prior_run(args)
    verdict = resolved['verdict']
    exps = compute_exponents(params)
    grid = make_grid(resolved)
    series = load_series_csv(outdir / SERIES_FILE)
    snapshots = load_snapshots_csv(outdir / SNAPSHOT_FILE)

    doubling_times = manifest.get('doubling_times') or []
    theta = exps.theta1 if args.component == 'u' else exps.theta2

    frames = []
    # latest doublings first: the earliest ones tend to leave the domain
    for t0 in reversed(doubling_times):
        if len(frames) == args.levels:
            break
        try:
            frame = analysis.build_rescaled_frame(
                snapshots, series, t0, exps, grid, args.component,
                relaxed_center=verdict['rescale_center'])
            residual = analysis.rescaled_residual(frame, params)
            involution = analysis.involution_error(frame, snapshots, grid)
        except AnalysisError as err:
            LOG.info(f'no frame at t0={t0:.9e}: {err}')
            continue
        frames.append((frame, residual, involution))

    if len(frames) < args.levels:
        raise analysis.InsufficientData(
            f'{len(frames)} usable frames, need {args.levels}')
    frames.reverse()

    rows = []
    for frame, (res1, res2), involution in frames:
        share1, share2 = analysis.gradient_share(frame, params)
        rows.append({'t_star': frame.t_star, 'gamma': frame.gamma,
                     'center': frame.center, 'sup': frame.sup(theta),
                     'residual_u': res1, 'residual_v': res2,
                     'involution': involution,
                     'gradient_share_u': share1, 'gradient_share_v': share2,
                     'levels': len(frame.s)})
    df = pd.DataFrame(rows)
    df.to_csv(outdir / RESCALE_FILE, index=False, float_format=FLOAT_FORMAT)

    mu = exps.mu1 if args.component == 'u' else exps.mu2
    share = df[f'gradient_share_{args.component}'].to_numpy()
    checks = [
        (df['sup'] <= verdict['rescale_sup']).all(),
        (df['center'] >= verdict['rescale_center']).all(),
        (np.maximum(df['residual_u'], df['residual_v'])
         <= verdict['rescale_residual'] * np.maximum(df['sup'], 1.0)).all(),
        (df['involution'] <= verdict['involution_tol']).all(),
    ]
    if mu > 0:
        checks.append(bool(np.all(np.diff(share) <= 0)))

    message = (f'{len(df)} frames, sup <= {df["sup"].max():.4f}, centre >= '
               f'{df["center"].min():.3f}, residual <= '
               f'{max(df["residual_u"].max(), df["residual_v"].max()):.2e}, '
               f'round trip {df["involution"].max():.1e}, '
               f'gradient share {" > ".join(f"{s:.3g}" for s in share)}')
    return _finish(args, message, bool(all(checks)), {'frames': rows})


def cmd_oracle_ode(args):
    resolved, params, cfg, fit_cfg = load_config(args.config)
    verdict = resolved['verdict']

    resolved['domain'].update(kind='truncated-space', boundary='neumann',
                              radius=ODE_RADIUS)
    resolved['grid']['nodes'] = ODE_NODES
    resolved['init']['kind'] = 'constant'
    if cfg.reaction_cap > ODE_REACTION_CAP:
        LOG.warning(f'oracle-ode: reaction_cap {cfg.reaction_cap:g} lowered '
                    f'to {ODE_REACTION_CAP:g} (Euler overshoots T by about '
                    'the cap)')
        resolved['time']['reaction_cap'] = ODE_REACTION_CAP
    params, cfg, fit_cfg = build_config(resolved)

    report = check_theorem_hypotheses(params)
    exps = report.exponents
    outdir = _outdir(args, resolved)
    result = run_to_blowup(params, exps, make_grid(resolved), cfg)
    emit_series_csv(result.series, outdir / SERIES_FILE)

    T = analysis.estimate_blowup_time(result.series, exps.alpha)
    fit = analysis.fit_rate(result.series, T, 'max_u', exps, fit_cfg.window)
    err = fit.rel_error(exps.alpha)

    checks = [err <= verdict['ode_exponent_tol']]
    a_u, a_v = params.init.amplitude_u, params.init.amplitude_v
    T_exact = None
    if params.p1 == params.p2 and a_u == a_v:
        # u = v solves u' = u^p
        p = params.p1
        T_exact = a_u ** (1 - p) / (p - 1)
        checks.append(abs(T.T_est - T_exact) <= verdict['ode_tol'] * T_exact)

    write_manifest(outdir, resolved, exps, report, result.stop_reason,
                   T.T_est, fit_rows([fit], {'max_u': exps.alpha}),
                   result.wall_seconds, extra={'T_exact': T_exact})

    message = f'T_est {T.T_est:.6f}'
    if T_exact is not None:
        message += f' vs {T_exact:.6f} +- {verdict["ode_tol"] * T_exact:.0e}'
    message += f', exponent {fit.exponent:.4f} vs alpha {exps.alpha:.4f}'
    return _finish(args, message, bool(all(checks)),
                   {'T_est': T.T_est, 'T_exact': T_exact,
                    'exponent': fit.exponent})


def cmd_oracle_transform(args):
    resolved, params, cfg, _ = load_config(args.config)
    verdict = resolved['verdict']
    if not (params.q1 == params.q2 == 2 and params.symmetric):
        raise UsageError('oracle-transform needs q1 = q2 = 2 and p1 = p2')

    # compare up to u_cap, stop soon after
    cfg = replace(cfg, m_stop=2 * args.u_cap)
    resolved['time']['m_stop'] = cfg.m_stop
    grid = make_grid(resolved)
    u0, _ = initial_profiles(params, grid.r)
    p, n, domain = params.p1, params.n, params.domain

    direct = run_scalar(p, 2.0, grid, cfg, u0, n, domain)
    transformed = transform_oracle(p, grid, cfg, u0, n, domain)
    diff = compare_transform(direct, transformed, args.u_cap)

    outdir = _outdir(args, resolved)
    emit_series_csv(direct.series, outdir / SERIES_FILE)
    emit_series_csv(transformed.series, outdir / 'series_transformed.csv')
    report = check_theorem_hypotheses(params)
    write_manifest(outdir, resolved, report.exponents, report,
                   direct.stop_reason, wall_seconds=direct.wall_seconds
                   + transformed.wall_seconds,
                   extra={'transform_difference': diff, 'u_cap': args.u_cap})

    tol = verdict['transform_tol']
    message = (f'sup |u - log(1+w)| {diff:.3e} while max u <= {args.u_cap:g} '
               f'on {grid.nodes} nodes')
    return _finish(args, message, diff <= tol, {'difference': diff},
                   suffix=f'@{tol:g}')


def cmd_blowup_set(args):
    outdir, resolved, params, _, _, manifest = _prior_run(args)
    grid = make_grid(resolved)
    snapshots = load_snapshots_csv(outdir / SNAPSHOT_FILE)

    trace = analysis.blowup_set_width(snapshots, grid, args.theta)
    pd.DataFrame({'t': trace.t, 'width': trace.width, 'max_u': trace.max_u}
                 ).to_csv(outdir / WIDTH_FILE, index=False,
                          float_format=FLOAT_FORMAT)

    predicted = None
    if params.symmetric and params.q1 == 2:
        predicted = predicted_blowup_set(params.p1, params.domain)
    update_manifest(outdir, blowup_set={'classification': trace.classification,
                                        'predicted': predicted})

    message = (f'width {trace.width[0]:.4g} -> {trace.width[-1]:.4g} '
               f'(R={grid.radius:g}): {trace.classification}')
    passed = None
    if predicted not in (None, 'undetermined'):
        message += f', predicted {predicted}'
        passed = trace.classification == predicted
    return _finish(args, message, passed,
                   {'classification': trace.classification,
                    'predicted': predicted,
                    'final_width': float(trace.width[-1])})


def cmd_sweep(args):
    resolved, *_ = load_config(args.config)
    axes = [sweep.parse_vary(spec) for spec in args.vary]
    if args.jobs < 1:
        raise UsageError('--jobs must be >= 1')

    outdir = _outdir(args, resolved)
    df = sweep.run_sweep(resolved, axes, outdir, args.jobs)

    failed = int((df['error'] != '').sum())
    message = (f'{len(df)} cells, {failed} failed -> '
               f'{outdir / PHASE_FILE}')
    return _finish(args, message, None,
                   {'cells': len(df), 'failed': failed,
                    'phase': str(outdir / PHASE_FILE)})


COMMANDS = {
    'check': cmd_check,
    'run': cmd_run,
    'fit': cmd_fit,
    'doubling': cmd_doubling,
    'ratio': cmd_ratio,
    'rescale-verify': cmd_rescale_verify,
    'oracle-ode': cmd_oracle_ode,
    'oracle-transform': cmd_oracle_transform,
    'blowup-set': cmd_blowup_set,
    'sweep': cmd_sweep,
}
