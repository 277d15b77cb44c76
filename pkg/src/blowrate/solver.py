"""
Explicit time integration into blow-up.

Forward Euler with two step limits: the diffusive one, safety*h^2/(2n), and
a reaction one that keeps the relative growth of max u + max v per step
below reaction_cap. A step whose sup-functional still grows faster than
reaction_cap is retried with half the step.
"""
import time
from collections import deque
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .constants import (LOG, CLAMP_TOL, TRUNCATION_INIT_TOL,
                        TRUNCATION_RUN_TOL, TRANSFORM_OVERFLOW, SERIES_COLUMNS)
from .exceptions import IntegrationFault, InsufficientData, ParamError
from .grid import (FieldState, radial_laplacian, gradient_magnitude,
                   upwind_gradient, sup_functional)
from .model import Domain, SystemParams, compute_exponents, initial_profiles

# consecutive steps kept before each doubling snapshot
DOUBLING_HISTORY = 4
MAX_STRIDE_SNAPSHOTS = 2000
MAX_HALVINGS = 40


@dataclass(frozen=True)
class SolverConfig:
    safety: float = 0.4
    reaction_cap: float = 0.05
    m_stop: float = 1e8
    t_max: float = 10.0
    record_every: int = 50
    series_resolution: float = 1e-3

    def __post_init__(self):
        if not 0 < self.safety < 1:
            raise ParamError(f'safety must lie in (0,1), got {self.safety}')
        if not 0 < self.reaction_cap < 1:
            raise ParamError('reaction_cap must lie in (0,1), '
                             f'got {self.reaction_cap}')
        for name in ['m_stop', 't_max', 'series_resolution']:
            if not getattr(self, name) > 0:
                raise ParamError(f'{name} must be > 0')
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ParamError('record_every must be a positive integer')


@dataclass(frozen=True)
class SupNormSeries:
    t: np.ndarray
    M_u: np.ndarray
    M_v: np.ndarray
    max_u: np.ndarray
    max_v: np.ndarray
    max_grad_u: np.ndarray
    max_grad_v: np.ndarray
    argmax_r_u: np.ndarray

    def __len__(self):
        return len(self.t)

    def to_frame(self):
        return pd.DataFrame({col: getattr(self, col) for col in SERIES_COLUMNS},
                            columns=SERIES_COLUMNS)

    @classmethod
    def from_frame(cls, df):
        return cls(**{col: df[col].to_numpy(dtype=float)
                      for col in SERIES_COLUMNS})

    @classmethod
    def from_rows(cls, rows):
        arr = np.asarray(rows, dtype=float).reshape(-1, len(SERIES_COLUMNS))
        return cls(*(arr[:, i].copy() for i in range(len(SERIES_COLUMNS))))


@dataclass(frozen=True)
class RunResult:
    series: SupNormSeries
    snapshots: tuple
    stop_reason: str
    steps_taken: int
    doubling_times: tuple = ()
    wall_seconds: float = 0.0

    def __repr__(self):
        pad = 15
        out = ['stop_reason:'.ljust(pad) + self.stop_reason,
               'steps:'.ljust(pad) + f'{self.steps_taken}',
               'rows:'.ljust(pad) + f'{len(self.series)}',
               'snapshots:'.ljust(pad) + f'{len(self.snapshots)}',
               'doublings:'.ljust(pad) + f'{len(self.doubling_times)}']
        if len(self.series):
            out.append('t_last:'.ljust(pad) + f'{self.series.t[-1]:.9e}')
            out.append('M_u last:'.ljust(pad) + f'{self.series.M_u[-1]:.6e}')
        return '\n'.join(out)


class _Problem:
    """
    Right hand side and sup-functional exponents of one of the integrated
    equations. scalar problems carry a single field, stored as u is v.
    exps is None when the functional is the plain maximum
    """
    def __init__(self, rates, n, exps, boundary, scalar=False):
        self.rates = rates
        self.n = n
        self.exps = exps
        self.boundary = boundary
        self.scalar = scalar


def system_problem(params, exps, grid):
    n = params.n
    p1, p2, q1, q2 = params.p1, params.p2, params.q1, params.q2
    boundary = params.domain.boundary

    def rates(u, v):
        du = radial_laplacian(grid, u, n) + v ** p1
        dv = radial_laplacian(grid, v, n) + u ** p2
        if params.gradient:
            du += upwind_gradient(grid, u, boundary) ** q1
            dv += upwind_gradient(grid, v, boundary) ** q2
        return du, dv

    return _Problem(rates, n, exps, boundary)


def scalar_problem(p, q, n, grid, boundary):
    exps = compute_exponents(SystemParams(p1=p, p2=p, q1=q, q2=q, n=n))

    def rates(u, v):
        du = (radial_laplacian(grid, u, n)
              + upwind_gradient(grid, u, boundary) ** q + u ** p)
        return du, du

    return _Problem(rates, n, exps, boundary, scalar=True)


def transformed_problem(p, n, grid, boundary):
    """
    w = e^u - 1 turns the q = 2 scalar equation into
    w_t = Δw + (1 + w) log^p(1 + w)
    """
    def rates(w, v):
        dw = radial_laplacian(grid, w, n) + (1 + w) * np.log1p(w) ** p
        return dw, dw

    # no gradient part in the functional: M is max w
    return _Problem(rates, n, None, boundary, scalar=True)


def _measure(problem, grid, state):
    """
    Instantaneous sups and the raw maxima of one state
    """
    if problem.exps is None:
        m_u = m_v = float(state.u.max())
    else:
        m_u, m_v = sup_functional(state, grid, problem.exps, problem.boundary)

    grad_u = gradient_magnitude(grid, state.u, problem.boundary)
    if problem.scalar:
        grad_v = grad_u
    else:
        grad_v = gradient_magnitude(grid, state.v, problem.boundary)

    i_max = int(np.argmax(state.u))
    return {
        'm_u': m_u,
        'm_v': m_v,
        'max_u': float(state.u[i_max]),
        'max_v': float(state.v.max()),
        'max_grad_u': float(grad_u.max()),
        'max_grad_v': float(grad_v.max()),
        'argmax_r_u': float(grid.r[i_max]),
    }


def _clamp(f):
    low = f.min()
    if low >= 0:
        return f
    sup = f.max()
    if low < -CLAMP_TOL * sup:
        raise IntegrationFault(f'negative value {low:.3e} against sup '
                               f'{sup:.3e}: scheme or step control fault')
    return np.clip(f, 0.0, None)


def _reaction_dt(state, du, dv, cap):
    size = state.u.max() + state.v.max()
    growth = max(du.max(), 0.0) + max(dv.max(), 0.0)
    if growth <= 0 or size <= 0:
        return np.inf
    return cap * size / growth


def _euler(problem, grid, state, dt, du, dv):
    with np.errstate(over='ignore', invalid='ignore'):
        u = state.u + dt * du
        v = u if problem.scalar else state.v + dt * dv

    if problem.boundary == 'dirichlet':
        u[-1] = 0.0
        v[-1] = 0.0

    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise FloatingPointError(f'non-finite values at t={state.t + dt:.6e}')

    u = _clamp(u)
    v = u if problem.scalar else _clamp(v)

    return FieldState(state.t + dt, u, v, state.step + 1)


def _advance(problem, grid, state, cfg, measured=None):
    """
    One step, returning (new state, dt used, new state measurements)
    """
    if measured is None:
        measured = _measure(problem, grid, state)

    with np.errstate(over='ignore', invalid='ignore'):
        du, dv = problem.rates(state.u, state.v)
    if not (np.isfinite(du).all() and np.isfinite(dv).all()):
        raise FloatingPointError(f'non-finite rates at t={state.t:.6e}')

    dt_diff = cfg.safety * grid.h ** 2 / (2 * problem.n)
    dt = min(dt_diff, _reaction_dt(state, du, dv, cfg.reaction_cap))

    limit = (1 + cfg.reaction_cap) * (1 + 1e-12)
    for _ in range(MAX_HALVINGS):
        new = _euler(problem, grid, state, dt, du, dv)
        new_measured = _measure(problem, grid, new)
        if (new_measured['m_u'] <= limit * measured['m_u']
                and new_measured['m_v'] <= limit * measured['m_v']):
            break
        dt = dt / 2
    else:
        raise IntegrationFault('step control could not keep the sup growth '
                               f'below {cfg.reaction_cap} at t={state.t:.6e}')

    return new, dt, new_measured


def step(state, grid, params, exps, cfg):
    """
    One explicit step of the system. Returns (new state, dt used)
    """
    problem = system_problem(params, exps, grid)
    new, dt, _ = _advance(problem, grid, state, cfg)
    return new, dt


def _integrate(problem, grid, state, cfg, m_stop=None, check_truncation=False):
    """
    March until max(M_u, M_v) >= m_stop, t >= t_max, or a fault.

    Series rows are written whenever a channel has grown by
    series_resolution since the last row, and every record_every steps.
    Snapshots: every record_every steps (thinned when too many) plus, at
    each doubling of M_u, the doubling state and the steps just before it
    """
    started = time.perf_counter()
    m_stop = cfg.m_stop if m_stop is None else m_stop

    measured = _measure(problem, grid, state)
    M_u, M_v = measured['m_u'], measured['m_v']
    if max(M_u, M_v) >= m_stop:
        raise ParamError(f'm_stop ({m_stop:g}) must exceed the initial sup '
                         f'({max(M_u, M_v):g})')

    def row():
        return [state.t, M_u, M_v, measured['max_u'], measured['max_v'],
                measured['max_grad_u'], measured['max_grad_v'],
                measured['argmax_r_u']]

    rows = [row()]
    last_row = np.array(rows[0][1:5])

    stride = cfg.record_every
    stride_snaps = {state.step: state}
    doubling_snaps = {state.step: state}
    doubling_times = []
    history = deque(maxlen=DOUBLING_HISTORY)
    next_level = 2 * M_u if M_u > 0 else np.inf

    stop_reason = None
    LOG.info(f'integrating on {grid}, dt_diff '
             f'{cfg.safety * grid.h ** 2 / (2 * problem.n):.3e}, '
             f'initial M_u {M_u:.4e} M_v {M_v:.4e}')

    while stop_reason is None:
        history.append(state)
        try:
            state, _, measured = _advance(problem, grid, state, cfg, measured)
        except FloatingPointError as err:
            LOG.warning(f'stopping: {err}')
            stop_reason = 'nonfinite'
            break

        M_u = max(M_u, measured['m_u'])
        M_v = max(M_v, measured['m_v'])

        doubled = M_u >= next_level
        if doubled:
            while M_u >= next_level:
                next_level *= 2
            for past in history:
                doubling_snaps[past.step] = past
            doubling_snaps[state.step] = state
            doubling_times.append(state.t)
            LOG.info(f'doubling {len(doubling_times)}: M_u {M_u:.4e} '
                     f'at t={state.t:.9e} (step {state.step})')

        if state.step % stride == 0:
            stride_snaps[state.step] = state
            if len(stride_snaps) > MAX_STRIDE_SNAPSHOTS:
                stride = 2 * stride
                stride_snaps = {k: s for k, s in stride_snaps.items()
                                if k % stride == 0}

        if max(M_u, M_v) >= m_stop:
            stop_reason = 'threshold'
        elif state.t >= cfg.t_max:
            stop_reason = 't_max'
        elif check_truncation:
            peak = max(state.u.max(), state.v.max())
            edge = max(state.u[-3:].max(), state.v[-3:].max())
            if edge > TRUNCATION_RUN_TOL * peak:
                stop_reason = 'truncation_contaminated'

        current = np.array([M_u, M_v, measured['max_u'], measured['max_v']])
        grown = np.any(current > (1 + cfg.series_resolution) * last_row)
        if (grown or doubled or stop_reason
                or state.step % cfg.record_every == 0):
            rows.append(row())
            last_row = current

    if rows[-1][0] != state.t:
        rows.append(row())
    stride_snaps[state.step] = state
    snapshots = {**stride_snaps, **doubling_snaps}
    snapshots = tuple(snapshots[k] for k in sorted(snapshots))

    result = RunResult(
        series=SupNormSeries.from_rows(rows),
        snapshots=snapshots,
        stop_reason=stop_reason,
        steps_taken=state.step,
        doubling_times=tuple(doubling_times),
        wall_seconds=time.perf_counter() - started,
    )
    LOG.info(f'stopped ({stop_reason}) after {state.step} steps at '
             f't={state.t:.9e}, M_u {M_u:.4e}, M_v {M_v:.4e}')
    return result


def _check_truncated_data(domain, kind, u0, v0):
    """
    Whole-space runs need data that is negligible at the truncation radius
    """
    if not domain.truncated or kind == 'constant':
        return False
    peak = max(u0.max(), v0.max())
    edge = max(u0[-1], v0[-1])
    if peak > 0 and edge > TRUNCATION_INIT_TOL * peak:
        raise ParamError(f'initial data at r={domain.radius} is {edge:.3e}, '
                         'not negligible against the peak; enlarge the '
                         'truncation radius')
    return True


def run_to_blowup(params, exps, grid, cfg):
    u0, v0 = initial_profiles(params, grid.r)
    check = _check_truncated_data(params.domain, params.init.kind, u0, v0)
    LOG.info(f'run_to_blowup p1={params.p1} p2={params.p2} q1={params.q1} '
             f'q2={params.q2} n={params.n} gradient={params.gradient}')

    problem = system_problem(params, exps, grid)
    return _integrate(problem, grid, FieldState(0.0, u0, v0), cfg,
                      check_truncation=check)


def run_scalar(p, q, grid, cfg, u0, n=1, domain=None):
    """
    u_t = Δu + |∇u|^q + u^p, the u0 = v0, p1 = p2, q1 = q2 reduction
    """
    domain = domain or Domain(radius=grid.radius)
    if not p > 1 or not 1 < q <= 2:
        raise ParamError('scalar run needs p > 1 and q in (1,2]')
    u0 = np.array(u0, dtype=float)
    check = _check_truncated_data(domain, None, u0, u0)

    problem = scalar_problem(p, q, n, grid, domain.boundary)
    return _integrate(problem, grid, FieldState(0.0, u0, u0), cfg,
                      check_truncation=check)


def transform_oracle(p, grid, cfg, u0, n=1, domain=None):
    """
    Integrate the transformed q = 2 problem from w0 = e^u0 - 1.
    Snapshots hold w; untransform() gives back log(1 + w)
    """
    domain = domain or Domain(radius=grid.radius)
    w0 = np.expm1(np.asarray(u0, dtype=float))
    check = _check_truncated_data(domain, None, w0, w0)

    # thresholds are given for u = log(1 + w)
    w_stop = min(np.expm1(min(cfg.m_stop, 690.0)), TRANSFORM_OVERFLOW)
    problem = transformed_problem(p, n, grid, domain.boundary)
    return _integrate(problem, grid, FieldState(0.0, w0, w0), cfg,
                      m_stop=w_stop, check_truncation=check)


def untransform(state):
    return np.log1p(state.u)


def compare_transform(direct, transformed, u_cap=6.0):
    """
    Sup over nodes and times of |u - log(1 + w)| while max u <= u_cap.
    The direct run is interpolated linearly in time onto the transformed
    run's snapshot times
    """
    d_times = np.array([s.t for s in direct.snapshots])
    worst = 0.0
    compared = 0

    for snap in transformed.snapshots:
        u_w = untransform(snap)
        if u_w.max() > u_cap or snap.t > d_times[-1]:
            continue

        i = int(np.searchsorted(d_times, snap.t))
        if d_times[min(i, len(d_times) - 1)] == snap.t:
            u_d = direct.snapshots[i].u
        else:
            lo, hi = direct.snapshots[i - 1], direct.snapshots[i]
            w = (snap.t - lo.t) / (hi.t - lo.t)
            u_d = (1 - w) * lo.u + w * hi.u

        if u_d.max() > u_cap:
            continue
        worst = max(worst, float(np.abs(u_d - u_w).max()))
        compared += 1

    if not compared:
        raise InsufficientData('no common resolved window between the runs')

    return worst
