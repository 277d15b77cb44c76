"""
Post-run analysis of the sup-functional series and snapshots.

Near the blow-up time T the rate estimates say M_u ~ C (T - t)^-alpha, so
    y(t) = M_u(t)^(-1/alpha)
is affine in t with root T. Doubling times, the time estimate and the
rate fits all work with that linearisation.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import (LOG, FRAME_K, CENTER_REQUIRED, FRAME_MIN_NODES,
                        FRAME_SPACING, SINGLE_POINT_CUT, GLOBAL_CUT,
                        WALL_LAYER)
from .exceptions import (AnalysisError, InsufficientData,
                         EstimateDisagreement, FrameError)
from .grid import (RadialGrid, upwind_gradient, radial_laplacian,
                   functional_profile)
from .model import compute_exponents

MIN_FIT_POINTS = 8
MIN_DOUBLINGS_ESTIMATE = 4
MIN_DOUBLINGS_REPORT = 5


@dataclass(frozen=True)
class BlowupTime:
    T_est: float
    T_geometric: float
    discrepancy: float
    t_last_doubling: float

    def __float__(self):
        return float(self.T_est)


@dataclass(frozen=True)
class RateFit:
    channel: str
    T_est: float
    exponent: float
    amplitude: float
    rms_residual: float
    window: tuple
    points_used: int

    def rel_error(self, predicted):
        return abs(self.exponent - predicted) / abs(predicted)


@dataclass(frozen=True)
class DoublingReport:
    t_j: np.ndarray
    levels: np.ndarray
    D_j: np.ndarray
    ratio_j: np.ndarray
    sup_D: float

    def tail_ratio(self, k=5):
        """
        Median of the last k increment ratios
        """
        return float(np.median(self.ratio_j[-k:]))

    def diverging(self, k=8):
        """
        True if D_j increases monotonically over the last k doublings,
        by more than round-off at each step
        """
        tail = self.D_j[-k:]
        return len(tail) >= k and bool(np.all(np.diff(tail) > 1e-9 * tail[:-1]))


class RatioTrace(NamedTuple):
    phi_min: float
    phi_max: float
    t: np.ndarray
    phi: np.ndarray


@dataclass(frozen=True)
class RescaledFrame:
    component: str
    gamma: float
    M0: float
    x_star: float
    t_star: float
    center: float
    grid: RadialGrid     # frame nodes in rho = r / gamma
    y: np.ndarray        # rho - rho_star
    window: np.ndarray   # |y| <= K
    s: np.ndarray
    steps: np.ndarray
    phi1: np.ndarray     # (levels, nodes)
    phi2: np.ndarray

    @property
    def s_range(self):
        return float(self.s[0]), float(self.s[-1])

    def sup(self, theta):
        """
        Sup over the window and levels of phi1 + |grad phi1|^theta
        """
        return max(float(functional_profile(self.grid, phi, theta)
                         [self.window].max()) for phi in self.phi1)

    def unscale(self, r, level=-1):
        """
        Own component back in physical variables, M0 * phi1(r / gamma)
        """
        rho = np.asarray(r, dtype=float) / self.gamma
        return self.M0 * _resample(self.grid, self.phi1[level], rho)


class GradientBound(NamedTuple):
    ratio: float
    median: float
    passed: bool


class WidthTrace(NamedTuple):
    t: np.ndarray
    width: np.ndarray
    max_u: np.ndarray
    classification: str


def _channel_values(series, channel, exps):
    if channel in ('M_u', 'M_v', 'max_u', 'max_v'):
        return getattr(series, channel)
    if channel in ('grad_u', 'grad_v'):
        if exps is None:
            raise AnalysisError(f'channel {channel} needs the exponents')
        theta = exps.theta1 if channel == 'grad_u' else exps.theta2
        return getattr(series, f'max_{channel}') ** theta
    raise AnalysisError(f'unknown channel {channel!r}')


def doubling_times(series, alpha, values=None):
    """
    Times at which M_u reaches base * 2^j, base the first positive value.
    Located by linear interpolation of M_u^(-1/alpha), exact on power laws

    >>> from types import SimpleNamespace
    >>> t = np.linspace(0, 0.9, 10)
    >>> s = SimpleNamespace(t=t, M_u=1 / (1 - t))
    >>> doubling_times(s, 1.0)[0].round(12).tolist()
    [0.0, 0.5, 0.75, 0.875]
    """
    t = np.asarray(series.t, dtype=float)
    M = np.asarray(series.M_u if values is None else values, dtype=float)

    positive = np.flatnonzero(M > 0)
    if not len(positive):
        return np.array([]), np.array([])
    t, M = t[positive[0]:], M[positive[0]:]

    base = M[0]
    n_levels = int(np.floor(np.log2(M[-1] / base) + 1e-12)) + 1
    levels = base * 2.0 ** np.arange(n_levels)
    y = M ** (-1 / alpha)

    out = np.empty(n_levels)
    for j, level in enumerate(levels):
        i = int(np.searchsorted(M, level, side='left'))
        if i == 0:
            out[j] = t[0]
            continue
        i = min(i, len(M) - 1)
        y_level = level ** (-1 / alpha)
        frac = (y[i - 1] - y_level) / (y[i - 1] - y[i])
        out[j] = t[i - 1] + frac * (t[i] - t[i - 1])

    return out, levels


def estimate_blowup_time(series, alpha, tolerance=0.05):
    """
    Primary: root of the straight line through M_u^(-1/alpha) over the last
    resolved decade (the half-decade before the stop is ignored).
    Secondary: last doubling time plus the geometric tail of the doubling
    increments, ratio 2^(-1/alpha).
    """
    t_j, _ = doubling_times(series, alpha)
    if len(t_j) < MIN_DOUBLINGS_ESTIMATE + 1:
        raise InsufficientData(f'{max(len(t_j) - 1, 0)} doublings of M_u, '
                               f'need {MIN_DOUBLINGS_ESTIMATE}')

    t = np.asarray(series.t, dtype=float)
    M = np.asarray(series.M_u, dtype=float)
    keep = np.concatenate([[True], np.diff(M) > 0]) & (M > 0)
    t, M = t[keep], M[keep]

    M_end = M[-1]
    sel = (M >= M_end * 10 ** -1.5) & (M <= M_end * 10 ** -0.5)
    if sel.sum() < 3:
        raise InsufficientData('fewer than 3 points in the last resolved decade')
    slope, intercept = np.polyfit(t[sel], M[sel] ** (-1 / alpha), 1)
    if not slope < 0:
        raise AnalysisError('M_u^(-1/alpha) is not decreasing: no blow-up '
                            'in the series')
    T_line = -intercept / slope

    rho = 2 ** (-1 / alpha)
    T_geom = t_j[-1] + (t_j[-1] - t_j[-2]) * rho / (1 - rho)

    discrepancy = abs(T_line - T_geom)
    if discrepancy > tolerance * (T_line - t_j[-1]):
        raise EstimateDisagreement(
            f'blow-up time estimates {T_line:.9e} and {T_geom:.9e} differ by '
            f'more than {tolerance:.0%} of the remaining time')

    return BlowupTime(T_est=float(T_line), T_geometric=float(T_geom),
                      discrepancy=float(discrepancy),
                      t_last_doubling=float(t_j[-1]))


def fit_rate(series, T_est, channel, exps=None, window=(1e-3, 1e-1)):
    """
    Least squares slope of log(channel) against log(T_est - t) over
    tau in [window_lo, window_hi] * T_est. Exponent is minus the slope
    """
    T = float(T_est)
    lo, hi = window
    if not 0 < lo < hi:
        raise AnalysisError(f'bad fit window {window}')

    t = np.asarray(series.t, dtype=float)
    values = np.asarray(_channel_values(series, channel, exps), dtype=float)
    tau = T - t

    if not len(t) or tau.min() > hi * T or tau.max() < lo * T:
        raise AnalysisError(f'window {window} x T_est outside the data range')

    mask = (tau >= lo * T) & (tau <= hi * T) & (values > 0)
    if mask.sum() < MIN_FIT_POINTS:
        raise InsufficientData(f'{mask.sum()} points in the fit window, '
                               f'need {MIN_FIT_POINTS}')

    x = np.log10(tau[mask])
    y = np.log10(values[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)

    return RateFit(
        channel=channel,
        T_est=T,
        exponent=float(-slope),
        amplitude=float(10 ** intercept),
        rms_residual=float(np.sqrt(np.mean(resid ** 2))),
        window=(lo, hi),
        points_used=int(mask.sum()),
    )


def predicted_exponent(channel, exps):
    """
    Rate each channel is predicted to follow near T
    """
    return exps.alpha if channel.endswith('_u') else exps.beta


def gradient_product_bound(series, T_est, exps, channel='u',
                           window=(1e-3, 1e-1), factor=3.0):
    """
    max |grad|^theta * (T - t)^rate over the fit window should stay
    within factor of its median
    """
    T = float(T_est)
    theta, rate = ((exps.theta1, exps.alpha) if channel == 'u'
                   else (exps.theta2, exps.beta))
    tau = T - np.asarray(series.t, dtype=float)
    grad = np.asarray(getattr(series, f'max_grad_{channel}'), dtype=float)

    mask = (tau >= window[0] * T) & (tau <= window[1] * T)
    if mask.sum() < MIN_FIT_POINTS:
        raise InsufficientData('too few points for the gradient product')

    product = grad[mask] ** theta * tau[mask] ** rate
    median = float(np.median(product))
    if not product.max() > 0:
        # no gradient anywhere, eg homogeneous data
        return GradientBound(0.0, 0.0, True)
    if median <= 0:
        return GradientBound(np.inf, median, False)
    ratio = float(product.max() / median)
    return GradientBound(ratio, median, ratio <= factor)


def doubling_analysis(series, alpha):
    """
    D_j = M_u(t_j)^(1/alpha) (t_{j+1} - t_j), i.e. gamma_j^-2 times the
    doubling increment, and the ratio of successive increments
    """
    t_j, levels = doubling_times(series, alpha)
    if len(t_j) < MIN_DOUBLINGS_REPORT + 1:
        raise InsufficientData(f'{max(len(t_j) - 1, 0)} doublings of M_u, '
                               f'need {MIN_DOUBLINGS_REPORT}')

    increments = np.diff(t_j)
    D_j = levels[:-1] ** (1 / alpha) * increments
    ratio_j = increments[1:] / increments[:-1]

    return DoublingReport(t_j=t_j, levels=levels, D_j=D_j, ratio_j=ratio_j,
                          sup_D=float(D_j.max()))


def ratio_trace(series, alpha, beta, T_est=None):
    """
    Phi(t) = M_u^(-1/2alpha) M_v^(1/2beta) over the second half of the run
    """
    t = np.asarray(series.t, dtype=float)
    T = float(T_est) if T_est is not None else t[-1]
    mask = t > T / 2
    if not mask.any():
        raise InsufficientData('no series rows after T_est/2')

    M_u = np.asarray(series.M_u, dtype=float)[mask]
    M_v = np.asarray(series.M_v, dtype=float)[mask]
    if (M_u <= 0).any() or (M_v <= 0).any():
        raise AnalysisError('zero sup-functional in the ratio window')

    phi = M_u ** (-1 / (2 * alpha)) * M_v ** (1 / (2 * beta))
    return RatioTrace(float(phi.min()), float(phi.max()), t[mask], phi)


def _roles(exps, component):
    if component == 'u':
        return exps.alpha, exps.beta, exps.theta1
    if component == 'v':
        return exps.beta, exps.alpha, exps.theta2
    raise AnalysisError(f'component must be u or v, got {component!r}')


def _resample(grid, f, r_new):
    # even in r: zero slope at the origin
    return CubicSpline(grid.r, f, bc_type=((1, 0.0), 'not-a-knot'))(r_new)


def build_rescaled_frame(snapshots, series, t0, exps, grid, component='u',
                         K=FRAME_K, relaxed_center=0.45,
                         spacing=FRAME_SPACING):
    """
    Zoom about the point (x*, t*) realising at least half of M(t0):
        phi1(y, s) = gamma^(2a) u(gamma y + x*, gamma^2 s + t*)
        phi2(y, s) = gamma^(2b) v(gamma y + x*, gamma^2 s + t*)
    gamma = M(t0)^(-1/2a). The frame has its own radial grid in
    rho = r / gamma with step spacing * h / gamma, off the native nodes;
    recorded states are carried onto it by cubic splines in r. Levels are
    the recorded states with s in [-1, 0].
    """
    a, b, theta = _roles(exps, component)

    def own(state):
        return state.u if component == 'u' else state.v

    def other(state):
        return state.v if component == 'u' else state.u

    M_series = series.M_u if component == 'u' else series.M_v
    M0 = float(np.interp(t0, series.t, M_series))
    if not M0 > 0:
        raise FrameError(f'M_{component}(t0) is zero')
    gamma = M0 ** (-1 / (2 * a))

    # (x*, t*): best recorded state up to t0
    best = None
    for snap in snapshots:
        if snap.t > t0 * (1 + 1e-14):
            break
        prof = functional_profile(grid, own(snap), theta)
        i = int(np.argmax(prof))
        if best is None or prof[i] >= best[0]:
            best = (float(prof[i]), i, snap)
    if best is None:
        raise FrameError(f'no snapshot at or before t0={t0}')

    peak, i_star, star = best
    center = peak / M0
    if center < CENTER_REQUIRED:
        if center < relaxed_center:
            raise FrameError(f'best recorded state reaches {center:.3f} of '
                             f'M(t0), below {relaxed_center}')
        LOG.warning(f'frame centre relaxed: {center:.3f} of M(t0) < '
                    f'{CENTER_REQUIRED} (recording missed the peak)')

    x_star = float(grid.r[i_star])
    rho_star = x_star / gamma
    if K * gamma < FRAME_MIN_NODES * grid.h:
        raise FrameError(f'frame window covers {K * gamma / grid.h:.1f} '
                         f'native nodes, need {FRAME_MIN_NODES}: refine the '
                         'grid or pick an earlier t0')

    # two frame nodes past the window keep the upwind stencils inside
    h_y = spacing * grid.h / gamma
    nodes = int(np.ceil((rho_star + K) / h_y)) + 3
    sub = RadialGrid(nodes=nodes, radius=(nodes - 1) * h_y)
    if sub.radius * gamma > grid.radius:
        raise FrameError(f'|y| <= {K} exits the rescaled domain (radius '
                         f'{grid.radius / gamma:.3g}): t0 too early')

    levels = [snap for snap in snapshots
              if star.t - gamma ** 2 <= snap.t <= star.t]

    y = sub.r - rho_star
    window = np.abs(y) <= K
    r_phys = gamma * sub.r

    return RescaledFrame(
        component=component,
        gamma=float(gamma),
        M0=M0,
        x_star=x_star,
        t_star=float(star.t),
        center=float(center),
        grid=sub,
        y=y,
        window=window,
        s=np.array([(snap.t - star.t) / gamma ** 2 for snap in levels]),
        steps=np.array([snap.step for snap in levels]),
        phi1=np.array([gamma ** (2 * a) * _resample(grid, own(snap), r_phys)
                       for snap in levels]),
        phi2=np.array([gamma ** (2 * b) * _resample(grid, other(snap), r_phys)
                       for snap in levels]),
    )


def involution_error(frame, snapshots, grid):
    """
    Undo the zoom on the s = 0 level, u(r) = M0 phi1(r / gamma), and compare
    with the recorded state on the native nodes of the window. Relative to
    the window maximum
    """
    star = next((snap for snap in snapshots if snap.t == frame.t_star), None)
    if star is None:
        raise FrameError(f'no snapshot at t*={frame.t_star}')
    field = star.u if frame.component == 'u' else star.v

    lo, hi = frame.grid.r[frame.window][[0, -1]] * frame.gamma
    inside = (grid.r >= lo) & (grid.r <= hi)
    back = frame.unscale(grid.r[inside])
    scale = np.abs(field[inside]).max()
    if not scale > 0:
        return 0.0
    return float(np.abs(back - field[inside]).max() / scale)


def _frame_params(frame, params):
    if frame.component == 'v':
        params = params.swapped()
    return params, compute_exponents(params)


def _frame_terms(frame, params, exps, phi1, phi2):
    # same upwind source as the solver
    lap = radial_laplacian(frame.grid, phi1, params.n)
    grad = frame.gamma ** exps.mu1 * upwind_gradient(frame.grid, phi1) ** params.q1
    if not params.gradient:
        grad = np.zeros_like(grad)
    return lap, grad, phi2 ** params.p1


def rescaled_residual(frame, params, exps=None):
    """
    Max-norm residuals over the window of
        phi1_s - Δphi1 - gamma^mu1 |∇phi1|^q1 - phi2^p1
    and the mirrored equation, phi_s taken forward between consecutive
    solver steps. The stencils run on the frame grid, so what is left is
    the discretisation error of the native scheme against the frame one:
    second order in h
    """
    if len(frame.s) < 3:
        raise InsufficientData(f'{len(frame.s)} time levels in the frame, '
                               'need 3')
    own, _ = _frame_params(frame, params)
    mirror = own.swapped()
    own_exps, mirror_exps = compute_exponents(own), compute_exponents(mirror)

    res1 = res2 = 0.0
    pairs = 0
    for k in range(len(frame.s) - 1):
        if frame.steps[k + 1] != frame.steps[k] + 1:
            continue
        ds = frame.s[k + 1] - frame.s[k]
        pairs += 1

        for phi, psi, prm, ex, which in [
                (frame.phi1, frame.phi2, own, own_exps, 1),
                (frame.phi2, frame.phi1, mirror, mirror_exps, 2)]:
            lap, grad, source = _frame_terms(frame, prm, ex, phi[k], psi[k])
            res = ((phi[k + 1] - phi[k]) / ds - lap - grad - source)
            worst = float(np.abs(res[frame.window]).max())
            if which == 1:
                res1 = max(res1, worst)
            else:
                res2 = max(res2, worst)

    if not pairs:
        raise InsufficientData('no consecutive solver steps in the frame')
    return res1, res2


def gradient_share(frame, params, exps=None):
    """
    Share of the gamma^mu weighted gradient terms in the rescaled
    equations' right hand sides, at s = 0
    """
    own, _ = _frame_params(frame, params)
    mirror = own.swapped()
    shares = []
    for phi, psi, prm in [(frame.phi1[-1], frame.phi2[-1], own),
                          (frame.phi2[-1], frame.phi1[-1], mirror)]:
        lap, grad, source = _frame_terms(frame, prm, compute_exponents(prm),
                                         phi, psi)
        w = frame.window
        budget = (np.abs(lap[w]).max() + np.abs(grad[w]).max()
                  + np.abs(source[w]).max())
        shares.append(float(np.abs(grad[w]).max() / budget) if budget else 0.0)
    return tuple(shares)


def half_max_width(r, u, theta=0.5):
    """
    Radius of {r : u >= theta max u}, linear interpolation at the crossing

    >>> r = np.linspace(0, 1, 11)
    >>> half_max_width(r, 1 - r, 0.5)
    0.5
    """
    m = u.max()
    if m <= 0:
        return 0.0
    j = int(np.flatnonzero(u >= theta * m).max())
    if j == len(u) - 1:
        return float(r[-1])
    level = theta * m
    frac = (u[j] - level) / (u[j] - u[j + 1])
    return float(r[j] + frac * (r[j + 1] - r[j]))


def blowup_set_width(snapshots, grid, theta=0.5, min_late=3):
    """
    Half-max width of the late snapshots (max u at least the geometric
    mean of the first and last maxima), and its trend:
        single_point  final width < 0.2 R and shrinking
        global        width never below 0.5 R
        regional      otherwise
    A late maximum within WALL_LAYER R of the wall is an AnalysisError
    """
    if not 0 < theta < 1:
        raise AnalysisError('theta must lie in (0,1)')
    maxima = np.array([snap.u.max() for snap in snapshots])
    if not len(maxima) or maxima[-1] <= 0:
        raise InsufficientData('no nonzero snapshots')

    first = maxima[maxima > 0][0]
    late = [snap for snap, m in zip(snapshots, maxima)
            if m >= np.sqrt(first * maxima[-1])]
    if len(late) < min_late:
        raise InsufficientData(f'{len(late)} late snapshots, need {min_late}')

    R = grid.radius
    peak_r = np.array([grid.r[int(np.argmax(snap.u))] for snap in late])
    if (peak_r > (1 - WALL_LAYER) * R).any():
        raise AnalysisError(f'late maximum at r={peak_r.max():.4g}, inside the '
                            f'boundary layer of width {WALL_LAYER:g} R: the '
                            'run blew up at the wall, refine or check the data')

    t = np.array([snap.t for snap in late])
    width = np.array([half_max_width(grid.r, snap.u, theta) for snap in late])
    max_u = np.array([snap.u.max() for snap in late])

    if width[-1] < SINGLE_POINT_CUT * R and width[-1] < width[0]:
        classification = 'single_point'
    elif width.min() >= GLOBAL_CUT * R:
        classification = 'global'
    else:
        classification = 'regional'

    return WidthTrace(t, width, max_u, classification)


def empirical_constants(exps, doubling=None, ratio=None, fits=()):
    """
    Per-run values of the constants the estimates only assert exist
    """
    out = {}
    if ratio is not None:
        out['delta'] = min(ratio.phi_min, 1 / ratio.phi_max)
    if doubling is not None:
        out['A'] = doubling.sup_D
        out['tail_bound'] = doubling.sup_D / (1 - 2 ** (-1 / exps.alpha))
    for fit in fits:
        if fit.channel == 'M_u':
            out['C1'] = fit.amplitude
        elif fit.channel == 'M_v':
            out['C2'] = fit.amplitude
    return out
