import numpy as np
import pytest

from blowrate import analysis
from blowrate.constants import FRAME_K
from blowrate.exceptions import (AnalysisError, InsufficientData,
                                 EstimateDisagreement, FrameError)
from blowrate.grid import FieldState, RadialGrid, sup_functional
from blowrate.model import (InitSpec, SystemParams, compute_exponents,
                            initial_profiles)
from blowrate.solver import (SolverConfig, SupNormSeries, run_to_blowup,
                             run_scalar, transform_oracle, untransform)

T = 0.75
ALPHA, BETA = 0.6, 0.8


def power_law_series(alpha=ALPHA, beta=BETA, c_u=2.0, c_v=3.0, T=T,
                     decades=6, rows=600):
    """
    Exact power laws M = C (T - t)^-rate on geometric tau
    """
    tau = T * np.logspace(0, -decades, rows)
    t = T - tau
    M_u = c_u * tau ** -alpha
    M_v = c_v * tau ** -beta
    return SupNormSeries(t=t, M_u=M_u, M_v=M_v, max_u=M_u, max_v=M_v,
                         max_grad_u=tau ** -2.0, max_grad_v=tau ** -2.0,
                         argmax_r_u=np.zeros_like(t))


def test_doubling_times_exact_on_power_law():
    series = power_law_series()
    t_j, levels = analysis.doubling_times(series, ALPHA)

    tau_j = T * 2.0 ** (-np.arange(len(t_j)) / ALPHA)
    np.testing.assert_allclose(T - t_j, tau_j, rtol=1e-9)
    np.testing.assert_allclose(levels, series.M_u[0] * 2.0 ** np.arange(len(t_j)))


def test_estimate_blowup_time():
    series = power_law_series()
    est = analysis.estimate_blowup_time(series, ALPHA)

    assert est.T_est == pytest.approx(T, rel=1e-10)
    assert est.T_geometric == pytest.approx(T, rel=1e-10)
    assert float(est) == est.T_est
    assert est.t_last_doubling < T


def test_estimate_needs_doublings():
    series = power_law_series(decades=1, rows=50)
    with pytest.raises(InsufficientData):
        analysis.estimate_blowup_time(series, ALPHA)


def test_estimates_disagree_with_wrong_rate():
    series = power_law_series(alpha=1.0)
    with pytest.raises(EstimateDisagreement):
        analysis.estimate_blowup_time(series, 0.5, tolerance=1e-6)


def test_fit_rate_recovers_exponents():
    series = power_law_series()
    exps = compute_exponents(SystemParams(p1=2, p2=3, q1=1.2, q2=1.2))

    fit_u = analysis.fit_rate(series, T, 'M_u', exps)
    fit_v = analysis.fit_rate(series, T, 'M_v', exps)
    assert fit_u.exponent == pytest.approx(ALPHA, rel=1e-10)
    assert fit_v.exponent == pytest.approx(BETA, rel=1e-10)
    assert fit_u.amplitude == pytest.approx(2.0, rel=1e-9)
    assert fit_u.rms_residual < 1e-10
    assert fit_u.points_used >= 8
    assert fit_u.rel_error(ALPHA) < 1e-10

    grad = analysis.fit_rate(series, T, 'grad_u', exps)
    assert grad.exponent == pytest.approx(2.0 * exps.theta1, rel=1e-10)


def test_fit_rate_errors():
    series = power_law_series()
    with pytest.raises(AnalysisError):
        analysis.fit_rate(series, T, 'M_w')
    with pytest.raises(AnalysisError):
        analysis.fit_rate(series, T, 'M_u', window=(1e-1, 1e-3))
    with pytest.raises(AnalysisError):
        # window entirely before the first row
        analysis.fit_rate(series, T, 'M_u', window=(2.0, 3.0))

    sparse = power_law_series(rows=20)
    with pytest.raises(InsufficientData):
        analysis.fit_rate(sparse, T, 'M_u')


def test_doubling_ratio_exact_on_power_law():
    series = power_law_series(decades=4)
    report = analysis.doubling_analysis(series, ALPHA)

    np.testing.assert_allclose(report.ratio_j, 2 ** (-1 / ALPHA), rtol=1e-10)
    np.testing.assert_allclose(report.D_j, report.D_j[0], rtol=1e-10)
    assert report.tail_ratio() == pytest.approx(2 ** (-1 / ALPHA), rel=1e-10)
    assert not report.diverging()
    assert report.sup_D == pytest.approx(report.D_j.max())


def test_diverging_doublings():
    D = np.arange(1.0, 11.0)
    report = analysis.DoublingReport(t_j=np.arange(11.0), levels=np.ones(11),
                                     D_j=D, ratio_j=np.ones(9), sup_D=10.0)
    assert report.diverging()


def test_ratio_trace():
    series = power_law_series(alpha=1.0, beta=1.0, c_u=2.0, c_v=2.0)
    trace = analysis.ratio_trace(series, 1.0, 1.0, T)
    assert trace.phi_min == pytest.approx(1.0, abs=1e-10)
    assert trace.phi_max == pytest.approx(1.0, abs=1e-10)
    assert (trace.t > T / 2).all()

    series = power_law_series()
    trace = analysis.ratio_trace(series, ALPHA, BETA, T)
    expected = 2.0 ** (-1 / (2 * ALPHA)) * 3.0 ** (1 / (2 * BETA))
    assert trace.phi_min == pytest.approx(expected, rel=1e-10)
    assert trace.phi_max == pytest.approx(expected, rel=1e-10)


def test_gradient_product_bound():
    exps = compute_exponents(SystemParams(p1=2, p2=3, q1=1.2, q2=1.2))
    series = power_law_series()
    tau = T - series.t
    series = SupNormSeries(
        t=series.t, M_u=series.M_u, M_v=series.M_v, max_u=series.max_u,
        max_v=series.max_v, max_grad_u=tau ** (-exps.alpha / exps.theta1),
        max_grad_v=tau ** (-exps.beta / exps.theta2),
        argmax_r_u=series.argmax_r_u)

    for channel in ['u', 'v']:
        bound = analysis.gradient_product_bound(series, T, exps, channel)
        assert bound.ratio == pytest.approx(1.0, rel=1e-9)
        assert bound.passed


def test_empirical_constants():
    exps = compute_exponents(SystemParams(p1=2, p2=3, q1=1.2, q2=1.2))
    series = power_law_series()
    doubling = analysis.doubling_analysis(series, ALPHA)
    trace = analysis.ratio_trace(series, ALPHA, BETA, T)
    fits = [analysis.fit_rate(series, T, 'M_u', exps),
            analysis.fit_rate(series, T, 'M_v', exps)]

    out = analysis.empirical_constants(exps, doubling, trace, fits)
    assert out['C1'] == pytest.approx(2.0, rel=1e-9)
    assert out['C2'] == pytest.approx(3.0, rel=1e-9)
    assert out['A'] == doubling.sup_D
    assert out['tail_bound'] > out['A']
    assert 0 < out['delta'] <= 1


# rescaled frames, on a real symmetric run

@pytest.fixture(scope='module')
def symmetric_run():
    params = SystemParams(p1=2, p2=2, q1=1.5, q2=1.5,
                          init=InitSpec(amplitude_u=10.0, amplitude_v=10.0,
                                        width=0.3))
    exps = compute_exponents(params)
    grid = RadialGrid(nodes=41, radius=1.0)
    result = run_to_blowup(params, exps, grid,
                           SolverConfig(m_stop=2e3, record_every=10))
    return params, exps, grid, result


def latest_frame(run, component='u'):
    """
    Frame at the latest doubling the grid still resolves
    """
    params, exps, grid, result = run
    for t0 in reversed(result.doubling_times):
        try:
            return analysis.build_rescaled_frame(
                result.snapshots, result.series, t0, exps, grid, component)
        except FrameError:
            continue
    raise AssertionError('no resolved doubling')


def test_rescaled_frame(symmetric_run):
    params, exps, grid, result = symmetric_run
    frame = latest_frame(symmetric_run)

    assert frame.t_star in result.doubling_times
    assert frame.s[-1] == 0.0
    assert (frame.s >= -1).all()
    assert len(frame.s) >= 3
    assert frame.center >= 0.5
    assert frame.sup(exps.theta1) <= 1.05
    assert frame.gamma == pytest.approx(frame.M0 ** (-1 / (2 * exps.alpha)))
    # frame nodes sit between the native ones
    assert frame.grid.h * frame.gamma < grid.h
    assert frame.window.sum() > FRAME_K * frame.gamma / grid.h

    res1, res2 = analysis.rescaled_residual(frame, params)
    assert res1 == res2
    # q = 1.5 is gradient dominated: gamma^mu > 1 amplifies that term
    assert 0 < res1 < 0.1

    shares = analysis.gradient_share(frame, params)
    assert all(0 <= s <= 1 for s in shares)


def test_rescaled_frame_round_trip(symmetric_run):
    params, exps, grid, result = symmetric_run
    frame = latest_frame(symmetric_run)
    assert analysis.involution_error(frame, result.snapshots, grid) < 1e-3

    star = next(s for s in result.snapshots if s.t == frame.t_star)
    back = frame.unscale(grid.r[:3])
    np.testing.assert_allclose(back, star.u[:3], rtol=1e-3)


def test_round_trip_exact_on_quadratic_data():
    params = SystemParams(p1=2, p2=2, q1=1.5, q2=1.5)
    exps = compute_exponents(params)
    grid = RadialGrid(nodes=201, radius=1.0)
    shape = 1 - grid.r ** 2
    snaps = [FieldState(k * 1e-6, (400.0 + k) * shape, (400.0 + k) * shape, k)
             for k in range(4)]
    rows = [[s.t, *sup_functional(s, grid, exps), s.u.max(), s.v.max(),
             0.0, 0.0, 0.0] for s in snaps]
    series = SupNormSeries.from_rows(rows)

    frame = analysis.build_rescaled_frame(snaps, series, snaps[-1].t, exps,
                                          grid)
    assert frame.center == pytest.approx(1.0)
    assert len(frame.s) == 4
    assert analysis.involution_error(frame, snaps, grid) < 1e-12


def test_rescaled_frame_role_swap(symmetric_run):
    frame_u = latest_frame(symmetric_run, 'u')
    frame_v = latest_frame(symmetric_run, 'v')
    assert frame_v.gamma == frame_u.gamma
    np.testing.assert_array_equal(frame_v.phi1, frame_u.phi2)


def test_frame_errors(symmetric_run):
    params, exps, grid, result = symmetric_run
    with pytest.raises(FrameError):
        analysis.build_rescaled_frame(result.snapshots, result.series, -1.0,
                                      exps, grid)
    with pytest.raises(FrameError):
        # the last doubling leaves too few native nodes in the window
        analysis.build_rescaled_frame(result.snapshots, result.series,
                                      result.doubling_times[-1], exps, grid)
    with pytest.raises(AnalysisError):
        analysis.build_rescaled_frame(result.snapshots, result.series,
                                      result.doubling_times[-1], exps, grid,
                                      component='w')


def _frame_residual(params, nodes, index, m_stop):
    exps = compute_exponents(params)
    grid = RadialGrid(nodes=nodes, radius=1.0)
    result = run_to_blowup(params, exps, grid,
                           SolverConfig(m_stop=m_stop, record_every=1000))
    frame = analysis.build_rescaled_frame(result.snapshots, result.series,
                                          result.doubling_times[index],
                                          exps, grid)
    return analysis.rescaled_residual(frame, params)[0]


def test_frame_residual_second_order():
    # q = 2: every term of the equation is smooth at the origin
    params = SystemParams(p1=2, p2=2, q1=2, q2=2,
                          init=InitSpec(amplitude_u=10.0, amplitude_v=10.0,
                                        width=0.3))
    coarse, mid, fine = [_frame_residual(params, nodes, 2, 200.0)
                         for nodes in [61, 121, 241]]
    assert fine < mid < coarse
    assert coarse > 9 * fine


def test_frame_residual_shrinks_in_the_rate_regime():
    # q = 1.2: |u'|^q is only C^1 at the origin, so the order drops there
    params = SystemParams(p1=2, p2=3, q1=1.2, q2=1.2)
    coarse, fine = [_frame_residual(params, nodes, 0, 100.0)
                    for nodes in [101, 201]]
    assert fine < coarse / 1.5


# blow-up set

def _profiles(shape, grid, count=10):
    return [FieldState(float(k), 2.0 ** k * shape(grid.r, k),
                       2.0 ** k * shape(grid.r, k), k)
            for k in range(count)]


def test_blowup_set_width_single_point():
    grid = RadialGrid(nodes=401, radius=1.0)
    snaps = _profiles(lambda r, k: np.exp(-(r / (0.3 * 2 ** (-k / 2))) ** 2),
                      grid)
    trace = analysis.blowup_set_width(snaps, grid)

    assert trace.classification == 'single_point'
    assert trace.width[-1] < 0.2
    assert (np.diff(trace.width) < 0).all()
    # gaussian half-max radius is w sqrt(log 2)
    assert trace.width[-1] == pytest.approx(
        0.3 * 2 ** (-9 / 2) * np.sqrt(np.log(2)), rel=1e-2)


def test_blowup_set_width_global_and_regional():
    grid = RadialGrid(nodes=401, radius=1.0)
    flat = _profiles(lambda r, k: np.cos(0.5 * np.pi * r), grid)
    trace = analysis.blowup_set_width(flat, grid)
    assert trace.classification == 'global'
    np.testing.assert_allclose(trace.width, 2 / 3, rtol=1e-3)

    fixed = _profiles(lambda r, k: np.exp(-(r / 0.4) ** 2), grid)
    assert analysis.blowup_set_width(fixed, grid).classification == 'regional'


def test_blowup_set_width_needs_late_snapshots():
    grid = RadialGrid(nodes=11, radius=1.0)
    snaps = _profiles(lambda r, k: 1 - r, grid, count=2)
    with pytest.raises(InsufficientData):
        analysis.blowup_set_width(snaps, grid)


def test_blowup_set_width_rejects_wall_peaks():
    grid = RadialGrid(nodes=401, radius=1.0)
    snaps = _profiles(lambda r, k: np.exp(-((r - 0.98) / 0.05) ** 2), grid)
    with pytest.raises(AnalysisError, match='boundary layer'):
        analysis.blowup_set_width(snaps, grid)


@pytest.mark.slow
def test_global_blowup_set_agrees_with_transformed_run():
    # q = 2, p < 2: blow-up everywhere, with the maximum staying at the origin
    grid = RadialGrid(nodes=101, radius=1.0)
    params = SystemParams(p1=1.5, p2=1.5, q1=2, q2=2,
                          init=InitSpec(amplitude_u=5.0, amplitude_v=5.0,
                                        width=0.5))
    u0, _ = initial_profiles(params, grid.r)
    cfg = SolverConfig(m_stop=40.0, record_every=200)

    direct = run_scalar(1.5, 2.0, grid, cfg, u0)
    transformed = transform_oracle(1.5, grid, cfg, u0)
    assert direct.stop_reason == transformed.stop_reason == 'threshold'

    back = [FieldState(s.t, untransform(s), untransform(s), s.step)
            for s in transformed.snapshots]
    for snaps in [direct.snapshots, back]:
        trace = analysis.blowup_set_width(snaps, grid)
        assert trace.classification == 'global'
        assert trace.width.min() > 0.5
        assert grid.r[int(np.argmax(snaps[-1].u))] < 0.1
