"""
Radial 1-D grid on [0, R] and the discrete operators.

For radially symmetric f the n-dimensional Laplacian is f'' + (n-1) f'/r.
At r = 0 the symmetry limit n f''(0) is used, so 1/r is never evaluated
at the origin.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import GridError


@dataclass(frozen=True)
class RadialGrid:
    nodes: int
    radius: float

    def __post_init__(self):
        if int(self.nodes) != self.nodes or self.nodes < 3:
            raise GridError(f'need at least 3 nodes (N >= 3), got {self.nodes}')
        if not self.radius > 0:
            raise GridError(f'radius must be > 0, got {self.radius}')

    @property
    def h(self):
        return self.radius / (self.nodes - 1)

    @property
    def r(self):
        r = np.arange(self.nodes) * self.h
        r[-1] = self.radius
        return r

    def __repr__(self):
        return f'RadialGrid(N={self.nodes}, R={self.radius}, h={self.h:.3e})'


@dataclass(frozen=True)
class FieldState:
    t: float
    u: np.ndarray
    v: np.ndarray
    step: int = 0

    def __repr__(self):
        pad = 8
        out = ['t:'.ljust(pad) + f'{self.t:.6e}',
               'step:'.ljust(pad) + f'{self.step}',
               'max u:'.ljust(pad) + f'{self.u.max():.6e}',
               'max v:'.ljust(pad) + f'{self.v.max():.6e}']
        return '\n'.join(out)


def _check_length(grid, f):
    if len(f) != grid.nodes:
        raise GridError(f'array of length {len(f)} on a grid of '
                        f'{grid.nodes} nodes')


def radial_laplacian(grid, f, n):
    """
    Second order radial Laplacian in n dimensions.

    The last entry uses the even reflection f_N = f_{N-2}, which is what a
    zero-flux boundary needs; a Dirichlet boundary overwrites it anyway.
    """
    _check_length(grid, f)
    f = np.asarray(f, dtype=float)
    h = grid.h
    r = grid.r
    out = np.empty_like(f)

    out[1:-1] = ((f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
                 + (n - 1) / r[1:-1] * (f[2:] - f[:-2]) / (2 * h))

    # n f''(0), with the symmetric stencil f_{-1} = f_1
    out[0] = 2 * n * (f[1] - f[0]) / h**2

    out[-1] = (2 * (f[-2] - f[-1]) / h**2)

    return out


def gradient_magnitude(grid, f, boundary=None):
    """
    |f'(r)|: central differences inside, zero at the origin (symmetry),
    one-sided second order at r = R, zero there for a zero-flux boundary
    """
    _check_length(grid, f)
    f = np.asarray(f, dtype=float)
    h = grid.h
    out = np.empty_like(f)

    out[1:-1] = np.abs(f[2:] - f[:-2]) / (2 * h)
    out[0] = 0.0
    # differences first, so that constants give exactly 0
    out[-1] = abs(3 * (f[-1] - f[-2]) - (f[-2] - f[-3])) / (2 * h)
    if boundary == 'neumann':
        out[-1] = 0.0

    return out


def _minmod(a, b):
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def upwind_gradient(grid, f, boundary=None):
    """
    |f'(r)| for the source term of u_t = Δu + |∇u|^q.

    Godunov upwinding max(-a, b, 0) of the one-sided slopes a ~ f'(r-) and
    b ~ f'(r+), each carrying the ENO second order correction (the smaller
    of the neighbouring second differences). A radially decreasing profile
    is differenced from the inside only, so nodes next to a Dirichlet wall
    never read the wall value as a slope. Exact on quadratics.

    Ghost nodes: even reflection at the origin, quadratic extrapolation
    past r = R.
    """
    _check_length(grid, f)
    f = np.asarray(f, dtype=float)
    h = grid.h

    ghost = 3 * (f[-1] - f[-2]) + f[-3]
    ghosts = [ghost, 3 * (ghost - f[-1]) + f[-2]]
    g = np.concatenate([f[2:0:-1], f, ghosts])

    prev, mid, nxt = g[1:-3], g[2:-2], g[3:-1]
    d_left = mid - 2 * prev + g[:-4]
    d_mid = nxt - 2 * mid + prev
    d_right = g[4:] - 2 * nxt + mid

    a = (mid - prev) / h + _minmod(d_left, d_mid) / (2 * h)
    b = (nxt - mid) / h - _minmod(d_right, d_mid) / (2 * h)

    out = np.maximum(np.maximum(-a, b), 0.0)
    out[0] = 0.0
    if boundary == 'neumann':
        out[-1] = 0.0
    return out


def functional_profile(grid, f, theta, boundary=None):
    """
    Pointwise f + |∇f|^theta
    """
    return f + gradient_magnitude(grid, f, boundary) ** theta


def sup_functional(state, grid, exps, boundary=None):
    """
    Instantaneous sups of u + |∇u|^theta1 and v + |∇v|^theta2.
    The running sup in time (M_u, M_v) is kept by the solver
    """
    m_u = functional_profile(grid, state.u, exps.theta1, boundary).max()
    m_v = functional_profile(grid, state.v, exps.theta2, boundary).max()
    return float(m_u), float(m_v)
