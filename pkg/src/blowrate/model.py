"""
Problem parameters, the derived exponents and the hypothesis checks.

The system is

    u_t = Δu + |∇u|^q1 + v^p1,    v_t = Δv + |∇v|^q2 + u^p2

on a ball (zero Dirichlet data) or on the whole space (truncated).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import DEFAULT_WIDTH_FRACTION
from .exceptions import ParamError

DOMAIN_KINDS = ('ball', 'truncated-space')
BOUNDARIES = ('dirichlet', 'neumann')
INIT_KINDS = ('gaussian', 'cosine_bump', 'constant')


@dataclass(frozen=True)
class Domain:
    kind: str = 'ball'
    radius: float = 1.0
    boundary: str = 'dirichlet'

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ParamError(f'domain kind {self.kind!r} not one of {DOMAIN_KINDS}')
        if self.boundary not in BOUNDARIES:
            raise ParamError(f'boundary {self.boundary!r} not one of {BOUNDARIES}')
        if not self.radius > 0:
            raise ParamError(f'radius must be > 0, got {self.radius}')
        if self.boundary == 'neumann' and self.kind != 'truncated-space':
            raise ParamError('neumann boundary is only allowed in '
                             'truncated-space mode (the ball carries u=v=0 '
                             'on its boundary)')

    @property
    def truncated(self):
        return self.kind == 'truncated-space'


@dataclass(frozen=True)
class InitSpec:
    kind: str = 'gaussian'
    amplitude_u: float = 20.0
    amplitude_v: float = 20.0
    width: float = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ParamError(f'init kind {self.kind!r} not one of {INIT_KINDS}')
        if self.amplitude_u < 0 or self.amplitude_v < 0:
            raise ParamError('initial amplitudes must be >= 0 '
                             '(u_0, v_0 >= 0)')
        if self.width is not None and not self.width > 0:
            raise ParamError(f'init width must be > 0, got {self.width}')


@dataclass(frozen=True)
class SystemParams:
    p1: float
    p2: float
    q1: float
    q2: float
    n: int = 1
    domain: Domain = field(default_factory=Domain)
    init: InitSpec = field(default_factory=InitSpec)
    gradient: bool = True

    def __post_init__(self):
        for name in ['p1', 'p2']:
            if not getattr(self, name) > 1:
                raise ParamError(f'{name} must be > 1: p_1,p_2 in (1,inf)')
        for name in ['q1', 'q2']:
            if not 1 < getattr(self, name) <= 2:
                raise ParamError(f'{name} must lie in (1,2]: q_1,q_2 in (1,2]')
        if int(self.n) != self.n or self.n < 1:
            raise ParamError(f'n must be an integer >= 1, got {self.n}')
        if self.init.kind == 'constant' and self.domain.boundary != 'neumann':
            raise ParamError('constant initial data needs the neumann '
                             'boundary (spatially homogeneous ODE oracle)')

    @property
    def symmetric(self):
        return self.p1 == self.p2 and self.q1 == self.q2

    def swapped(self):
        """
        Exchange the roles of u and v
        """
        init = replace(self.init, amplitude_u=self.init.amplitude_v,
                       amplitude_v=self.init.amplitude_u)
        return replace(self, p1=self.p2, p2=self.p1, q1=self.q2, q2=self.q1,
                       init=init)


@dataclass(frozen=True)
class Exponents:
    alpha: float
    beta: float
    mu1: float
    mu2: float
    theta1: float
    theta2: float
    q1_bound: float
    q2_bound: float
    cond_fujita: bool
    cond_q: bool

    def to_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class HypothesisReport:
    cond_fujita: bool
    cond_q1: bool
    cond_q2: bool
    margin_q1: float
    margin_q2: float
    margin_fujita: float
    exponents: Exponents

    @property
    def cond_q(self):
        return self.cond_q1 and self.cond_q2

    @property
    def holds(self):
        return self.cond_fujita and self.cond_q

    def to_dict(self):
        return {
            'cond_fujita': self.cond_fujita,
            'cond_q': self.cond_q,
            'cond_q1': self.cond_q1,
            'cond_q2': self.cond_q2,
            'margin_q1': self.margin_q1,
            'margin_q2': self.margin_q2,
            'margin_fujita': self.margin_fujita,
            'holds': self.holds,
        }


@dataclass(frozen=True)
class ScalarReport:
    cond_p: bool
    cond_q: bool
    margin_p: float
    margin_q: float
    rate: float
    theta: float

    @property
    def holds(self):
        return self.cond_p and self.cond_q

    def to_dict(self):
        return {**self.__dict__, 'holds': self.holds}


def rate_exponents(p1, p2):
    """
    >>> rate_exponents(2, 3)
    (0.6, 0.8)
    """
    denom = p1 * p2 - 1
    if not denom > 0:
        raise ParamError(f'p1*p2 must exceed 1, got {p1 * p2}')
    return (p1 + 1) / denom, (p2 + 1) / denom


def gradient_power(p_own, p_other):
    """
    Power put on |grad| in the sup-functional: 2(p+1)/(p p' + 2p + 1)

    >>> gradient_power(2, 2)  # 2/(p+1)
    0.6666666666666666
    """
    return 2 * (p_own + 1) / (p_own * p_other + 2 * p_own + 1)


def compute_exponents(params):
    p1, p2, q1, q2 = params.p1, params.p2, params.q1, params.q2

    alpha, beta = rate_exponents(p1, p2)

    mu1 = 2 * alpha + 2 - (2 * alpha + 1) * q1
    mu2 = 2 * beta + 2 - (2 * beta + 1) * q2
    q1_bound = (2 * alpha + 2) / (2 * alpha + 1)
    q2_bound = (2 * beta + 2) / (2 * beta + 1)

    return Exponents(
        alpha=alpha,
        beta=beta,
        mu1=mu1,
        mu2=mu2,
        theta1=gradient_power(p1, p2),
        theta2=gradient_power(p2, p1),
        q1_bound=q1_bound,
        q2_bound=q2_bound,
        cond_fujita=max(alpha, beta) >= params.n / 2,
        cond_q=(1 < q1 < q1_bound) and (1 < q2 < q2_bound),
    )


def check_theorem_hypotheses(params):
    """
    Conditions under which the upper rate estimates are proved:
        max{alpha, beta} >= n/2            (non-strict)
        1 < q_i < (2a+2)/(2a+1)            (strict)
    Margins are signed, positive when the condition has room
    """
    exps = compute_exponents(params)
    return HypothesisReport(
        cond_fujita=exps.cond_fujita,
        cond_q1=1 < params.q1 < exps.q1_bound,
        cond_q2=1 < params.q2 < exps.q2_bound,
        margin_q1=exps.q1_bound - params.q1,
        margin_q2=exps.q2_bound - params.q2,
        margin_fujita=max(exps.alpha, exps.beta) - params.n / 2,
        exponents=exps,
    )


def check_scalar_hypotheses(p, q, n):
    """
    Scalar case u_t = Δu + |∇u|^q + u^p:
        1 < p <= 1 + 2/n,   1 < q < 2p/(1+p)
    """
    if not p > 1:
        raise ParamError('p must be > 1')
    q_bound = 2 * p / (1 + p)
    p_bound = 1 + 2 / n
    return ScalarReport(
        cond_p=1 < p <= p_bound,
        cond_q=1 < q < q_bound,
        margin_p=p_bound - p,
        margin_q=q_bound - q,
        rate=1 / (p - 1),
        theta=2 / (p + 1),
    )


def predicted_blowup_set(p, domain):
    """
    q = 2 scalar case, radially decreasing data
    """
    if p < 2:
        return 'global'
    if p == 2:
        return 'regional' if domain.truncated else 'undetermined'
    if domain.truncated:
        return 'undetermined'
    return 'single_point'


def initial_profiles(params, r):
    """
    Return u0, v0 on the node coordinates r
    """
    init = params.init
    radius = params.domain.radius
    width = init.width or DEFAULT_WIDTH_FRACTION * radius

    if init.kind == 'constant':
        shape = np.ones_like(r)

    elif init.kind == 'gaussian':
        shape = np.exp(-(r / width) ** 2)
        if params.domain.boundary == 'dirichlet':
            # shift so the edge value is exactly zero, keep the peak
            edge = np.exp(-(radius / width) ** 2)
            shape = np.clip((shape - edge) / (1 - edge), 0.0, None)
            shape[-1] = 0.0

    else:  # cosine_bump
        width = min(width, radius)
        shape = np.where(r < width, np.cos(0.5 * np.pi * r / width) ** 2, 0.0)
        shape[r >= width] = 0.0

    return init.amplitude_u * shape, init.amplitude_v * shape
