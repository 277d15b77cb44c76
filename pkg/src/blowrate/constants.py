from pathlib import Path

from .logs import get_filelog

PACKAGE_NAME = 'blowrate'
VERSION = '0.1.0'

BASE_DIR = Path(f'~/.{PACKAGE_NAME}').expanduser()
DATA_DIR = BASE_DIR / 'data'
LOG_DIR = BASE_DIR / 'logs'
LOG = get_filelog(logfile_path=LOG_DIR / f'{PACKAGE_NAME}.log')

# resolved config defaults, by section. None means required / derived
DEFAULTS = {
    'model': {
        'p1': None, 'p2': None, 'q1': None, 'q2': None,
        'n': 1,
        'gradient': True,
    },
    'domain': {
        'kind': 'ball',
        'radius': 1.0,
        'boundary': 'dirichlet',
    },
    'grid': {
        'nodes': 401,
    },
    'time': {
        'safety': 0.4,
        'reaction_cap': 0.05,
        'm_stop': 1e8,
        't_max': 10.0,
        'record_every': 50,
        'series_resolution': 1e-3,
    },
    'init': {
        'kind': 'gaussian',
        'amplitude_u': 20.0,
        'amplitude_v': 20.0,
        'width': None,  # 0.3 * radius
    },
    'fit': {
        'window_lo': 1e-3,
        'window_hi': 1e-1,
    },
    'verdict': {
        'exponent_tol': 0.15,
        'rescale_sup': 1.05,
        'rescale_center': 0.45,
        'ratio_max': 10.0,
        'doubling_tol': 0.25,
        'ode_tol': 1e-3,
        'transform_tol': 1e-3,
        'gradient_factor': 3.0,
        'ode_exponent_tol': 0.02,
        'rescale_residual': 0.05,
        'involution_tol': 1e-3,
    },
}

DEFAULT_WIDTH_FRACTION = 0.3

# round-off negativity allowed before clamping, relative to the sup
CLAMP_TOL = 1e-13

# truncated whole space: initial data must be negligible at R_trunc, and
# the run stops if the solution there grows beyond this share of the peak
TRUNCATION_INIT_TOL = 1e-12
TRUNCATION_RUN_TOL = 1e-6

# w = e^u - 1 overflows long before float max
TRANSFORM_OVERFLOW = 1e300

# rescaled frames: window half width, centre share, native nodes the
# window must cover, and frame spacing in units of h / gamma (kept off the
# native nodes so the residual sees the interpolation)
FRAME_K = 5.0
CENTER_REQUIRED = 0.5
FRAME_MIN_NODES = 16
FRAME_SPACING = 2 / 3

# blow-up set classification
SINGLE_POINT_CUT = 0.2
GLOBAL_CUT = 0.5
# share of R next to the wall where a peak means a boundary artefact
WALL_LAYER = 0.05

STOP_REASONS = ('threshold', 't_max', 'nonfinite', 'truncation_contaminated')

CHANNELS = ('M_u', 'M_v', 'max_u', 'max_v', 'grad_u', 'grad_v')

SERIES_COLUMNS = ['t', 'M_u', 'M_v', 'max_u', 'max_v',
                  'max_grad_u', 'max_grad_v', 'argmax_r_u']

FIT_COLUMNS = ['channel', 'T_est', 'exponent', 'predicted_exponent',
               'rel_error', 'amplitude', 'rms_residual', 'window_lo',
               'window_hi', 'points_used']

DOUBLING_COLUMNS = ['j', 't_j', 'D_j', 'ratio_j']

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESES = 2
EXIT_VERDICT = 3
