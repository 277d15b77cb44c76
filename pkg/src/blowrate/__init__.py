from .constants import VERSION as __version__

from .model import (Domain, InitSpec, SystemParams, Exponents,
                    compute_exponents, check_theorem_hypotheses,
                    check_scalar_hypotheses, predicted_blowup_set,
                    initial_profiles)
from .grid import (RadialGrid, FieldState, radial_laplacian,
                   gradient_magnitude, upwind_gradient, sup_functional)
from .solver import (SolverConfig, SupNormSeries, RunResult, step,
                     run_to_blowup, run_scalar, transform_oracle,
                     compare_transform)
from .analysis import (doubling_times, estimate_blowup_time, fit_rate,
                       doubling_analysis, ratio_trace, build_rescaled_frame,
                       rescaled_residual, involution_error, blowup_set_width,
                       gradient_product_bound, empirical_constants)
from .fileio import (FitConfig, parse_config, parse_config_dict, load_config,
                     emit_series_csv, load_series_csv, emit_fit_csv, emit_svg)
from .exceptions import *
