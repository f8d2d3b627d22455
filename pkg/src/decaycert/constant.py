KiB = 1024
MiB = 1024 * KiB

# values beyond this are treated as escape to infinity
OVERFLOW_GUARD = 1e300

DEFAULT_TOLERANCE = 1e-12
DEFAULT_GRID_POINTS = 2048
DEFAULT_T_END = 50.0

RK4_AGREEMENT = 1e-8
QUADRATURE_TOLERANCE = 1e-10
# largest exponent whose exp() is finite in double precision
MAX_EXPONENT = 709.78

DISCRETE_RELATIVE_TOLERANCE = 1e-9
