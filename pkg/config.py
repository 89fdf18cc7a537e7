#training defaults
K_MAX = 3
CRITERION = "bic"
LOSS = "nll"
ZETA_OFFSETS = (1.0, 5.0, 10.0)
INCLUDE_ZERO_START = True
INCLUDE_MIDPOINTS = True
INTERCEPT = False
FIRST_WINDOW_START = 1.0
DELTA_MERGE_TOLERANCE = 1e-6
#largest lag a window may reach, as a share of the training series length
MAX_LAG_FRACTION = 0.1
CONCURRENT_CANDIDATES = True

#likelihood
VARIANCE_FLOOR = 1e-12

#optimizer
FTOL_ABS = 1e-8
XTOL_ABS = 1e-7
MAX_EVALS_PER_DIM = 5000
INITIAL_STEP = 0.5
INITIAL_STEP_RELATIVE = 0.25

#autocorrelation
DW_ALPHA = 0.01
DW_TARGET = 0.1
DW_BOOTSTRAP = 1000
DW_CHUNK_SIZE = 100
MAX_AR_ORDER = 3
AR_ROOT_MARGIN = 0.01

#uncertainty
HESSIAN_MIN_STEP = 1e-5
HESSIAN_RELATIVE_STEP = 1e-5

#simulation
SIM_DELTA_RANGE = (0.0, 20.0)
SIM_SIGMA_RANGE = (0.0, 5.0)
SIM_BETA_RANGE = (0.0, 5.0)
SIM_MIN_DELTA_GAP = 0.5
SIM_SPIKE_RATE = 0.3
SIM_SPIKE_SCALE = 1.0
SIM_INPUT_SEED = 2024
SIM_LENGTH = 3000
SIM_ALPHAS = (0.05, 0.25, 0.5, 0.75, 0.95)
SPLIT = 0.75
STUDY_WORKERS = 4

#logging
LOG_LEVEL = "INFO"
LOG_FILE = None
