"""
Configuration settings for the Homotopy Warm-Start Engine
"""
import math


class Config:
    """Application configuration"""

    # Application settings
    DEBUG = False
    TESTING = False
    LOG_LEVEL = 'INFO'

    # Run settings (overridable with --out / --seed / --jobs / --task)
    OUTPUT_DIR = 'artifacts'
    SEED = 0
    JOBS = 1
    TASK = 'cartpole'

    # Geometry
    SEGMENT_EPS = 1e-12           # squared-length / parallelism tolerance for segment distance
    DISTANCE_BLOCK_ROWS = 256     # rows per block when filling segment distance matrices
    POSITION_WEIGHT = 1.0
    VELOCITY_WEIGHT = 0.5

    # Persistence
    MIN_FEATURE_LIFETIME = 1e-12

    # Clustering (class-count extraction)
    CUTOFF_RATIO = 0.8
    MIN_LIFETIME = 0.1

    # Dynamics
    GRAVITY = 9.81
    FD_STEP = 1e-6
    CARTPOLE_MASS_CART = 1.0
    CARTPOLE_MASS_POLE = 0.5
    CARTPOLE_POLE_LENGTH = 0.5
    QUADROTOR_MASS = 1.0
    QUADROTOR_ARM = 0.2
    QUADROTOR_INERTIA = (0.01, 0.01, 0.02)
    QUADROTOR_TORQUE_COEFF = 0.016

    # Optimal control costs
    CONTROL_WEIGHT = 1e-2
    TERMINAL_WEIGHT = 1e3
    OBSTACLE_WEIGHT = 1e3
    OBSTACLE_MARGIN = 0.1

    # Solver
    SOLVER_MAX_ITER = 200
    SOLVER_COST_TOL = 1e-6
    SOLVER_GRAD_TOL = 1e-7
    SOLVER_GAP_TOL = 1e-9
    REG_INIT = 1e-9
    REG_MIN = 1e-9
    REG_MAX = 1e10
    REG_INCREASE = 10.0
    REG_DECREASE = 2.0
    LINE_SEARCH_STEPS = 11        # alpha in {1, 1/2, ..., 2^-10}
    SOLVER_ACCEPT_RATIO = 0.0     # share of the predicted decrease a feasible step must exceed
    BOXQP_MAX_ITER = 100
    BOXQP_MIN_GRAD = 1e-12
    BOXQP_MIN_REL_IMPROVE = 1e-12
    BOXQP_STEP_DEC = 0.6
    BOXQP_MIN_STEP = 1e-22
    BOXQP_ARMIJO = 0.1

    # Learning
    LEARNING_RATE = 1e-3
    BATCH_SIZE = 64
    MAX_EPOCHS = 3000
    PATIENCE = 200
    EXPERT_HIDDEN = 50
    GATING_HIDDEN = 50
    SINGLE_MLP_HIDDEN = None      # None: match the MoE parameter count
    KNN_MAX_K = 10
    VALIDATION_FRACTION = 0.15
    TEST_FRACTION = 0.15

    # Data generation
    SOLUTIONS_PER_START = 10
    MAX_RETRIES = 20
    HOVER_NOISE_STD = 0.1         # std of the noise added to hover thrust seeds
    RRT_STEP = 0.25
    RRT_MAX_NODES = 5000
    RRT_CLEARANCE = 0.15
    RRT_WORKSPACE = ((-4.0, -4.0, -4.0), (3.0, 3.0, 3.0))
    COLLISION_RESOLUTION = 0.02

    # Dataset size (start states for cartpole, instances for quadrotor)
    SAMPLE_COUNT = 100

    # Benchmark
    BENCHMARK_INSTANCES = 100
    SCALING_N = (5, 10, 20, 40, 80)
    SCALING_T = (5, 10)

    # Per-task settings
    TASKS = {
        'toy': {
            'model': None,
            'duration': 1.0,
            'knots': 41,
            'speed': 4.0,
            'amplitude': 0.5,
            'mode': 'full_state',
            'weights': [1.0, 1.0, 0.16, 0.16],
            'connect_endpoints': True,
            'filtration_knots': None,
        },
        'cartpole': {
            'model': 'cartpole',
            'horizon': 100,
            'dt': 0.02,
            'control_bounds': [[-10.0], [10.0]],
            'start_range': [1.0, math.pi, 1.0, 0.5 * math.pi],
            'seed_control_range': 1.0,
            'goal': [0.0, math.pi, 0.0, 0.0],
            'running_state_weights': [0.0, 0.0, 0.0, 0.0, 0.0],
            'terminal_weights': [1e3, 1e3, 1e3, 1e3, 1e3],
            'obstacles': [],
            'mode': 'full_state',
            'weights': [1.0, 1.0, 1.0, 0.5, 0.5],
            'connect_endpoints': True,
            'filtration_knots': 10,
            'min_filtration_knots': 5,
            'success_cost': 100.0,
        },
        'quadrotor': {
            'model': 'quadrotor',
            'horizon': 50,
            'dt': 0.05,
            'control_bounds': [[0.0, 0.0, 0.0, 0.0], [5.0, 5.0, 5.0, 5.0]],
            'start_low': [-3.25, -3.25, -3.25],
            'start_high': [-0.25, -0.25, -0.25],
            'goal': [1.75, 1.75, 1.75],
            'running_state_weights': [0.0] * 12,
            'terminal_weights': [1e3] * 12,
            'obstacles': [
                {'axis': 'x', 'center': [0.0, 0.0], 'radius': 0.5},
                {'axis': 'y', 'center': [0.0, 0.0], 'radius': 0.5},
                {'axis': 'z', 'center': [0.0, 0.0], 'radius': 0.5},
            ],
            'mode': 'position_only',
            'weights': [1.0, 1.0, 1.0],
            'connect_endpoints': True,
            'filtration_knots': 10,
            'min_filtration_knots': 5,
            'success_cost': 25.0,
        },
        'quadrotor_single': {
            'model': 'quadrotor',
            'horizon': 50,
            'dt': 0.05,
            'control_bounds': [[0.0, 0.0, 0.0, 0.0], [5.0, 5.0, 5.0, 5.0]],
            'start_low': [-3.25, -3.25, -3.25],
            'start_high': [-0.25, -0.25, -0.25],
            'goal': [1.75, 1.75, 1.75],
            'running_state_weights': [0.0] * 12,
            'terminal_weights': [1e3] * 12,
            'obstacles': [
                {'axis': 'z', 'center': [0.0, 0.0], 'radius': 0.75},
            ],
            'mode': 'position_only',
            'weights': [1.0, 1.0, 1.0],
            'connect_endpoints': True,
            'filtration_knots': 10,
            'min_filtration_knots': 5,
            'success_cost': 25.0,
        },
    }


class TestingConfig(Config):
    """Smaller sizes for the test suite"""

    TESTING = True
    LOG_LEVEL = 'WARNING'
    MAX_EPOCHS = 200
    PATIENCE = 50
    SAMPLE_COUNT = 2
    SOLUTIONS_PER_START = 2
    MAX_RETRIES = 3
    BENCHMARK_INSTANCES = 4
    SCALING_N = (2, 4)
    SCALING_T = (5,)
