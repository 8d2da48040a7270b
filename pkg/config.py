import os
import sys

if getattr(sys, 'frozen', False):
    # Running as executable
    app_dir = os.path.dirname(sys.executable)
else:
    # Running as script
    app_dir = os.path.dirname(os.path.abspath(__file__))

APP_NAME = 'sociokb'
APP_VERSION = '1.0.0'

# Bundled knowledge
DEFAULT_SCHEMA_PATH = os.path.join(app_dir, 'database', 'ontosnaqa.schema')
DEFAULT_RULES_PATH = os.path.join(app_dir, 'rules', 'ontosnaqa.rules')
DEFAULT_QUESTIONNAIRE_PATH = os.path.join(app_dir, 'fixtures', 'class_survey.json')

# Saturation settings
DEFAULT_ITERATION_LIMIT = 10000

# Metric settings
CLOSENESS_MODES = ('classic', 'wf', 'harmonic')
EIGENVECTOR_MODES = ('symmetrized', 'right')
DEFAULT_CLOSENESS = 'wf'
DEFAULT_EIGENVECTOR = 'symmetrized'
EIGENVECTOR_TOLERANCE = 1e-10  # L-infinity change between iterates
EIGENVECTOR_MAX_ITERATIONS = 100000
FLOAT_SIGNIFICANT_DIGITS = 9

# Report / export settings
DEFAULT_TOP_K = 3
EXPORT_FORMATS = ('pajek', 'graphml', 'csv', 'facts')
DEFAULT_FORMATS = ('pajek',)

# Oracle check settings
ORACLE_MIN_NODES = 2
ORACLE_MAX_NODES = 8
ORACLE_MIN_EDGE_PROBABILITY = 0.1
ORACLE_MAX_EDGE_PROBABILITY = 0.9
BETWEENNESS_TOLERANCE = 1e-9
CLOSENESS_TOLERANCE = 1e-12
EIGENVECTOR_COSINE_TOLERANCE = 1e-8
EIGENVECTOR_RESIDUAL_TOLERANCE = 1e-6
ORACLE_ROOT_CLUSTER = 0.05  # eigenvalues this close to the Perron root count as repeated
ORACLE_REPEATED_ROOT_ITERATIONS = 2000

# Logging
LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'
