# Input files (long-format longitudinal responses, wide metabolites and covariates)
LONGITUDINAL_FILE = "longitudinal.csv"
METABOLITE_FILE = "metabolites.csv"
COVARIATE_FILE = "covariates.csv"
SUBJECT_ID = "subject_id"

TRANSFORMS_FILE = "transforms.json"
TRUTH_FILE = "truth.json"
MANIFEST_FILE = "manifest.json"
SUMMARY_MANIFEST_FILE = "summary_manifest.json"
SNAPSHOT_FILE = "snapshot.pkl"
ACCEPTANCE_FILE = "acceptance.json"

# SampleStore layout
PARTITION_TABLE = "partitions.csv"
BETA_Y_TABLE = "beta_Y.csv"
BETA_M_TABLE = "beta_M.csv"
SCALAR_TABLE = "scalars.csv"
GRAPH_RECORDS = "graphs.jsonl"
THETA_RECORDS = "theta_star.jsonl"
LAYOUT_FILE = "layout.json"
PREPROCESSED_METABOLITES = "metabolites_model.csv"
STORE_FILES = [
    PARTITION_TABLE,
    BETA_Y_TABLE,
    BETA_M_TABLE,
    SCALAR_TABLE,
    GRAPH_RECORDS,
    THETA_RECORDS,
    LAYOUT_FILE,
]

# Summary outputs
COCLUSTERING_TABLE = "coclustering.csv"
BINDER_TABLE = "binder_partition.csv"
N_CLUSTERS_TABLE = "n_clusters.csv"
BETA_INTERVALS_TABLE = "beta_intervals.csv"
TRAJECTORIES_TABLE = "trajectories.csv"
METABOLITE_MEANS_TABLE = "metabolite_means.csv"
EDGE_PROBS_TABLE = "edge_probs_cluster{k}.csv"
MEDIAN_GRAPH_RECORD = "median_graph_cluster{k}.json"
PRECISION_MEAN_TABLE = "precision_mean_cluster{k}.csv"
DIFFNET_RECORD = "diffnet_{k1}_{k2}.json"

# Named RNG sub-streams
STREAM_CHAIN = 0
STREAM_CLUSTER = 1
STREAM_SIMULATION = 2
STREAM_NORM_CONST = 3
STREAM_INIT = 4

# Analysis defaults
DEFAULT_ALPHA = 0.18
DEFAULT_PSI_SCALE = 10.0
DEFAULT_M_AUX = 2
DEFAULT_BD_N_MC = 500
BOX_COX_GRID = tuple(round(-2.0 + 0.1 * k, 1) for k in range(41))
ADAPT_SCALE = 2.38 ** 2
ADAPT_RIDGE = 1e-6
JITTER_LEVELS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
PATTERN_TOL = 1e-10
GWISHART_MAX_ITER = 10_000
MEDIAN_GRAPH_THRESHOLD = 0.5
DIFFNET_THRESHOLD = 0.9

# CLI exit codes
EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_NUMERICAL = 2
