from .dataset import CovariateMatrix, LongitudinalDataset, MetaboliteMatrix, ModelData, TransformRecord
from .graph import Graph, GWishartParams, PrecisionMatrix
from .kernel import KernelParams
from .manifest import RunManifest
from .partition import ClusterAtoms, DPConfig, Partition, canonical_labels
from .state import ChainState
