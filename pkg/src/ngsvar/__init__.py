"""Large structural VARs identified by non-Gaussian (Student-t mixture)
factors, estimated by Gibbs sampling."""
from .errors import NgsvarError
from .gibbs import PosteriorSample, run_chain
from .model import Dataset, Design, ModelSpec, SamplerSettings, read_csv
from .priors import PriorConfig
from .restrictions import ProxySpec, RestrictionSet

__version__ = "0.1.0"

__all__ = [
    "NgsvarError", "PosteriorSample", "run_chain", "Dataset", "Design", "ModelSpec",
    "SamplerSettings", "read_csv", "PriorConfig", "ProxySpec", "RestrictionSet",
]
