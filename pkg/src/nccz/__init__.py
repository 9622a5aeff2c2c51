__version__ = "0.1.0"

from nccz.config import ExperimentConfig as ExperimentConfig
from nccz.core.dyadic import DyadicGrid as DyadicGrid
from nccz.core.dyadic import OperatorField as OperatorField
from nccz.decomposition import decompose as decompose
from nccz.decomposition import validate as validate
from nccz.kernels import resolve_kernel as resolve_kernel
from nccz.operators import SingularIntegralOperator as SingularIntegralOperator
