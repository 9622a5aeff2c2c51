from nccz.core.dyadic import DyadicCube as DyadicCube
from nccz.core.dyadic import DyadicGrid as DyadicGrid
from nccz.core.dyadic import OperatorField as OperatorField
from nccz.core.operator import HermitianElement as HermitianElement
from nccz.core.operator import ProjectionElement as ProjectionElement
from nccz.core.operator import SpectralInterval as SpectralInterval
