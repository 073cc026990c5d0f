"""Radio tomographic imaging of roadside traffic from RSS drops."""
from .errors import RTIError, ValidationError, NumericError, SingularSystemError
from .grid import GridSpec, SensorLayout, Sensor, Link, enumerate_links
from .weights import SelectionModel, MagnitudeModel, build_weight_matrix
from .estimators import SolverConfig, SceneEstimate, solve
from .simulate import NoiseModel, make_scene

__version__ = "0.1.0"
