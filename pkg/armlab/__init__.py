from .lattice import *
from .percolation import *
from .arms import *
from .explore import *
from .coupling import *
from .estimate import *

from .__version__ import __version__
