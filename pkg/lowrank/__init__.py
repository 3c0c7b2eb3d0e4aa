from .__version__ import __version__
from .errors import *
from .decorators import *
from .misc import *
from .table import Table
from .path import *
from .linalg import *
from .operators import *
from .sensing import *
from .completion import *
from .harness import *
