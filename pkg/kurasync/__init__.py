#!/usr/bin/env python

__version__ = '0.1'

from . import errors
from . import graph
from . import series
from . import solvers
from . import synctests
from . import random_models
from . import experiments
from . import importo
from . import exporto

from .errors import *
from .graph import *
from .series import *
from .solvers import *
from .synctests import *
from .utils import *


__all__ = ['errors', 'graph', 'series', 'solvers', 'synctests',
           'random_models', 'experiments', 'importo', 'exporto', 'utils']
