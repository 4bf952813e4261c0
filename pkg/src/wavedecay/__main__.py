"""Allow ``python -m wavedecay``."""

import sys

from .cli import main

sys.exit(main())
