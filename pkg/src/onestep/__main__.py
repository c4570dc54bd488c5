"""Allow ``python -m onestep``."""

import sys

from .cli import main

sys.exit(main())
