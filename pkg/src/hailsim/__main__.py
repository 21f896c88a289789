"""Allow ``python -m hailsim``."""

import sys

from .cli import main

sys.exit(main())
