"""Allow `python -m facecraft`."""

import sys

from .cli import main

sys.exit(main())
