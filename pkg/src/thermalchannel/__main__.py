"""``python -m thermalchannel``."""

import sys

from .cli import main

sys.exit(main())
