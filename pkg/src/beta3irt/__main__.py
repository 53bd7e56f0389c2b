import sys

from beta3irt.cli import main

sys.exit(main())
