import sys

from swimtrack.cli import main

sys.exit(main())
