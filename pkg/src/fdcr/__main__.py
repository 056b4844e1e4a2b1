import sys

from fdcr.cli import main

sys.exit(main())
