import sys

from agctactile.cli import main

sys.exit(main())
