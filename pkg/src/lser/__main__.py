import sys

from lser.cli import main

sys.exit(main())
