import sys

from vvg.cli import main

sys.exit(main())
