import sys

from qlinsolve.cli import main

sys.exit(main())
