import sys

from cpsr.cli import main

sys.exit(main())
