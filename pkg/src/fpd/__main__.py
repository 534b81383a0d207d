import sys

from fpd.cli import main

sys.exit(main())
