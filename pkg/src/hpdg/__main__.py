import sys

from hpdg.cli import main

sys.exit(main())
