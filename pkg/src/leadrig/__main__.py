import sys

from leadrig.cli import main

sys.exit(main())
